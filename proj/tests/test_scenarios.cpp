#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "preftune/errors.hpp"
#include "preftune/scenarios.hpp"

using namespace preftune;

namespace {

const ParamVector kCstrTheta{0.31, 26.0, -1.79};
const ParamVector kDrivingTheta{0.085, 0.310, 16.0, 0.261, 0.918};

// Term-by-term evaluation of the CSTR index, written without the library.
double cstr_score_ref(const ExperimentOutcome& o) {
  const double t_f = o.status == OutcomeStatus::InterruptedUnsafe ? 48.0 : o.metrics.at("t_f");
  double prev = o.metrics.at("Tc_initial");
  double sum = 0.0;
  for (const auto& u : o.trajectory.inputs) {
    sum += (u[0] - prev) * (u[0] - prev);
    prev = u[0];
  }
  const double n = static_cast<double>(o.trajectory.inputs.size());
  return t_f / 48.0 + sum / (10.0 * n) + std::abs(o.metrics.at("CA_end") - 2.0) / (0.03 * 2.0);
}

ExperimentOutcome synthetic_cstr(double t_f, double ca_end, std::vector<double> tc, double tc0) {
  ExperimentOutcome o;
  o.trajectory.state_names = {"T", "CA"};
  o.trajectory.input_names = {"Tc"};
  for (std::size_t k = 0; k < tc.size(); ++k) {
    o.trajectory.append(static_cast<double>(k), {300.0, 5.0}, {tc[k]}, {}, 0.0);
  }
  o.metrics = {{"t_f", t_f}, {"CA_end", ca_end}, {"Tc_initial", tc0}};
  return o;
}

ExperimentOutcome synthetic_drive(std::size_t n, double lat_err, double v_err, double steer_step) {
  ExperimentOutcome o;
  for (std::size_t k = 0; k < n; ++k) {
    const double delta = steer_step * static_cast<double>(k);
    o.trajectory.append(0.1 * static_cast<double>(k), {0.0, lat_err, 0.0}, {50.0 / 3.6 + v_err, delta}, {}, 0.0);
    o.series["y_ref"].push_back(0.0);
    o.series["v_ref"].push_back(50.0 / 3.6);
  }
  o.metrics = {{"Ts", 0.1},
               {"collision_flag", 0.0},
               {"worst_solve_time", 0.01},
               {"min_lateral_clearance", std::numeric_limits<double>::infinity()}};
  return o;
}

void expect_input_bounds(const ExperimentOutcome& o, const CstrScenario& sc) {
  double prev = o.metric("Tc_initial");
  for (const auto& u : o.trajectory.inputs) {
    EXPECT_GE(u[0], sc.Tc_min);
    EXPECT_LE(u[0], sc.Tc_max);
    EXPECT_LE(std::abs(u[0] - prev), sc.dTc_max);
    prev = u[0];
  }
}

}  // namespace

TEST(CstrScenario, ReferenceTuningMeetsTargets) {
  const ExperimentOutcome o = run_cstr_experiment(kCstrTheta);
  EXPECT_TRUE(o.status == OutcomeStatus::Completed || o.status == OutcomeStatus::TimeCapped) << o.message;
  EXPECT_LE(std::abs(o.metric("CA_end") - 2.0), 0.03 * 2.0);
  EXPECT_LE(o.metric("t_f"), 48.0);
  EXPECT_EQ(o.applied, (ParamVector{0.31, 26.0, -1.79}));
  EXPECT_NO_THROW(o.trajectory.validate());
  expect_input_bounds(o, {});
}

TEST(CstrScenario, HeavyRatePenaltyHitsTheTimeCap) {
  int capped = 0;
  const std::vector<ParamVector> thetas{{0.31, 26.0, 3.0}, {0.5, 10.0, 3.0}, {1.0, 20.0, 3.0}, {0.25, 40.0, 3.0}};
  for (const auto& th : thetas) {
    const ExperimentOutcome o = run_cstr_experiment(th);
    if (o.status == OutcomeStatus::TimeCapped) {
      ++capped;
      EXPECT_GE(o.metric("t_f"), 48.0 - th[0]);
    }
  }
  EXPECT_GT(capped, static_cast<int>(thetas.size()) / 2);
}

TEST(CstrScenario, InputBoundsHoldAcrossTheSpace) {
  const CstrScenario sc;
  for (const auto& th : latin_hypercube(12, sc.space(), 3)) {
    const ExperimentOutcome o = run_cstr_experiment(th, sc);
    ASSERT_NE(o.status, OutcomeStatus::MpcFailure) << o.message;
    expect_input_bounds(o, sc);
    EXPECT_EQ(o.metric("num_steps"), static_cast<double>(o.trajectory.size()));
  }
}

TEST(CstrScenario, RejectsOutOfSpaceTheta) {
  EXPECT_THROW(run_cstr_experiment({2.0, 26.0, 0.0}), BoundsError);
  EXPECT_THROW(run_cstr_experiment({0.5, 26.0}), ArgumentError);
}

TEST(CstrPerfIndex, Examples) {
  EXPECT_NEAR(cstr_perf_index(synthetic_cstr(24.0, 2.0, {300, 300, 300}, 300)), 0.5, 1e-12);
  EXPECT_NEAR(cstr_perf_index(synthetic_cstr(0.0, 2.06, {300, 300}, 300)), 1.0, 1e-12);
  // Two steps of 10 K then back: (100 + 100) / (10 * 2) = 10.
  EXPECT_NEAR(cstr_perf_index(synthetic_cstr(0.0, 2.0, {310, 300}, 300)), 10.0, 1e-12);
  ExperimentOutcome unsafe = synthetic_cstr(3.0, 2.0, {300}, 300);
  unsafe.status = OutcomeStatus::InterruptedUnsafe;
  EXPECT_NEAR(cstr_perf_index(unsafe), 1.0, 1e-12);
  ExperimentOutcome missing = synthetic_cstr(3.0, 2.0, {300}, 300);
  missing.metrics.erase("CA_end");
  EXPECT_THROW(cstr_perf_index(missing), ArgumentError);
}

TEST(CstrPerfIndex, MatchesIndependentScorer) {
  for (const ParamVector& th : {kCstrTheta, ParamVector{1.2, 6.0, 2.0}, ParamVector{0.25, 40.0, -5.0}}) {
    const ExperimentOutcome o = run_cstr_experiment(th);
    EXPECT_NEAR(cstr_perf_index(o), cstr_score_ref(o), 1e-10);
  }
}

TEST(CstrPerfIndex, MonotoneInEachTerm) {
  const double base = cstr_perf_index(synthetic_cstr(10.0, 2.01, {300, 302}, 300));
  EXPECT_GT(cstr_perf_index(synthetic_cstr(11.0, 2.01, {300, 302}, 300)), base);
  EXPECT_GT(cstr_perf_index(synthetic_cstr(10.0, 2.02, {300, 302}, 300)), base);
  EXPECT_GT(cstr_perf_index(synthetic_cstr(10.0, 2.01, {300, 304}, 300)), base);
}

TEST(ObstacleGap, Examples) {
  const ObstacleGap ahead = obstacle_gap({0, 0, 0}, {30, 0, 0});
  EXPECT_NEAR(ahead.longitudinal, 25.5, 1e-12);
  EXPECT_EQ(ahead.lateral, 0.0);
  EXPECT_FALSE(ahead.overlap);
  const ObstacleGap beside = obstacle_gap({10, 3, 0}, {10, 0, 0});
  EXPECT_NEAR(beside.lateral, 1.2, 1e-12);
  EXPECT_EQ(beside.longitudinal, 0.0);
  EXPECT_FALSE(beside.overlap);
  EXPECT_TRUE(obstacle_gap({5, 1, 0}, {5, 1, 0}).overlap);
  EXPECT_TRUE(obstacle_gap({5, 1, 0.3}, {6, 1.5, 0}).overlap);
}

TEST(LateralProfile, Trapezoid) {
  const LateralProfile p{2.0, 1.0, 3.0, 6.0};
  EXPECT_EQ(p.value(1.0), 0.0);
  EXPECT_NEAR(p.value(2.5), 1.5, 1e-12);
  EXPECT_NEAR(p.value(4.0), 3.0, 1e-12);
  EXPECT_NEAR(p.value(6.5), 1.5, 1e-12);
  EXPECT_EQ(p.value(8.0), 0.0);
  EXPECT_FALSE(p.finished(6.9));
  EXPECT_TRUE(p.finished(7.0));
}

TEST(DrivingScenario, ReferenceTuningRun) {
  const DrivingScenario sc;
  const ExperimentOutcome o = run_driving_experiment(kDrivingTheta, sc);
  ASSERT_EQ(o.status, OutcomeStatus::Completed) << o.message;
  EXPECT_GE(o.metric("t_f"), 15.0);
  EXPECT_EQ(o.metric("collision_flag"), 0.0);
  EXPECT_LT(o.metric("worst_solve_time"), 0.085);
  const auto& phase = o.series.at("phase");
  const auto& gap = o.series.at("long_gap");
  ASSERT_EQ(phase.size(), o.trajectory.size());
  bool passed = false;
  for (std::size_t k = 0; k < phase.size(); ++k) {
    EXPECT_EQ(phase[k] == 1.0, gap[k] <= sc.safety_distance) << "step " << k;
    passed = passed || phase[k] == 1.0;
  }
  EXPECT_TRUE(passed);
  // The ego overtakes within the run.
  EXPECT_GT(o.trajectory.states.back()[0], o.series.at("obstacle_x").back());
  EXPECT_LT(driving_oracle_score(o, sc), 1e6);
}

TEST(DrivingScenario, VelocityStaysWithinPhaseBounds) {
  const DrivingScenario sc;
  for (const ParamVector& th : {kDrivingTheta, ParamVector{0.2, 0.5, 20.0, -2.0, 1.0}, ParamVector{0.4, 1.0, 10.0, 2.0, -3.0}}) {
    const ExperimentOutcome o = run_driving_experiment(th, sc);
    const auto& phase = o.series.at("phase");
    const double rate = sc.yaw_rate * o.metric("Ts");
    double prev_delta = 0.0;
    for (std::size_t k = 0; k < o.trajectory.size(); ++k) {
      const double v = o.trajectory.inputs[k][0];
      const double delta = o.trajectory.inputs[k][1];
      const bool oa = phase[k] == 1.0;
      EXPECT_GE(v, oa ? sc.v_min_oa : sc.v_min_lk);
      EXPECT_LE(v, oa ? sc.v_max_oa : sc.v_max_lk);
      EXPECT_LE(std::abs(delta), sc.steer_bound);
      EXPECT_LE(std::abs(delta - prev_delta), rate);
      prev_delta = delta;
    }
  }
}

TEST(DrivingScenario, LaneKeepingWithoutObstacle) {
  DrivingScenario sc;
  sc.obstacle_start.x = 1e6;
  const ExperimentOutcome o = run_driving_experiment(kDrivingTheta, sc);
  ASSERT_EQ(o.status, OutcomeStatus::Completed) << o.message;
  for (const auto& s : o.trajectory.states) EXPECT_LE(std::abs(s[1]), 0.1);
  for (double p : o.series.at("phase")) EXPECT_EQ(p, 0.0);
}

TEST(DrivingOracle, Examples) {
  const DrivingScenario sc;
  ExperimentOutcome crash = synthetic_drive(10, 0.0, 0.0, 0.0);
  crash.metrics["collision_flag"] = 1.0;
  EXPECT_EQ(driving_oracle_score(crash, sc), 1e6);
  ExperimentOutcome slow = synthetic_drive(10, 0.0, 0.0, 0.0);
  slow.metrics["worst_solve_time"] = 0.1;
  EXPECT_EQ(driving_oracle_score(slow, sc), 1e6);
  EXPECT_EQ(driving_oracle_score(synthetic_drive(10, 0.0, 0.0, 0.0), sc), 0.0);
  // Lateral error 0.3 m -> 0.1; speed error 1 km/hr -> 0.1.
  EXPECT_NEAR(driving_oracle_score(synthetic_drive(10, 0.3, 1.0 / 3.6, 0.0), sc), 0.2, 1e-12);
  const double base = driving_oracle_score(synthetic_drive(10, 0.2, 0.5, 0.001), sc);
  EXPECT_GT(driving_oracle_score(synthetic_drive(10, 0.3, 0.5, 0.001), sc), base);
  EXPECT_GT(driving_oracle_score(synthetic_drive(10, 0.2, 0.6, 0.001), sc), base);
  EXPECT_GT(driving_oracle_score(synthetic_drive(10, 0.2, 0.5, 0.002), sc), base);
  ExperimentOutcome close = synthetic_drive(10, 0.0, 0.0, 0.0);
  close.metrics["min_lateral_clearance"] = 2.5;
  EXPECT_NEAR(driving_oracle_score(close, sc), 0.5, 1e-12);
  ExperimentOutcome broken = synthetic_drive(10, 0.0, 0.0, 0.0);
  broken.series.erase("v_ref");
  EXPECT_THROW(driving_oracle_score(broken, sc), ArgumentError);
}

TEST(Scenarios, DeterministicApartFromTiming) {
  for (const auto& [a, b] : {std::pair{run_cstr_experiment(kCstrTheta), run_cstr_experiment(kCstrTheta)},
                             std::pair{run_driving_experiment(kDrivingTheta), run_driving_experiment(kDrivingTheta)}}) {
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.trajectory.times, b.trajectory.times);
    EXPECT_EQ(a.trajectory.states, b.trajectory.states);
    EXPECT_EQ(a.trajectory.inputs, b.trajectory.inputs);
    EXPECT_EQ(a.trajectory.outputs, b.trajectory.outputs);
    EXPECT_EQ(a.series, b.series);
    for (const auto& [k, v] : a.metrics) {
      if (k != "worst_solve_time") EXPECT_EQ(v, b.metrics.at(k)) << k;
    }
  }
}

TEST(Scenarios, TrajectoryCsv) {
  const ExperimentOutcome o = run_cstr_experiment(kCstrTheta);
  const std::string csv = trajectory_csv(o.trajectory);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "time,T,CA,Tc,y_T,y_CA,solve_time");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), o.trajectory.size() + 1);
  const ExperimentOutcome d = run_driving_experiment(kDrivingTheta);
  const std::string dcsv = trajectory_csv(d.trajectory);
  EXPECT_EQ(dcsv.substr(0, dcsv.find('\n')), "time,x_f,y_f,yaw,v,delta_s,y_x_f,y_y_f,y_yaw,solve_time");
}

TEST(Scenarios, Registry) {
  EXPECT_EQ(make_scenario("cstr").space.dim(), 3u);
  EXPECT_EQ(make_scenario("driving").space.dim(), 5u);
  const ScenarioBinding b = make_scenario("bench:sphere:3");
  EXPECT_EQ(b.space.dim(), 3u);
  const ExperimentOutcome o = b.runner({0.0, 0.0, 0.0});
  EXPECT_NEAR(b.oracle(o), 0.0, 1e-12);
  EXPECT_THROW(make_scenario("nope"), ArgumentError);
  EXPECT_THROW(make_scenario("bench:sphere:0"), ArgumentError);
  EXPECT_THROW(make_scenario("bench:missing"), ArgumentError);
}
