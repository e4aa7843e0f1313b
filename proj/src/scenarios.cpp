#include "preftune/scenarios.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "preftune/benchmarks.hpp"
#include "preftune/errors.hpp"
#include "preftune/mpc.hpp"

namespace preftune {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParamVector checked_theta(const ParamVector& theta, const ParamSpace& space) {
  if (theta.size() != space.dim()) throw ArgumentError("theta has the wrong dimension for this scenario");
  if (!space.contains(theta, 1e-9)) throw BoundsError("theta outside the scenario parameter box");
  return materialize(theta, space);
}

int substeps(double Ts, double h_max) { return std::max(1, static_cast<int>(std::ceil(Ts / h_max - 1e-9))); }

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

// ---------------------------------------------------------------- CSTR

ParamSpace CstrScenario::space() const {
  return ParamSpace({{"Ts", 0.25, 1.5, false, std::nullopt},
                     {"Np", 4.0, 40.0, true, std::nullopt},
                     {"log_Qdu", -5.0, 3.0, false, std::string("log10")}});
}

ExperimentOutcome run_cstr_experiment(const ParamVector& theta, const CstrScenario& sc) {
  sc.plant.validate();
  ExperimentOutcome out;
  out.theta = theta;
  out.applied = checked_theta(theta, sc.space());
  const double Ts = out.applied[0];
  const int Np = static_cast<int>(out.applied[1]);
  const int Nu = std::max(1, static_cast<int>(std::lround(Np / 3.0)));

  const CstrInputs disturbances{sc.plant.Tc0, sc.Tf, sc.CAf};
  const CstrEquilibrium eq = cstr_equilibrium(sc.CA_start, disturbances, sc.plant);

  MpcConfig cfg;
  cfg.Ts = Ts;
  cfg.Np = Np;
  cfg.Nu = Nu;
  cfg.Qy = Mat::Zero(2, 2);
  cfg.Qy(1, 1) = 1.0;
  cfg.Qu = Mat::Zero(1, 1);
  cfg.Qdu = Mat::Constant(1, 1, std::pow(10.0, out.applied[2]));
  cfg.y_min = Vec::Constant(2, -kInf);
  cfg.y_max = Vec::Constant(2, kInf);
  cfg.u_min = Vec::Constant(1, sc.Tc_min);
  cfg.u_max = Vec::Constant(1, sc.Tc_max);
  cfg.du_min = Vec::Constant(1, -sc.dTc_max);
  cfg.du_max = Vec::Constant(1, sc.dTc_max);
  cfg.qp_tol = sc.qp_tol;
  MpcController ctrl(cfg, Vec::Constant(1, eq.Tc));

  const VectorField f = cstr_field(sc.plant, sc.Tf, sc.CAf);
  const OutputMap g = [](const Vec& x, const Vec&) { return x; };

  Trajectory& traj = out.trajectory;
  traj.state_names = {"T", "CA"};
  traj.input_names = {"Tc"};
  traj.output_names = {"y_T", "y_CA"};

  Vec x(2);
  x << eq.T, sc.CA_start;
  const int n_sub = substeps(Ts, sc.substep);
  const double h = Ts / n_sub;
  double worst = 0.0;
  bool clamped = false;
  bool armed = false;
  int streak = 0;
  double streak_start = 0.0;
  double t_f = sc.t_max;
  double prev_CA = x(1);

  auto unsafe = [&](const Vec& s) { return !(s(0) >= sc.T_safe_min && s(0) <= sc.T_safe_max); };

  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * Ts;
    if (unsafe(x)) {
      out.status = OutcomeStatus::InterruptedUnsafe;
      out.message = "reactor temperature left the safe range";
      t_f = sc.t_max;
      break;
    }
    // The detector arms once CA has covered half of the setpoint step, so the
    // untouched initial equilibrium never counts as the new steady state.
    if (!armed && std::abs(x(1) - sc.CA_start) >= 0.5 * std::abs(sc.CA_ref - sc.CA_start)) armed = true;
    if (k > 0 && armed) {
      const double rate = cstr_derivatives({x(0), x(1)}, {ctrl.u_prev()(0), sc.Tf, sc.CAf}, sc.plant).dCA_dt;
      if (std::abs(rate) < sc.steady_rate_tol && std::abs(x(1) - prev_CA) < sc.steady_step_tol) {
        if (streak++ == 0) streak_start = t;
      } else {
        streak = 0;
      }
      if (streak >= sc.steady_steps) {
        out.status = OutcomeStatus::Completed;
        t_f = streak_start;
        break;
      }
    }
    if (t >= sc.t_max - 1e-9) {
      out.status = OutcomeStatus::TimeCapped;
      t_f = sc.t_max;
      break;
    }

    Vec u;
    try {
      const LinearModel model = make_linear_model(f, g, x, ctrl.u_prev(), Ts);
      MpcReferences refs;
      Vec r(2);
      r << x(0), sc.CA_ref;
      refs.y_ref = {r};
      u = ctrl.step(model, x, refs);
    } catch (const std::runtime_error& e) {
      out.status = OutcomeStatus::MpcFailure;
      out.message = e.what();
      t_f = sc.t_max;
      break;
    }
    const double solve = ctrl.last_stats().solve_time;
    worst = std::max(worst, solve);
    traj.append(t, to_std(x), to_std(u), to_std(x), solve);

    prev_CA = x(1);
    bool left_safe_range = false;
    try {
      for (int s = 0; s < n_sub; ++s) {
        x = rk4_step(f, x, u, h);
        if (x(1) < 0.0) {
          if (x(1) < -1e-9) clamped = true;
          x(1) = 0.0;
        }
        if (unsafe(x)) {
          left_safe_range = true;
          break;
        }
      }
    } catch (const std::runtime_error&) {
      left_safe_range = true;
    }
    if (left_safe_range) {
      out.status = OutcomeStatus::InterruptedUnsafe;
      out.message = "reactor temperature left the safe range";
      t_f = sc.t_max;
      break;
    }
  }

  out.metrics["t_f"] = t_f;
  out.metrics["CA_end"] = x(1);
  out.metrics["worst_solve_time"] = worst;
  out.metrics["Tc_initial"] = eq.Tc;
  out.metrics["num_steps"] = static_cast<double>(traj.size());
  out.metrics["ca_clamped"] = clamped ? 1.0 : 0.0;
  return out;
}

double cstr_perf_index(const ExperimentOutcome& o, const CstrScenario& sc) {
  const double t_f = o.status == OutcomeStatus::InterruptedUnsafe ? sc.t_max : o.metric("t_f");
  const double ca_end = o.metric("CA_end");
  double prev = o.metric("Tc_initial");
  double rough = 0.0;
  const std::size_t n = o.trajectory.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double tc = o.trajectory.inputs[k].at(0);
    rough += (tc - prev) * (tc - prev);
    prev = tc;
  }
  const double rough_term = n > 0 ? rough / (sc.dTc_max * static_cast<double>(n)) : 0.0;
  return t_f / sc.t_max + rough_term + std::abs(ca_end - sc.CA_ref) / (sc.accuracy * sc.CA_ref);
}

// ---------------------------------------------------------------- driving

ParamSpace DrivingScenario::space() const {
  return ParamSpace({{"Ts", 0.085, 0.5, false, std::nullopt},
                     {"eps_c", 0.1, 1.0, false, std::nullopt},
                     {"Np", 10.0, 30.0, true, std::nullopt},
                     {"log_qu11", -5.0, 3.0, false, std::string("log10")},
                     {"log_qu22", -5.0, 3.0, false, std::string("log10")}});
}

namespace {

using Corners = std::array<std::array<double, 2>, 4>;

Corners footprint(double x, double y, double yaw, double length, double width) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double hw = 0.5 * width;
  // Front-left, front-right, rear-right, rear-left.
  const std::array<std::array<double, 2>, 4> local{{{0.0, hw}, {0.0, -hw}, {-length, -hw}, {-length, hw}}};
  Corners out{};
  for (int i = 0; i < 4; ++i) {
    out[i] = {x + c * local[i][0] - s * local[i][1], y + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

double interval_gap(double a_lo, double a_hi, double b_lo, double b_hi) {
  return std::max(0.0, std::max(b_lo - a_hi, a_lo - b_hi));
}

void extent(const Corners& c, int axis, double& lo, double& hi) {
  lo = kInf;
  hi = -kInf;
  for (const auto& p : c) {
    lo = std::min(lo, p[axis]);
    hi = std::max(hi, p[axis]);
  }
}

bool separated_along(const Corners& a, const Corners& b, double ax, double ay) {
  double a_lo = kInf, a_hi = -kInf, b_lo = kInf, b_hi = -kInf;
  for (const auto& p : a) {
    const double v = p[0] * ax + p[1] * ay;
    a_lo = std::min(a_lo, v);
    a_hi = std::max(a_hi, v);
  }
  for (const auto& p : b) {
    const double v = p[0] * ax + p[1] * ay;
    b_lo = std::min(b_lo, v);
    b_hi = std::max(b_hi, v);
  }
  return a_hi < b_lo || b_hi < a_lo;
}

}  // namespace

ObstacleGap obstacle_gap(const BicycleState& ego, const Pose& obstacle, double length, double width) {
  const Corners a = footprint(ego.x_f, ego.y_f, ego.yaw, length, width);
  const Corners b = footprint(obstacle.x, obstacle.y, obstacle.yaw, length, width);
  ObstacleGap g;
  double a_lo, a_hi, b_lo, b_hi;
  extent(a, 0, a_lo, a_hi);
  extent(b, 0, b_lo, b_hi);
  g.longitudinal = interval_gap(a_lo, a_hi, b_lo, b_hi);
  extent(a, 1, a_lo, a_hi);
  extent(b, 1, b_lo, b_hi);
  g.lateral = interval_gap(a_lo, a_hi, b_lo, b_hi);
  g.overlap = true;
  for (double yaw : {ego.yaw, obstacle.yaw}) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    if (separated_along(a, b, c, s) || separated_along(a, b, -s, c)) {
      g.overlap = false;
      break;
    }
  }
  return g;
}

double LateralProfile::value(double t) const {
  const double up = (t - t_start) / ramp;
  const double down = 1.0 - (t - t_down) / ramp;
  return plateau * std::clamp(std::min(up, down), 0.0, 1.0);
}

ExperimentOutcome run_driving_experiment(const ParamVector& theta, const DrivingScenario& sc) {
  if (!(sc.vehicle.L > 0.0)) throw ArgumentError("vehicle length must be > 0");
  ExperimentOutcome out;
  out.theta = theta;
  out.applied = checked_theta(theta, sc.space());
  const double Ts = out.applied[0];
  const double eps_c = out.applied[1];
  const int Np = static_cast<int>(out.applied[2]);
  const int Nu = std::clamp(static_cast<int>(std::lround(eps_c * Np)), 1, Np);

  MpcConfig cfg;
  cfg.Ts = Ts;
  cfg.Np = Np;
  cfg.Nu = Nu;
  cfg.Qy = Mat::Zero(3, 3);
  cfg.Qy(0, 0) = 1.0;
  cfg.Qy(1, 1) = 1.0;
  cfg.Qu = Mat::Zero(2, 2);
  cfg.Qdu = Mat::Zero(2, 2);
  cfg.Qdu(0, 0) = std::pow(10.0, out.applied[3]);
  cfg.Qdu(1, 1) = std::pow(10.0, out.applied[4]);
  cfg.y_min = Vec(3);
  cfg.y_min << -kInf, -kInf, -sc.yaw_bound;
  cfg.y_max = Vec(3);
  cfg.y_max << kInf, kInf, sc.yaw_bound;
  cfg.u_min = Vec(2);
  cfg.u_max = Vec(2);
  cfg.du_min = Vec(2);
  cfg.du_min << -kInf, -sc.yaw_rate * Ts;
  cfg.du_max = Vec(2);
  cfg.du_max << kInf, sc.yaw_rate * Ts;
  cfg.qp_tol = sc.qp_tol;
  Vec u0(2);
  u0 << sc.v_start, 0.0;
  MpcController ctrl(cfg, u0);

  const VectorField f = bicycle_field(sc.vehicle);
  const OutputMap g = [](const Vec& x, const Vec&) { return x; };
  auto obstacle_at = [&](double t) {
    return Pose{sc.obstacle_start.x + sc.v_obstacle * t * std::cos(sc.obstacle_start.yaw),
                sc.obstacle_start.y + sc.v_obstacle * t * std::sin(sc.obstacle_start.yaw), sc.obstacle_start.yaw};
  };
  const double closing = std::max(sc.v_ref_oa - sc.v_obstacle, 1.0);
  const double plateau_offset = sc.width + sc.min_clearance;

  Trajectory& traj = out.trajectory;
  traj.state_names = {"x_f", "y_f", "yaw"};
  traj.input_names = {"v", "delta_s"};
  traj.output_names = {"y_x_f", "y_y_f", "y_yaw"};
  auto& s_phase = out.series["phase"];
  auto& s_yref = out.series["y_ref"];
  auto& s_vref = out.series["v_ref"];
  auto& s_obs = out.series["obstacle_x"];
  auto& s_gap = out.series["long_gap"];

  Vec x = Vec::Zero(3);
  const int n_sub = substeps(Ts, sc.substep);
  const double h = Ts / n_sub;
  const long steps = static_cast<long>(std::ceil(sc.duration / Ts - 1e-9));
  std::optional<LateralProfile> profile;
  double worst = 0.0;
  bool collision = false;
  double min_clear = kInf;
  out.status = OutcomeStatus::Completed;
  double t_end = 0.0;

  auto track_contact = [&](const Vec& s, double t) {
    const ObstacleGap gap = obstacle_gap({s(0), s(1), s(2)}, obstacle_at(t), sc.length, sc.width);
    if (gap.overlap) collision = true;
    if (gap.longitudinal == 0.0) min_clear = std::min(min_clear, gap.lateral);
  };
  track_contact(x, 0.0);

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * Ts;
    const Pose obs = obstacle_at(t);
    const ObstacleGap gap = obstacle_gap({x(0), x(1), x(2)}, obs, sc.length, sc.width);
    const bool oa = gap.longitudinal <= sc.safety_distance;

    if (oa) {
      if (!profile || profile->finished(t)) {
        const double pass_window = (2.0 * sc.safety_distance + 2.0 * sc.length) / closing;
        profile = LateralProfile{t, 0.4 * pass_window, obs.y + plateau_offset, t + pass_window};
      }
      // Projected time at which the ego's rear is the safety distance ahead.
      const double rear = x(0) - sc.length * std::cos(x(2));
      profile->t_down = t + std::max(0.0, obs.x + sc.safety_distance - rear) / closing;
    } else if (profile) {
      profile->t_down = std::min(profile->t_down, t);
      if (profile->finished(t)) profile.reset();
    }

    const double v_ref = oa ? sc.v_ref_oa : sc.v_ref_lk;
    ctrl.config().u_min << (oa ? sc.v_min_oa : sc.v_min_lk), -sc.steer_bound;
    ctrl.config().u_max << (oa ? sc.v_max_oa : sc.v_max_lk), sc.steer_bound;

    MpcReferences refs;
    for (int i = 1; i <= Np; ++i) {
      const double tau = t + i * Ts;
      Vec r(3);
      r << x(0) + v_ref * Ts * i, profile ? profile->value(tau) : 0.0, 0.0;
      refs.y_ref.push_back(r);
      Vec lo(3);
      lo << -kInf, -kInf, -sc.yaw_bound;
      if (oa) {
        // Keep the clearance wherever the preview puts the ego beside the obstacle.
        const Pose po = obstacle_at(tau);
        const double ego_front = r(0);
        const double ego_rear = ego_front - sc.length;
        if (ego_front >= po.x - sc.length && ego_rear <= po.x) lo(1) = po.y + plateau_offset;
      }
      refs.y_min.push_back(lo);
    }

    Vec u;
    try {
      const LinearModel model = make_linear_model(f, g, x, ctrl.u_prev(), Ts);
      u = ctrl.step(model, x, refs);
    } catch (const std::runtime_error& e) {
      out.status = OutcomeStatus::MpcFailure;
      out.message = e.what();
      t_end = t;
      break;
    }
    const double solve = ctrl.last_stats().solve_time;
    worst = std::max(worst, solve);
    traj.append(t, to_std(x), to_std(u), to_std(x), solve);
    s_phase.push_back(oa ? 1.0 : 0.0);
    s_yref.push_back(profile ? profile->value(t) : 0.0);
    s_vref.push_back(v_ref);
    s_obs.push_back(obs.x);
    s_gap.push_back(gap.longitudinal);

    try {
      for (int s = 0; s < n_sub; ++s) {
        x = rk4_step(f, x, u, h);
        track_contact(x, t + (s + 1) * h);
      }
    } catch (const std::runtime_error& e) {
      out.status = OutcomeStatus::InterruptedUnsafe;
      out.message = e.what();
      t_end = t;
      break;
    }
    t_end = t + Ts;
  }

  out.metrics["t_f"] = t_end;
  out.metrics["worst_solve_time"] = worst;
  out.metrics["collision_flag"] = collision ? 1.0 : 0.0;
  out.metrics["min_lateral_clearance"] = min_clear;
  out.metrics["num_steps"] = static_cast<double>(traj.size());
  out.metrics["Ts"] = Ts;
  return out;
}

double driving_oracle_score(const ExperimentOutcome& o, const DrivingScenario& sc) {
  const double Ts = o.metric("Ts");
  if (o.metric("collision_flag") != 0.0 || o.metric("worst_solve_time") >= Ts) return 1e6;
  const double clearance = o.metric("min_lateral_clearance");
  const std::size_t n = o.trajectory.size();
  auto series = [&](const char* name) -> const std::vector<double>& {
    auto it = o.series.find(name);
    if (it == o.series.end() || it->second.size() != n) {
      throw ArgumentError(std::string("driving outcome lacks the '") + name + "' series");
    }
    return it->second;
  };
  const auto& y_ref = series("y_ref");
  const auto& v_ref = series("v_ref");
  double lat = 0.0;
  double speed = 0.0;
  double steer = 0.0;
  double prev_delta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    lat += std::abs(o.trajectory.states[k].at(1) - y_ref[k]);
    speed += std::abs(o.trajectory.inputs[k].at(0) - v_ref[k]);
    const double delta = o.trajectory.inputs[k].at(1);
    steer += (delta - prev_delta) * (delta - prev_delta);
    prev_delta = delta;
  }
  double score = std::max(0.0, sc.min_clearance - clearance);
  if (n > 0) {
    const double nn = static_cast<double>(n);
    const double rate = sc.yaw_rate * Ts;
    score += lat / nn / sc.min_clearance + speed / nn / (10.0 / 3.6) + steer / (nn * rate * rate);
  }
  return score;
}

// ---------------------------------------------------------------- registry

ScenarioBinding make_scenario(std::string_view kind) {
  if (kind == "cstr") {
    CstrScenario sc;
    return {"cstr", sc.space(), [sc](const ParamVector& th) { return run_cstr_experiment(th, sc); },
            [sc](const ExperimentOutcome& o) { return cstr_perf_index(o, sc); }, 0.0};
  }
  if (kind == "driving") {
    DrivingScenario sc;
    return {"driving", sc.space(), [sc](const ParamVector& th) { return run_driving_experiment(th, sc); },
            [sc](const ExperimentOutcome& o) { return driving_oracle_score(o, sc); }, 0.0};
  }
  if (kind.substr(0, 6) == "bench:") {
    std::string_view rest = kind.substr(6);
    std::size_t dim = 2;
    const auto colon = rest.find(':');
    if (colon != std::string_view::npos) {
      const std::string d(rest.substr(colon + 1));
      try {
        std::size_t used = 0;
        const long v = std::stol(d, &used);
        if (used != d.size() || v < 1 || v > 64) throw ArgumentError("");
        dim = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ArgumentError("bad benchmark dimension in '" + std::string(kind) + "'");
      }
      rest = rest.substr(0, colon);
    }
    const BenchmarkFunction b = make_benchmark(rest, dim);
    auto fn = b.f;
    const ParamSpace space = b.space;
    ExperimentRunner runner = [fn, space](const ParamVector& th) {
      ExperimentOutcome o;
      o.theta = th;
      o.applied = materialize(th, space);
      const double v = fn(o.applied);
      o.trajectory.state_names.reserve(space.dim());
      for (const auto& s : space.specs()) o.trajectory.state_names.push_back(s.name);
      o.trajectory.output_names = {"value"};
      o.trajectory.append(0.0, o.applied, {}, {v}, 0.0);
      o.metrics["value"] = v;
      return o;
    };
    return {std::string(kind), b.space, runner, [](const ExperimentOutcome& o) { return o.metric("value"); }, 0.0};
  }
  throw ArgumentError("unknown scenario '" + std::string(kind) + "'");
}

}  // namespace preftune
