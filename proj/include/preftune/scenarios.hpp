#pragma once

#include <string>
#include <string_view>

#include "preftune/core.hpp"
#include "preftune/experiment.hpp"
#include "preftune/plants.hpp"

namespace preftune {

// Steady-state switch of the CSTR from CA = 8.56 to CA = 2 kgmol/m^3.
// Tuning vector: (Ts [hr], Np, log10 Qdu).
struct CstrScenario {
  CstrParams plant;
  double CA_start = 8.56;
  double CA_ref = 2.0;
  double t_max = 48.0;  // hr
  double Tc_min = 284.0;
  double Tc_max = 310.0;
  double dTc_max = 10.0;  // K per step
  double Tf = 298.15;
  double CAf = 10.0;
  double substep = 0.01;  // hr
  double T_safe_min = 150.0;
  double T_safe_max = 700.0;
  // Steady state: |dCA/dt| and the per-step change of CA both below these
  // thresholds for `steady_steps` consecutive samples, counted only after CA
  // has moved half way from CA_start towards CA_ref.
  double steady_rate_tol = 1e-3;
  double steady_step_tol = 1e-3;
  int steady_steps = 5;
  double accuracy = 0.03;  // AR% in the score
  double qp_tol = 1e-6;

  ParamSpace space() const;
};

/// Metrics: t_f, CA_end, worst_solve_time, Tc_initial, num_steps, ca_clamped.
ExperimentOutcome run_cstr_experiment(const ParamVector& theta, const CstrScenario& sc = {});

/// t_f / t_max + sum (dTc)^2 / (dTc_max * N_T) + |CA_end - CA_ref| / (AR * CA_ref).
double cstr_perf_index(const ExperimentOutcome& o, const CstrScenario& sc = {});

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

// Lane keeping with one slower vehicle ahead in the same lane.
// Tuning vector: (Ts [s], eps_c, Np, log10 q_u11, log10 q_u22).
struct DrivingScenario {
  BicycleParams vehicle;
  double length = 4.5;
  double width = 1.8;
  double v_start = 50.0 / 3.6;
  Pose obstacle_start{30.0, 0.0, 0.0};
  double v_obstacle = 40.0 / 3.6;
  double safety_distance = 10.0;
  double min_clearance = 3.0;  // edge to edge
  double v_min_lk = 40.0 / 3.6;
  double v_max_lk = 70.0 / 3.6;
  double v_ref_lk = 50.0 / 3.6;
  double v_min_oa = 50.0 / 3.6;
  double v_max_oa = 70.0 / 3.6;
  double v_ref_oa = 60.0 / 3.6;
  double yaw_bound = 0.7853981633974483;
  double steer_bound = 0.7853981633974483;
  double yaw_rate = 0.0873;  // rad/s, applied to the steering input per step
  double duration = 15.0;
  double substep = 0.005;
  double qp_tol = 1e-6;

  ParamSpace space() const;
};

struct ObstacleGap {
  double longitudinal = 0.0;  // edge to edge along x, 0 when the extents overlap
  double lateral = 0.0;       // edge to edge along y, 0 when the extents overlap
  bool overlap = false;       // rectangles intersect
};

/// Footprint of a vehicle: a length x width rectangle extending `length`
/// behind the front reference point along the heading.
ObstacleGap obstacle_gap(const BicycleState& ego, const Pose& obstacle, double length = 4.5, double width = 1.8);

/// Lateral reference during a pass: ramps up to `plateau` from `t_start`,
/// holds, ramps back down from `t_down`. Both ramps last `ramp`.
struct LateralProfile {
  double t_start = 0.0;
  double ramp = 1.0;
  double plateau = 0.0;
  double t_down = 0.0;

  double value(double t) const;
  bool finished(double t) const { return t >= t_down + ramp; }
};

/// Metrics: t_f, worst_solve_time, collision_flag, min_lateral_clearance,
/// num_steps, Ts. Series: phase (0 = LK, 1 = OA), y_ref, v_ref, obstacle_x,
/// long_gap.
ExperimentOutcome run_driving_experiment(const ParamVector& theta, const DrivingScenario& sc = {});

/// Synthetic stand-in for a human judge of the driving runs (lower is better).
double driving_oracle_score(const ExperimentOutcome& o, const DrivingScenario& sc = {});

/// Everything the engine, CLI and service need to run one scenario kind.
struct ScenarioBinding {
  std::string kind;
  ParamSpace space;
  ExperimentRunner runner;
  ValueOracle oracle;
  double pref_tol = 0.0;
};

/// Kinds: "cstr", "driving", "bench:<fn>" or "bench:<fn>:<dim>". Throws
/// ArgumentError for unknown kinds.
ScenarioBinding make_scenario(std::string_view kind);

}  // namespace preftune
