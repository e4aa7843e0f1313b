#pragma once

#include <chrono>
#include <vector>

#include "preftune/core.hpp"
#include "preftune/plants.hpp"
#include "preftune/qp.hpp"

namespace preftune {

struct ContinuousLinearization {
  Mat A;
  Mat B;
  Mat C;
  Mat D;
  Vec x_bar;
  Vec u_bar;
  Vec f_bar;  // f(x_bar, u_bar), nonzero away from equilibria
  Vec y_bar;
};

/// Jacobians of f and g at (x_bar, u_bar) by central differences with step
/// h = max(1e-6, 1e-6 |v|) per component. Throws LinearizationError on a
/// non-finite entry.
ContinuousLinearization linearize(const VectorField& f, const OutputMap& g, const Vec& x_bar, const Vec& u_bar);

/// exp(M) by scaling and squaring of the Taylor series.
Mat expm(const Mat& m);

struct DiscreteMatrices {
  Mat A;
  Mat B;
  Vec c;  // ZOH integral of the constant drift; empty if none was given
};

/// Zero-order hold of x' = A_c x + B_c u (exact, via the augmented block exponential).
DiscreteMatrices discretize(const Mat& Ac, const Mat& Bc, double Ts);
/// Same, with a constant drift term x' = A_c x + B_c u + w.
DiscreteMatrices discretize(const Mat& Ac, const Mat& Bc, const Vec& w, double Ts);

/// Deviation model around (x_bar, u_bar, y_bar):
///   x~(k+1) = A x~(k) + B u~(k) + c,   y~(k) = C x~(k) + D u~(k).
struct LinearModel {
  Mat A;
  Mat B;
  Mat C;
  Mat D;
  Vec x_bar;
  Vec u_bar;
  Vec y_bar;
  Vec c;  // affine drift (zero at an equilibrium linearization point)

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
  Eigen::Index ny() const { return C.rows(); }
  void validate() const;
};

/// Linearize and discretize in one go (the LTV model for one sample).
LinearModel make_linear_model(const VectorField& f, const OutputMap& g, const Vec& x_bar, const Vec& u_bar,
                              double Ts);

struct MpcConfig {
  double Ts = 1.0;
  int Np = 10;
  int Nu = 3;
  Mat Qy;
  Mat Qu;
  Mat Qdu;
  double Qeps = 1e5;
  Vec y_min;
  Vec y_max;
  Vec u_min;
  Vec u_max;
  Vec du_min;
  Vec du_max;
  double qp_tol = 1e-6;

  /// Infinite bound entries are allowed (no constraint).
  void validate(Eigen::Index nu, Eigen::Index ny) const;
};

/// Per-step references and optional per-step output bounds for k = 1..Np.
/// Shorter sequences hold their last value; empty ones mean "unconstrained"
/// (bounds) or zero-weight-irrelevant (references default to y_bar / u_bar).
struct MpcReferences {
  std::vector<Vec> y_ref;
  std::vector<Vec> u_ref;
  std::vector<Vec> y_min;
  std::vector<Vec> y_max;
};

/// Outputs y(k), k = 1..Np, stacked, as an affine map of the stacked decision
/// inputs U = [u_0; ...; u_{Nu-1}] (absolute units): Y = Gamma U + offset.
struct CondensedPrediction {
  Mat Gamma;
  Vec offset;
};

CondensedPrediction condense(const LinearModel& m, const Vec& x_t, int Np, int Nu);

/// The QP in x = [u_0 ... u_{Nu-1}, eps]. `constant` is the cost term that
/// does not depend on x, so qp objective + constant = MPC cost.
struct MpcQp {
  QpProblem qp;
  double constant = 0.0;
  CondensedPrediction prediction;
};

MpcQp build_mpc_qp(const LinearModel& m, const Vec& x_t, const Vec& u_prev, const MpcReferences& refs,
                   const MpcConfig& cfg);

struct MpcStats {
  double solve_time = 0.0;  // seconds
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
  double kkt_residual = 0.0;
  double epsilon = 0.0;
  bool hit_max_iter = false;
};

class MpcController {
 public:
  MpcController(MpcConfig cfg, Vec u_initial);

  const MpcConfig& config() const { return cfg_; }
  MpcConfig& config() { return cfg_; }
  const Vec& u_prev() const { return u_prev_; }
  const MpcStats& last_stats() const { return stats_; }

  /// Solves the QP, applies u_{t|t} (projected onto the hard input and rate
  /// bounds to strip solver round-off) and stores it as u_prev. Throws
  /// MpcError if the QP is infeasible.
  Vec step(const LinearModel& m, const Vec& x_t, const MpcReferences& refs);

 private:
  MpcConfig cfg_;
  Vec u_prev_;
  MpcStats stats_;
};

inline Vec mpc_step(MpcController& ctrl, const LinearModel& m, const Vec& x_t, const MpcReferences& refs) {
  return ctrl.step(m, x_t, refs);
}

}  // namespace preftune
