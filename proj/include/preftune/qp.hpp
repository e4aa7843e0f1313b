#pragma once

#include <chrono>
#include <optional>
#include <string_view>

#include "preftune/core.hpp"

namespace preftune {

/// min 0.5 x'Hx + f'x  s.t.  A_ineq x <= b_ineq,  A_eq x = b_eq,  lower <= x <= upper.
/// Empty matrices mean "no constraints of that family"; infinite bound entries
/// are ignored.
struct QpProblem {
  Mat H;
  Vec f;
  Mat A_ineq;
  Vec b_ineq;
  Mat A_eq;
  Vec b_eq;
  std::optional<Vec> lower;
  std::optional<Vec> upper;

  Eigen::Index num_vars() const { return f.size(); }
  /// Throws ArgumentError on inconsistent shapes or an asymmetric H.
  void validate() const;
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

std::string_view to_string(QpStatus status);

struct QpSolution {
  Vec x;
  double objective = 0.0;
  QpStatus status = QpStatus::MaxIter;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::chrono::duration<double> solve_time{0.0};

  // Multipliers (all >= 0 except nu_eq).
  Vec lambda_ineq;
  Vec lambda_lower;
  Vec lambda_upper;
  Vec nu_eq;

  // Diagonal shift added to H when its smallest eigenvalue was below 1e-9.
  double hessian_shift = 0.0;
  // Farkas certificate residual when status == Infeasible.
  double certificate_residual = 0.0;
  bool polished = false;
};

struct QpSettings {
  double tol = 1e-8;
  int max_iter = 100;
  bool polish = true;
};

/// Components of the KKT conditions, scaled by (1 + magnitude of the terms
/// involved) so the numbers are comparable across problem scalings.
struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double max() const;
};

/// Evaluates the KKT conditions of `p` (with `hessian_shift` added to H) at
/// the primal/dual point stored in `sol`.
KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& sol);

QpSolution solve_qp(const QpProblem& p, const QpSettings& settings = {});
inline QpSolution solve_qp(const QpProblem& p, double tol) {
  QpSettings s;
  s.tol = tol;
  return solve_qp(p, s);
}

}  // namespace preftune
