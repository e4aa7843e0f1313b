#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "preftune/core.hpp"
#include "preftune/kernels.hpp"
#include "preftune/qp.hpp"
#include "preftune/rbf.hpp"

namespace preftune {

/// J_hat(x) = sum_k coeffs[k] * phi(shape * ||x - c_k||^2), centers in the
/// [-1, 1]-scaled space.
class SurrogateModel {
 public:
  SurrogateModel(RbfKind kind, double shape, std::vector<Vec> centers, Vec coeffs, double sigma);

  RbfKind kind() const { return kind_; }
  double shape() const { return shape_; }
  double sigma() const { return sigma_; }
  const std::vector<Vec>& centers() const { return centers_; }
  const Vec& coeffs() const { return coeffs_; }
  const kernels::CenterSet& center_set() const { return center_set_; }
  std::size_t dim() const { return center_set_.dim(); }

  /// Throws ArgumentError on dimension mismatch.
  double operator()(std::span<const double> x) const;
  double operator()(const Vec& x) const {
    return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

 private:
  RbfKind kind_;
  double shape_;
  double sigma_;
  std::vector<Vec> centers_;
  Vec coeffs_;
  kernels::CenterSet center_set_;
};

double eval_surrogate(const SurrogateModel& m, const Vec& x_scaled);

/// Phi(i, k) = phi(shape * ||a_i - b_k||^2).
Mat rbf_matrix(RbfKind kind, double shape, std::span<const Vec> rows, std::span<const Vec> cols);

struct FitConfig {
  double lambda = 1e-6;
  std::vector<double> weights;  // c_h; empty means all 1
  double sigma = 1e-6;

  void validate(std::size_t num_prefs) const;
};

struct PreferenceFit {
  SurrogateModel model;
  Vec slacks;  // epsilon_h, one per preference
  QpStatus status = QpStatus::Optimal;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Fits beta and the slacks by the preference-constrained QP. `points` are
/// the scaled samples; preference indices refer to them. Throws FitError if
/// the QP solver does not reach an optimal status.
PreferenceFit fit_preference_surrogate(std::span<const Vec> points, std::span<const PreferenceRecord> prefs,
                                       RbfKind kind, double shape, const FitConfig& cfg);
PreferenceFit fit_preference_surrogate(const PreferenceDataset& ds, const ParamSpace& space, RbfKind kind,
                                       double shape, const FitConfig& cfg);

/// Ridge least squares of the Gram matrix against `values`:
/// beta = argmin ||Phi beta - values||^2 + lambda ||beta||^2.
/// Throws FitError when lambda == 0 and Phi is singular.
SurrogateModel fit_value_surrogate(std::span<const Vec> points, std::span<const double> values, RbfKind kind,
                                   double shape, double lambda, double sigma = 1e-6);

/// Default candidate grid {0.1, 0.2, 0.5, 1, 2, 5, 10} x current, clipped to
/// [1e-3, 1e3] and de-duplicated.
std::vector<double> default_shape_grid(double current);

/// K-fold cross-validation of the shape parameter on preference
/// reconstruction. Ties go to the smallest candidate.
double cross_validate_shape(std::span<const Vec> points, std::span<const PreferenceRecord> prefs, RbfKind kind,
                            std::span<const double> grid, std::size_t folds, const FitConfig& cfg,
                            std::uint64_t seed);

/// Same idea for value data: the candidate with the smallest held-out squared
/// error wins (ties to the smallest candidate).
double cross_validate_shape_values(std::span<const Vec> points, std::span<const double> values, RbfKind kind,
                                   std::span<const double> grid, std::size_t folds, double lambda,
                                   std::uint64_t seed);

}  // namespace preftune
