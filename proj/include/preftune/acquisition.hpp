#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "preftune/core.hpp"
#include "preftune/kernels.hpp"
#include "preftune/surrogate.hpp"

namespace preftune {

struct AcquisitionConfig {
  double delta = 0.3;  // exploration weight
};

struct PsoConfig {
  std::size_t swarm_size = 30;
  std::size_t max_iters = 200;
  double inertia = 0.729;
  double cognitive = 1.49445;
  double social = 1.49445;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Points closer than this (Euclidean, scaled space) count as coincident.
inline constexpr double kCoincidenceTol = 1e-12;

/// atan(1 / sum_i 1/d_i^2) with d_i = ||x - x_i||^2; 0 on a sample.
double idw_z(std::span<const double> x, const kernels::CenterSet& samples);
double idw_z(const Vec& x, std::span<const Vec> samples);

/// max_i J_hat(x_i) - min_i J_hat(x_i), floored at the model's sigma.
double delta_J(const SurrogateModel& m, std::span<const Vec> samples);

/// a(x) = J_hat(x) / dJ - delta * z(x), with the samples taken to be the
/// model's centers.
class Acquisition {
 public:
  Acquisition(const SurrogateModel& model, AcquisitionConfig cfg);

  double operator()(std::span<const double> x) const;
  double operator()(const Vec& x) const {
    return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
  double range() const { return range_; }

 private:
  const SurrogateModel* model_;
  AcquisitionConfig cfg_;
  double range_;
};

double acquisition(const Vec& x, const SurrogateModel& m, AcquisitionConfig cfg);

struct PsoResult {
  Vec x;
  double value = 0.0;
  // Final personal bests, one per particle (used as fallbacks by callers).
  std::vector<Vec> personal_best;
  std::vector<double> personal_value;
};

using Objective = std::function<double(std::span<const double>)>;

/// Particle swarm over [-1, 1]^dim. Absorbing walls: a coordinate that leaves
/// the box is clipped and its velocity zeroed. Throws OptimizationError if the
/// objective returns a non-finite value.
PsoResult pso_minimize(const Objective& f, std::size_t dim, const PsoConfig& cfg);

}  // namespace preftune
