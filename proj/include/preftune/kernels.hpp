#pragma once

// Data-parallel inner loops of the surrogate and exploration terms.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is picked once at runtime from the CPU features; the
// environment variable PREFTUNE_SIMD=scalar|avx2 overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "preftune/kernel_table.hpp"
#include "preftune/rbf.hpp"

namespace preftune {
namespace kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);
bool isa_available(Isa isa);
/// ISA used by the dispatching entry points below.
Isa active_isa();
/// Test hook: pin the dispatch to `isa` (must be available).
void set_active_isa(Isa isa);

/// Structure-of-arrays copy of a point set: coordinate d of point i lives at
/// data[d * count + i], so each coordinate row streams contiguously.
class CenterSet {
 public:
  CenterSet() = default;
  explicit CenterSet(std::span<const Eigen::VectorXd> points);

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }
  const double* data() const { return data_.data(); }
  Eigen::VectorXd point(std::size_t i) const;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

const KernelTable& table(Isa isa);

/// out[i] = ||x - c_i||^2.
void squared_distances(const CenterSet& centers, std::span<const double> x, std::span<double> out);
/// sum_i coeffs[i] * phi(shape * ||x - c_i||^2).
double rbf_weighted_sum(RbfKind kind, double shape, const CenterSet& centers, std::span<const double> x,
                        std::span<const double> coeffs);
IdwSums idw_sums(const CenterSet& centers, std::span<const double> x);

}  // namespace kernels
}  // namespace preftune
