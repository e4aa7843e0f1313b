#pragma once

// Raw kernel entry points shared by the scalar and SIMD translation units.
// Kept free of Eigen so ISA-specific objects instantiate no shared templates.

#include <cstddef>

#include "preftune/rbf.hpp"

namespace preftune::kernels {

struct IdwSums {
  double weight_sum = 0.0;   // sum_i 1 / d_i^2
  double min_sq_norm = 0.0;  // min_i d_i, d_i = ||x - c_i||^2
};

/// Function table of one ISA. Point sets are structure-of-arrays: coordinate
/// d of point i at soa[d * count + i].
struct KernelTable {
  void (*squared_distances)(const double* soa, std::size_t count, std::size_t dim, const double* x,
                            double* out);
  double (*rbf_weighted_sum)(RbfKind kind, double shape, const double* soa, std::size_t count,
                             std::size_t dim, const double* x, const double* coeffs);
  IdwSums (*idw_sums)(const double* soa, std::size_t count, std::size_t dim, const double* x);
};

namespace detail {
const KernelTable& scalar_table();
#ifdef PREFTUNE_HAVE_AVX2
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace preftune::kernels
