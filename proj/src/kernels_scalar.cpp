#include <cmath>
#include <limits>

#include "preftune/kernel_table.hpp"

namespace preftune::kernels::detail {
namespace {

inline double sq_dist_one(const double* soa, std::size_t count, std::size_t dim, const double* x,
                          std::size_t i) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = x[d] - soa[d * count + i];
    acc += diff * diff;
  }
  return acc;
}

void squared_distances(const double* soa, std::size_t count, std::size_t dim, const double* x, double* out) {
  for (std::size_t i = 0; i < count; ++i) out[i] = sq_dist_one(soa, count, dim, x, i);
}

double rbf_weighted_sum(RbfKind kind, double shape, const double* soa, std::size_t count, std::size_t dim,
                        const double* x, const double* coeffs) {
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    acc += coeffs[i] * rbf_phi(kind, shape * sq_dist_one(soa, count, dim, x, i));
  }
  return acc;
}

IdwSums idw_sums(const double* soa, std::size_t count, std::size_t dim, const double* x) {
  IdwSums r{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < count; ++i) {
    const double d = sq_dist_one(soa, count, dim, x, i);
    r.weight_sum += 1.0 / (d * d);
    if (d < r.min_sq_norm) r.min_sq_norm = d;
  }
  return r;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{&squared_distances, &rbf_weighted_sum, &idw_sums};
  return t;
}

}  // namespace preftune::kernels::detail
