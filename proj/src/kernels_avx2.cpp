// Compiled with -mavx2 only (no FMA) so per-lane arithmetic rounds exactly
// like the scalar reference; only the reduction order differs.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "preftune/kernel_table.hpp"

namespace preftune::kernels::detail {
namespace {

inline __m256d sq_dist4(const double* soa, std::size_t count, std::size_t dim, const double* x,
                        std::size_t i) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t d = 0; d < dim; ++d) {
    const __m256d c = _mm256_loadu_pd(soa + d * count + i);
    const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(x[d]), c);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
  }
  return acc;
}

inline double sq_dist_one(const double* soa, std::size_t count, std::size_t dim, const double* x,
                          std::size_t i) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = x[d] - soa[d * count + i];
    acc += diff * diff;
  }
  return acc;
}

inline double hsum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

void squared_distances(const double* soa, std::size_t count, std::size_t dim, const double* x, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) _mm256_storeu_pd(out + i, sq_dist4(soa, count, dim, x, i));
  for (; i < count; ++i) out[i] = sq_dist_one(soa, count, dim, x, i);
}

double rbf_weighted_sum(RbfKind kind, double shape, const double* soa, std::size_t count, std::size_t dim,
                        const double* x, const double* coeffs) {
  const __m256d eps = _mm256_set1_pd(shape);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  if (kind == RbfKind::InverseQuadratic) {
    for (; i + 4 <= count; i += 4) {
      const __m256d s = _mm256_mul_pd(eps, sq_dist4(soa, count, dim, x, i));
      const __m256d phi = _mm256_div_pd(one, _mm256_add_pd(one, _mm256_mul_pd(s, s)));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(coeffs + i), phi));
    }
  } else {
    // No vector exp/log in AVX2: distances are vectorized, phi per lane.
    alignas(32) double s[4];
    alignas(32) double phi[4];
    for (; i + 4 <= count; i += 4) {
      _mm256_store_pd(s, _mm256_mul_pd(eps, sq_dist4(soa, count, dim, x, i)));
      for (int l = 0; l < 4; ++l) phi[l] = rbf_phi(kind, s[l]);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(coeffs + i), _mm256_load_pd(phi)));
    }
  }
  double total = hsum(acc);
  for (; i < count; ++i) total += coeffs[i] * rbf_phi(kind, shape * sq_dist_one(soa, count, dim, x, i));
  return total;
}

IdwSums idw_sums(const double* soa, std::size_t count, std::size_t dim, const double* x) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d wsum = _mm256_setzero_pd();
  __m256d dmin = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    const __m256d d = sq_dist4(soa, count, dim, x, i);
    wsum = _mm256_add_pd(wsum, _mm256_div_pd(one, _mm256_mul_pd(d, d)));
    dmin = _mm256_min_pd(dmin, d);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, dmin);
  IdwSums r{hsum(wsum), std::fmin(std::fmin(lanes[0], lanes[1]), std::fmin(lanes[2], lanes[3]))};
  for (; i < count; ++i) {
    const double d = sq_dist_one(soa, count, dim, x, i);
    r.weight_sum += 1.0 / (d * d);
    if (d < r.min_sq_norm) r.min_sq_norm = d;
  }
  return r;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t{&squared_distances, &rbf_weighted_sum, &idw_sums};
  return t;
}

}  // namespace preftune::kernels::detail
