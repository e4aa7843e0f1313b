#include "preftune/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "preftune/errors.hpp"

namespace preftune {

std::string_view to_string(RbfKind kind) {
  switch (kind) {
    case RbfKind::InverseQuadratic: return "inverse_quadratic";
    case RbfKind::Gaussian: return "gaussian";
    case RbfKind::ThinPlateSpline: return "thin_plate_spline";
  }
  return "?";
}

RbfKind rbf_kind_from_string(std::string_view name) {
  if (name == "inverse_quadratic") return RbfKind::InverseQuadratic;
  if (name == "gaussian") return RbfKind::Gaussian;
  if (name == "thin_plate_spline") return RbfKind::ThinPlateSpline;
  throw ArgumentError("unknown RBF kind '" + std::string(name) + "'");
}

double rbf_phi(RbfKind kind, double s) {
  if (!(s >= 0.0)) throw ArgumentError("rbf_phi: argument must be >= 0");
  switch (kind) {
    case RbfKind::InverseQuadratic: return 1.0 / (1.0 + s * s);
    case RbfKind::Gaussian: return std::exp(-s * s);
    case RbfKind::ThinPlateSpline: return s == 0.0 ? 0.0 : s * s * std::log(s);
  }
  return 0.0;
}

namespace kernels {
namespace {

bool cpu_has_avx2() {
#if defined(PREFTUNE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect() {
  Isa best = cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
  if (const char* env = std::getenv("PREFTUNE_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && best == Isa::Avx2) return Isa::Avx2;
  }
  return best;
}

std::atomic<int>& active_slot() {
  static std::atomic<int> slot{static_cast<int>(detect())};
  return slot;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return static_cast<Isa>(active_slot().load(std::memory_order_relaxed)); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) throw ArgumentError("ISA not available on this machine");
  active_slot().store(static_cast<int>(isa), std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
#ifdef PREFTUNE_HAVE_AVX2
  if (isa == Isa::Avx2) {
    if (!cpu_has_avx2()) throw ArgumentError("AVX2 kernels requested on a CPU without AVX2");
    return detail::avx2_table();
  }
#else
  if (isa == Isa::Avx2) throw ArgumentError("AVX2 kernels not compiled in");
#endif
  return detail::scalar_table();
}

CenterSet::CenterSet(std::span<const Eigen::VectorXd> points) : count_(points.size()) {
  dim_ = points.empty() ? 0 : static_cast<std::size_t>(points.front().size());
  data_.assign(count_ * dim_, 0.0);
  for (std::size_t i = 0; i < count_; ++i) {
    if (static_cast<std::size_t>(points[i].size()) != dim_) throw ArgumentError("CenterSet: ragged point set");
    for (std::size_t d = 0; d < dim_; ++d) data_[d * count_ + i] = points[i][static_cast<Eigen::Index>(d)];
  }
}

Eigen::VectorXd CenterSet::point(std::size_t i) const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(dim_));
  for (std::size_t d = 0; d < dim_; ++d) p[static_cast<Eigen::Index>(d)] = data_[d * count_ + i];
  return p;
}

void squared_distances(const CenterSet& centers, std::span<const double> x, std::span<double> out) {
  if (x.size() != centers.dim() || out.size() != centers.count()) {
    throw ArgumentError("squared_distances: dimension mismatch");
  }
  table(active_isa()).squared_distances(centers.data(), centers.count(), centers.dim(), x.data(), out.data());
}

double rbf_weighted_sum(RbfKind kind, double shape, const CenterSet& centers, std::span<const double> x,
                        std::span<const double> coeffs) {
  if (x.size() != centers.dim() || coeffs.size() != centers.count()) {
    throw ArgumentError("rbf_weighted_sum: dimension mismatch");
  }
  return table(active_isa())
      .rbf_weighted_sum(kind, shape, centers.data(), centers.count(), centers.dim(), x.data(), coeffs.data());
}

IdwSums idw_sums(const CenterSet& centers, std::span<const double> x) {
  if (x.size() != centers.dim()) throw ArgumentError("idw_sums: dimension mismatch");
  return table(active_isa()).idw_sums(centers.data(), centers.count(), centers.dim(), x.data());
}

}  // namespace kernels
}  // namespace preftune
