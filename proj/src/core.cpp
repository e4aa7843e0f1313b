#include "preftune/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "preftune/errors.hpp"
#include "rng.hpp"

namespace preftune {

ParamSpace::ParamSpace(std::vector<ParamSpec> specs) : specs_(std::move(specs)) {
  if (specs_.empty()) throw ArgumentError("ParamSpace: at least one dimension required");
  std::set<std::string> names;
  for (const auto& s : specs_) {
    if (!names.insert(s.name).second) throw ArgumentError("ParamSpace: duplicate name '" + s.name + "'");
    if (!(std::isfinite(s.lower) && std::isfinite(s.upper)) || !(s.lower < s.upper)) {
      throw ArgumentError("ParamSpace: '" + s.name + "' needs finite lower < upper");
    }
    if (s.integer && s.upper - s.lower < 1.0) {
      throw ArgumentError("ParamSpace: integer '" + s.name + "' must span at least 1");
    }
  }
}

std::optional<std::size_t> ParamSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  return std::nullopt;
}

bool ParamSpace::contains(std::span<const double> theta, double tol) const {
  if (theta.size() != specs_.size()) return false;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double slack = tol * (specs_[i].upper - specs_[i].lower);
    if (!(theta[i] >= specs_[i].lower - slack && theta[i] <= specs_[i].upper + slack)) return false;
  }
  return true;
}

Vec scale_to_unit(std::span<const double> theta, const ParamSpace& space) {
  if (theta.size() != space.dim()) throw ArgumentError("scale_to_unit: dimension mismatch");
  if (!space.contains(theta, 1e-12)) {
    std::ostringstream msg;
    msg << "scale_to_unit: theta outside bounds (";
    for (std::size_t i = 0; i < theta.size(); ++i) msg << (i ? "," : "") << theta[i];
    msg << ")";
    throw BoundsError(msg.str());
  }
  Vec out(space.dim());
  for (std::size_t i = 0; i < space.dim(); ++i) {
    const auto& s = space[i];
    const double v = 2.0 * (theta[i] - s.lower) / (s.upper - s.lower) - 1.0;
    out[static_cast<Eigen::Index>(i)] = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

ParamVector unscale_from_unit(std::span<const double> scaled, const ParamSpace& space) {
  if (scaled.size() != space.dim()) throw ArgumentError("unscale_from_unit: dimension mismatch");
  ParamVector out(space.dim());
  for (std::size_t i = 0; i < space.dim(); ++i) {
    const auto& s = space[i];
    const double u = std::clamp(scaled[i], -1.0, 1.0);
    out[i] = std::clamp(s.lower + 0.5 * (u + 1.0) * (s.upper - s.lower), s.lower, s.upper);
  }
  return out;
}

ParamVector materialize(std::span<const double> theta, const ParamSpace& space) {
  if (theta.size() != space.dim()) throw ArgumentError("materialize: dimension mismatch");
  ParamVector out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < space.dim(); ++i) {
    const auto& s = space[i];
    if (s.integer) {
      out[i] = std::clamp(std::round(out[i]), std::ceil(s.lower), std::floor(s.upper));
    }
  }
  return out;
}

std::vector<ParamVector> latin_hypercube(std::size_t n, const ParamSpace& space, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("latin_hypercube: n must be >= 1");
  detail::Rng rng(seed);
  std::vector<ParamVector> pts(n, ParamVector(space.dim()));
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < space.dim(); ++d) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    const auto& s = space[d];
    const double width = (s.upper - s.lower) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      // Stay strictly inside the bin so bin membership is unambiguous.
      const double u = 0.001 + 0.998 * rng.uniform();
      pts[k][d] = s.lower + (static_cast<double>(perm[k]) + u) * width;
    }
  }
  return pts;
}

int to_int(Preference p) { return static_cast<int>(p); }

Preference preference_from_int(long long v) {
  switch (v) {
    case -1: return Preference::Better;
    case 0: return Preference::Same;
    case 1: return Preference::Worse;
    default: throw ArgumentError("preference must be -1, 0 or +1 (got " + std::to_string(v) + ")");
  }
}

Preference preference_from_values(double j1, double j2, double tol) {
  if (!std::isfinite(j1) || !std::isfinite(j2) || !std::isfinite(tol) || tol < 0.0) {
    throw ArgumentError("preference_from_values: inputs must be finite and tol >= 0");
  }
  if (j1 < j2 - tol) return Preference::Better;
  if (j1 > j2 + tol) return Preference::Worse;
  return Preference::Same;
}

std::size_t PreferenceDataset::add_sample(ParamVector theta) {
  for (const auto& s : samples_) {
    if (s == theta) throw ArgumentError("PreferenceDataset: duplicate sample");
  }
  if (!samples_.empty() && theta.size() != samples_.front().size()) {
    throw ArgumentError("PreferenceDataset: sample dimension mismatch");
  }
  samples_.push_back(std::move(theta));
  return samples_.size() - 1;
}

void PreferenceDataset::add_preference(std::size_t i, std::size_t j, Preference b) {
  if (i == j) throw ArgumentError("PreferenceDataset: preference needs two distinct samples");
  if (i >= samples_.size() || j >= samples_.size()) {
    throw ArgumentError("PreferenceDataset: preference index out of range");
  }
  for (const auto& p : prefs_) {
    if ((p.i == i && p.j == j) || (p.i == j && p.j == i)) {
      throw ArgumentError("PreferenceDataset: pair already compared");
    }
  }
  prefs_.push_back({i, j, b});
}

std::size_t best_so_far(const PreferenceDataset& ds) {
  const std::size_t n = ds.size();
  if (n == 0) throw ArgumentError("best_so_far: empty dataset");
  std::vector<bool> lost(n, false);
  for (const auto& p : ds.prefs()) {
    const int b = to_int(p.b);
    if (b > 0) lost[p.i] = true;
    if (b < 0) lost[p.j] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!lost[i]) return i;
  }
  throw InconsistencyError("best_so_far: every sample lost at least one comparison");
}

std::vector<Vec> scaled_samples(const PreferenceDataset& ds, const ParamSpace& space) {
  std::vector<Vec> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples()) out.push_back(scale_to_unit(s, space));
  return out;
}

}  // namespace preftune
