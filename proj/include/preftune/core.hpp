#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace preftune {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One bounded tuning knob.
struct ParamSpec {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  bool integer = false;  // rounded to nearest when materialized
  std::optional<std::string> log_scale_label;
};

/// Ordered, named box of tuning knobs. Construction validates the invariants
/// (non-empty, unique names, lower < upper, integer ranges span >= 1).
class ParamSpace {
 public:
  explicit ParamSpace(std::vector<ParamSpec> specs);

  std::size_t dim() const { return specs_.size(); }
  const std::vector<ParamSpec>& specs() const { return specs_; }
  const ParamSpec& operator[](std::size_t i) const { return specs_[i]; }
  std::optional<std::size_t> index_of(const std::string& name) const;

  bool contains(std::span<const double> theta, double tol = 0.0) const;

 private:
  std::vector<ParamSpec> specs_;
};

/// Parameter vector in original units.
using ParamVector = std::vector<double>;

/// Affine map [lower, upper] -> [-1, 1] per dimension. Throws BoundsError if
/// theta lies outside the box.
Vec scale_to_unit(std::span<const double> theta, const ParamSpace& space);
/// Inverse of scale_to_unit. Inputs are clipped to [-1, 1] first.
ParamVector unscale_from_unit(std::span<const double> scaled, const ParamSpace& space);

/// Rounds integer dimensions to the nearest integer (clamped to the box).
/// Samples keep their continuous value; only experiments see this.
ParamVector materialize(std::span<const double> theta, const ParamSpace& space);

/// Latin hypercube design: one point per bin in every 1-D projection.
std::vector<ParamVector> latin_hypercube(std::size_t n, const ParamSpace& space, std::uint64_t seed);

enum class Preference : int { Better = -1, Same = 0, Worse = 1 };

int to_int(Preference p);
/// Throws ArgumentError for anything outside {-1, 0, +1}.
Preference preference_from_int(long long v);

/// -1 if J1 < J2 - tol, +1 if J1 > J2 + tol, 0 otherwise.
Preference preference_from_values(double j1, double j2, double tol = 0.0);

/// b = pi(theta_i, theta_j).
struct PreferenceRecord {
  std::size_t i = 0;
  std::size_t j = 0;
  Preference b = Preference::Same;
};

/// Samples theta_1..theta_N plus the preference vector over sample pairs.
class PreferenceDataset {
 public:
  PreferenceDataset() = default;

  /// Returns the index of the new sample. Rejects duplicates.
  std::size_t add_sample(ParamVector theta);
  void add_preference(std::size_t i, std::size_t j, Preference b);

  const std::vector<ParamVector>& samples() const { return samples_; }
  const std::vector<PreferenceRecord>& prefs() const { return prefs_; }
  std::size_t size() const { return samples_.size(); }
  std::size_t num_prefs() const { return prefs_.size(); }

 private:
  std::vector<ParamVector> samples_;
  std::vector<PreferenceRecord> prefs_;
};

/// Smallest index whose every recorded comparison is <= 0 from its side.
/// Throws InconsistencyError when no such index exists.
std::size_t best_so_far(const PreferenceDataset& ds);

/// Scaled copies of all dataset samples.
std::vector<Vec> scaled_samples(const PreferenceDataset& ds, const ParamSpace& space);

}  // namespace preftune
