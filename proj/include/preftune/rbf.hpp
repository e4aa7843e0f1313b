#pragma once

#include <string_view>

namespace preftune {

enum class RbfKind { InverseQuadratic, Gaussian, ThinPlateSpline };

std::string_view to_string(RbfKind kind);
/// Accepts "inverse_quadratic", "gaussian", "thin_plate_spline".
RbfKind rbf_kind_from_string(std::string_view name);

/// phi(s) for s = shape * d: 1/(1+s^2), exp(-s^2) or s^2 log s (0 at s = 0).
/// Throws ArgumentError for s < 0.
double rbf_phi(RbfKind kind, double s);

}  // namespace preftune
