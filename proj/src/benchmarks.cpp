#include "preftune/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "preftune/errors.hpp"

namespace preftune {
namespace {

// Newton iteration for a 1-D stationary point starting inside its basin.
double newton(const std::function<double(double)>& d1, const std::function<double(double)>& d2, double x) {
  for (int it = 0; it < 100; ++it) {
    const double step = d1(x) / d2(x);
    x -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return x;
}

std::vector<ParamSpec> box(std::size_t dim, double lo, double hi) {
  std::vector<ParamSpec> specs;
  for (std::size_t i = 0; i < dim; ++i) specs.push_back({"x" + std::to_string(i + 1), lo, hi, false, std::nullopt});
  return specs;
}

}  // namespace

std::vector<std::string> benchmark_names() { return {"sphere", "two_well", "sin_quad"}; }

BenchmarkFunction make_benchmark(std::string_view name, std::size_t dim) {
  if (dim < 1) throw ArgumentError("benchmark dimension must be >= 1");
  if (name == "sphere") {
    // Off-center box so the optimum is not the box midpoint.
    auto f = [](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += v * v;
      return s;
    };
    return {"sphere", ParamSpace(box(dim, -2.0, 3.0)), f, 0.0, ParamVector(dim, 0.0)};
  }
  if (dim != 2) throw ArgumentError("benchmark '" + std::string(name) + "' is defined for dim = 2 only");
  if (name == "two_well") {
    // (x1^2 - 1)^2 + 0.3 x1 + 0.5 (x2 - 0.5)^2: the tilt makes the left well global.
    auto f = [](std::span<const double> x) {
      const double a = x[0] * x[0] - 1.0;
      const double b = x[1] - 0.5;
      return a * a + 0.3 * x[0] + 0.5 * b * b;
    };
    const double x1 = newton([](double x) { return 4.0 * x * x * x - 4.0 * x + 0.3; },
                             [](double x) { return 12.0 * x * x - 4.0; }, -1.0);
    const ParamVector argmin{x1, 0.5};
    return {"two_well", ParamSpace(box(2, -2.0, 2.0)), f, f(argmin), argmin};
  }
  if (name == "sin_quad") {
    // Separable g(x1) + g(x2), g(x) = sin(2x) + 0.2 x^2, several local minima per axis.
    auto f = [](std::span<const double> x) {
      return std::sin(2.0 * x[0]) + std::sin(2.0 * x[1]) + 0.2 * (x[0] * x[0] + x[1] * x[1]);
    };
    const double x1 = newton([](double x) { return 2.0 * std::cos(2.0 * x) + 0.4 * x; },
                             [](double x) { return -4.0 * std::sin(2.0 * x) + 0.4; }, -0.75);
    const ParamVector argmin{x1, x1};
    return {"sin_quad", ParamSpace(box(2, -3.0, 3.0)), f, f(argmin), argmin};
  }
  throw ArgumentError("unknown benchmark '" + std::string(name) + "'");
}

GridExtrema grid_extrema(const BenchmarkFunction& b, std::size_t max_points) {
  const std::size_t dim = b.space.dim();
  std::size_t per = 2;
  while (std::pow(static_cast<double>(per + 1), static_cast<double>(dim)) <= static_cast<double>(max_points)) ++per;
  GridExtrema e{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> x(dim);
  for (;;) {
    for (std::size_t d = 0; d < dim; ++d) {
      const ParamSpec& p = b.space[d];
      x[d] = p.lower + (p.upper - p.lower) * static_cast<double>(idx[d]) / static_cast<double>(per - 1);
    }
    const double v = b.f(x);
    e.min = std::min(e.min, v);
    e.max = std::max(e.max, v);
    std::size_t d = 0;
    while (d < dim && ++idx[d] == per) idx[d++] = 0;
    if (d == dim) break;
  }
  return e;
}

}  // namespace preftune
