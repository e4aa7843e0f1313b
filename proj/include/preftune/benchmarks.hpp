#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preftune/core.hpp"

namespace preftune {

/// Analytic test function on a box with a known global minimum.
struct BenchmarkFunction {
  std::string name;
  ParamSpace space;
  std::function<double(std::span<const double>)> f;
  double min_value = 0.0;
  ParamVector argmin;
};

/// "sphere" (any dim >= 1), "two_well" and "sin_quad" (dim 2 only).
/// Throws ArgumentError for unknown names or unsupported dimensions.
BenchmarkFunction make_benchmark(std::string_view name, std::size_t dim = 2);

std::vector<std::string> benchmark_names();

struct GridExtrema {
  double min = 0.0;
  double max = 0.0;
};

/// Min and max over a regular grid with at most `max_points` nodes
/// (at least 2 per dimension, box corners included).
GridExtrema grid_extrema(const BenchmarkFunction& b, std::size_t max_points = 1000000);

}  // namespace preftune
