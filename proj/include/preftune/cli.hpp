#pragma once

#include <string>
#include <vector>

#include "preftune/core.hpp"
#include "preftune/engine.hpp"

namespace preftune {

/// `iter,<param names>,score,incumbent_score,wall_time`. wall_time is written
/// as 0 unless `with_wall_time`, so identical runs give identical bytes.
std::string history_csv(const ParamSpace& space, const std::vector<HistoryRow>& rows, bool with_wall_time = false);

/// Parses "a,b,c" into numbers. Throws ArgumentError on bad tokens.
std::vector<double> parse_number_list(const std::string& text);

/// Exit codes: 0 success, 2 argument error, 1 runtime failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace preftune
