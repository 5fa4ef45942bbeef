#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wbs/image.hpp"

namespace wbs::metrics {

struct DepthErrorReport {
  double absRel = 0.0;
  double sqRel = 0.0;
  double rmse = 0.0;     // metres
  double rmseLog = 0.0;
  std::size_t count = 0;          // evaluated pixels
  std::size_t foregroundCount = 0;
  double coverage = 0.0;          // count / foregroundCount
};

// Foreground pixels (mask != 0) with a valid ground truth form the
// evaluation domain; those with an invalid prediction are excluded and
// reflected in coverage. Sums use pairwise summation.
DepthErrorReport evaluate(const DepthMap& depth, const DepthMap& gt, const SemanticMask& fgMask);

// Pairwise (cascade) summation, deterministic for a fixed input order.
double pairwise_sum(const double* values, std::size_t n);

std::string to_json(const DepthErrorReport& report);
DepthErrorReport report_from_json(const std::string& text);

// Aligned text table; each row is a label plus a report. Columns follow
// Abs Rel, Squ Rel, RMSE, RMSE_log with a x100 RMSE column and coverage.
std::string format_table(const std::vector<std::pair<std::string, DepthErrorReport>>& rows);

}  // namespace wbs::metrics
