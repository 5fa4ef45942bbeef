#include "wbs/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "wbs/error.hpp"

namespace wbs::metrics {

double pairwise_sum(const double* values, std::size_t n) {
  constexpr std::size_t kBlock = 8;
  if (n <= kBlock) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

DepthErrorReport evaluate(const DepthMap& depth, const DepthMap& gt, const SemanticMask& mask) {
  require(depth.width == gt.width && depth.height == gt.height && mask.width == gt.width &&
              mask.height == gt.height,
          ErrorKind::ShapeMismatch, "evaluate: map dimensions differ");
  std::vector<double> absRel, sqRel, sq, sqLog;
  std::size_t foreground = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!mask.values[i]) continue;
    const double g = gt.values[i];
    if (std::isnan(g) || std::isinf(g)) continue;
    require(g > 0.0, ErrorKind::NonPositiveGroundTruth, "evaluate: non-positive ground truth in foreground");
    ++foreground;
    const double d = depth.values[i];
    if (!is_valid_depth(d)) continue;
    const double e = d - g;
    absRel.push_back(std::abs(e) / g);
    sqRel.push_back(e * e / g);
    sq.push_back(e * e);
    const double el = std::log(d) - std::log(g);
    sqLog.push_back(el * el);
  }
  const std::size_t n = sq.size();
  require(n > 0, ErrorKind::EmptyEvaluation, "evaluate: no foreground pixel with valid prediction");
  const double N = static_cast<double>(n);
  DepthErrorReport r;
  r.absRel = pairwise_sum(absRel.data(), n) / N;
  r.sqRel = pairwise_sum(sqRel.data(), n) / N;
  r.rmse = std::sqrt(pairwise_sum(sq.data(), n) / N);
  r.rmseLog = std::sqrt(pairwise_sum(sqLog.data(), n) / N);
  r.count = n;
  r.foregroundCount = foreground;
  r.coverage = N / static_cast<double>(foreground);
  return r;
}

std::string to_json(const DepthErrorReport& r) {
  nlohmann::ordered_json j;
  j["absRel"] = r.absRel;
  j["sqRel"] = r.sqRel;
  j["rmse"] = r.rmse;
  j["rmseLog"] = r.rmseLog;
  j["rmseX100"] = r.rmse * 100.0;
  j["count"] = r.count;
  j["foregroundCount"] = r.foregroundCount;
  j["coverage"] = r.coverage;
  return j.dump(2);
}

DepthErrorReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DepthErrorReport r;
  r.absRel = j.at("absRel").get<double>();
  r.sqRel = j.at("sqRel").get<double>();
  r.rmse = j.at("rmse").get<double>();
  r.rmseLog = j.at("rmseLog").get<double>();
  r.count = j.at("count").get<std::size_t>();
  r.foregroundCount = j.value("foregroundCount", r.count);
  r.coverage = j.value("coverage", 1.0);
  return r;
}

std::string format_table(const std::vector<std::pair<std::string, DepthErrorReport>>& rows) {
  std::size_t labelWidth = 4;
  for (const auto& [label, _] : rows) labelWidth = std::max(labelWidth, label.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %9s  %9s  %8s\n", static_cast<int>(labelWidth), "case",
                "Abs Rel", "Squ Rel", "RMSE[m]", "RMSE_log", "RMSEx100", "coverage");
  os << buf;
  for (const auto& [label, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %9.5f  %9.5f  %9.5f  %9.5f  %9.3f  %8.4f\n", static_cast<int>(labelWidth),
                  label.c_str(), r.absRel, r.sqRel, r.rmse, r.rmseLog, r.rmse * 100.0, r.coverage);
    os << buf;
  }
  return os.str();
}

}  // namespace wbs::metrics
