#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>

#include "wbs/geometry.hpp"
#include "wbs/matchcost.hpp"
#include "wbs/render.hpp"
#include "wbs/stereo.hpp"

namespace wbs::serialize {

using Json = nlohmann::ordered_json;

Json to_json(const geometry::CameraModel& cam);
geometry::CameraModel camera_from_json(const nlohmann::json& j);

// Stereo calibration file: {"left": camera, "right": camera,
// "depthRange": [zMin, zMax] (optional)}.
struct Calibration {
  geometry::CameraModel left, right;
  std::optional<std::pair<double, double>> depthRange;
};
Json to_json(const Calibration& calib);
Calibration calibration_from_json(const nlohmann::json& j);

Json to_json(const render::SceneSpec& scene);
render::SceneSpec scene_from_json(const nlohmann::json& j);

// {"kind": "learned", "patchSizes": [9,19,35], "pooling": true, "weights": path}.
// The network itself is not serialised; callers load it from "weights".
Json to_json(const matchcost::MatcherSpec& spec);
matchcost::MatcherSpec matcher_from_json(const nlohmann::json& j);

Json to_json(const stereo::ConstraintConfig& cc);
stereo::ConstraintConfig constraint_from_json(const nlohmann::json& j);

// Wraps JSON errors (parse, missing key, type) as InvalidArgument.
nlohmann::json parse_json(const std::string& text, const std::string& what);

}  // namespace wbs::serialize
