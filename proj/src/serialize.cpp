#include "wbs/serialize.hpp"

#include "wbs/error.hpp"

namespace wbs::serialize {

namespace {

Json vec3(const geometry::Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

geometry::Vec3 vec3_from(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 3, ErrorKind::InvalidArgument, "expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const char* texture_name(render::TextureKind k) {
  switch (k) {
    case render::TextureKind::Noise: return "noise";
    case render::TextureKind::Checker: return "checker";
    case render::TextureKind::Stripes: return "stripes";
    case render::TextureKind::Spots: return "spots";
    case render::TextureKind::Constant: return "constant";
  }
  return "constant";
}

render::TextureKind texture_kind(const std::string& s) {
  if (s == "noise") return render::TextureKind::Noise;
  if (s == "checker") return render::TextureKind::Checker;
  if (s == "stripes") return render::TextureKind::Stripes;
  if (s == "spots") return render::TextureKind::Spots;
  if (s == "constant") return render::TextureKind::Constant;
  fail(ErrorKind::InvalidArgument, "unknown texture kind: " + s);
}

Json texture_json(const render::TextureSpec& t) {
  Json j;
  j["kind"] = texture_name(t.kind);
  j["frequency"] = t.frequency;
  j["colorA"] = vec3(t.colorA);
  j["colorB"] = vec3(t.colorB);
  j["direction"] = vec3(t.direction);
  j["seed"] = t.seed;
  return j;
}

render::TextureSpec texture_from(const nlohmann::json& j) {
  render::TextureSpec t;
  t.kind = texture_kind(j.at("kind").get<std::string>());
  t.frequency = j.at("frequency").get<double>();
  t.colorA = vec3_from(j.at("colorA"));
  t.colorB = vec3_from(j.at("colorB"));
  t.direction = vec3_from(j.at("direction"));
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

template <typename F>
auto guarded(const char* what, F&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string(what) + ": " + e.what());
  }
}

}  // namespace

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, what + ": " + e.what());
  }
}

Json to_json(const geometry::CameraModel& c) {
  Json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  Json r = Json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(c.R(i, k));
  j["R"] = r;
  j["t"] = vec3(c.t);
  return j;
}

geometry::CameraModel camera_from_json(const nlohmann::json& j) {
  return guarded("camera", [&] {
    geometry::CameraModel c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const auto& r = j.at("R");
    require(r.is_array() && r.size() == 9, ErrorKind::InvalidArgument, "camera: R needs 9 values");
    for (int i = 0; i < 9; ++i) c.R(i / 3, i % 3) = r[i].get<double>();
    c.t = vec3_from(j.at("t"));
    c.validate();
    return c;
  });
}

Json to_json(const Calibration& calib) {
  Json j;
  j["left"] = to_json(calib.left);
  j["right"] = to_json(calib.right);
  if (calib.depthRange) j["depthRange"] = Json::array({calib.depthRange->first, calib.depthRange->second});
  return j;
}

Calibration calibration_from_json(const nlohmann::json& j) {
  return guarded("calibration", [&] {
    Calibration c;
    c.left = camera_from_json(j.at("left"));
    c.right = camera_from_json(j.at("right"));
    if (j.contains("depthRange")) {
      const auto& d = j.at("depthRange");
      require(d.is_array() && d.size() == 2, ErrorKind::InvalidArgument, "calibration: depthRange needs 2 values");
      c.depthRange = std::make_pair(d[0].get<double>(), d[1].get<double>());
      require(c.depthRange->first > 0 && c.depthRange->first < c.depthRange->second, ErrorKind::InvalidArgument,
              "calibration: depthRange must satisfy 0 < zMin < zMax");
    }
    return c;
  });
}

Json to_json(const render::SceneSpec& s) {
  Json j;
  j["seed"] = s.seed;
  Json surf;
  surf["center"] = vec3(s.surface.center);
  surf["radii"] = vec3(s.surface.radii);
  surf["e1"] = s.surface.e1;
  surf["e2"] = s.surface.e2;
  surf["bumpAmplitude"] = s.surface.bumpAmplitude;
  surf["bumpFrequency"] = s.surface.bumpFrequency;
  surf["bumpPhase"] = vec3(s.surface.bumpPhase);
  j["surface"] = surf;
  j["foregroundTexture"] = texture_json(s.foregroundTexture);
  j["background"] = {{"distance", s.background.distance}, {"texture", texture_json(s.background.texture)}};
  j["lightDirection"] = vec3(s.lightDirection);
  j["ambient"] = s.ambient;
  return j;
}

render::SceneSpec scene_from_json(const nlohmann::json& j) {
  return guarded("scene", [&] {
    render::SceneSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& surf = j.at("surface");
    s.surface.center = vec3_from(surf.at("center"));
    s.surface.radii = vec3_from(surf.at("radii"));
    s.surface.e1 = surf.at("e1").get<double>();
    s.surface.e2 = surf.at("e2").get<double>();
    s.surface.bumpAmplitude = surf.at("bumpAmplitude").get<double>();
    s.surface.bumpFrequency = surf.at("bumpFrequency").get<double>();
    s.surface.bumpPhase = vec3_from(surf.at("bumpPhase"));
    s.foregroundTexture = texture_from(j.at("foregroundTexture"));
    s.background.distance = j.at("background").at("distance").get<double>();
    s.background.texture = texture_from(j.at("background").at("texture"));
    s.lightDirection = vec3_from(j.at("lightDirection"));
    s.ambient = j.at("ambient").get<double>();
    s.validate();
    return s;
  });
}

Json to_json(const matchcost::MatcherSpec& m) {
  Json j;
  j["kind"] = matchcost::to_string(m.kind);
  j["patchSizes"] = m.patchSizes;
  j["pooling"] = m.pooling;
  if (!m.weightsPath.empty()) j["weights"] = m.weightsPath;
  return j;
}

matchcost::MatcherSpec matcher_from_json(const nlohmann::json& j) {
  return guarded("matcher", [&] {
    matchcost::MatcherSpec m;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "ncc") {
      m.kind = matchcost::MatcherKind::Ncc;
    } else if (kind == "sad") {
      m.kind = matchcost::MatcherKind::Sad;
    } else if (kind == "learned") {
      m.kind = matchcost::MatcherKind::Learned;
      m.patchSizes = {9, 19, 35};
      m.pooling = true;
    } else {
      fail(ErrorKind::InvalidArgument, "matcher: unknown kind " + kind);
    }
    if (j.contains("patchSizes")) m.patchSizes = j.at("patchSizes").get<std::vector<int>>();
    if (j.contains("pooling")) m.pooling = j.at("pooling").get<bool>();
    if (j.contains("weights")) m.weightsPath = j.at("weights").get<std::string>();
    return m;
  });
}

Json to_json(const stereo::ConstraintConfig& cc) {
  Json j;
  j["enabled"] = cc.enabled;
  j["sigma"] = cc.sigma;
  j["mode"] = stereo::to_string(cc.mode);
  return j;
}

stereo::ConstraintConfig constraint_from_json(const nlohmann::json& j) {
  return guarded("constraint", [&] {
    stereo::ConstraintConfig cc;
    cc.enabled = j.value("enabled", false);
    cc.sigma = j.value("sigma", 10.0);
    const auto mode = j.value("mode", std::string("weight"));
    if (mode == "weight") {
      cc.mode = stereo::ConstraintMode::Weight;
    } else if (mode == "restrict") {
      cc.mode = stereo::ConstraintMode::Restrict;
    } else {
      fail(ErrorKind::InvalidArgument, "constraint: unknown mode " + mode);
    }
    cc.validate();
    return cc;
  });
}

}  // namespace wbs::serialize
