#include "wbs/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "wbs/error.hpp"
#include "wbs/io.hpp"
#include "wbs/rng.hpp"
#include "wbs/serialize.hpp"

namespace wbs::evalbench {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void note(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string constraint_tag(const stereo::ConstraintConfig& cc) {
  if (!cc.enabled) return "nc";
  return (cc.mode == stereo::ConstraintMode::Weight ? "w" : "r") + fmt_number(cc.sigma);
}

Grid<float> disparity_from_depths(const render::RenderedView& v, const geometry::RectifiedRig& rig) {
  Grid<float> out(v.depth.width, v.depth.height, std::numeric_limits<float>::quiet_NaN());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double z = v.depth.values[i];
    if (!is_valid_depth(z)) z = v.backgroundDepth.values[i];
    if (!is_valid_depth(z)) continue;
    out.values[i] = static_cast<float>(rig.f * rig.B / z - rig.doffs);
  }
  return out;
}

render::Difficulty difficulty_from(const std::string& s) {
  if (s == "plain") return render::Difficulty::PlainBackground;
  if (s == "cluttered") return render::Difficulty::ClutteredBackground;
  fail(ErrorKind::InvalidArgument, "suite: unknown difficulty " + s);
}

render::TextureFamily family_from(const std::string& s) {
  if (s == "standard") return render::TextureFamily::Standard;
  if (s == "mismatched") return render::TextureFamily::Mismatched;
  fail(ErrorKind::InvalidArgument, "suite: unknown texture family " + s);
}

std::string case_name(const std::string& prefix, double theta, double scale) {
  return prefix + "_t" + fmt_number(theta) + "_x" + fmt_number(scale);
}

}  // namespace

ImageBuffer quantize8(const ImageBuffer& image) {
  ImageBuffer out = image;
  for (float& s : out.samples) s = static_cast<float>(std::lround(std::clamp(s, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

std::pair<double, double> padded_depth_range(const DepthMap& depth, const SemanticMask& mask) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    if (!mask.values[i] || !is_valid_depth(depth.values[i])) continue;
    lo = std::min<double>(lo, depth.values[i]);
    hi = std::max<double>(hi, depth.values[i]);
  }
  require(hi > 0.0, ErrorKind::FrustumMiss, "depth range: no foreground depth");
  return {lo * 0.9, hi * 1.1};
}

PreparedCase prepare_case(const SceneCase& sc, const RigConfig& rig, Backend backend) {
  require(sc.thetaDeg > 0.0 && sc.thetaDeg <= 45.0, ErrorKind::InvalidArgument, "case: theta must be in (0, 45]");
  require(sc.scale > 0.0, ErrorKind::InvalidArgument, "case: scale must be > 0");
  PreparedCase pc;
  pc.spec = sc;
  std::tie(pc.camL, pc.camR) = geometry::build_rig(rig.distance, sc.thetaDeg, rig.intrinsics.scaled(sc.scale));
  auto viewL = render::render_view(sc.scene, pc.camL, backend);
  auto viewR = render::render_view(sc.scene, pc.camR, backend);
  pc.imageL = quantize8(viewL.image);
  pc.imageR = quantize8(viewR.image);
  pc.maskL = std::move(viewL.mask);
  pc.maskR = std::move(viewR.mask);
  pc.pair = geometry::rectify(pc.camL, pc.camR, pc.imageL, pc.imageR, backend);
  const auto& rr = pc.pair.rig;

  const auto gtL = render::render_view(sc.scene, rr.left, backend, true);
  const auto gtR = render::render_view(sc.scene, rr.right, backend, true);
  pc.gtDepth = gtL.depth;
  pc.gtMask = gtL.mask;
  const auto rangeL = padded_depth_range(gtL.depth, gtL.mask);
  const auto rangeR = padded_depth_range(gtR.depth, gtR.mask);
  pc.depthRange = {std::min(rangeL.first, rangeR.first), std::max(rangeL.second, rangeR.second)};
  std::tie(pc.pair.dMin, pc.pair.dMax) =
      geometry::disparity_range_for_depths(rr, pc.depthRange.first, pc.depthRange.second);

  const int W = pc.pair.width(), H = pc.pair.height();
  pc.masks.left = geometry::warp_mask(pc.maskL, rr.Hleft, W, H);
  pc.masks.right = geometry::warp_mask(pc.maskR, rr.Hright, W, H);
  pc.gtDisparityLeft = disparity_from_depths(gtL, rr);
  pc.gtDisparityRight = disparity_from_depths(gtR, rr);
  return pc;
}

matchcost::GroundTruthScorer oracle_scorer(const PreparedCase& pc) {
  return {pc.gtDisparityLeft, pc.gtDisparityRight};
}

void BenchmarkSuite::validate() const {
  require(!scenes.empty(), ErrorKind::InvalidArgument, "suite: no scenes");
  require(!matchers.empty(), ErrorKind::InvalidArgument, "suite: no matchers");
  require(!constraintVariants.empty() && !poolingVariants.empty(), ErrorKind::InvalidArgument,
          "suite: empty variant list");
  for (const auto& s : scenes) {
    require(s.thetaDeg > 0.0 && s.thetaDeg <= 45.0, ErrorKind::InvalidArgument, "suite: theta must be in (0, 45]");
  }
  for (const auto& m : matchers) m.spec.validate();
  for (const auto& c : constraintVariants) c.validate();
}

const CellResult& SuiteResult::find(const std::string& scene, const std::string& matcher, bool pooling,
                                    bool constrained) const {
  for (const auto& c : cells) {
    if (c.scene == scene && c.matcher == matcher && c.pooling == pooling && c.constraint.enabled == constrained) {
      return c;
    }
  }
  fail(ErrorKind::InvalidArgument, "suite result: no cell " + scene + "/" + matcher);
}

Json cell_to_json(const CellResult& c) {
  Json j;
  j["id"] = c.id;
  j["scene"] = c.scene;
  j["theta"] = c.thetaDeg;
  j["scale"] = c.scale;
  j["matcher"] = c.matcher;
  j["pooling"] = c.pooling;
  j["constraint"] = serialize::to_json(c.constraint);
  j["report"] = Json::parse(metrics::to_json(c.report));
  return j;
}

SuiteResult run_suite(const BenchmarkSuite& suite, Backend backend, const Logger& log) {
  suite.validate();
  const bool persist = !suite.outputDir.empty();
  const fs::path tables = suite.outputDir / "tables", depthDir = suite.outputDir / "depth",
                 plyDir = suite.outputDir / "ply";
  if (persist) {
    for (const auto& d : {tables, depthDir, plyDir}) fs::create_directories(d);
  }

  SuiteResult result;
  std::vector<std::pair<std::string, metrics::DepthErrorReport>> rows;
  for (const auto& sc : suite.scenes) {
    note(log, "scene " + sc.name);
    const PreparedCase pc = prepare_case(sc, suite.rig, backend);
    if (persist) {
      io::write_pfm(depthDir / (sc.name + "_gt.pfm"), pc.gtDepth);
      io::write_mask_pgm(depthDir / (sc.name + "_gtmask.pgm"), pc.gtMask);
    }
    for (const auto& entry : suite.matchers) {
      // Per-size volumes are computed once; pooled and single-scale variants
      // are both averages over a prefix of them.
      matchcost::MatcherSpec spec = entry.spec;
      const bool learned = spec.kind == matchcost::MatcherKind::Learned;
      if (learned) spec.pooling = true;
      const auto perSize = stereo::scale_volumes(pc.pair, spec, backend);
      const std::vector<bool> poolings = learned ? suite.poolingVariants : std::vector<bool>{entry.spec.pooling};
      for (bool pooling : poolings) {
        const std::vector<stereo::VolumePair> used =
            pooling ? perSize : std::vector<stereo::VolumePair>{perSize.front()};
        for (const auto& cc : suite.constraintVariants) {
          const auto vols = stereo::combine_volumes(used, &pc.masks, cc, backend);
          auto rec = stereo::reconstruct_from_volumes(pc.pair, vols.left, vols.right, backend);
          CellResult cell;
          cell.scene = sc.name;
          cell.thetaDeg = sc.thetaDeg;
          cell.scale = sc.scale;
          cell.matcher = entry.label;
          cell.pooling = pooling;
          cell.constraint = cc;
          cell.id = sc.name + "_" + entry.label + "_" + (pooling ? "pool" : "single") + "_" + constraint_tag(cc);
          cell.report = metrics::evaluate(rec.depth, pc.gtDepth, pc.gtMask);
          note(log, "  " + cell.id + " rmse=" + fmt_number(cell.report.rmse) +
                        " coverage=" + fmt_number(cell.report.coverage));
          if (persist) {
            io::write_pfm(depthDir / (cell.id + ".pfm"), rec.depth);
            const auto [zMin, zMax] = pc.depthRange;
            io::write_png(depthDir / (cell.id + ".png"), io::colorize_depth(rec.depth, zMin, zMax));
            io::write_text(tables / (cell.id + ".json"), cell_to_json(cell).dump(2) + "\n");
            if (suite.writePly) {
              std::vector<io::ColoredPoint> pts(rec.points.size());
              for (std::size_t i = 0; i < pts.size(); ++i) {
                pts[i].position = rec.points[i];
                pts[i].r = rec.colors[i][0];
                pts[i].g = rec.colors[i][1];
                pts[i].b = rec.colors[i][2];
              }
              io::write_ply(plyDir / (cell.id + ".ply"), pts);
            }
          }
          rows.emplace_back(cell.id, cell.report);
          result.cells.push_back(std::move(cell));
        }
      }
    }
  }
  result.table = metrics::format_table(rows);
  if (persist) {
    Json all;
    all["suite"] = suite_to_json(suite);
    all["cells"] = Json::array();
    for (const auto& c : result.cells) all["cells"].push_back(cell_to_json(c));
    io::write_text(tables / "results.json", all.dump(2) + "\n");
    io::write_text(tables / "results.txt", result.table);
  }
  return result;
}

std::vector<SceneCase> scene_family(std::uint64_t seed, const std::string& stream, int count,
                                    render::Difficulty difficulty, render::TextureFamily family,
                                    const std::vector<double>& thetas, const std::vector<double>& scales) {
  std::vector<SceneCase> out;
  const std::uint64_t base = substream(seed, stream + "-scenes");
  for (int i = 0; i < count; ++i) {
    const auto scene = render::generate_scene(splitmix64(base + static_cast<std::uint64_t>(i)), difficulty, family);
    for (double scale : scales) {
      for (double theta : thetas) {
        out.push_back({case_name(stream + std::to_string(i), theta, scale), scene, theta, scale});
      }
    }
  }
  return out;
}

namespace {

Json rig_json(const RigConfig& r) {
  const auto& k = r.intrinsics;
  return Json{{"distance", r.distance}, {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
              {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

RigConfig rig_from(const nlohmann::json& j) {
  RigConfig r;
  r.distance = j.value("distance", r.distance);
  auto& k = r.intrinsics;
  k.fx = j.value("fx", k.fx);
  k.fy = j.value("fy", k.fy);
  k.cx = j.value("cx", k.cx);
  k.cy = j.value("cy", k.cy);
  k.width = j.value("width", k.width);
  k.height = j.value("height", k.height);
  require(r.distance > 0 && k.fx > 0 && k.fy > 0 && k.width > 0 && k.height > 0, ErrorKind::InvalidArgument,
          "suite: invalid rig");
  return r;
}

}  // namespace

BenchmarkSuite suite_from_json(const nlohmann::json& j) {
  try {
    BenchmarkSuite s;
    s.outputDir = j.value("outputDir", std::string("bench_out"));
    if (j.contains("rig")) s.rig = rig_from(j.at("rig"));
    s.writePly = j.value("writePly", true);
    if (j.contains("sceneFamily")) {
      const auto& f = j.at("sceneFamily");
      auto cases = scene_family(f.value("seed", std::uint64_t{42}), f.value("stream", std::string("test")),
                                f.value("count", 4), difficulty_from(f.value("difficulty", std::string("cluttered"))),
                                family_from(f.value("family", std::string("standard"))),
                                f.value("thetas", std::vector<double>{20.0, 40.0}),
                                f.value("scales", std::vector<double>{1.0}));
      s.scenes.insert(s.scenes.end(), cases.begin(), cases.end());
    }
    for (const auto& e : j.value("scenes", nlohmann::json::array())) {
      const auto seed = e.at("seed").get<std::uint64_t>();
      const auto scene = render::generate_scene(seed, difficulty_from(e.value("difficulty", std::string("cluttered"))),
                                                family_from(e.value("family", std::string("standard"))));
      const std::string prefix = e.value("name", "scene" + std::to_string(seed));
      for (double scale : e.value("scales", std::vector<double>{1.0})) {
        for (double theta : e.value("thetas", std::vector<double>{20.0})) {
          s.scenes.push_back({case_name(prefix, theta, scale), scene, theta, scale});
        }
      }
    }
    for (const auto& m : j.at("matchers")) {
      MatcherEntry entry;
      entry.spec = serialize::matcher_from_json(m);
      entry.label = m.value("label", std::string(matchcost::to_string(entry.spec.kind)));
      if (entry.spec.kind == matchcost::MatcherKind::Learned) {
        require(!entry.spec.weightsPath.empty(), ErrorKind::MissingWeights, "suite: learned matcher without weights");
        entry.spec.network = std::make_shared<net::SiameseNetwork>(net::load_weights(entry.spec.weightsPath));
      }
      s.matchers.push_back(std::move(entry));
    }
    if (j.contains("constraintVariants")) {
      s.constraintVariants.clear();
      for (const auto& c : j.at("constraintVariants")) s.constraintVariants.push_back(serialize::constraint_from_json(c));
    }
    if (j.contains("poolingVariants")) s.poolingVariants = j.at("poolingVariants").get<std::vector<bool>>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("suite config: ") + e.what());
  }
}

Json suite_to_json(const BenchmarkSuite& s) {
  Json j;
  j["outputDir"] = s.outputDir.string();
  j["rig"] = rig_json(s.rig);
  j["writePly"] = s.writePly;
  j["scenes"] = Json::array();
  for (const auto& c : s.scenes) {
    j["scenes"].push_back(
        Json{{"name", c.name}, {"theta", c.thetaDeg}, {"scale", c.scale}, {"scene", serialize::to_json(c.scene)}});
  }
  j["matchers"] = Json::array();
  for (const auto& m : s.matchers) {
    Json e = serialize::to_json(m.spec);
    e["label"] = m.label;
    j["matchers"].push_back(e);
  }
  j["constraintVariants"] = Json::array();
  for (const auto& c : s.constraintVariants) j["constraintVariants"].push_back(serialize::to_json(c));
  j["poolingVariants"] = s.poolingVariants;
  return j;
}

dataset::PatchDataset build_training_set(const TrainSetConfig& cfg, Backend backend, const Logger& log) {
  require(cfg.sceneCount > 0 && !cfg.thetas.empty(), ErrorKind::InvalidArgument, "training set: empty plan");
  require(cfg.samples % 2 == 0, ErrorKind::InvalidArgument, "training set: sample count must be even");
  const std::size_t cells = static_cast<std::size_t>(cfg.sceneCount) * cfg.thetas.size();
  const std::size_t pairs = cfg.samples / 2;
  const std::uint64_t sceneBase = substream(cfg.seed, cfg.stream + "-scenes");
  const std::uint64_t samplerBase = substream(cfg.seed, cfg.stream + "-sampler");

  dataset::PatchDataset out;
  out.samples.reserve(cfg.samples);
  std::size_t cell = 0;
  for (int i = 0; i < cfg.sceneCount; ++i) {
    const auto difficulty = cfg.difficulty.value_or(i % 2 == 0 ? render::Difficulty::PlainBackground
                                                               : render::Difficulty::ClutteredBackground);
    const auto scene =
        render::generate_scene(splitmix64(sceneBase + static_cast<std::uint64_t>(i)), difficulty, cfg.family);
    for (double theta : cfg.thetas) {
      const std::size_t cellPairs = pairs / cells + (cell < pairs % cells ? 1 : 0);
      const auto [camL, camR] = geometry::build_rig(cfg.rig.distance, theta, cfg.rig.intrinsics);
      const auto vL = render::render_view(scene, camL, backend);
      const auto vR = render::render_view(scene, camR, backend);
      auto pair = geometry::rectify(camL, camR, quantize8(vL.image), quantize8(vR.image), backend);
      dataset::SamplerConfig sc;
      sc.count = static_cast<int>(2 * cellPairs);
      sc.seed = splitmix64(samplerBase + cell);
      sc.surface = cfg.surface;
      auto part = dataset::sample_pairs(scene, pair, theta, sc);
      out.patchSize = part.patchSize;
      out.storedSize = part.storedSize;
      for (auto& s : part.samples) out.samples.push_back(std::move(s));
      note(log, "  training cell " + std::to_string(cell + 1) + "/" + std::to_string(cells) + " (" +
                    std::to_string(out.samples.size()) + " samples)");
      ++cell;
    }
  }
  out.validate();
  return out;
}

const char* to_string(TrainVariant v) {
  switch (v) {
    case TrainVariant::SceneMatched: return "scene-matched";
    case TrainVariant::TextureMismatched: return "texture-mismatched";
    case TrainVariant::NoAugmentation: return "no-augmentation";
  }
  return "?";
}

TrainSetConfig texture_mismatched_config(const TrainSetConfig& base) {
  TrainSetConfig c = base;
  c.stream = base.stream + "-planar";
  c.thetas = {4.0, 6.0, 8.0};
  c.surface = render::SurfaceSelect::Background;
  c.difficulty = render::Difficulty::ClutteredBackground;
  return c;
}

DomainShiftConfig default_domain_shift(std::uint64_t seed) {
  DomainShiftConfig c;
  c.trainSet.seed = seed;
  c.trainer.seed = seed;
  c.tests = scene_family(seed, "mismatched", 4, render::Difficulty::ClutteredBackground,
                         render::TextureFamily::Mismatched, {20.0}, {0.75, 1.5});
  return c;
}

DomainShiftReport domain_shift_experiment(TrainVariant variant, const DomainShiftConfig& cfg, Backend backend,
                                          const net::SiameseNetwork* pretrained, const Logger& log) {
  DomainShiftReport report;
  report.variant = variant;
  const std::string tag = to_string(variant);
  const bool persist = !cfg.outputDir.empty();

  std::shared_ptr<net::SiameseNetwork> network;
  if (pretrained != nullptr) {
    network = std::make_shared<net::SiameseNetwork>(*pretrained);
  } else {
    const TrainSetConfig setCfg =
        variant == TrainVariant::TextureMismatched ? texture_mismatched_config(cfg.trainSet) : cfg.trainSet;
    note(log, "building training set for " + tag);
    const auto data = build_training_set(setCfg, backend, log);
    net::TrainConfig tc = cfg.trainer;
    tc.backend = backend;
    if (variant == TrainVariant::NoAugmentation) tc.augment = false;
    auto trained = net::train(data, tc, nullptr, [&](const net::EpochLog& e) {
      note(log, "  " + tag + " epoch " + std::to_string(e.epoch) + " loss " + fmt_number(e.meanLoss));
    });
    report.log = trained.log;
    network = std::make_shared<net::SiameseNetwork>(std::move(trained.net));
    if (persist) {
      net::save_weights(cfg.outputDir / "weights" / (tag + ".bin"), *network);
      net::write_loss_csv(cfg.outputDir / "logs" / (tag + "_loss.csv"), report.log);
    }
  }

  BenchmarkSuite suite;
  suite.scenes = cfg.tests;
  suite.matchers = {{tag, matchcost::MatcherSpec::learned(network, true)}};
  suite.rig = cfg.rig;
  suite.outputDir = persist ? cfg.outputDir / ("domain_" + tag) : fs::path{};
  suite.writePly = false;
  auto res = run_suite(suite, backend, log);
  report.cells = std::move(res.cells);
  double sum = 0.0;
  for (const auto& c : report.cells) sum += c.report.rmse;
  report.meanRmse = report.cells.empty() ? 0.0 : sum / static_cast<double>(report.cells.size());
  return report;
}

}  // namespace wbs::evalbench
