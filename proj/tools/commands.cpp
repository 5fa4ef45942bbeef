#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

#include "wbs/dataset.hpp"
#include "wbs/error.hpp"
#include "wbs/evalbench.hpp"
#include "wbs/io.hpp"
#include "wbs/metrics.hpp"
#include "wbs/net.hpp"
#include "wbs/serialize.hpp"
#include "wbs/stereo.hpp"

namespace wbs::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

Json global_json(const Global& g) { return Json{{"seed", g.seed}, {"threads", g.threads}, {"out", g.out.string()}}; }

// Prints the fully materialised configuration and keeps a copy next to the
// outputs so the run can be repeated from it.
void announce(const Global& g, const std::string& command, Json args) {
  Json j;
  j["command"] = command;
  j["global"] = global_json(g);
  j["args"] = std::move(args);
  std::cout << "effective config: " << j.dump() << "\n";
  io::write_text(g.out / (command + "_config.json"), j.dump(2) + "\n");
}

evalbench::Logger stdout_logger() {
  return [](const std::string& msg) { std::cout << msg << "\n" << std::flush; };
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

render::Difficulty parse_difficulty(const std::string& s) {
  return s == "plain" ? render::Difficulty::PlainBackground : render::Difficulty::ClutteredBackground;
}

render::TextureFamily parse_family(const std::string& s) {
  return s == "mismatched" ? render::TextureFamily::Mismatched : render::TextureFamily::Standard;
}

std::pair<int, int> parse_drange(const std::string& s) {
  const auto colon = s.find(':');
  require(colon != std::string::npos, ErrorKind::InvalidArgument, "--drange expects min:max");
  try {
    std::size_t used = 0;
    const int lo = std::stoi(s.substr(0, colon), &used);
    require(used == colon, ErrorKind::InvalidArgument, "--drange: bad minimum");
    const std::string rest = s.substr(colon + 1);
    const int hi = std::stoi(rest, &used);
    require(used == rest.size(), ErrorKind::InvalidArgument, "--drange: bad maximum");
    require(lo <= hi, ErrorKind::DisparityRangeEmpty, "--drange: min > max");
    return {lo, hi};
  } catch (const std::logic_error&) {
    fail(ErrorKind::InvalidArgument, "--drange expects integers min:max");
  }
}

serialize::Calibration read_calibration(const std::string& path) {
  return serialize::calibration_from_json(serialize::parse_json(io::read_text(path), "calibration " + path));
}

}  // namespace

int gen_scenes(const Global& g, const GenScenesArgs& a) {
  announce(g, "gen-scenes",
           Json{{"count", a.count}, {"stream", a.stream}, {"family", a.family}, {"difficulty", a.difficulty},
                {"theta", a.thetas}, {"scale", a.scales}});
  const auto cases = evalbench::scene_family(g.seed, a.stream, a.count, parse_difficulty(a.difficulty),
                                             parse_family(a.family), a.thetas, a.scales);
  const evalbench::RigConfig rig;
  Json index = Json::array();
  for (const auto& sc : cases) {
    const auto pc = evalbench::prepare_case(sc, rig);
    const fs::path dir = g.out / "scenes" / sc.name;
    io::write_png(dir / "left.png", pc.imageL);
    io::write_png(dir / "right.png", pc.imageR);
    io::write_mask_pgm(dir / "mask_left.pgm", pc.maskL);
    io::write_mask_pgm(dir / "mask_right.pgm", pc.maskR);
    io::write_pfm(dir / "gt_depth.pfm", pc.gtDepth);
    io::write_mask_pgm(dir / "gt_mask.pgm", pc.gtMask);
    serialize::Calibration calib{pc.camL, pc.camR, pc.depthRange};
    io::write_text(dir / "calib.json", serialize::to_json(calib).dump(2) + "\n");
    Json meta;
    meta["name"] = sc.name;
    meta["theta"] = sc.thetaDeg;
    meta["scale"] = sc.scale;
    meta["disparityRange"] = Json::array({pc.pair.dMin, pc.pair.dMax});
    meta["scene"] = serialize::to_json(sc.scene);
    io::write_text(dir / "scene.json", meta.dump(2) + "\n");
    index.push_back(sc.name);
    std::cout << sc.name << ": disparity " << pc.pair.dMin << ".." << pc.pair.dMax << ", foreground depth "
              << pc.depthRange.first << ".." << pc.depthRange.second << " m\n";
  }
  io::write_text(g.out / "scenes" / "index.json", index.dump(2) + "\n");
  return 0;
}

int gen_patches(const Global& g, const GenPatchesArgs& a) {
  announce(g, "gen-patches",
           Json{{"samples", a.samples}, {"scenes", a.scenes}, {"theta", a.thetas}, {"variant", a.variant},
                {"stream", a.stream}, {"output", a.output}});
  evalbench::TrainSetConfig cfg;
  cfg.sceneCount = a.scenes;
  cfg.thetas = a.thetas;
  cfg.samples = a.samples;
  cfg.seed = g.seed;
  cfg.stream = a.stream;
  if (a.variant == "texture-mismatched") cfg = evalbench::texture_mismatched_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = evalbench::build_training_set(cfg, Backend::Parallel, stdout_logger());
  dataset::write_dataset(g.out / a.output, data);
  std::cout << "wrote " << data.samples.size() << " samples (" << data.positives() << " positive) to "
            << (g.out / a.output).string() << " in " << seconds_since(t0) << " s\n";
  return 0;
}

int train(const Global& g, const TrainArgs& a) {
  net::TrainConfig tc;
  tc.lr0 = a.lr;
  tc.epochs = a.epochs;
  tc.momentum = a.momentum;
  tc.weightDecay = a.weightDecay;
  tc.batchSize = a.batch;
  tc.seed = g.seed;
  tc.augment = !a.noAugment;
  tc.validate();
  announce(g, "train",
           Json{{"dataset", a.dataset}, {"validation", a.validation}, {"epochs", tc.epochs}, {"lr", tc.lr0},
                {"lrDecayFactor", tc.lrDecayFactor}, {"lrDecayEveryEpochs", tc.lrDecayEveryEpochs},
                {"momentum", tc.momentum}, {"wd", tc.weightDecay}, {"batch", tc.batchSize},
                {"augment", tc.augment}});
  const auto data = dataset::read_dataset(a.dataset);
  std::optional<dataset::PatchDataset> val;
  if (!a.validation.empty()) val = dataset::read_dataset(a.validation);
  std::printf("training: %zu samples, lr %g (x1/%g every %d epochs), momentum %g, weight decay %g, batch %d, "
              "%d epochs\n",
              data.samples.size(), tc.lr0, tc.lrDecayFactor, tc.lrDecayEveryEpochs, tc.momentum, tc.weightDecay,
              tc.batchSize, tc.epochs);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = net::train(data, tc, val ? &*val : nullptr, [](const net::EpochLog& e) {
    std::printf("epoch %2d  lr %.2e  loss %.5f  val acc %.4f\n", e.epoch, e.lr, e.meanLoss, e.valAccuracy);
    std::fflush(stdout);
  });
  net::save_weights(g.out / "weights.bin", result.net);
  net::write_loss_csv(g.out / "loss.csv", result.log);
  std::printf("wrote %s and %s in %.1f s\n", (g.out / "weights.bin").c_str(), (g.out / "loss.csv").c_str(),
              seconds_since(t0));
  return 0;
}

int infer(const Global& g, const InferArgs& a) {
  stereo::ConstraintConfig cc;
  cc.sigma = a.sigma;
  cc.mode = a.mode == "restrict" ? stereo::ConstraintMode::Restrict : stereo::ConstraintMode::Weight;
  require(a.maskLeft.empty() == a.maskRight.empty(), ErrorKind::InvalidArgument,
          "--mask-left and --mask-right must be given together");
  cc.enabled = !a.maskLeft.empty();
  cc.validate();
  announce(g, "infer",
           Json{{"left", a.left}, {"right", a.right}, {"calib", a.calib}, {"weights", a.weights},
                {"matcher", a.matcher}, {"maskLeft", a.maskLeft}, {"maskRight", a.maskRight},
                {"constraint", serialize::to_json(cc)}, {"pooling", a.pooling}, {"drange", a.drange}});
  const auto t0 = std::chrono::steady_clock::now();

  const auto calib = read_calibration(a.calib);
  const ImageBuffer left = io::read_png(a.left), right = io::read_png(a.right);
  require(left.width == calib.left.width && left.height == calib.left.height && right.width == calib.right.width &&
              right.height == calib.right.height,
          ErrorKind::ShapeMismatch, "infer: image size does not match calibration");
  auto pair = geometry::rectify(calib.left, calib.right, left, right);
  if (!a.drange.empty()) {
    std::tie(pair.dMin, pair.dMax) = parse_drange(a.drange);
  } else {
    require(calib.depthRange.has_value(), ErrorKind::InvalidArgument,
            "infer: no disparity range (pass --drange or add depthRange to the calibration)");
    std::tie(pair.dMin, pair.dMax) =
        geometry::disparity_range_for_depths(pair.rig, calib.depthRange->first, calib.depthRange->second);
  }

  matchcost::MatcherSpec spec;
  if (a.matcher == "learned") {
    require(!a.weights.empty(), ErrorKind::MissingWeights, "infer: learned matcher needs --weights");
    spec = matchcost::MatcherSpec::learned(std::make_shared<net::SiameseNetwork>(net::load_weights(a.weights)),
                                           a.pooling == "on");
    spec.weightsPath = a.weights;
  } else {
    spec = a.matcher == "ncc" ? matchcost::MatcherSpec::ncc() : matchcost::MatcherSpec::sad();
  }

  stereo::MaskPair masks;
  if (cc.enabled) {
    const auto ml = io::read_mask_pgm(a.maskLeft), mr = io::read_mask_pgm(a.maskRight);
    require(ml.width == left.width && ml.height == left.height && mr.width == right.width &&
                mr.height == right.height,
            ErrorKind::MaskSizeMismatch, "infer: mask size does not match image");
    masks.left = geometry::warp_mask(ml, pair.rig.Hleft, pair.width(), pair.height());
    masks.right = geometry::warp_mask(mr, pair.rig.Hright, pair.width(), pair.height());
  }

  const auto rec = stereo::reconstruct(pair, spec, cc.enabled ? &masks : nullptr, cc);

  Grid<float> disparity(rec.disparity.width, rec.disparity.height, kInvalidDepth);
  SemanticMask valid(rec.disparity.width, rec.disparity.height, 0);
  std::size_t validCount = 0;
  for (std::size_t i = 0; i < disparity.values.size(); ++i) {
    if (!rec.disparity.valid[i]) continue;
    disparity.values[i] = rec.disparity.values[i];
    valid.values[i] = 1;
    ++validCount;
  }
  io::write_pfm(g.out / "disparity.pfm", disparity);
  io::write_pfm(g.out / "depth.pfm", rec.depth);
  io::write_mask_pgm(g.out / "valid.pgm", valid);
  std::vector<io::ColoredPoint> pts(rec.points.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].position = rec.points[i];
    pts[i].r = rec.colors[i][0];
    pts[i].g = rec.colors[i][1];
    pts[i].b = rec.colors[i][2];
  }
  io::write_ply(g.out / "cloud.ply", pts);
  if (calib.depthRange) {
    io::write_png(g.out / "depth.png",
                  io::colorize_depth(rec.depth, calib.depthRange->first, calib.depthRange->second));
  }
  std::printf("disparity %d..%d, coverage %.4f (%zu of %zu pixels), %zu points, %.2f s\n", pair.dMin, pair.dMax,
              static_cast<double>(validCount) / static_cast<double>(valid.size()), validCount, valid.size(),
              pts.size(), seconds_since(t0));
  return 0;
}

int eval(const Global&, const EvalArgs& a) {
  const auto pred = io::read_pfm(a.pred);
  const auto gt = io::read_pfm(a.gt);
  const auto mask = io::read_mask_pgm(a.mask);
  const auto report = metrics::evaluate(pred, gt, mask);
  std::cout << metrics::to_json(report) << "\n";
  return 0;
}

int bench(const Global& g, const BenchArgs& a, bool outExplicit) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.domainShift) {
    auto cfg = evalbench::default_domain_shift(g.seed);
    cfg.trainSet.samples = a.samples;
    cfg.trainer.epochs = a.epochs;
    cfg.outputDir = g.out;
    announce(g, "bench", Json{{"domainShift", true}, {"variant", a.variant}, {"samples", a.samples},
                              {"epochs", a.epochs}, {"tests", cfg.tests.size()}});
    std::vector<evalbench::TrainVariant> variants;
    for (auto v : {evalbench::TrainVariant::SceneMatched, evalbench::TrainVariant::TextureMismatched,
                   evalbench::TrainVariant::NoAugmentation}) {
      if (a.variant == "all" || a.variant == evalbench::to_string(v)) variants.push_back(v);
    }
    Json all = Json::array();
    std::vector<std::pair<std::string, metrics::DepthErrorReport>> rows;
    for (auto v : variants) {
      const auto rep = evalbench::domain_shift_experiment(v, cfg, Backend::Parallel, nullptr, stdout_logger());
      Json j;
      j["variant"] = evalbench::to_string(v);
      j["meanRmse"] = rep.meanRmse;
      j["cells"] = Json::array();
      for (const auto& c : rep.cells) {
        j["cells"].push_back(evalbench::cell_to_json(c));
        rows.emplace_back(c.id, c.report);
      }
      all.push_back(j);
    }
    io::write_text(g.out / "tables" / "domain_shift.json", all.dump(2) + "\n");
    const std::string table = metrics::format_table(rows);
    io::write_text(g.out / "tables" / "domain_shift.txt", table);
    std::cout << table;
    for (const auto& j : all) {
      std::printf("%-20s mean RMSE %.5f m\n", j["variant"].get<std::string>().c_str(), j["meanRmse"].get<double>());
    }
  } else {
    require(!a.config.empty(), ErrorKind::InvalidArgument, "bench: --config or --domain-shift required");
    const auto j = serialize::parse_json(io::read_text(a.config), "suite config " + a.config);
    auto suite = evalbench::suite_from_json(j);
    if (outExplicit || !j.contains("outputDir")) suite.outputDir = g.out;
    announce(g, "bench", evalbench::suite_to_json(suite));
    const auto result = evalbench::run_suite(suite, Backend::Parallel, stdout_logger());
    std::cout << result.table;
  }
  std::printf("bench finished in %.1f s\n", seconds_since(t0));
  return 0;
}

int export_ply(const Global& g, const ExportPlyArgs& a) {
  announce(g, "export-ply", Json{{"depth", a.depth}, {"calib", a.calib}, {"image", a.image}});
  const auto calib = read_calibration(a.calib);
  const auto rig = geometry::rectify_rig(calib.left, calib.right);
  const auto depth = io::read_pfm(a.depth);
  require(depth.width == rig.left.width && depth.height == rig.left.height, ErrorKind::ShapeMismatch,
          "export-ply: depth size does not match calibration");
  ImageBuffer colours;
  if (!a.image.empty()) {
    const auto img = io::read_png(a.image);
    require(img.width == calib.left.width && img.height == calib.left.height, ErrorKind::ShapeMismatch,
            "export-ply: image size does not match calibration");
    colours = geometry::warp_homography(img, rig.Hleft, depth.width, depth.height, nullptr);
  }
  const auto points = geometry::depth_to_points(depth, rig.left.intrinsics());
  std::vector<io::ColoredPoint> pts;
  pts.reserve(points.size());
  std::size_t k = 0;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!is_valid_depth(depth.at(x, y))) continue;
      io::ColoredPoint p;
      p.position = points[k++];
      if (!colours.empty()) {
        const auto c = [&](int ch) {
          return static_cast<std::uint8_t>(
              std::lround(std::clamp(colours.at(x, y, colours.channels == 3 ? ch : 0), 0.0f, 1.0f) * 255.0f));
        };
        p.r = c(0);
        p.g = c(1);
        p.b = c(2);
      }
      pts.push_back(p);
    }
  }
  io::write_ply(g.out / "cloud.ply", pts);
  std::printf("wrote %zu points to %s\n", pts.size(), (g.out / "cloud.ply").c_str());
  return 0;
}

}  // namespace wbs::cli
