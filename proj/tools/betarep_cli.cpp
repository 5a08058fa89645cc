// betarep: command-line front end for the Beta Representation toolkit.
//
//   betarep convert     odgt annotations -> beta-representation JSON lines
//   betarep nms         suppress duplicate detections with a chosen strategy
//   betarep eval        AP and log-average miss rate of detections
//   betarep compare     pairwise fIoU / vIoU / symmetrized-KL statistics
//   betarep render-mask beta mask as PGM + CSV
//   betarep synth       seeded synthetic crowded-scene annotations
//
// Exit codes: 0 success, 1 usage / parse / IO error, 2 internal invariant violation.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "betarep/betarep.hpp"

namespace {

using betarep::Json;

struct UsageError : betarep::Error {
  using betarep::Error::Error;
};

struct IoError : betarep::Error {
  using betarep::Error::Error;
};

/// Flags shared by every subcommand; unset optionals leave the config value alone.
struct CommonOptions {
  std::string config_path;
  std::string out;
  std::optional<std::string> strategy;
  std::vector<double> kl_thresholds;
  std::optional<double> iou_threshold;
  std::optional<std::size_t> grid;
  std::optional<std::size_t> threads;
};

betarep::ToolkitConfig resolve_config(const CommonOptions& opt) {
  betarep::ToolkitConfig cfg;
  std::string path = opt.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("BETAREP_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) cfg = betarep::load_config(path);

  if (opt.strategy) {
    const auto preset = betarep::find_preset(*opt.strategy);
    if (!preset) throw UsageError("unknown strategy \"" + *opt.strategy + "\"");
    betarep::apply_preset(cfg.nms, *preset);
  }
  if (!opt.kl_thresholds.empty()) {
    cfg.nms.kl_threshold = opt.kl_thresholds.front();
    cfg.metrics.kl_thresholds = opt.kl_thresholds;
  }
  if (opt.iou_threshold) {
    cfg.nms.iou_threshold = *opt.iou_threshold;
    cfg.metrics.match_iou = *opt.iou_threshold;
  }
  if (opt.grid) cfg.grid.resolution = *opt.grid;
  if (opt.threads) cfg.threads = *opt.threads;
  try {
    cfg.finalize();
  } catch (const betarep::DomainError& e) {
    throw betarep::ConfigError(e.what());
  }
  return cfg;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

/// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw IoError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw IoError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_warnings(const betarep::ParseWarnings& w) {
  for (const auto& m : w.messages) std::cerr << "warning: " << m << '\n';
}

// ---------------------------------------------------------------- convert

int cmd_convert(const std::string& input, const CommonOptions& opt) {
  const auto cfg = resolve_config(opt);
  auto in = open_input(input);
  betarep::ParseWarnings warnings;
  betarep::ClampDiagnostics diag;
  Output out(opt.out);

  std::size_t scenes = 0, persons = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (betarep::detail::is_blank(line)) continue;
    const auto scene = betarep::parse_odgt(line, line_no, &warnings);
    ++scenes;
    for (std::size_t i = 0; i < scene.persons.size(); ++i) {
      const auto& p = scene.persons[i];
      const auto bp = betarep::boxes_to_beta(p.boxes, cfg.weights, &diag);
      Json rec{{"image", scene.image_id},
               {"index", i},
               {"tag", p.tag},
               {"ignore", p.ignore},
               {"beta", betarep::beta_to_json(bp)}};
      out.stream() << rec.dump() << '\n';
      ++persons;
    }
  }
  out.finish();
  print_warnings(warnings);
  Json summary{{"scenes", scenes},
               {"persons", persons},
               {"warnings", warnings.messages.size()},
               {"shape_fits", diag.fits()},
               {"shape_clamped", diag.clamped()},
               {"clamp_rate", diag.rate()},
               {"config", betarep::config_to_json(cfg)}};
  std::cerr << summary.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- nms

/// Groups detections by image (sorted by image id). Groups whose records do
/// not all carry ids get ids from a content order (score descending, then
/// the eight parameters), so results do not depend on the file order.
std::map<std::string, std::vector<betarep::Detection>> group_detections(
    std::vector<betarep::ImageDetection> records) {
  std::map<std::string, std::vector<betarep::ImageDetection>> by_image;
  for (auto& r : records) by_image[r.image].push_back(std::move(r));
  std::map<std::string, std::vector<betarep::Detection>> out;
  for (auto& [image, recs] : by_image) {
    const bool all_explicit =
        std::all_of(recs.begin(), recs.end(), [](const auto& r) { return r.explicit_id; });
    if (!all_explicit) {
      auto key = [](const betarep::Detection& d) {
        const auto& p = d.pedestrian;
        return std::make_tuple(-d.score, p.boundary.l, p.boundary.t, p.boundary.r, p.boundary.b,
                               p.x.alpha, p.x.beta, p.y.alpha, p.y.beta);
      };
      std::stable_sort(recs.begin(), recs.end(),
                       [&](const auto& a, const auto& b) { return key(a.det) < key(b.det); });
      for (std::size_t i = 0; i < recs.size(); ++i) recs[i].det.id = i;
    }
    auto& dets = out[image];
    for (auto& r : recs) dets.push_back(r.det);
  }
  return out;
}

int cmd_nms(const std::string& input, const CommonOptions& opt) {
  const auto cfg = resolve_config(opt);
  auto in = open_input(input);
  const auto grouped = group_detections(betarep::read_detections(in));
  Output out(opt.out);

  using Clock = std::chrono::steady_clock;
  double total_ms = 0.0, max_ms = 0.0;
  std::size_t input_count = 0, kept_count = 0;
  for (const auto& [image, dets] : grouped) {
    const auto t0 = Clock::now();
    const auto kept = betarep::greedy_nms(dets, cfg.nms);
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    total_ms += ms;
    max_ms = std::max(max_ms, ms);
    input_count += dets.size();
    kept_count += kept.size();
    for (const auto& d : kept) out.stream() << betarep::serialize_detection({image, d, true}) << '\n';
  }
  out.finish();
  const double images = static_cast<double>(grouped.size());
  Json report{{"images", grouped.size()},
              {"input", input_count},
              {"kept", kept_count},
              {"time_ms",
               {{"total", total_ms},
                {"mean_per_image", grouped.empty() ? 0.0 : total_ms / images},
                {"max_per_image", max_ms}}},
              {"config", betarep::config_to_json(cfg)}};
  std::cerr << report.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& det_path, const std::string& ann_path, const CommonOptions& opt) {
  const auto cfg = resolve_config(opt);
  auto ann_in = open_input(ann_path);
  betarep::ParseWarnings warnings;
  const auto scenes = betarep::read_odgt(ann_in, &warnings);
  auto det_in = open_input(det_path);
  auto grouped = group_detections(betarep::read_detections(det_in));

  std::vector<std::vector<betarep::Detection>> per_scene;
  per_scene.reserve(scenes.size());
  for (const auto& s : scenes) {
    auto it = grouped.find(s.image_id);
    if (it == grouped.end()) {
      per_scene.emplace_back();
    } else {
      per_scene.push_back(std::move(it->second));
      grouped.erase(it);
    }
  }
  for (const auto& [image, _] : grouped) {
    warnings.add(0, "detections for unannotated image \"" + image + "\" ignored");
  }
  print_warnings(warnings);

  const auto rep = betarep::evaluate(scenes, per_scene, cfg.metrics.match_iou);
  Json report{{"AP", rep.ap},       {"MR2", rep.mr2}, {"images", rep.images}, {"gt", rep.gt},
              {"tp", rep.tp},       {"fp", rep.fp},   {"config", betarep::config_to_json(cfg)}};
  Output out(opt.out);
  out.stream() << report.dump(2) << '\n';
  out.finish();
  return 0;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const std::string& ann_path, const CommonOptions& opt) {
  const auto cfg = resolve_config(opt);
  auto in = open_input(ann_path);
  betarep::ParseWarnings warnings;
  const auto scenes = betarep::read_odgt(in, &warnings);
  print_warnings(warnings);

  betarep::PairStatsConfig pc;
  pc.weights = cfg.weights;
  pc.grid = cfg.grid;
  pc.iou_threshold = cfg.nms.iou_threshold;
  pc.viou_threshold = cfg.nms.viou_threshold;
  pc.kl_thresholds = cfg.metrics.kl_thresholds;
  pc.threads = cfg.threads;
  const auto stats = betarep::pair_statistics(scenes, pc);

  Output out(opt.out);
  auto& os = out.stream();
  os << "image,idx_a,idx_b,fiou,viou,symkl\n";
  for (const auto& r : stats.records) {
    os << r.image << ',' << r.idx_a << ',' << r.idx_b << ',' << fmt_double(r.fiou) << ','
       << fmt_double(r.viou) << ',' << fmt_double(r.symkl) << '\n';
  }
  out.finish();

  const auto& s = stats.summary;
  Json kl = Json::array();
  for (std::size_t i = 0; i < s.kl_thresholds.size(); ++i) {
    kl.push_back({{"threshold", s.kl_thresholds[i]}, {"failed", s.kl_failed[i]}});
  }
  Json summary{{"scenes", scenes.size()},
               {"pairs", s.pairs},
               {"fiou_failed", {{"threshold", pc.iou_threshold}, {"failed", s.fiou_failed}}},
               {"viou_failed", {{"threshold", pc.viou_threshold}, {"failed", s.viou_failed}}},
               {"kl_failed", kl},
               {"shape_fits", s.shape_fits},
               {"shape_clamped", s.shape_clamped},
               {"config", betarep::config_to_json(cfg)}};
  std::cerr << summary.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- render-mask

betarep::BetaPedestrian parse_beta_arg(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--beta expects 8 comma-separated numbers, got \"" + text + "\"");
    }
  }
  if (v.size() != 8) throw UsageError("--beta expects 8 comma-separated numbers");
  betarep::BetaPedestrian bp{{v[0], v[1], v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
  if (!bp.valid()) throw UsageError("--beta does not describe a valid beta representation");
  return bp;
}

int cmd_render_mask(const std::string& beta_text, std::size_t h, std::size_t w,
                    const CommonOptions& opt) {
  if (opt.out.empty()) throw UsageError("render-mask needs --out <prefix>");
  const auto mask = betarep::render_mask(parse_beta_arg(beta_text), h, w);

  std::ofstream pgm(opt.out + ".pgm", std::ios::binary);
  if (!pgm) throw IoError("cannot write " + opt.out + ".pgm");
  const double peak = *std::max_element(mask.values.begin(), mask.values.end());
  pgm << "P5\n" << w << ' ' << h << "\n255\n";
  for (double v : mask.values) {
    const long level = std::lround(255.0 * v / peak);
    pgm.put(static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0L, 255L))));
  }
  if (!pgm.flush()) throw IoError("write failed: " + opt.out + ".pgm");

  std::ofstream csv(opt.out + ".csv");
  if (!csv) throw IoError("cannot write " + opt.out + ".csv");
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) csv << (c ? "," : "") << fmt_double(mask.at(r, c));
    csv << '\n';
  }
  if (!csv.flush()) throw IoError("write failed: " + opt.out + ".csv");
  return 0;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const betarep::SynthConfig& sc, const CommonOptions& opt) {
  const auto scenes = betarep::synth_scenes(sc);
  Output out(opt.out);
  betarep::write_odgt(out.stream(), scenes);
  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beta Representation toolkit for occluded pedestrians"};
  app.require_subcommand(1);
  CommonOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file (fallback: $BETAREP_CONFIG)");
    sub->add_option("--out", opt.out, "output path (default: stdout)");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--grid", opt.grid, "KL grid resolution (cells per axis)");
  };
  auto add_nms_flags = [&](CLI::App* sub) {
    sub->add_option("--strategy", opt.strategy,
                    "fiou | viou | fiou_viou | soft | beta | beta6 | beta7");
    sub->add_option("--kl-threshold", opt.kl_thresholds, "KL threshold(s) in nats");
    sub->add_option("--iou-threshold", opt.iou_threshold, "full-box IoU threshold");
  };

  std::string input, annotations, beta_text;
  std::size_t mask_h = 7, mask_w = 7;
  betarep::SynthConfig synth_cfg;

  auto* convert = app.add_subcommand("convert", "odgt annotations to beta-representation JSON lines");
  convert->add_option("annotations", input, "odgt file")->required();
  add_common(convert);

  auto* nms = app.add_subcommand("nms", "non-maximum suppression over detection JSON lines");
  nms->add_option("detections", input, "detections file")->required();
  add_common(nms);
  add_nms_flags(nms);

  auto* eval = app.add_subcommand("eval", "AP and MR^-2 of detections against annotations");
  eval->add_option("detections", input, "detections file")->required();
  eval->add_option("annotations", annotations, "odgt file")->required();
  add_common(eval);
  eval->add_option("--iou-threshold", opt.iou_threshold, "matching IoU threshold");

  auto* compare = app.add_subcommand("compare", "pairwise fIoU / vIoU / symmetrized KL statistics");
  compare->add_option("annotations", input, "odgt file")->required();
  add_common(compare);
  add_nms_flags(compare);

  auto* render = app.add_subcommand("render-mask", "render a beta mask as PGM and CSV");
  render->add_option("--beta", beta_text, "l,t,r,b,alpha_x,beta_x,alpha_y,beta_y")->required();
  render->add_option("--height", mask_h, "mask rows")->check(CLI::PositiveNumber);
  render->add_option("--width", mask_w, "mask columns")->check(CLI::PositiveNumber);
  render->add_option("--out", opt.out, "output prefix (.pgm and .csv are appended)");

  auto* synth = app.add_subcommand("synth", "seeded synthetic crowded-scene annotations");
  synth->add_option("--seed", synth_cfg.seed, "random seed");
  synth->add_option("--scenes", synth_cfg.scenes, "number of scenes");
  synth->add_option("--min-persons", synth_cfg.min_persons, "fewest persons per scene");
  synth->add_option("--max-persons", synth_cfg.max_persons, "most persons per scene");
  synth->add_option("--intensity", synth_cfg.overlap_intensity, "overlap intensity in [0, 1)");
  synth->add_option("--out", opt.out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*convert) return cmd_convert(input, opt);
    if (*nms) return cmd_nms(input, opt);
    if (*eval) return cmd_eval(input, annotations, opt);
    if (*compare) return cmd_compare(input, opt);
    if (*render) return cmd_render_mask(beta_text, mask_h, mask_w, opt);
    if (*synth) return cmd_synth(synth_cfg, opt);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const betarep::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 1;
  } catch (const betarep::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 1;
  } catch (const betarep::GenerationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
