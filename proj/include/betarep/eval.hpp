#pragma once

// Detection evaluation (AP, log-average miss rate) and the pairwise
// KL-versus-IoU statistics over ground-truth pedestrians.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "betarep/annotation.hpp"
#include "betarep/beta_core.hpp"
#include "betarep/divergence.hpp"
#include "betarep/error.hpp"
#include "betarep/geometry.hpp"
#include "betarep/nms.hpp"
#include "betarep/parallel.hpp"

namespace betarep {

enum class DetLabel { tp, fp, ignored };

/// Ground-truth box used for matching.
struct GtBox {
  BBox box;
  bool ignore = false;
};

struct MatchResult {
  std::vector<DetLabel> det_labels;  // aligned with the input detections
  std::vector<bool> gt_matched;      // aligned with the input ground truth
  std::size_t num_detections = 0;
  std::size_t num_gt = 0;  // non-ignored ground truth
  std::size_t tp = 0;
  std::size_t fp = 0;

  std::size_t missed() const noexcept { return num_gt - tp; }
};

inline std::vector<GtBox> gt_boxes(const SceneAnnotation& scene) {
  std::vector<GtBox> out;
  out.reserve(scene.persons.size());
  for (const auto& p : scene.persons) out.push_back({p.boxes.full(), p.ignore});
  return out;
}

/// Greedy matching in score order (ties by id): a detection takes the
/// unmatched non-ignored ground truth with the highest full-box IoU at or
/// above the threshold. Otherwise, if it overlaps an ignored region at the
/// threshold it is excluded from scoring, else it is a false positive.
inline MatchResult match_detections(const std::vector<Detection>& dets,
                                    const std::vector<GtBox>& gts, double iou_thresh = 0.5) {
  MatchResult m;
  m.det_labels.assign(dets.size(), DetLabel::fp);
  m.gt_matched.assign(gts.size(), false);
  m.num_detections = dets.size();
  m.num_gt = static_cast<std::size_t>(
      std::count_if(gts.begin(), gts.end(), [](const GtBox& g) { return !g.ignore; }));

  for (std::size_t di : ranking(dets)) {
    const BBox& box = dets[di].pedestrian.boundary;
    double best = -1.0;
    std::size_t best_gt = gts.size();
    bool hits_ignore = false;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      const double o = iou(box, gts[gi].box);
      if (o < iou_thresh) continue;
      if (gts[gi].ignore) {
        hits_ignore = true;
        continue;
      }
      if (!m.gt_matched[gi] && o > best) {
        best = o;
        best_gt = gi;
      }
    }
    if (best_gt < gts.size()) {
      m.gt_matched[best_gt] = true;
      m.det_labels[di] = DetLabel::tp;
      ++m.tp;
    } else if (hits_ignore) {
      m.det_labels[di] = DetLabel::ignored;
    } else {
      ++m.fp;
    }
  }
  return m;
}

/// Scored labels pooled over a dataset, in evaluation order.
class DatasetMatches {
 public:
  struct Entry {
    double score;
    std::size_t image;
    std::uint64_t id;
    bool tp;
  };

  void add_image(const std::vector<Detection>& dets, const MatchResult& m) {
    const std::size_t image = num_images_++;
    num_gt_ += m.num_gt;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (m.det_labels[i] == DetLabel::ignored) continue;
      entries_.push_back({dets[i].score, image, dets[i].id, m.det_labels[i] == DetLabel::tp});
    }
    sorted_ = false;
  }

  std::size_t num_images() const noexcept { return num_images_; }
  std::size_t num_gt() const noexcept { return num_gt_; }

  /// Entries by score descending, then image, then id.
  const std::vector<Entry>& ordered() const {
    if (!sorted_) {
      std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return std::tie(b.score, a.image, a.id) < std::tie(a.score, b.image, b.id);
      });
      sorted_ = true;
    }
    return entries_;
  }

 private:
  mutable std::vector<Entry> entries_;
  mutable bool sorted_ = true;
  std::size_t num_images_ = 0;
  std::size_t num_gt_ = 0;
};

/// Area under the precision/recall curve with all-points interpolation
/// (precision replaced by its running maximum from the right).
inline double average_precision(const DatasetMatches& data) {
  if (data.num_gt() == 0) throw UndefinedMetric("average precision needs at least one ground truth");
  const auto& e = data.ordered();
  std::vector<double> precision(e.size()), recall(e.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k].tp) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(data.num_gt());
  }
  for (std::size_t k = e.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

/// FPPI reference points 10^-2 ... 10^0, nine log-spaced values.
inline std::array<double, 9> fppi_references() {
  std::array<double, 9> refs{};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    refs[i] = std::pow(10.0, -2.0 + 0.25 * static_cast<double>(i));
  }
  return refs;
}

inline constexpr double kMissRateFloor = 1e-10;

/// Miss rate at each FPPI reference: the operating point with the most
/// detections whose FPPI does not exceed the reference (no detections means
/// miss rate 1).
inline std::array<double, 9> miss_rates_at_references(const DatasetMatches& data) {
  if (data.num_gt() == 0) throw UndefinedMetric("miss rate needs at least one ground truth");
  if (data.num_images() == 0) throw UndefinedMetric("miss rate needs at least one image");
  const auto& e = data.ordered();
  const auto refs = fppi_references();
  std::array<double, 9> out;
  out.fill(1.0);
  std::size_t tp = 0, fp = 0;
  const double images = static_cast<double>(data.num_images());
  const double gts = static_cast<double>(data.num_gt());
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k].tp) ++tp; else ++fp;
    const double fppi = static_cast<double>(fp) / images;
    const double mr = 1.0 - static_cast<double>(tp) / gts;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (fppi <= refs[i]) out[i] = mr;
    }
  }
  return out;
}

/// exp(mean(log(max(mr, 1e-10)))) over the nine reference points.
inline double log_avg_miss_rate(const DatasetMatches& data) {
  const auto mrs = miss_rates_at_references(data);
  double acc = 0.0;
  for (double mr : mrs) acc += std::log(std::max(mr, kMissRateFloor));
  return std::exp(acc / static_cast<double>(mrs.size()));
}

struct EvalReport {
  double ap = 0.0;
  double mr2 = 1.0;
  std::size_t images = 0;
  std::size_t gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

/// Matches every image's detections against its ground truth and computes both metrics.
inline EvalReport evaluate(const std::vector<SceneAnnotation>& scenes,
                           const std::vector<std::vector<Detection>>& dets_per_scene,
                           double iou_thresh = 0.5) {
  if (scenes.size() != dets_per_scene.size()) {
    throw ShapeError("detections and annotations cover different image counts");
  }
  DatasetMatches data;
  EvalReport rep;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto m = match_detections(dets_per_scene[i], gt_boxes(scenes[i]), iou_thresh);
    rep.tp += m.tp;
    rep.fp += m.fp;
    data.add_image(dets_per_scene[i], m);
  }
  rep.images = data.num_images();
  rep.gt = data.num_gt();
  rep.ap = average_precision(data);
  rep.mr2 = log_avg_miss_rate(data);
  return rep;
}

/// Distances between two overlapping ground-truth pedestrians of one image.
struct PairRecord {
  std::string image;
  std::size_t idx_a = 0;
  std::size_t idx_b = 0;
  double fiou = 0.0;
  double viou = 0.0;
  double symkl = 0.0;
};

struct PairStatsConfig {
  WeightConfig weights;
  GridSpec grid;
  double iou_threshold = 0.5;
  double viou_threshold = 0.35;
  std::vector<double> kl_thresholds{6.0, 7.0};
  std::size_t threads = 1;
};

/// Pairs each suppression criterion would wrongly merge.
struct PairSummary {
  std::size_t pairs = 0;
  std::size_t fiou_failed = 0;
  std::size_t viou_failed = 0;
  std::vector<double> kl_thresholds;
  std::vector<std::size_t> kl_failed;  // aligned with kl_thresholds
  std::uint64_t shape_fits = 0;
  std::uint64_t shape_clamped = 0;
};

struct PairStatistics {
  std::vector<PairRecord> records;
  PairSummary summary;
};

/// Records fIoU, vIoU and symmetrized KL for every pair of non-ignored
/// pedestrians in the same scene whose full boxes overlap. Records are
/// sorted by (image, idx_a, idx_b), so the result does not depend on scene
/// order or thread count.
inline PairStatistics pair_statistics(const std::vector<SceneAnnotation>& scenes,
                                      const PairStatsConfig& cfg) {
  cfg.weights.validate();
  cfg.grid.validate();
  ClampDiagnostics diag;
  std::vector<std::vector<PairRecord>> per_scene(scenes.size());
  parallel_for(scenes.size(), cfg.threads, [&](std::size_t s) {
    const auto& scene = scenes[s];
    std::vector<std::size_t> index;
    std::vector<BBox> full;
    std::vector<BetaPedestrian> betas;
    for (std::size_t i = 0; i < scene.persons.size(); ++i) {
      const auto& p = scene.persons[i];
      if (p.ignore) continue;
      index.push_back(i);
      full.push_back(p.boxes.full());
      betas.push_back(boxes_to_beta(p.boxes, cfg.weights, &diag));
    }
    for (const auto& [a, b] : pairwise_prefilter(full)) {
      const auto& pa = scene.persons[index[a]].boxes;
      const auto& pb = scene.persons[index[b]].boxes;
      const double f = iou(pa.full(), pb.full());
      if (!(f > 0.0)) continue;
      per_scene[s].push_back({scene.image_id, index[a], index[b], f,
                              iou(pa.visible(), pb.visible()), sym_kl(betas[a], betas[b], cfg.grid)});
    }
  });

  PairStatistics out;
  for (auto& v : per_scene) {
    out.records.insert(out.records.end(), std::make_move_iterator(v.begin()),
                       std::make_move_iterator(v.end()));
  }
  std::stable_sort(out.records.begin(), out.records.end(), [](const PairRecord& a, const PairRecord& b) {
    return std::tie(a.image, a.idx_a, a.idx_b) < std::tie(b.image, b.idx_a, b.idx_b);
  });

  auto& sum = out.summary;
  sum.pairs = out.records.size();
  sum.kl_thresholds = cfg.kl_thresholds;
  sum.kl_failed.assign(cfg.kl_thresholds.size(), 0);
  for (const auto& r : out.records) {
    if (r.fiou > cfg.iou_threshold) ++sum.fiou_failed;
    if (r.viou > cfg.viou_threshold) ++sum.viou_failed;
    for (std::size_t t = 0; t < cfg.kl_thresholds.size(); ++t) {
      if (r.symkl <= cfg.kl_thresholds[t]) ++sum.kl_failed[t];
    }
  }
  sum.shape_fits = diag.fits();
  sum.shape_clamped = diag.clamped();
  return out;
}

}  // namespace betarep
