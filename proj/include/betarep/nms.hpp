#pragma once

// Greedy non-maximum suppression over Beta Representations, parameterized by
// the duplicate predicate: full-box IoU, visible-box IoU, both, Gaussian
// SoftNMS rescoring, or symmetrized KL divergence (BetaNMS).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "betarep/beta_core.hpp"
#include "betarep/divergence.hpp"
#include "betarep/error.hpp"
#include "betarep/geometry.hpp"
#include "betarep/parallel.hpp"

namespace betarep {

struct Detection {
  BetaPedestrian pedestrian;
  double score = 0.0;
  std::uint64_t id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class NmsStrategy { fiou, viou, fiou_viou, soft, beta };

inline std::string_view to_string(NmsStrategy s) {
  switch (s) {
    case NmsStrategy::fiou: return "fiou";
    case NmsStrategy::viou: return "viou";
    case NmsStrategy::fiou_viou: return "fiou_viou";
    case NmsStrategy::soft: return "soft";
    case NmsStrategy::beta: return "beta";
  }
  return "?";
}

inline std::optional<NmsStrategy> parse_strategy(std::string_view name) {
  for (auto s : {NmsStrategy::fiou, NmsStrategy::viou, NmsStrategy::fiou_viou, NmsStrategy::soft,
                 NmsStrategy::beta}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

struct NmsConfig {
  NmsStrategy strategy = NmsStrategy::beta;
  double iou_threshold = 0.5;
  double viou_threshold = 0.35;
  double kl_threshold = 7.0;  // nats
  double soft_sigma = 0.5;
  double soft_score_floor = 0.001;
  GridSpec grid;
  WeightConfig weights;  // used to recover visible boxes for vIoU
  bool prefilter = true;
  std::size_t threads = 1;

  void validate() const {
    if (!(iou_threshold > 0.0) || !(viou_threshold > 0.0) || !(kl_threshold > 0.0)) {
      throw DomainError("NMS thresholds must be positive");
    }
    if (!(soft_sigma > 0.0) || !(soft_score_floor > 0.0)) {
      throw DomainError("SoftNMS parameters must be positive");
    }
    grid.validate();
    weights.validate();
  }
};

/// Named threshold presets from the NMS strategy comparison.
struct NmsPreset {
  std::string_view name;
  NmsStrategy strategy;
  double iou_threshold;
  double viou_threshold;
  double kl_threshold;
};

inline constexpr NmsPreset kNmsPresets[] = {
    {"fiou", NmsStrategy::fiou, 0.5, 0.35, 7.0},
    {"viou", NmsStrategy::viou, 0.5, 0.35, 7.0},
    {"fiou_viou", NmsStrategy::fiou_viou, 0.5, 0.35, 7.0},
    {"soft", NmsStrategy::soft, 0.5, 0.35, 7.0},
    {"beta", NmsStrategy::beta, 0.5, 0.35, 7.0},
    {"beta6", NmsStrategy::beta, 0.5, 0.35, 6.0},
    {"beta7", NmsStrategy::beta, 0.5, 0.35, 7.0},
};

inline std::optional<NmsPreset> find_preset(std::string_view name) {
  for (const auto& p : kNmsPresets) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

inline void apply_preset(NmsConfig& cfg, const NmsPreset& p) {
  cfg.strategy = p.strategy;
  cfg.iou_threshold = p.iou_threshold;
  cfg.viou_threshold = p.viou_threshold;
  cfg.kl_threshold = p.kl_threshold;
}

inline void validate_detection(const Detection& d) {
  require_valid(d.pedestrian);
  if (!(d.score >= 0.0 && d.score <= 1.0)) {
    throw DomainError("detection score must lie in [0, 1], got " + std::to_string(d.score));
  }
}

/// Processing order: score descending, then id ascending.
inline bool ranks_before(const Detection& a, const Detection& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

inline std::vector<std::size_t> ranking(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(dets[a], dets[b]);
  });
  return order;
}

/// All unordered index pairs (i < j) whose full boundaries overlap with
/// positive area, sorted lexicographically. Sweep over x with an active set.
inline std::vector<std::pair<std::size_t, std::size_t>> pairwise_prefilter(
    const std::vector<BBox>& boxes) {
  std::vector<std::size_t> by_left(boxes.size());
  for (std::size_t i = 0; i < by_left.size(); ++i) by_left[i] = i;
  std::sort(by_left.begin(), by_left.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].l != boxes[b].l ? boxes[a].l < boxes[b].l : a < b;
  });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> active;
  for (std::size_t idx : by_left) {
    const BBox& cur = boxes[idx];
    // drop boxes that end at or before this one starts
    active.erase(std::remove_if(active.begin(), active.end(),
                                [&](std::size_t k) { return boxes[k].r <= cur.l; }),
                 active.end());
    for (std::size_t k : active) {
      if (overlaps(boxes[k], cur)) pairs.emplace_back(std::min(k, idx), std::max(k, idx));
    }
    active.push_back(idx);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

inline std::vector<std::pair<std::size_t, std::size_t>> pairwise_prefilter(
    const std::vector<Detection>& dets) {
  std::vector<BBox> boxes;
  boxes.reserve(dets.size());
  for (const auto& d : dets) boxes.push_back(d.pedestrian.boundary);
  return pairwise_prefilter(boxes);
}

namespace detail {

/// Similarity state shared by the hard-suppression strategies.
class SuppressionTest {
 public:
  SuppressionTest(const std::vector<Detection>& dets, const NmsConfig& cfg)
      : dets_(dets), cfg_(cfg) {
    if (cfg.strategy == NmsStrategy::viou || cfg.strategy == NmsStrategy::fiou_viou) {
      visible_.reserve(dets.size());
      for (const auto& d : dets) visible_.push_back(beta_to_visible_box(d.pedestrian, cfg.weights));
    }
  }

  /// True when `cand` is a duplicate of the already kept detection `kept`.
  bool operator()(std::size_t kept, std::size_t cand) const {
    const BBox& a = dets_[kept].pedestrian.boundary;
    const BBox& b = dets_[cand].pedestrian.boundary;
    switch (cfg_.strategy) {
      case NmsStrategy::fiou: return iou(a, b) > cfg_.iou_threshold;
      case NmsStrategy::viou: return iou(visible_[kept], visible_[cand]) > cfg_.viou_threshold;
      case NmsStrategy::fiou_viou:
        return iou(a, b) > cfg_.iou_threshold &&
               iou(visible_[kept], visible_[cand]) > cfg_.viou_threshold;
      case NmsStrategy::beta:
        if (cfg_.prefilter && !overlaps(a, b)) return false;
        return sym_kl(dets_[kept].pedestrian, dets_[cand].pedestrian, cfg_.grid) <=
               cfg_.kl_threshold;
      case NmsStrategy::soft: break;
    }
    throw DomainError("soft strategy has no hard suppression predicate");
  }

  /// Suppressed by any of `kept`. Candidates that can only match via overlap
  /// are checked in descending full-IoU order so duplicates exit early.
  bool suppressed_by_any(const std::vector<std::size_t>& kept, std::size_t cand) const {
    if (cfg_.strategy != NmsStrategy::beta) {
      return std::any_of(kept.begin(), kept.end(), [&](std::size_t k) { return (*this)(k, cand); });
    }
    const BBox& b = dets_[cand].pedestrian.boundary;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k : kept) {
      const BBox& a = dets_[k].pedestrian.boundary;
      if (cfg_.prefilter && !overlaps(a, b)) continue;
      order.emplace_back(-iou(a, b), k);
    }
    std::sort(order.begin(), order.end());
    return std::any_of(order.begin(), order.end(),
                       [&](const auto& e) { return (*this)(e.second, cand); });
  }

 private:
  const std::vector<Detection>& dets_;
  const NmsConfig& cfg_;
  std::vector<BBox> visible_;
};

}  // namespace detail

/// Gaussian SoftNMS: repeatedly selects the best remaining detection and
/// decays the others by exp(−fIoU² / σ). Detections whose score drops below
/// the floor are removed. Output is sorted by final score (ties by id).
inline std::vector<Detection> soft_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
  cfg.validate();
  for (const auto& d : dets) validate_detection(d);
  std::vector<Detection> pool(dets);
  std::vector<Detection> out;
  out.reserve(pool.size());
  while (!pool.empty()) {
    auto best = std::min_element(pool.begin(), pool.end(), ranks_before);
    Detection chosen = *best;
    pool.erase(best);
    if (chosen.score < cfg.soft_score_floor) continue;
    for (auto& d : pool) {
      const double o = iou(chosen.pedestrian.boundary, d.pedestrian.boundary);
      if (o > 0.0) d.score *= std::exp(-(o * o) / cfg.soft_sigma);
    }
    out.push_back(chosen);
  }
  std::stable_sort(out.begin(), out.end(), ranks_before);
  return out;
}

/// Classic greedy NMS: keep the best remaining detection, suppress every
/// detection the predicate marks as its duplicate. Returns kept detections in
/// selection order with unmodified scores. The soft strategy delegates to
/// soft_nms.
///
/// With cfg.threads > 1 candidates are tested in blocks: each block is first
/// checked in parallel against the detections kept before it, then resolved
/// sequentially against detections kept inside the block. The kept set is
/// identical to the sequential schedule.
inline std::vector<Detection> greedy_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
  if (cfg.strategy == NmsStrategy::soft) return soft_nms(dets, cfg);
  cfg.validate();
  for (const auto& d : dets) validate_detection(d);
  if (dets.empty()) return {};

  const auto order = ranking(dets);
  const detail::SuppressionTest test(dets, cfg);
  std::vector<std::size_t> kept;

  const std::size_t threads = std::max<std::size_t>(1, cfg.threads);
  const std::size_t block = threads == 1 ? order.size() : 16 * threads;
  std::vector<char> suppressed(order.size(), 0);

  for (std::size_t start = 0; start < order.size(); start += block) {
    const std::size_t end = std::min(order.size(), start + block);
    const std::size_t kept_before = kept.size();
    if (threads > 1) {
      const std::vector<std::size_t> prior(kept.begin(), kept.end());
      parallel_for(end - start, threads, [&](std::size_t i) {
        suppressed[start + i] = test.suppressed_by_any(prior, order[start + i]) ? 1 : 0;
      });
    }
    for (std::size_t pos = start; pos < end; ++pos) {
      const std::size_t cand = order[pos];
      if (threads > 1) {
        if (suppressed[pos]) continue;
        const std::vector<std::size_t> recent(kept.begin() + static_cast<std::ptrdiff_t>(kept_before),
                                              kept.end());
        if (test.suppressed_by_any(recent, cand)) continue;
      } else if (test.suppressed_by_any(kept, cand)) {
        continue;
      }
      kept.push_back(cand);
    }
  }

  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(dets[k]);
  return out;
}

}  // namespace betarep
