#pragma once

// Seeded generator of crowded pedestrian scenes with consistent occlusion:
// a person placed in front of another keeps full visibility, while the one
// behind keeps only the strip that is not covered.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "betarep/annotation.hpp"
#include "betarep/beta_core.hpp"
#include "betarep/error.hpp"
#include "betarep/geometry.hpp"

namespace betarep {

/// Which part of an occluded person stays visible.
enum class OcclusionPattern { left, right, top, bottom, center };

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t scenes = 100;
  std::size_t min_persons = 2;
  std::size_t max_persons = 8;
  double overlap_intensity = 0.5;  // [0, 1): probability of, and tightness of, overlap
  // weights for left, right, top, bottom, center visible
  std::array<double, 5> pattern_mix{1.0, 1.0, 0.5, 0.25, 0.1};
  double image_width = 1920.0;
  double image_height = 1080.0;
  double min_height = 80.0;
  double max_height = 320.0;
  double aspect = 0.41;  // width / height of a full-body box

  void validate() const {
    if (scenes == 0 || min_persons == 0 || min_persons > max_persons) {
      throw GenerationError("scene count and person range must be nonempty");
    }
    if (!(overlap_intensity >= 0.0 && overlap_intensity <= 1.0)) {
      throw GenerationError("overlap intensity must lie in [0, 1]");
    }
    if (overlap_intensity >= 1.0) {
      throw GenerationError("overlap intensity 1 stacks persons exactly and leaves no visible strip");
    }
    double total = 0.0;
    for (double w : pattern_mix) {
      if (!(w >= 0.0)) throw GenerationError("pattern weights must be nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw GenerationError("pattern weights must not all be zero");
    if (!(min_height > 0.0 && max_height >= min_height && aspect > 0.0)) {
      throw GenerationError("person size range is invalid");
    }
    if (max_height >= image_height || max_height * aspect >= image_width) {
      throw GenerationError("persons do not fit in the image");
    }
  }
};

namespace detail {

/// Uniform doubles and integers from a 64-bit Mersenne Twister, computed from
/// raw bits so the stream is identical across standard libraries.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }
  template <std::size_t N>
  std::size_t weighted(const std::array<double, N>& w) {
    double total = 0.0;
    for (double v : w) total += v;
    double u = uniform() * total;
    for (std::size_t i = 0; i < N; ++i) {
      if (u < w[i]) return i;
      u -= w[i];
    }
    return N - 1;
  }

 private:
  std::mt19937_64 engine_;
};

struct SynthPerson {
  BBox full;
  BBox visible;
  bool occluded = false;
};

}  // namespace detail

/// Shift, as a fraction of the box size, between an occluder and the person
/// behind it. Shrinks to zero as the intensity approaches one.
inline double occluder_shift(double intensity, double u) { return (1.0 - intensity) * (0.3 + 0.3 * u); }

inline std::vector<SceneAnnotation> synth_scenes(const SynthConfig& cfg) {
  cfg.validate();
  detail::SynthRng rng(cfg.seed);
  std::vector<SceneAnnotation> out;
  out.reserve(cfg.scenes);

  for (std::size_t s = 0; s < cfg.scenes; ++s) {
    const std::size_t n = cfg.min_persons + rng.index(cfg.max_persons - cfg.min_persons + 1);
    std::vector<detail::SynthPerson> people;

    for (std::size_t k = 0; k < n; ++k) {
      const double h = rng.uniform(cfg.min_height, cfg.max_height);
      const double w = cfg.aspect * h;
      std::vector<std::size_t> anchors;
      for (std::size_t i = 0; i < people.size(); ++i) {
        if (!people[i].occluded) anchors.push_back(i);
      }
      if (!anchors.empty() && rng.uniform() < cfg.overlap_intensity) {
        auto& anchor = people[anchors[rng.index(anchors.size())]];
        const BBox f = anchor.full;
        const double s_frac = occluder_shift(cfg.overlap_intensity, rng.uniform());
        const double sx = s_frac * f.width();
        const double sy = s_frac * f.height();
        const double jitter_x = 0.02 * f.width() * (rng.uniform() - 0.5);
        const double jitter_y = 0.02 * f.height() * (rng.uniform() - 0.5);
        BBox occluder = f;
        BBox strip = f;
        switch (static_cast<OcclusionPattern>(rng.weighted(cfg.pattern_mix))) {
          case OcclusionPattern::left:
            occluder = {f.l + sx, f.t + jitter_y, f.r + sx, f.b + jitter_y};
            strip.r = occluder.l;
            break;
          case OcclusionPattern::right:
            occluder = {f.l - sx, f.t + jitter_y, f.r - sx, f.b + jitter_y};
            strip.l = occluder.r;
            break;
          case OcclusionPattern::top:
            occluder = {f.l + jitter_x, f.t + sy, f.r + jitter_x, f.b + sy};
            strip.b = occluder.t;
            break;
          case OcclusionPattern::bottom:
            occluder = {f.l + jitter_x, f.t - sy, f.r + jitter_x, f.b - sy};
            strip.t = occluder.b;
            break;
          case OcclusionPattern::center: {
            const double dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
            occluder = {f.l + dir * sx, f.t + jitter_y, f.r + dir * sx, f.b + jitter_y};
            strip.l = f.cx() - 0.5 * sx;
            strip.r = f.cx() + 0.5 * sx;
            break;
          }
        }
        if (!strip.valid()) throw GenerationError("occlusion left an empty visible box");
        anchor.visible = strip;
        anchor.occluded = true;
        people.push_back({occluder, occluder, false});
        continue;
      }
      // free placement, disjoint from everybody placed so far
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double x = rng.uniform(0.0, cfg.image_width - w);
        const double y = rng.uniform(0.0, cfg.image_height - h);
        const BBox box{x, y, x + w, y + h};
        bool clear = true;
        for (const auto& p : people) clear = clear && !overlaps(p.full, box);
        if (clear) {
          people.push_back({box, box, false});
          break;
        }
      }
    }

    SceneAnnotation scene;
    scene.image_id = "synth_" + std::to_string(cfg.seed) + "_" + std::to_string(s);
    scene.image_size = ImageSize{static_cast<int>(cfg.image_width), static_cast<int>(cfg.image_height)};
    for (const auto& p : people) scene.persons.push_back({PairedBoxes::make(p.full, p.visible), false, "person"});
    out.push_back(std::move(scene));
  }
  return out;
}

}  // namespace betarep
