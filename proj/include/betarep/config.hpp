#pragma once

// Toolkit configuration: one JSON document with full defaults. Unknown keys
// are rejected at every level.

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "betarep/beta_core.hpp"
#include "betarep/divergence.hpp"
#include "betarep/error.hpp"
#include "betarep/nms.hpp"

namespace betarep {

struct MetricOptions {
  double match_iou = 0.5;
  std::vector<double> kl_thresholds{6.0, 7.0};
};

struct ToolkitConfig {
  WeightConfig weights;
  GridSpec grid;
  NmsConfig nms;
  MetricOptions metrics;
  std::size_t threads = 1;

  /// Propagates shared settings into the NMS block and checks every invariant.
  void finalize() {
    nms.grid = grid;
    nms.weights = weights;
    nms.threads = threads;
    weights.validate();
    grid.validate();
    nms.validate();
    if (!(metrics.match_iou > 0.0 && metrics.match_iou <= 1.0)) {
      throw ConfigError("metrics.match_iou must lie in (0, 1]");
    }
    if (metrics.kl_thresholds.empty()) throw ConfigError("metrics.kl_thresholds must not be empty");
    for (double t : metrics.kl_thresholds) {
      if (!(t > 0.0)) throw ConfigError("KL thresholds must be positive");
    }
    if (threads == 0) throw ConfigError("threads must be at least 1");
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where,
                           std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown configuration key \"" + where + "." + key + "\"");
  }
}

template <typename T>
void read_number(const nlohmann::json& obj, const char* key, const std::string& where, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number()) throw ConfigError(where + "." + key + " must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_unsigned()) throw ConfigError(where + "." + key + " must be a positive integer");
  }
  out = it->get<T>();
}

}  // namespace detail

inline ToolkitConfig config_from_json(const nlohmann::json& j) {
  using detail::read_number;
  ToolkitConfig cfg;
  detail::reject_unknown(j, "config", {"weights", "grid", "nms", "metrics", "threads"});
  if (const auto w = j.find("weights"); w != j.end()) {
    detail::reject_unknown(*w, "weights", {"w_visible", "w_full", "rho", "lambda"});
    read_number(*w, "w_visible", "weights", cfg.weights.w_visible);
    read_number(*w, "w_full", "weights", cfg.weights.w_full);
    read_number(*w, "rho", "weights", cfg.weights.rho);
    cfg.weights.lambda = cfg.weights.rho / 4.0;
    read_number(*w, "lambda", "weights", cfg.weights.lambda);
  }
  if (const auto g = j.find("grid"); g != j.end()) {
    detail::reject_unknown(*g, "grid", {"resolution", "epsilon_floor"});
    read_number(*g, "resolution", "grid", cfg.grid.resolution);
    read_number(*g, "epsilon_floor", "grid", cfg.grid.epsilon_floor);
  }
  if (const auto n = j.find("nms"); n != j.end()) {
    detail::reject_unknown(*n, "nms",
                           {"strategy", "iou_threshold", "viou_threshold", "kl_threshold",
                            "soft_sigma", "soft_score_floor", "prefilter"});
    if (const auto s = n->find("strategy"); s != n->end()) {
      if (!s->is_string()) throw ConfigError("nms.strategy must be a string");
      const auto name = s->get<std::string>();
      if (const auto preset = find_preset(name)) {
        apply_preset(cfg.nms, *preset);
      } else {
        throw ConfigError("unknown NMS strategy \"" + name + "\"");
      }
    }
    read_number(*n, "iou_threshold", "nms", cfg.nms.iou_threshold);
    read_number(*n, "viou_threshold", "nms", cfg.nms.viou_threshold);
    read_number(*n, "kl_threshold", "nms", cfg.nms.kl_threshold);
    read_number(*n, "soft_sigma", "nms", cfg.nms.soft_sigma);
    read_number(*n, "soft_score_floor", "nms", cfg.nms.soft_score_floor);
    if (const auto p = n->find("prefilter"); p != n->end()) {
      if (!p->is_boolean()) throw ConfigError("nms.prefilter must be a boolean");
      cfg.nms.prefilter = p->get<bool>();
    }
  }
  if (const auto m = j.find("metrics"); m != j.end()) {
    detail::reject_unknown(*m, "metrics", {"match_iou", "kl_thresholds"});
    read_number(*m, "match_iou", "metrics", cfg.metrics.match_iou);
    if (const auto k = m->find("kl_thresholds"); k != m->end()) {
      if (!k->is_array()) throw ConfigError("metrics.kl_thresholds must be an array");
      cfg.metrics.kl_thresholds.clear();
      for (const auto& v : *k) {
        if (!v.is_number()) throw ConfigError("metrics.kl_thresholds must hold numbers");
        cfg.metrics.kl_thresholds.push_back(v.get<double>());
      }
    }
  }
  read_number(j, "threads", "config", cfg.threads);
  try {
    cfg.finalize();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ToolkitConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Effective configuration, echoed into reports.
inline nlohmann::json config_to_json(const ToolkitConfig& cfg) {
  return {
      {"weights",
       {{"w_visible", cfg.weights.w_visible},
        {"w_full", cfg.weights.w_full},
        {"rho", cfg.weights.rho},
        {"lambda", cfg.weights.lambda}}},
      {"grid", {{"resolution", cfg.grid.resolution}, {"epsilon_floor", cfg.grid.epsilon_floor}}},
      {"nms",
       {{"strategy", std::string(to_string(cfg.nms.strategy))},
        {"iou_threshold", cfg.nms.iou_threshold},
        {"viou_threshold", cfg.nms.viou_threshold},
        {"kl_threshold", cfg.nms.kl_threshold},
        {"soft_sigma", cfg.nms.soft_sigma},
        {"soft_score_floor", cfg.nms.soft_score_floor},
        {"prefilter", cfg.nms.prefilter}}},
      {"metrics", {{"match_iou", cfg.metrics.match_iou}, {"kl_thresholds", cfg.metrics.kl_thresholds}}},
      {"threads", cfg.threads},
  };
}

}  // namespace betarep
