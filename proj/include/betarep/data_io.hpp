#pragma once

// Annotation (odgt) and detection (JSON lines) ingestion and serialization.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "betarep/annotation.hpp"
#include "betarep/beta_core.hpp"
#include "betarep/error.hpp"
#include "betarep/nms.hpp"

namespace betarep {

using Json = nlohmann::json;

/// Non-fatal problems found while reading (skipped records and the like).
struct ParseWarnings {
  std::vector<std::string> messages;

  void add(std::size_t line, const std::string& msg) {
    messages.push_back("line " + std::to_string(line) + ": " + msg);
  }
  bool empty() const noexcept { return messages.empty(); }
};

namespace detail {

inline bool read_xywh(const Json& entry, const char* key, BBox& out) {
  const auto it = entry.find(key);
  if (it == entry.end() || !it->is_array() || it->size() != 4) return false;
  for (const auto& v : *it) {
    if (!v.is_number()) return false;
  }
  out = BBox::from_xywh((*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>(),
                        (*it)[3].get<double>());
  return true;
}

inline Json to_xywh(const BBox& b) { return Json::array({b.l, b.t, b.width(), b.height()}); }

inline Json parse_json_line(const std::string& line, std::size_t line_no) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
}

inline bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace detail

/// Parses one odgt record: {"ID": str, "gtboxes": [{"tag", "fbox", "vbox",
/// "extra": {"ignore"}}]}. Boxes arrive as [x, y, w, h]. The visible box is
/// clipped into the full box. Entries with a non-person tag or ignore = 1 are
/// kept with the ignore flag. Entries missing a box, or with degenerate
/// geometry, are skipped with a warning. "hbox" is not read.
inline SceneAnnotation parse_odgt(const std::string& line, std::size_t line_no = 0,
                                  ParseWarnings* warnings = nullptr) {
  const Json obj = detail::parse_json_line(line, line_no);
  if (!obj.is_object()) throw ParseError("odgt record is not a JSON object", line_no);
  const auto id = obj.find("ID");
  if (id == obj.end() || !id->is_string()) throw ParseError("odgt record lacks a string \"ID\"", line_no);

  SceneAnnotation scene;
  scene.image_id = id->get<std::string>();
  if (obj.contains("width") && obj.contains("height") && obj["width"].is_number_integer() &&
      obj["height"].is_number_integer()) {
    scene.image_size = ImageSize{obj["width"].get<int>(), obj["height"].get<int>()};
  }
  const auto boxes = obj.find("gtboxes");
  if (boxes == obj.end()) return scene;
  if (!boxes->is_array()) throw ParseError("\"gtboxes\" is not an array", line_no);

  std::size_t k = 0;
  for (const auto& entry : *boxes) {
    const std::size_t idx = k++;
    if (!entry.is_object()) throw ParseError("gtboxes entry is not an object", line_no);
    BBox full, visible;
    if (!detail::read_xywh(entry, "fbox", full) || !detail::read_xywh(entry, "vbox", visible)) {
      if (warnings) warnings->add(line_no, "gtbox " + std::to_string(idx) + " lacks fbox/vbox, skipped");
      continue;
    }
    std::string tag = "person";
    if (const auto t = entry.find("tag"); t != entry.end() && t->is_string()) tag = t->get<std::string>();
    bool ignore = tag != "person";
    if (const auto extra = entry.find("extra"); extra != entry.end() && extra->is_object()) {
      if (const auto ig = extra->find("ignore"); ig != extra->end() && ig->is_number()) {
        ignore = ignore || ig->get<double>() != 0.0;
      }
    }
    try {
      scene.persons.push_back({PairedBoxes::make(full, visible), ignore, std::move(tag)});
    } catch (const InvalidGeometry& e) {
      if (warnings) warnings->add(line_no, "gtbox " + std::to_string(idx) + " skipped: " + e.what());
    }
  }
  return scene;
}

inline std::string serialize_odgt(const SceneAnnotation& scene) {
  Json obj;
  obj["ID"] = scene.image_id;
  if (scene.image_size) {
    obj["width"] = scene.image_size->width;
    obj["height"] = scene.image_size->height;
  }
  Json boxes = Json::array();
  for (const auto& p : scene.persons) {
    boxes.push_back({{"tag", p.tag},
                     {"fbox", detail::to_xywh(p.boxes.full())},
                     {"vbox", detail::to_xywh(p.boxes.visible())},
                     {"extra", {{"ignore", p.ignore ? 1 : 0}}}});
  }
  obj["gtboxes"] = std::move(boxes);
  return obj.dump();
}

/// Reads a whole odgt stream. Blank lines are skipped; duplicate IDs are an error.
inline std::vector<SceneAnnotation> read_odgt(std::istream& in, ParseWarnings* warnings = nullptr) {
  std::vector<SceneAnnotation> scenes;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    auto scene = parse_odgt(line, line_no, warnings);
    if (!seen.insert(scene.image_id).second) {
      throw ParseError("duplicate image ID \"" + scene.image_id + "\"", line_no);
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

inline void write_odgt(std::ostream& out, const std::vector<SceneAnnotation>& scenes) {
  for (const auto& s : scenes) out << serialize_odgt(s) << '\n';
}

/// A detection tagged with the image it belongs to.
struct ImageDetection {
  std::string image;
  Detection det;
  bool explicit_id = false;  // the record carried its own "id"

  friend bool operator==(const ImageDetection&, const ImageDetection&) = default;
};

inline Json beta_to_json(const BetaPedestrian& bp) {
  return Json::array({bp.boundary.l, bp.boundary.t, bp.boundary.r, bp.boundary.b, bp.x.alpha,
                      bp.x.beta, bp.y.alpha, bp.y.beta});
}

/// Reads [l, t, r, b, αx, βx, αy, βy]; returns false on a schema mismatch.
inline bool beta_from_json(const Json& j, BetaPedestrian& out) {
  if (!j.is_array() || j.size() != 8) return false;
  double v[8];
  for (std::size_t i = 0; i < 8; ++i) {
    if (!j[i].is_number()) return false;
    v[i] = j[i].get<double>();
  }
  out = {{v[0], v[1], v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
  return true;
}

/// One detection per line: {"image": str, "score": float, "beta": [8 numbers]}
/// with an optional unsigned "id". Without "id" the record index is used.
inline ImageDetection parse_detection(const std::string& line, std::size_t index,
                                      std::size_t line_no) {
  const Json obj = detail::parse_json_line(line, line_no);
  auto fail = [&](const std::string& what) {
    return ParseError("detection record " + std::to_string(index) + ": " + what, line_no);
  };
  if (!obj.is_object()) throw fail("not a JSON object");
  const auto image = obj.find("image");
  if (image == obj.end() || !image->is_string()) throw fail("missing string \"image\"");
  const auto score = obj.find("score");
  if (score == obj.end() || !score->is_number()) throw fail("missing numeric \"score\"");
  const auto beta = obj.find("beta");
  if (beta == obj.end()) throw fail("missing \"beta\"");

  ImageDetection d;
  d.image = image->get<std::string>();
  d.det.score = score->get<double>();
  if (!beta_from_json(*beta, d.det.pedestrian)) throw fail("\"beta\" must hold 8 numbers");
  if (const auto id = obj.find("id"); id != obj.end()) {
    if (!id->is_number_unsigned()) throw fail("\"id\" must be an unsigned integer");
    d.det.id = id->get<std::uint64_t>();
    d.explicit_id = true;
  } else {
    d.det.id = index;
  }
  if (!d.det.pedestrian.valid()) throw fail("invalid beta representation");
  if (!(d.det.score >= 0.0 && d.det.score <= 1.0)) throw fail("score outside [0, 1]");
  return d;
}

inline std::vector<ImageDetection> read_detections(std::istream& in) {
  std::vector<ImageDetection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    out.push_back(parse_detection(line, out.size(), line_no));
  }
  return out;
}

inline std::string serialize_detection(const ImageDetection& d, bool with_id = true) {
  Json obj;
  obj["image"] = d.image;
  obj["score"] = d.det.score;
  obj["beta"] = beta_to_json(d.det.pedestrian);
  if (with_id) obj["id"] = d.det.id;
  return obj.dump();
}

inline void write_detections(std::ostream& out, const std::vector<ImageDetection>& dets,
                             bool with_id = true) {
  for (const auto& d : dets) out << serialize_detection(d, with_id) << '\n';
}

}  // namespace betarep
