#pragma once

#include <optional>
#include <string>
#include <vector>

#include "betarep/beta_core.hpp"

namespace betarep {

/// One annotated instance. Non-person tags and crowd regions carry ignore = true.
struct PersonAnnotation {
  PairedBoxes boxes;
  bool ignore = false;
  std::string tag = "person";

  friend bool operator==(const PersonAnnotation&, const PersonAnnotation&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Ground truth of one image.
struct SceneAnnotation {
  std::string image_id;
  std::vector<PersonAnnotation> persons;
  std::optional<ImageSize> image_size;

  friend bool operator==(const SceneAnnotation&, const SceneAnnotation&) = default;
};

}  // namespace betarep
