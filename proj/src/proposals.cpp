#include "promptseg/proposals.hpp"

#include <set>

#include "promptseg/errors.hpp"

namespace promptseg {

std::vector<Mask> validate_proposals(std::vector<Mask> masks, int image_height, int image_width,
                                     int64_t min_area) {
  std::set<int> ids;
  std::vector<Mask> kept;
  kept.reserve(masks.size());
  for (auto& m : masks) {
    if (m.height != image_height || m.width != image_width) {
      throw ShapeError("proposal " + std::to_string(m.id) + ": dimensions do not match image");
    }
    validate_mask(m);
    if (!ids.insert(m.id).second) {
      throw InvalidInputError("proposal ids are not unique: " + std::to_string(m.id));
    }
    if (m.area < min_area) continue;  // noise guard
    kept.push_back(std::move(m));
  }
  return kept;
}

std::vector<Mask> MaskFileBackend::propose(const ImageU8& image) const {
  auto masks = load_masks_json(path_);
  for (const auto& m : masks) {
    if (m.height != image.height || m.width != image.width) {
      throw ShapeError("mask file " + path_ + ": mask dimensions do not match image");
    }
  }
  return masks;
}

}  // namespace promptseg
