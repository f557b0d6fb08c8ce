#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptseg/image.hpp"
#include "promptseg/mask.hpp"
#include "promptseg/proposals.hpp"
#include "promptseg/rng.hpp"

namespace promptseg {

/// One labeled, solid-color region of a synthetic scene.
struct SceneRegion {
  std::string label;
  Rgb color;
  BinaryRaster raster;
};

struct DistractorOptions {
  bool duplicates = false;  // add an exact copy of every region mask
  bool dilated = false;     // add a dilated copy of every region mask
  int dilation_px = 1;
  bool operator==(const DistractorOptions&) const = default;
};

/// A fully known test scene: disjoint colored regions on a uniform background.
struct SyntheticScene {
  int height = 448;
  int width = 448;
  Rgb background{255, 255, 255};
  std::vector<SceneRegion> regions;
  DistractorOptions distractors;
};

/// Throws InvalidInputError if regions overlap, or labels/colors collide.
void validate_scene(const SyntheticScene& scene);

ImageU8 render_scene(const SyntheticScene& scene);

/// One exact mask per region (quality 1.0, id = region index), plus duplicate
/// and dilated distractor masks (quality 0.5) when enabled. Exact ids are
/// 0..K-1, duplicates K..2K-1, dilated copies follow.
std::vector<Mask> synthetic_propose(const SyntheticScene& scene);

/// ProposalBackend wrapper; ignores the image pixels and proposes from its
/// scene (the scene is the ground truth the image was rendered from).
class SyntheticSceneBackend : public ProposalBackend {
 public:
  explicit SyntheticSceneBackend(SyntheticScene scene) : scene_(std::move(scene)) {}
  std::vector<Mask> propose(const ImageU8&) const override { return synthetic_propose(scene_); }
  std::string descriptor() const override { return "synthetic-scene"; }

 private:
  SyntheticScene scene_;
};

/// Deterministic scene with k axis-aligned rectangles placed on a jittered
/// grid so they never overlap. palette supplies (label, color) pairs.
SyntheticScene random_rect_scene(int height, int width, int k,
                                 const std::vector<std::pair<std::string, Rgb>>& palette,
                                 uint64_t seed, int min_size = 40, int max_size = 80,
                                 DistractorOptions distractors = {});

nlohmann::json scene_to_json(const SyntheticScene& scene);
SyntheticScene scene_from_json(const nlohmann::json& j);
SyntheticScene load_scene_json(const std::string& path);

}  // namespace promptseg
