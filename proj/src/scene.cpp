#include "promptseg/scene.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "promptseg/errors.hpp"

namespace promptseg {

void validate_scene(const SyntheticScene& scene) {
  if (scene.height <= 0 || scene.width <= 0) {
    throw InvalidInputError("scene: non-positive canvas size");
  }
  std::set<std::string> labels;
  std::set<std::array<uint8_t, 3>> colors;
  BinaryRaster covered = BinaryRaster::zeros(scene.height, scene.width);
  for (const auto& region : scene.regions) {
    if (region.raster.height != scene.height || region.raster.width != scene.width) {
      throw InvalidInputError("scene: region raster does not match canvas size");
    }
    if (!labels.insert(region.label).second) {
      throw InvalidInputError("scene: duplicate label " + region.label);
    }
    if (region.color == scene.background) {
      throw InvalidInputError("scene: region color equals background");
    }
    if (!colors.insert({region.color.r, region.color.g, region.color.b}).second) {
      throw InvalidInputError("scene: duplicate region color");
    }
    for (size_t i = 0; i < covered.data.size(); ++i) {
      if (region.raster.data[i]) {
        if (covered.data[i]) throw InvalidInputError("scene: regions overlap");
        covered.data[i] = 1;
      }
    }
  }
}

ImageU8 render_scene(const SyntheticScene& scene) {
  validate_scene(scene);
  ImageU8 img = ImageU8::filled(scene.height, scene.width, scene.background);
  for (const auto& region : scene.regions) {
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        if (region.raster.at(y, x)) {
          uint8_t* p = img.px(y, x);
          p[0] = region.color.r;
          p[1] = region.color.g;
          p[2] = region.color.b;
        }
      }
    }
  }
  return img;
}

std::vector<Mask> synthetic_propose(const SyntheticScene& scene) {
  validate_scene(scene);
  std::vector<Mask> masks;
  const int k = static_cast<int>(scene.regions.size());
  int next_id = 0;
  for (const auto& region : scene.regions) {
    Mask m = rle_encode(region.raster);
    m.quality = 1.0;
    m.id = next_id++;
    masks.push_back(std::move(m));
  }
  if (scene.distractors.duplicates) {
    for (int i = 0; i < k; ++i) {
      Mask m = masks[i];
      m.quality = 0.5;
      m.id = next_id++;
      masks.push_back(std::move(m));
    }
  }
  if (scene.distractors.dilated) {
    for (int i = 0; i < k; ++i) {
      Mask m = rle_encode(dilate(rle_decode(masks[i]), scene.distractors.dilation_px));
      m.quality = 0.5;
      m.id = next_id++;
      masks.push_back(std::move(m));
    }
  }
  return masks;
}

SyntheticScene random_rect_scene(int height, int width, int k,
                                 const std::vector<std::pair<std::string, Rgb>>& palette,
                                 uint64_t seed, int min_size, int max_size,
                                 DistractorOptions distractors) {
  if (k <= 0 || k > static_cast<int>(palette.size())) {
    throw InvalidInputError("random_rect_scene: k must be in [1, palette size]");
  }
  SyntheticScene scene;
  scene.height = height;
  scene.width = width;
  scene.distractors = distractors;

  Rng rng(mix_seed(seed, 0x5ce11e));
  // Pick k distinct palette entries.
  std::vector<size_t> order = permutation(palette.size(), rng);

  // Grid placement keeps rectangles disjoint by construction. A 2px gutter
  // inside each cell also keeps dilated distractors disjoint across cells.
  int cols = 1;
  while (cols * cols < k) ++cols;
  const int rows = (k + cols - 1) / cols;
  const int cell_h = height / rows;
  const int cell_w = width / cols;
  const int gutter = 3;
  for (int i = 0; i < k; ++i) {
    const int cy = (i / cols) * cell_h;
    const int cx = (i % cols) * cell_w;
    const int max_h = std::min(max_size, cell_h - 2 * gutter);
    const int max_w = std::min(max_size, cell_w - 2 * gutter);
    if (max_h < min_size || max_w < min_size) {
      throw InvalidInputError("random_rect_scene: cells too small for min_size");
    }
    const int rh = min_size + static_cast<int>(rng.below(max_h - min_size + 1));
    const int rw = min_size + static_cast<int>(rng.below(max_w - min_size + 1));
    const int oy = cy + gutter + static_cast<int>(rng.below(cell_h - 2 * gutter - rh + 1));
    const int ox = cx + gutter + static_cast<int>(rng.below(cell_w - 2 * gutter - rw + 1));

    SceneRegion region;
    region.label = palette[order[i]].first;
    region.color = palette[order[i]].second;
    region.raster = BinaryRaster::zeros(height, width);
    for (int y = oy; y < oy + rh; ++y) {
      for (int x = ox; x < ox + rw; ++x) region.raster.set(y, x, 1);
    }
    scene.regions.push_back(std::move(region));
  }
  validate_scene(scene);
  return scene;
}

nlohmann::json scene_to_json(const SyntheticScene& scene) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : scene.regions) {
    Mask m = rle_encode(r.raster);
    regions.push_back({{"label", r.label},
                       {"color", {r.color.r, r.color.g, r.color.b}},
                       {"rle", m.rle}});
  }
  return nlohmann::json{
      {"height", scene.height},
      {"width", scene.width},
      {"background", {scene.background.r, scene.background.g, scene.background.b}},
      {"regions", regions},
      {"distractors",
       {{"duplicates", scene.distractors.duplicates},
        {"dilated", scene.distractors.dilated},
        {"dilation_px", scene.distractors.dilation_px}}}};
}

SyntheticScene scene_from_json(const nlohmann::json& j) {
  SyntheticScene scene;
  try {
    scene.height = j.at("height").get<int>();
    scene.width = j.at("width").get<int>();
    const auto& bg = j.at("background");
    scene.background = Rgb{bg.at(0).get<uint8_t>(), bg.at(1).get<uint8_t>(), bg.at(2).get<uint8_t>()};
    if (j.contains("distractors")) {
      const auto& d = j.at("distractors");
      scene.distractors.duplicates = d.value("duplicates", false);
      scene.distractors.dilated = d.value("dilated", false);
      scene.distractors.dilation_px = d.value("dilation_px", 1);
    }
    for (const auto& rj : j.at("regions")) {
      SceneRegion region;
      region.label = rj.at("label").get<std::string>();
      const auto& c = rj.at("color");
      region.color = Rgb{c.at(0).get<uint8_t>(), c.at(1).get<uint8_t>(), c.at(2).get<uint8_t>()};
      Mask m;
      m.height = scene.height;
      m.width = scene.width;
      m.rle = rj.at("rle").get<std::vector<int64_t>>();
      region.raster = rle_decode(m);
      scene.regions.push_back(std::move(region));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("scene_from_json: ") + e.what());
  }
  validate_scene(scene);
  return scene;
}

SyntheticScene load_scene_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("load_scene_json: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError("load_scene_json: " + path + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace promptseg
