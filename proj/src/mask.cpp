#include "promptseg/mask.hpp"

#include <algorithm>
#include <fstream>

#include "promptseg/errors.hpp"

namespace promptseg {

BinaryRaster BinaryRaster::zeros(int height, int width) {
  BinaryRaster r;
  r.height = height;
  r.width = width;
  r.data.assign(static_cast<size_t>(height) * width, 0);
  return r;
}

Mask rle_encode(const BinaryRaster& raster) {
  if (raster.height <= 0 || raster.width <= 0 ||
      raster.data.size() != static_cast<size_t>(raster.height) * raster.width) {
    throw InvalidInputError("rle_encode: empty or malformed raster");
  }
  Mask m;
  m.height = raster.height;
  m.width = raster.width;

  int min_x = raster.width, min_y = raster.height, max_x = -1, max_y = -1;
  uint8_t prev = 0;
  int64_t run = 0;
  for (int x = 0; x < raster.width; ++x) {
    for (int y = 0; y < raster.height; ++y) {
      const uint8_t v = raster.at(y, x) ? 1 : 0;
      if (v != prev) {
        m.rle.push_back(run);
        run = 0;
        prev = v;
      }
      ++run;
      if (v) {
        ++m.area;
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
    }
  }
  m.rle.push_back(run);
  m.bbox = m.area == 0 ? BBox{0, 0, 0, 0}
                       : BBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
  return m;
}

BinaryRaster rle_decode(const Mask& mask) {
  if (mask.height <= 0 || mask.width <= 0) {
    throw InvalidInputError("rle_decode: mask has empty dimensions");
  }
  BinaryRaster r = BinaryRaster::zeros(mask.height, mask.width);
  const int64_t total = static_cast<int64_t>(mask.height) * mask.width;
  int64_t pos = 0;
  uint8_t val = 0;
  for (int64_t count : mask.rle) {
    if (count < 0 || pos + count > total) {
      throw InvalidInputError("rle_decode: counts exceed raster size");
    }
    if (val) {
      for (int64_t i = pos; i < pos + count; ++i) {
        const int x = static_cast<int>(i / mask.height);
        const int y = static_cast<int>(i % mask.height);
        r.set(y, x, 1);
      }
    }
    pos += count;
    val = 1 - val;
  }
  if (pos != total) {
    throw InvalidInputError("rle_decode: counts do not cover the raster");
  }
  return r;
}

double iou(const BinaryRaster& a, const BinaryRaster& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError("iou: raster dimensions differ");
  }
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0;
    const bool pb = b.data[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError("iou: mask dimensions differ");
  }
  return iou(rle_decode(a), rle_decode(b));
}

BinaryRaster dilate(const BinaryRaster& raster, int px) {
  if (px <= 0) return raster;
  BinaryRaster out = BinaryRaster::zeros(raster.height, raster.width);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      if (!raster.at(y, x)) continue;
      const int y0 = std::max(0, y - px), y1 = std::min(raster.height - 1, y + px);
      const int x0 = std::max(0, x - px), x1 = std::min(raster.width - 1, x + px);
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) out.set(yy, xx, 1);
      }
    }
  }
  return out;
}

void validate_mask(const Mask& mask) {
  if (mask.quality < 0.0 || mask.quality > 1.0) {
    throw InvalidInputError("mask " + std::to_string(mask.id) + ": quality outside [0,1]");
  }
  const BinaryRaster r = rle_decode(mask);  // also checks dims and counts
  const Mask rebuilt = rle_encode(r);
  if (rebuilt.area != mask.area) {
    throw InvalidInputError("mask " + std::to_string(mask.id) + ": area does not match raster");
  }
  if (!(rebuilt.bbox == mask.bbox)) {
    throw InvalidInputError("mask " + std::to_string(mask.id) + ": bbox is not tight");
  }
}

nlohmann::json mask_to_json(const Mask& mask) {
  return nlohmann::json{{"id", mask.id},
                        {"height", mask.height},
                        {"width", mask.width},
                        {"area", mask.area},
                        {"bbox", {mask.bbox.x, mask.bbox.y, mask.bbox.w, mask.bbox.h}},
                        {"quality", mask.quality},
                        {"rle", mask.rle}};
}

Mask mask_from_json(const nlohmann::json& j) {
  Mask m;
  try {
    m.id = j.at("id").get<int>();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.area = j.at("area").get<int64_t>();
    const auto& bb = j.at("bbox");
    m.bbox = BBox{bb.at(0).get<int>(), bb.at(1).get<int>(), bb.at(2).get<int>(),
                  bb.at(3).get<int>()};
    m.quality = j.at("quality").get<double>();
    m.rle = j.at("rle").get<std::vector<int64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("mask_from_json: ") + e.what());
  }
  validate_mask(m);
  return m;
}

std::vector<Mask> load_masks_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("load_masks_json: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError("load_masks_json: " + path + ": " + e.what());
  }
  if (!j.is_array()) throw InvalidInputError("load_masks_json: expected a JSON array");
  std::vector<Mask> masks;
  masks.reserve(j.size());
  for (const auto& item : j) masks.push_back(mask_from_json(item));
  return masks;
}

void save_masks_json(const std::string& path, const std::vector<Mask>& masks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : masks) j.push_back(mask_to_json(m));
  std::ofstream out(path);
  if (!out) throw InvalidInputError("save_masks_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace promptseg
