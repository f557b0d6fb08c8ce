#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptseg/image.hpp"

namespace promptseg {

/// Row-major binary raster, one byte per pixel (0 or 1).
struct BinaryRaster {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;

  static BinaryRaster zeros(int height, int width);

  uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  void set(int y, int x, uint8_t v) { data[static_cast<size_t>(y) * width + x] = v; }
  bool operator==(const BinaryRaster&) const = default;
};

struct BBox {
  int x = 0, y = 0, w = 0, h = 0;
  bool operator==(const BBox&) const = default;
};

/// One binary segment proposal. The raster is stored run-length encoded in
/// column-major order with counts alternating (zeros, ones, zeros, ...),
/// matching the de-facto COCO convention.
struct Mask {
  std::vector<int64_t> rle;
  int height = 0;
  int width = 0;
  int64_t area = 0;
  BBox bbox;             // tight box of set pixels; (0,0,0,0) when empty
  double quality = 1.0;  // proposer-reported score in [0,1]
  int id = 0;
};

/// Encode a raster; area and bbox are derived. Throws InvalidInputError on a
/// zero-area raster.
Mask rle_encode(const BinaryRaster& raster);

BinaryRaster rle_decode(const Mask& mask);

/// |A ∩ B| / |A ∪ B|; 0 when the union is empty. Throws ShapeError on
/// dimension mismatch.
double iou(const Mask& a, const Mask& b);
double iou(const BinaryRaster& a, const BinaryRaster& b);

/// Morphological dilation with a (2*px+1)^2 square structuring element.
BinaryRaster dilate(const BinaryRaster& raster, int px);

/// Checks the Mask invariants (decoded area matches, bbox tight, quality in
/// [0,1]); throws InvalidInputError on violation.
void validate_mask(const Mask& mask);

nlohmann::json mask_to_json(const Mask& mask);
Mask mask_from_json(const nlohmann::json& j);

std::vector<Mask> load_masks_json(const std::string& path);
void save_masks_json(const std::string& path, const std::vector<Mask>& masks);

}  // namespace promptseg
