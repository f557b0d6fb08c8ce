#pragma once

#include <string>

#include "promptseg/image.hpp"
#include "promptseg/mask.hpp"

namespace promptseg {

/// Decode an image file (PNG/JPEG/...) into RGB. Throws InvalidInputError if
/// the file cannot be read or decoded.
ImageU8 load_image(const std::string& path);

void save_png(const std::string& path, const ImageU8& image);

/// 8-bit single-channel PNG, 0/255, for human inspection of masks.
void save_mask_png(const std::string& path, const BinaryRaster& raster);

/// Alpha-blend `color` over the masked pixels of `image`.
ImageU8 overlay_mask(const ImageU8& image, const BinaryRaster& raster, Rgb color,
                     double alpha = 0.5);

}  // namespace promptseg
