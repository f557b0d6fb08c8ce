#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace promptseg {

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Interleaved RGB, row-major, 8 bits per channel.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // height * width * 3

  static ImageU8 filled(int height, int width, Rgb color);

  uint8_t* px(int y, int x) { return data.data() + 3 * (static_cast<size_t>(y) * width + x); }
  const uint8_t* px(int y, int x) const {
    return data.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
  bool operator==(const ImageU8&) const = default;
};

/// Per-channel normalization constants. Defaults match the convention used by
/// ResNet-50-pretrained backbones; they are configuration, not hard-coded law,
/// and get recorded in run metadata.
struct Normalization {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};

  /// The mean expressed as an 8-bit color (background fill for segment crops).
  Rgb mean_color() const;
  bool operator==(const Normalization&) const = default;
};

inline constexpr int kModelInputSize = 224;

/// Fixed-size normalized float tensor fed to the encoders (H*W*3, row-major,
/// channel-interleaved).
struct PreprocessedImage {
  int height = kModelInputSize;
  int width = kModelInputSize;
  std::vector<float> pixels;
  std::string source_path;
};

/// Bilinear resize with half-pixel centers. Same-size input is returned
/// unchanged.
ImageU8 resize_bilinear(const ImageU8& src, int out_height, int out_width);

/// Resize to 224x224 (bilinear, no aspect preservation) and normalize
/// (x/255 - mean) / std per channel. Throws InvalidInputError on zero-area
/// input.
PreprocessedImage preprocess_image(const ImageU8& raw, const Normalization& norm = {});

/// Inverse of the normalization, rounded and clamped back to 8 bits.
ImageU8 denormalize(const PreprocessedImage& img, const Normalization& norm = {});

}  // namespace promptseg
