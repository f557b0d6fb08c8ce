#include "promptseg/image.hpp"

#include <algorithm>
#include <cmath>

#include "promptseg/errors.hpp"

namespace promptseg {

ImageU8 ImageU8::filled(int height, int width, Rgb color) {
  ImageU8 img;
  img.height = height;
  img.width = width;
  img.data.resize(static_cast<size_t>(height) * width * 3);
  for (size_t i = 0; i < img.data.size(); i += 3) {
    img.data[i] = color.r;
    img.data[i + 1] = color.g;
    img.data[i + 2] = color.b;
  }
  return img;
}

Rgb Normalization::mean_color() const {
  auto to_u8 = [](double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v * 255.0, 0.0, 255.0)));
  };
  return Rgb{to_u8(mean[0]), to_u8(mean[1]), to_u8(mean[2])};
}

ImageU8 resize_bilinear(const ImageU8& src, int out_height, int out_width) {
  if (src.height <= 0 || src.width <= 0 ||
      src.data.size() != static_cast<size_t>(src.height) * src.width * 3) {
    throw InvalidInputError("resize_bilinear: zero-area or malformed image");
  }
  if (out_height <= 0 || out_width <= 0) {
    throw InvalidInputError("resize_bilinear: non-positive output size");
  }
  if (out_height == src.height && out_width == src.width) return src;

  ImageU8 dst;
  dst.height = out_height;
  dst.width = out_width;
  dst.data.resize(static_cast<size_t>(out_height) * out_width * 3);

  const double sy = static_cast<double>(src.height) / out_height;
  const double sx = static_cast<double>(src.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const uint8_t* p00 = src.px(y0, x0);
      const uint8_t* p01 = src.px(y0, x1);
      const uint8_t* p10 = src.px(y1, x0);
      const uint8_t* p11 = src.px(y1, x1);
      uint8_t* out = dst.px(y, x);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - wy) * ((1 - wx) * p00[c] + wx * p01[c]) +
                         wy * ((1 - wx) * p10[c] + wx * p11[c]);
        out[c] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return dst;
}

PreprocessedImage preprocess_image(const ImageU8& raw, const Normalization& norm) {
  if (raw.height <= 0 || raw.width <= 0 ||
      raw.data.size() != static_cast<size_t>(raw.height) * raw.width * 3) {
    throw InvalidInputError("preprocess_image: zero-area or malformed RGB image");
  }
  const ImageU8 resized = resize_bilinear(raw, kModelInputSize, kModelInputSize);

  PreprocessedImage out;
  out.pixels.resize(static_cast<size_t>(kModelInputSize) * kModelInputSize * 3);
  for (size_t i = 0; i < out.pixels.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      const double v = resized.data[i + c] / 255.0;
      out.pixels[i + c] = static_cast<float>((v - norm.mean[c]) / norm.std[c]);
    }
  }
  return out;
}

ImageU8 denormalize(const PreprocessedImage& img, const Normalization& norm) {
  ImageU8 out;
  out.height = img.height;
  out.width = img.width;
  out.data.resize(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      const double v = (static_cast<double>(img.pixels[i + c]) * norm.std[c] + norm.mean[c]) * 255.0;
      out.data[i + c] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace promptseg
