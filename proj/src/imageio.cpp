#include "promptseg/imageio.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "promptseg/errors.hpp"

namespace promptseg {

ImageU8 load_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw InvalidInputError("load_image: cannot read " + path);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  ImageU8 img;
  img.height = rgb.rows;
  img.width = rgb.cols;
  img.data.assign(rgb.data, rgb.data + static_cast<size_t>(rgb.rows) * rgb.cols * 3);
  return img;
}

void save_png(const std::string& path, const ImageU8& image) {
  if (image.height <= 0 || image.width <= 0) {
    throw InvalidInputError("save_png: empty image");
  }
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<uint8_t*>(image.data.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path, bgr)) throw InvalidInputError("save_png: cannot write " + path);
}

void save_mask_png(const std::string& path, const BinaryRaster& raster) {
  cv::Mat gray(raster.height, raster.width, CV_8UC1);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      gray.at<uint8_t>(y, x) = raster.at(y, x) ? 255 : 0;
    }
  }
  if (!cv::imwrite(path, gray)) throw InvalidInputError("save_mask_png: cannot write " + path);
}

ImageU8 overlay_mask(const ImageU8& image, const BinaryRaster& raster, Rgb color, double alpha) {
  if (image.height != raster.height || image.width != raster.width) {
    throw ShapeError("overlay_mask: mask dimensions do not match image");
  }
  ImageU8 out = image;
  const double a = std::clamp(alpha, 0.0, 1.0);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (!raster.at(y, x)) continue;
      uint8_t* p = out.px(y, x);
      const uint8_t src[3] = {color.r, color.g, color.b};
      for (int c = 0; c < 3; ++c) {
        p[c] = static_cast<uint8_t>(std::lround((1.0 - a) * p[c] + a * src[c]));
      }
    }
  }
  return out;
}

}  // namespace promptseg
