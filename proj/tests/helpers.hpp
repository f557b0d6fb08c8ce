#pragma once

#include <filesystem>
#include <string>

#include "promptseg/mask.hpp"
#include "promptseg/rng.hpp"

namespace promptseg::testing {

/// Fresh scratch directory under the system temp root.
inline std::string make_temp_dir(const std::string& tag) {
  static uint64_t counter = 0;
  const auto base = std::filesystem::temp_directory_path() / "promptseg_tests";
  const auto dir = base / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline BinaryRaster random_raster(int height, int width, double fill_prob, Rng& rng) {
  BinaryRaster r = BinaryRaster::zeros(height, width);
  for (auto& v : r.data) v = rng.uniform() < fill_prob ? 1 : 0;
  return r;
}

/// Random axis-aligned rectangle raster (possibly overlapping others).
inline BinaryRaster random_rect_raster(int height, int width, int min_size, int max_size,
                                       Rng& rng) {
  BinaryRaster r = BinaryRaster::zeros(height, width);
  const int h = min_size + static_cast<int>(rng.below(max_size - min_size + 1));
  const int w = min_size + static_cast<int>(rng.below(max_size - min_size + 1));
  const int y0 = static_cast<int>(rng.below(std::max(1, height - h)));
  const int x0 = static_cast<int>(rng.below(std::max(1, width - w)));
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) r.set(y, x, 1);
  }
  return r;
}

}  // namespace promptseg::testing
