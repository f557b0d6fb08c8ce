#include "promptseg/filters.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

void check_dims(const std::vector<Mask>& masks) {
  for (size_t i = 1; i < masks.size(); ++i) {
    if (masks[i].height != masks[0].height || masks[i].width != masks[0].width) {
      throw ShapeError("filters: masks do not share dimensions");
    }
  }
}

std::vector<BinaryRaster> decode_all(const std::vector<Mask>& masks) {
  std::vector<BinaryRaster> rasters;
  rasters.reserve(masks.size());
  for (const auto& m : masks) rasters.push_back(rle_decode(m));
  return rasters;
}

int64_t intersection_count(const BinaryRaster& a, const BinaryRaster& b) {
  int64_t n = 0;
  for (size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] && b.data[i]);
  return n;
}

}  // namespace

void validate(const FilterConfig& config) {
  if (!(config.dup_iou_threshold > 0.0 && config.dup_iou_threshold <= 1.0)) {
    throw ConfigError("filters.dup_iou_threshold must be in (0,1]");
  }
  if (!(config.overlap_threshold > 0.0 && config.overlap_threshold <= 1.0)) {
    throw ConfigError("filters.overlap_threshold must be in (0,1]");
  }
}

std::vector<Mask> dedup(const std::vector<Mask>& masks, const FilterConfig& config) {
  validate(config);
  if (masks.empty()) return {};
  check_dims(masks);
  const auto rasters = decode_all(masks);

  std::vector<size_t> order(masks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (masks[a].quality != masks[b].quality) return masks[a].quality > masks[b].quality;
    if (masks[a].area != masks[b].area) return masks[a].area > masks[b].area;
    return masks[a].id < masks[b].id;
  });

  std::vector<size_t> kept;
  for (size_t idx : order) {
    bool duplicate = false;
    for (size_t k : kept) {
      const int64_t inter = intersection_count(rasters[idx], rasters[k]);
      const int64_t uni = masks[idx].area + masks[k].area - inter;
      const double pair_iou = uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
      if (pair_iou >= config.dup_iou_threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(idx);
  }

  std::sort(kept.begin(), kept.end(),
            [&](size_t a, size_t b) { return masks[a].id < masks[b].id; });
  std::vector<Mask> out;
  out.reserve(kept.size());
  for (size_t idx : kept) out.push_back(masks[idx]);
  return out;
}

std::vector<Mask> split_intersections(const std::vector<Mask>& masks, const FilterConfig& config) {
  validate(config);
  if (masks.empty()) return {};
  check_dims(masks);
  const auto rasters = decode_all(masks);
  const int height = masks[0].height;
  const int width = masks[0].width;
  const size_t n_px = static_cast<size_t>(height) * width;
  const size_t n = masks.size();

  // Global priority: smaller area wins contested pixels, then higher quality,
  // then lower id. rank[i] = position of mask i in that order.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (masks[a].area != masks[b].area) return masks[a].area < masks[b].area;
    if (masks[a].quality != masks[b].quality) return masks[a].quality > masks[b].quality;
    return masks[a].id < masks[b].id;
  });

  // Claim pixels in priority order.
  constexpr int32_t kUnowned = -1;
  std::vector<int32_t> owner(n_px, kUnowned);
  std::vector<int64_t> surviving(n, 0);
  for (size_t rank = 0; rank < n; ++rank) {
    const size_t idx = order[rank];
    const auto& raster = rasters[idx];
    for (size_t p = 0; p < n_px; ++p) {
      if (raster.data[p] && owner[p] == kUnowned) {
        owner[p] = static_cast<int32_t>(idx);
        ++surviving[idx];
      }
    }
  }

  // Absorb masks that kept less than overlap_threshold of their area, when
  // every one of their surviving pixels is covered by another live mask.
  std::vector<bool> dropped(n, false);
  auto reassign_target = [&](size_t p, size_t skip) -> int32_t {
    for (size_t idx : order) {
      if (idx == skip || dropped[idx]) continue;
      if (rasters[idx].data[p]) return static_cast<int32_t>(idx);
    }
    return kUnowned;
  };
  while (true) {
    size_t best = n;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      if (dropped[i] || surviving[i] == 0 || masks[i].area == 0) continue;
      const double ratio = static_cast<double>(surviving[i]) / masks[i].area;
      if (ratio >= config.overlap_threshold) continue;
      bool absorbable = true;
      for (size_t p = 0; p < n_px && absorbable; ++p) {
        if (owner[p] == static_cast<int32_t>(i) && reassign_target(p, i) == kUnowned) {
          absorbable = false;
        }
      }
      if (!absorbable) continue;
      if (ratio < best_ratio || (ratio == best_ratio && masks[i].id < masks[best].id)) {
        best = i;
        best_ratio = ratio;
      }
    }
    if (best == n) break;
    dropped[best] = true;
    for (size_t p = 0; p < n_px; ++p) {
      if (owner[p] == static_cast<int32_t>(best)) {
        const int32_t target = reassign_target(p, best);
        owner[p] = target;
        ++surviving[target];
      }
    }
    surviving[best] = 0;
  }

  // Rebuild surviving masks from the ownership map.
  std::vector<BinaryRaster> out_rasters(n);
  for (size_t i = 0; i < n; ++i) {
    if (surviving[i] > 0) out_rasters[i] = BinaryRaster::zeros(height, width);
  }
  for (size_t p = 0; p < n_px; ++p) {
    if (owner[p] != kUnowned) out_rasters[owner[p]].data[p] = 1;
  }

  std::vector<size_t> out_order;
  for (size_t i = 0; i < n; ++i) {
    if (surviving[i] > 0) out_order.push_back(i);
  }
  std::sort(out_order.begin(), out_order.end(),
            [&](size_t a, size_t b) { return masks[a].id < masks[b].id; });

  std::vector<Mask> out;
  out.reserve(out_order.size());
  for (size_t i : out_order) {
    Mask m = rle_encode(out_rasters[i]);
    m.quality = masks[i].quality;
    m.id = masks[i].id;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Mask> filter_pipeline(const std::vector<Mask>& masks, const FilterConfig& config) {
  validate(config);
  std::vector<Mask> current = masks;
  if (config.enable_dedup) current = dedup(current, config);
  if (config.enable_split) current = split_intersections(current, config);
  return current;
}

}  // namespace promptseg
