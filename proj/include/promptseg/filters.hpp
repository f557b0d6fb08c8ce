#pragma once

#include <vector>

#include "promptseg/mask.hpp"

namespace promptseg {

struct FilterConfig {
  /// Pairs with IoU >= this are duplicates; the higher-quality one survives.
  double dup_iou_threshold = 0.9;
  /// A mask that keeps less than this fraction of its area after splitting is
  /// absorbed into the other masks covering its pixels (when possible).
  double overlap_threshold = 0.05;
  bool enable_dedup = true;
  bool enable_split = true;
};

/// Thresholds must lie in (0,1]; throws ConfigError otherwise.
void validate(const FilterConfig& config);

/// Duplicate suppression: for every surviving pair IoU < dup_iou_threshold.
/// When a pair exceeds it, the higher-quality mask survives (tie: larger
/// area, then lower id). Output is a subset of the input, sorted by id.
std::vector<Mask> dedup(const std::vector<Mask>& masks, const FilterConfig& config);

/// Disjointify overlapping masks without losing coverage: every pixel covered
/// by the input set is covered by exactly one output mask. Contested pixels
/// go to the smaller-area mask (tie: higher quality, then lower id). Masks
/// emptied by splitting are dropped; masks shrunk below
/// overlap_threshold * original area are absorbed where another input mask
/// covers their pixels.
std::vector<Mask> split_intersections(const std::vector<Mask>& masks, const FilterConfig& config);

/// dedup then split_intersections, each gated by its enable flag.
std::vector<Mask> filter_pipeline(const std::vector<Mask>& masks, const FilterConfig& config);

}  // namespace promptseg
