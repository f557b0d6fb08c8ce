#pragma once

#include <map>
#include <string>
#include <vector>

#include "promptseg/encoder.hpp"
#include "promptseg/image.hpp"
#include "promptseg/mask.hpp"

namespace promptseg {

enum class RenderMode { kMaskedCrop, kBboxCrop };

struct SegmentCrop {
  PreprocessedImage pixels;
  int source_mask_id = 0;
  RenderMode render_mode = RenderMode::kMaskedCrop;
};

struct SelectorConfig {
  RenderMode render_mode = RenderMode::kMaskedCrop;
  Normalization normalization;
  /// Fill for background pixels in MASKED_CROP mode; defaults to the
  /// normalization-mean color so filled pixels sit near zero after
  /// preprocessing.
  bool fill_with_mean = true;
  Rgb fill{124, 116, 104};
  int bbox_margin = 4;

  Rgb effective_fill() const { return fill_with_mean ? normalization.mean_color() : fill; }
};

/// Crop the mask's bounding box (with margin, clamped) out of the image and
/// preprocess it. MASKED_CROP first paints pixels outside the mask with the
/// fill color; BBOX_CROP takes the raw crop. Throws InvalidInputError on an
/// empty mask and ShapeError on dimension mismatch.
SegmentCrop render_segment(const ImageU8& image, const Mask& mask, RenderMode mode,
                           const SelectorConfig& config = {});

struct SelectionResult {
  int chosen_mask_id = -1;
  std::map<int, double> scores;  // mask id -> cosine similarity
  std::string prompt;
  Mask chosen_mask;
};

/// Score every candidate mask against the prompt in the shared latent space
/// and return the argmax (ties: larger area, then lower id). All crops are
/// encoded in one batch; the result is independent of batch partitioning
/// because every stage is row-wise.
SelectionResult select_segment(const ImageU8& image, const std::vector<Mask>& masks,
                               const std::string& prompt, const ProjectionHead& image_head,
                               const ProjectionHead& text_head, const ImageBackend& image_backend,
                               const TextBackend& text_backend,
                               const SelectorConfig& config = {});

}  // namespace promptseg
