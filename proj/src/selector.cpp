#include "promptseg/selector.hpp"

#include <algorithm>
#include <cmath>

#include "promptseg/errors.hpp"

namespace promptseg {

SegmentCrop render_segment(const ImageU8& image, const Mask& mask, RenderMode mode,
                           const SelectorConfig& config) {
  if (mask.height != image.height || mask.width != image.width) {
    throw ShapeError("render_segment: mask dimensions do not match image");
  }
  if (mask.area == 0) throw InvalidInputError("render_segment: empty mask");

  const int x0 = std::max(0, mask.bbox.x - config.bbox_margin);
  const int y0 = std::max(0, mask.bbox.y - config.bbox_margin);
  const int x1 = std::min(image.width, mask.bbox.x + mask.bbox.w + config.bbox_margin);
  const int y1 = std::min(image.height, mask.bbox.y + mask.bbox.h + config.bbox_margin);

  const BinaryRaster raster = mode == RenderMode::kMaskedCrop ? rle_decode(mask) : BinaryRaster{};
  const Rgb fill = config.effective_fill();

  ImageU8 crop;
  crop.height = y1 - y0;
  crop.width = x1 - x0;
  crop.data.resize(static_cast<size_t>(crop.height) * crop.width * 3);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      uint8_t* dst = crop.px(y - y0, x - x0);
      if (mode == RenderMode::kMaskedCrop && !raster.at(y, x)) {
        dst[0] = fill.r;
        dst[1] = fill.g;
        dst[2] = fill.b;
      } else {
        const uint8_t* src = image.px(y, x);
        dst[0] = src[0];
        dst[1] = src[1];
        dst[2] = src[2];
      }
    }
  }

  SegmentCrop out;
  out.pixels = preprocess_image(crop, config.normalization);
  out.pixels.source_path = "mask:" + std::to_string(mask.id);
  out.source_mask_id = mask.id;
  out.render_mode = mode;
  return out;
}

SelectionResult select_segment(const ImageU8& image, const std::vector<Mask>& masks,
                               const std::string& prompt, const ProjectionHead& image_head,
                               const ProjectionHead& text_head, const ImageBackend& image_backend,
                               const TextBackend& text_backend, const SelectorConfig& config) {
  if (masks.empty()) throw NoCandidatesError("select_segment: no candidate masks");
  if (prompt.empty()) throw InvalidInputError("select_segment: empty prompt");

  std::vector<PreprocessedImage> crops;
  crops.reserve(masks.size());
  for (const auto& mask : masks) {
    crops.push_back(render_segment(image, mask, config.render_mode, config).pixels);
  }

  const EmbeddingBatch image_emb =
      project(image_backend.encode(crops), image_head, Modality::kImage);
  const EmbeddingBatch text_emb =
      project(text_backend.encode({prompt}), text_head, Modality::kText);

  auto cosine = [&](Eigen::Index row) {
    const auto& iv = image_emb.vectors.row(row);
    const auto& tv = text_emb.vectors.row(0);
    if (image_emb.normalized && text_emb.normalized) return iv.dot(tv);
    const double denom = std::max(iv.norm() * tv.norm(), 1e-12);
    return iv.dot(tv) / denom;
  };

  SelectionResult result;
  result.prompt = prompt;
  size_t best = 0;
  for (size_t i = 0; i < masks.size(); ++i) {
    const double score = cosine(static_cast<Eigen::Index>(i));
    result.scores[masks[i].id] = score;
    if (i == 0) continue;
    const double best_score = result.scores.at(masks[best].id);
    if (score > best_score ||
        (score == best_score && (masks[i].area > masks[best].area ||
                                 (masks[i].area == masks[best].area &&
                                  masks[i].id < masks[best].id)))) {
      best = i;
    }
  }
  result.chosen_mask_id = masks[best].id;
  result.chosen_mask = masks[best];
  return result;
}

}  // namespace promptseg
