#pragma once

#include <memory>
#include <string>
#include <vector>

#include "promptseg/image.hpp"
#include "promptseg/mask.hpp"

namespace promptseg {

/// Class-agnostic mask proposal source. Real segmentation models live behind
/// this interface; the library never looks inside them.
class ProposalBackend {
 public:
  virtual ~ProposalBackend() = default;
  virtual std::vector<Mask> propose(const ImageU8& image) const = 0;
  virtual std::string descriptor() const = 0;
};

inline constexpr int64_t kDefaultMinProposalArea = 16;

/// Boundary validation for any backend's output: every mask must match the
/// image dimensions and pass the Mask invariants; ids must be unique; masks
/// below min_area are dropped as noise.
std::vector<Mask> validate_proposals(std::vector<Mask> masks, int image_height, int image_width,
                                     int64_t min_area = kDefaultMinProposalArea);

/// Proposals imported from a mask JSON file (the adapter path for external
/// segmentation models: run them elsewhere, dump masks, feed the file here).
class MaskFileBackend : public ProposalBackend {
 public:
  explicit MaskFileBackend(std::string path) : path_(std::move(path)) {}
  std::vector<Mask> propose(const ImageU8& image) const override;
  std::string descriptor() const override { return "mask-file:" + path_; }

 private:
  std::string path_;
};

}  // namespace promptseg
