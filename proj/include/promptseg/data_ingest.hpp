#pragma once

#include <string>
#include <utility>
#include <vector>

#include "promptseg/image.hpp"

namespace promptseg {

struct ManifestEntry {
  std::string image_path;
  std::string class_name;
  std::string caption;  // may be empty until build_captions fills it
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;  // ordered, unique

  static DatasetManifest from_entries(std::vector<ManifestEntry> entries);
};

/// Invariants: unique image paths, every class_name registered.
void validate_manifest(const DatasetManifest& manifest);

/// JSON-lines file, one object per line with keys image_path, class_name and
/// optional caption.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

enum class CaptionStyle { kNameOnly, kSentence };

/// NAME_ONLY yields the bare class name, SENTENCE the "This is an image of
/// <name>" template. Names are lower-cased and underscores become spaces.
/// Throws InvalidInputError on an empty class name.
std::string build_caption(const std::string& class_name, CaptionStyle style);

struct CaptionedSample {
  std::string image_path;
  std::string caption;
  std::string class_name;
};

std::vector<CaptionedSample> build_captions(const DatasetManifest& manifest, CaptionStyle style);

struct SplitSpec {
  double train_fraction = 0.8;
  uint64_t seed = 0;
};

/// Deterministic partition; train size = floor(train_fraction * N). With
/// stratification, per-class quotas follow the largest-remainder method so
/// the total still lands exactly on the floor.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec,
                                                          bool stratified = false);

}  // namespace promptseg
