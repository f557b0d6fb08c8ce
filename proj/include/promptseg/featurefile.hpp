#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "promptseg/encoder.hpp"

namespace promptseg {

/// Simple binary store of precomputed embeddings keyed by string:
///   "PSEGFEAT1\n" | u32 dim | u64 count | count * (u32 keylen, key, dim f64)
/// little-endian throughout. Real backbone features are extracted offline
/// (any tool) into this format and consumed behind the backend interfaces.
struct FeatureFile {
  int dim = 0;
  std::unordered_map<std::string, Eigen::VectorXd> features;

  static FeatureFile load(const std::string& path);
  void save(const std::string& path) const;
};

/// Keys are the raw text strings.
class FeatureFileTextBackend : public TextBackend {
 public:
  FeatureFileTextBackend(FeatureFile file, std::string name);
  Eigen::MatrixXd encode(const std::vector<std::string>& inputs) const override;
  int dim() const override { return file_.dim; }
  std::string descriptor() const override { return "feature-file-text:" + name_; }

 private:
  FeatureFile file_;
  std::string name_;
};

/// Keys are PreprocessedImage::source_path values.
class FeatureFileImageBackend : public ImageBackend {
 public:
  FeatureFileImageBackend(FeatureFile file, std::string name);
  Eigen::MatrixXd encode(const std::vector<PreprocessedImage>& inputs) const override;
  int dim() const override { return file_.dim; }
  std::string descriptor() const override { return "feature-file-image:" + name_; }

 private:
  FeatureFile file_;
  std::string name_;
};

}  // namespace promptseg
