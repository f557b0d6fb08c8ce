#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "promptseg/encoder.hpp"
#include "promptseg/image.hpp"

namespace promptseg {

/// Independent supervised classifier used to adjudicate pipeline correctness.
class ClassifierOracle {
 public:
  virtual ~ClassifierOracle() = default;
  virtual std::string predict(const PreprocessedImage& image) const = 0;
  virtual double reported_accuracy() const = 0;
  virtual std::string descriptor() const = 0;
};

/// Deterministic mock for CI: predicts the class whose registered color
/// dominates the image; "<none>" when no registered color is present.
class ColorKeyOracle : public ClassifierOracle {
 public:
  ColorKeyOracle(std::vector<std::pair<std::string, Rgb>> classes, Normalization norm = {});
  std::string predict(const PreprocessedImage& image) const override;
  double reported_accuracy() const override { return 1.0; }
  std::string descriptor() const override { return "color-key"; }

 private:
  std::vector<std::pair<std::string, Rgb>> classes_;
  Normalization norm_;
};

/// Softmax regression over features from an image backend; the desk-scale
/// stand-in for a supervised CNN baseline (plug real backbone features in via
/// a feature-file backend for integration runs).
struct LinearClassifier {
  std::vector<std::string> classes;
  Eigen::MatrixXd weights;  // C x D
  Eigen::VectorXd bias;     // C
  std::string feature_backend;
  double validation_accuracy = 0.0;

  std::string predict_features(const Eigen::VectorXd& features) const;
};

struct ClassifierTrainConfig {
  double learning_rate = 0.05;
  int max_epochs = 50;
  int batch_size = 16;
  double weight_decay = 0.0;
  uint64_t seed = 0;
};

/// Labeled feature rows; labels index into `classes`.
struct LabeledFeatures {
  Eigen::MatrixXd features;  // N x D
  std::vector<int> labels;
  std::vector<std::string> classes;
};

LinearClassifier train_linear_classifier(const LabeledFeatures& train_set,
                                         const LabeledFeatures& val_set,
                                         const ClassifierTrainConfig& config);

void save_classifier(const std::string& path, const LinearClassifier& model);
LinearClassifier load_classifier(const std::string& path);

/// Oracle adapter: extract features with the backend, predict with the model.
class LinearClassifierOracle : public ClassifierOracle {
 public:
  LinearClassifierOracle(LinearClassifier model, const ImageBackend& backend)
      : model_(std::move(model)), backend_(backend) {}
  std::string predict(const PreprocessedImage& image) const override;
  double reported_accuracy() const override { return model_.validation_accuracy; }
  std::string descriptor() const override { return "linear:" + model_.feature_backend; }

 private:
  LinearClassifier model_;
  const ImageBackend& backend_;
};

/// Grid mean-pooled normalized pixels (grid x grid x 3 features); linearly
/// separates solid-color classes and serves as the default classifier
/// feature extractor at desk scale.
class PixelPoolBackend : public ImageBackend {
 public:
  explicit PixelPoolBackend(int grid = 16) : grid_(grid) {}
  Eigen::MatrixXd encode(const std::vector<PreprocessedImage>& inputs) const override;
  int dim() const override { return grid_ * grid_ * 3; }
  std::string descriptor() const override { return "pixel-pool:" + std::to_string(grid_); }

 private:
  int grid_;
};

}  // namespace promptseg
