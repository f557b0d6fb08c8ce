#include "promptseg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "promptseg/errors.hpp"
#include "promptseg/rng.hpp"
#include "promptseg/trainer.hpp"

namespace promptseg {

ColorKeyOracle::ColorKeyOracle(std::vector<std::pair<std::string, Rgb>> classes,
                               Normalization norm)
    : classes_(std::move(classes)), norm_(norm) {}

std::string ColorKeyOracle::predict(const PreprocessedImage& image) const {
  const ImageU8 rgb = denormalize(image, norm_);
  std::vector<int64_t> counts(classes_.size(), 0);
  for (size_t i = 0; i < rgb.data.size(); i += 3) {
    for (size_t k = 0; k < classes_.size(); ++k) {
      const Rgb c = classes_[k].second;
      if (std::abs(c.r - rgb.data[i]) <= 8 && std::abs(c.g - rgb.data[i + 1]) <= 8 &&
          std::abs(c.b - rgb.data[i + 2]) <= 8) {
        ++counts[k];
        break;
      }
    }
  }
  int64_t best_count = 0;
  size_t best = classes_.size();
  for (size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > best_count) {
      best_count = counts[k];
      best = k;
    }
  }
  return best == classes_.size() ? "<none>" : classes_[best].first;
}

std::string LinearClassifier::predict_features(const Eigen::VectorXd& features) const {
  if (features.size() != weights.cols()) {
    throw ShapeError("classifier: feature width does not match weights");
  }
  const Eigen::VectorXd logits = weights * features + bias;
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return classes[static_cast<size_t>(best)];
}

LinearClassifier train_linear_classifier(const LabeledFeatures& train_set,
                                         const LabeledFeatures& val_set,
                                         const ClassifierTrainConfig& config) {
  const Eigen::Index n = train_set.features.rows();
  if (n == 0) throw InvalidInputError("classifier: empty training set");
  if (static_cast<Eigen::Index>(train_set.labels.size()) != n) {
    throw ShapeError("classifier: features/labels size mismatch");
  }
  const int c = static_cast<int>(train_set.classes.size());
  const int d = static_cast<int>(train_set.features.cols());

  LinearClassifier model;
  model.classes = train_set.classes;
  model.weights = Eigen::MatrixXd::Zero(c, d);
  model.bias = Eigen::VectorXd::Zero(c);

  Eigen::VectorXd params(static_cast<Eigen::Index>(c) * d + c);
  params.setZero();
  AdamW optimizer(params.size());

  auto unpack = [&](const Eigen::VectorXd& flat) {
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < d; ++j) model.weights(i, j) = flat(static_cast<Eigen::Index>(i) * d + j);
    }
    model.bias = flat.tail(c);
  };

  const int batch = std::max(2, std::min<int>(config.batch_size, static_cast<int>(n)));
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<uint64_t>(epoch)));
    std::vector<size_t> order = permutation(static_cast<size_t>(n), rng);
    for (size_t begin = 0; begin < order.size(); begin += batch) {
      const size_t end = std::min(order.size(), begin + batch);
      Eigen::MatrixXd grad_w = Eigen::MatrixXd::Zero(c, d);
      Eigen::VectorXd grad_b = Eigen::VectorXd::Zero(c);
      for (size_t i = begin; i < end; ++i) {
        const Eigen::VectorXd x = train_set.features.row(order[i]).transpose();
        Eigen::VectorXd logits = model.weights * x + model.bias;
        logits.array() -= logits.maxCoeff();
        Eigen::VectorXd p = logits.array().exp();
        p /= p.sum();
        p(train_set.labels[order[i]]) -= 1.0;
        grad_w += p * x.transpose();
        grad_b += p;
      }
      const double scale = 1.0 / static_cast<double>(end - begin);
      Eigen::VectorXd grads(params.size());
      for (int i = 0; i < c; ++i) {
        for (int j = 0; j < d; ++j) {
          grads(static_cast<Eigen::Index>(i) * d + j) = grad_w(i, j) * scale;
        }
      }
      grads.tail(c) = grad_b * scale;
      optimizer.step(params, grads, config.learning_rate, config.weight_decay);
    }
    unpack(params);
  }

  // Validation accuracy, reported with the model.
  int correct = 0;
  for (Eigen::Index i = 0; i < val_set.features.rows(); ++i) {
    const std::string pred = model.predict_features(val_set.features.row(i).transpose());
    if (pred == val_set.classes[static_cast<size_t>(val_set.labels[static_cast<size_t>(i)])]) {
      ++correct;
    }
  }
  model.validation_accuracy = val_set.features.rows() == 0
                                  ? 0.0
                                  : static_cast<double>(correct) / val_set.features.rows();
  return model;
}

void save_classifier(const std::string& path, const LinearClassifier& model) {
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.weights.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j) row.push_back(model.weights(i, j));
    w.push_back(std::move(row));
  }
  nlohmann::json b = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.bias.size(); ++i) b.push_back(model.bias(i));
  nlohmann::json j{{"version", "promptseg-classifier-v1"},
                   {"classes", model.classes},
                   {"weights", w},
                   {"bias", b},
                   {"feature_backend", model.feature_backend},
                   {"validation_accuracy", model.validation_accuracy}};
  std::ofstream out(path);
  if (!out) throw InvalidInputError("save_classifier: cannot open " + path);
  out << j.dump(2) << "\n";
}

LinearClassifier load_classifier(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_classifier: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("version").get<std::string>() != "promptseg-classifier-v1") {
      throw ConfigError("load_classifier: unsupported version");
    }
    LinearClassifier model;
    model.classes = j.at("classes").get<std::vector<std::string>>();
    const auto& w = j.at("weights");
    const Eigen::Index rows = static_cast<Eigen::Index>(w.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
    model.weights.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index col = 0; col < cols; ++col) {
        model.weights(i, col) = w.at(i).at(col).get<double>();
      }
    }
    const auto& b = j.at("bias");
    model.bias.resize(static_cast<Eigen::Index>(b.size()));
    for (Eigen::Index i = 0; i < model.bias.size(); ++i) model.bias(i) = b.at(i).get<double>();
    model.feature_backend = j.at("feature_backend").get<std::string>();
    model.validation_accuracy = j.at("validation_accuracy").get<double>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("load_classifier: malformed json: ") + e.what());
  }
}

std::string LinearClassifierOracle::predict(const PreprocessedImage& image) const {
  const Eigen::MatrixXd features = backend_.encode({image});
  return model_.predict_features(features.row(0).transpose());
}

Eigen::MatrixXd PixelPoolBackend::encode(const std::vector<PreprocessedImage>& inputs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), dim());
  for (size_t idx = 0; idx < inputs.size(); ++idx) {
    const auto& img = inputs[idx];
    const int cell_h = img.height / grid_;
    const int cell_w = img.width / grid_;
    if (cell_h == 0 || cell_w == 0) {
      throw ShapeError("pixel-pool: image smaller than pooling grid");
    }
    for (int gy = 0; gy < grid_; ++gy) {
      for (int gx = 0; gx < grid_; ++gx) {
        double sum[3] = {0, 0, 0};
        int count = 0;
        for (int y = gy * cell_h; y < (gy + 1) * cell_h; ++y) {
          for (int x = gx * cell_w; x < (gx + 1) * cell_w; ++x) {
            const size_t p = 3 * (static_cast<size_t>(y) * img.width + x);
            sum[0] += img.pixels[p];
            sum[1] += img.pixels[p + 1];
            sum[2] += img.pixels[p + 2];
            ++count;
          }
        }
        const Eigen::Index base = 3 * (static_cast<Eigen::Index>(gy) * grid_ + gx);
        for (int ch = 0; ch < 3; ++ch) {
          out(static_cast<Eigen::Index>(idx), base + ch) = sum[ch] / count;
        }
      }
    }
  }
  return out;
}

}  // namespace promptseg
