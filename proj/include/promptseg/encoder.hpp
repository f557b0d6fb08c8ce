#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "promptseg/image.hpp"
#include "promptseg/rng.hpp"

namespace promptseg {

enum class Modality { kImage, kText };

/// Projected vectors living in the shared latent space.
struct EmbeddingBatch {
  Eigen::MatrixXd vectors;  // B x D
  Modality modality = Modality::kImage;
  bool normalized = false;
};

struct ProjectionHeadConfig {
  int input_dim = 0;
  int projection_dim = 128;
  double dropout_rate = 0.1;
  bool layer_norm = true;    // normalize the residual sum per row
  bool l2_normalize = true;  // unit-norm rows so logits are cosines
};

/// Trainable head mapping a frozen backbone's embedding into the shared
/// space: linear -> GELU -> linear -> dropout -> residual from the first
/// linear output -> layer norm -> L2 row normalization.
class ProjectionHead {
 public:
  ProjectionHeadConfig config;
  Eigen::MatrixXd w1;  // D x D_in
  Eigen::VectorXd b1;  // D
  Eigen::MatrixXd w2;  // D x D
  Eigen::VectorXd b2;  // D
  Eigen::VectorXd ln_gamma;  // D
  Eigen::VectorXd ln_beta;   // D

  static ProjectionHead random_init(const ProjectionHeadConfig& config, uint64_t seed);

  /// Debug configuration: w1 is a truncating/padding identity, w2 is zero,
  /// biases zero, dropout off, layer norm off, L2 on — so the forward pass
  /// reduces to L2-normalized truncation/padding of the input.
  static ProjectionHead identity_debug(int input_dim, int projection_dim);

  struct Cache {
    Eigen::MatrixXd x, p, g, xhat, ln, y;
    Eigen::MatrixXd drop_mask;   // empty in eval mode
    Eigen::VectorXd inv_sigma;   // per-row 1/sqrt(var+eps)
    Eigen::VectorXd norms;       // per-row L2 norms before normalization
    bool training = false;
  };

  /// Row-wise forward pass. Dropout is active only when training is true and
  /// needs an rng. Throws ShapeError when x's width differs from input_dim.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training = false, Rng* rng = nullptr,
                          Cache* cache = nullptr) const;

  struct Gradients {
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2, ln_gamma, ln_beta;
  };

  /// Backprop through the cached forward pass. grad_out is dLoss/dOutput.
  /// When grad_input is non-null, dLoss/dX is written there.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                     Eigen::MatrixXd* grad_input = nullptr) const;

  int parameter_count() const;
  Eigen::VectorXd pack_parameters() const;
  void unpack_parameters(const Eigen::VectorXd& flat);
  static Eigen::VectorXd pack_gradients(const Gradients& g);
};

/// Project raw backbone embeddings into the shared space (evaluation mode).
EmbeddingBatch project(const Eigen::MatrixXd& raw, const ProjectionHead& head, Modality modality);

// ---------------------------------------------------------------------------
// Encoder backends
// ---------------------------------------------------------------------------

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual Eigen::MatrixXd encode(const std::vector<std::string>& inputs) const = 0;
  virtual int dim() const = 0;
  virtual std::string descriptor() const = 0;
};

class ImageBackend {
 public:
  virtual ~ImageBackend() = default;
  virtual Eigen::MatrixXd encode(const std::vector<PreprocessedImage>& inputs) const = 0;
  virtual int dim() const = 0;
  virtual std::string descriptor() const = 0;
};

/// Deterministic pseudo-random unit-scale vectors seeded by a stable hash of
/// each input byte string; equal inputs yield equal rows.
Eigen::MatrixXd mock_hash_encode(const std::vector<std::string>& inputs, int dim);

class MockHashTextBackend : public TextBackend {
 public:
  explicit MockHashTextBackend(int dim) : dim_(dim) {}
  Eigen::MatrixXd encode(const std::vector<std::string>& inputs) const override {
    return mock_hash_encode(inputs, dim_);
  }
  int dim() const override { return dim_; }
  std::string descriptor() const override { return "mock-hash-text:" + std::to_string(dim_); }

 private:
  int dim_;
};

/// Hashes the quantized pixel bytes of each image.
class MockHashImageBackend : public ImageBackend {
 public:
  explicit MockHashImageBackend(int dim, Normalization norm = {}) : dim_(dim), norm_(norm) {}
  Eigen::MatrixXd encode(const std::vector<PreprocessedImage>& inputs) const override;
  int dim() const override { return dim_; }
  std::string descriptor() const override { return "mock-hash-image:" + std::to_string(dim_); }

 private:
  int dim_;
  Normalization norm_;
};

/// Registry backing the paired oracle encoders: every registered label maps
/// to its own basis vector (identical across modalities, mutually orthogonal
/// across labels). Slot 0 is reserved for "no registered label".
class OracleRegistry {
 public:
  OracleRegistry(std::vector<std::string> labels, int dim);
  OracleRegistry(std::vector<std::pair<std::string, Rgb>> labeled_colors, int dim);

  int dim() const { return dim_; }
  const std::vector<std::string>& labels() const { return labels_; }
  bool has_label(const std::string& label) const;
  Rgb color_of(const std::string& label) const;

  /// Unit basis vector of the label; LookupError when unregistered.
  Eigen::VectorXd encode_label(const std::string& label) const;
  /// Basis vector of the reserved background slot.
  Eigen::VectorXd background_vector() const;
  /// Label whose registered color matches within tolerance, if any.
  std::optional<std::string> label_for_color(Rgb color, int tolerance = 8) const;

 private:
  std::vector<std::string> labels_;
  std::vector<Rgb> colors_;
  bool has_colors_ = false;
  int dim_;
};

/// The paired oracle encoder: image and text modalities of the same label map
/// to the same unit vector; distinct labels are orthogonal.
Eigen::VectorXd oracle_paired_encode(const OracleRegistry& registry, const std::string& label,
                                     Modality modality);

class OracleTextBackend : public TextBackend {
 public:
  explicit OracleTextBackend(const OracleRegistry& registry) : registry_(registry) {}
  /// Exact label match, else the unique registered label contained in the
  /// input (so captions like "this is an image of X" resolve to X).
  Eigen::MatrixXd encode(const std::vector<std::string>& inputs) const override;
  int dim() const override { return registry_.dim(); }
  std::string descriptor() const override { return "oracle-text"; }

 private:
  const OracleRegistry& registry_;
};

/// Maps an image to the label whose registered color dominates its pixels;
/// images with no registered color map to the background vector.
class OracleImageBackend : public ImageBackend {
 public:
  OracleImageBackend(const OracleRegistry& registry, Normalization norm = {})
      : registry_(registry), norm_(norm) {}
  Eigen::MatrixXd encode(const std::vector<PreprocessedImage>& inputs) const override;
  int dim() const override { return registry_.dim(); }
  std::string descriptor() const override { return "oracle-image"; }

  /// Dominant registered label of an image, if any pixel matches.
  std::optional<std::string> dominant_label(const PreprocessedImage& img) const;

 private:
  const OracleRegistry& registry_;
  Normalization norm_;
};

}  // namespace promptseg
