#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "promptseg/encoder.hpp"
#include "promptseg/image.hpp"

namespace promptseg {

struct TrainerConfig {
  double learning_rate = 1e-4;
  int projection_dim = 128;
  double temperature = 1.0;
  int batch_size = 8;
  int max_epochs = 30;
  double plateau_factor = 0.9;
  int plateau_patience = 5;
  double weight_decay = 0.0;
  uint64_t seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate(const TrainerConfig& config);

enum class TargetMode {
  kSoft,      // row-softmax of the mean within-modality similarity
  kIdentity,  // hard identity targets (ablation)
};

struct TrainOptions {
  double dropout_rate = 0.1;
  bool layer_norm = true;
  bool l2_normalize = true;
  TargetMode target_mode = TargetMode::kSoft;
};

struct TrainRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double current_lr = 0.0;  // lr in effect after this epoch's scheduler step
};

// ---------------------------------------------------------------------------
// Contrastive objective
// ---------------------------------------------------------------------------

/// logits(i,j) = dot(text_i, image_j) / temperature. Expects both batches
/// normalized; throws ShapeError on mismatched shapes, ConfigError on
/// temperature <= 0.
Eigen::MatrixXd similarity_logits(const EmbeddingBatch& text, const EmbeddingBatch& image,
                                  double temperature);

/// Soft targets: row-softmax of ((text·textᵀ + image·imageᵀ)/2) / temperature.
Eigen::MatrixXd contrastive_targets(const EmbeddingBatch& text, const EmbeddingBatch& image,
                                    double temperature, TargetMode mode = TargetMode::kSoft);

/// Mean over the batch of the average of row-wise and column-wise soft
/// cross-entropy between logits and targets.
double clip_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets);

/// dLoss/dLogits with targets treated as constants.
Eigen::MatrixXd clip_loss_logits_grad(const Eigen::MatrixXd& logits,
                                      const Eigen::MatrixXd& targets);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

/// Multiplies the learning rate by `factor` each time the validation loss has
/// failed to improve (by more than `threshold`, absolute) for `patience`
/// consecutive epochs. With a constant loss, patience 5 and factor 0.9 the
/// decays fire after epochs 6 and 11.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor, int patience, double threshold = 1e-4);

  /// Feed one epoch's validation loss; returns the lr in effect afterwards.
  double observe(double validation_loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double threshold_;
  int bad_epochs_ = 0;
  bool has_best_ = false;
  double best_ = 0.0;
};

/// AdamW with decoupled weight decay over a flat parameter vector.
class AdamW {
 public:
  explicit AdamW(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
            double weight_decay);

  const Eigen::VectorXd& m() const { return m_; }
  const Eigen::VectorXd& v() const { return v_; }
  int64_t t() const { return t_; }
  void restore(Eigen::VectorXd m, Eigen::VectorXd v, int64_t t);

 private:
  Eigen::VectorXd m_, v_;
  int64_t t_ = 0;
  double beta1_, beta2_, eps_;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Frozen backbone features for a set of (image, text) pairs; row i of both
/// matrices belongs to the same pair.
struct PairedFeatures {
  Eigen::MatrixXd image_features;  // N x D_image
  Eigen::MatrixXd text_features;   // N x D_text
};

struct Checkpoint {
  std::string version = "promptseg-checkpoint-v1";
  TrainerConfig config;
  TrainOptions options;
  ProjectionHead image_head;
  ProjectionHead text_head;
  Eigen::VectorXd opt_m, opt_v;
  int64_t opt_t = 0;
  Normalization normalization;
  double best_validation_loss = 0.0;
  int best_epoch = 0;
  std::string image_backend;
  std::string text_backend;
};

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);
nlohmann::json checkpoint_to_json(const Checkpoint& cp);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

struct TrainResult {
  Checkpoint best;  // heads and optimizer state at the best validation epoch
  std::vector<TrainRecord> records;
};

/// Full training loop: per-epoch seeded shuffling, AdamW updates, plateau lr
/// schedule on the epoch-mean validation loss, best-validation checkpoint
/// retained. Throws InvalidInputError on empty data or batch_size > train
/// size, TrainingDivergedError (with the epoch) on non-finite loss.
TrainResult train(const TrainerConfig& config, const PairedFeatures& train_set,
                  const PairedFeatures& val_set, const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct GridCellOutcome {
  TrainerConfig config;
  bool diverged = false;
  int diverged_epoch = -1;
  double best_validation_loss = 0.0;  // meaningful only when !diverged
};

struct GridResult {
  std::vector<GridCellOutcome> cells;
  int winner = -1;  // index into cells; -1 when every cell diverged
};

/// Winner = argmin validation loss over non-diverged cells; ties broken by
/// lower learning rate, then lower projection dim. Pure function of the cells.
int select_winner(const std::vector<GridCellOutcome>& cells);

/// Trains one cell per config; diverged cells are recorded, not fatal.
GridResult grid_search(const std::vector<TrainerConfig>& grid, const PairedFeatures& train_set,
                       const PairedFeatures& val_set, const TrainOptions& options = {});

nlohmann::json grid_report_json(const GridResult& result);

/// One JSON object per line, keys epoch/train_loss/validation_loss/current_lr.
void write_train_log(const std::string& path, const std::vector<TrainRecord>& records);

}  // namespace promptseg
