#include "promptseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "promptseg/errors.hpp"
#include "promptseg/rng.hpp"

namespace promptseg {

void validate(const TrainerConfig& config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("trainer.learning_rate must be > 0");
  if (config.projection_dim < 1) throw ConfigError("trainer.projection_dim must be >= 1");
  if (!(config.temperature > 0.0)) throw ConfigError("trainer.temperature must be > 0");
  if (config.batch_size < 2) throw ConfigError("trainer.batch_size must be >= 2");
  if (config.max_epochs < 1) throw ConfigError("trainer.max_epochs must be >= 1");
  if (!(config.plateau_factor > 0.0 && config.plateau_factor < 1.0)) {
    throw ConfigError("trainer.plateau_factor must be in (0,1)");
  }
  if (config.plateau_patience < 1) throw ConfigError("trainer.plateau_patience must be >= 1");
  if (config.weight_decay < 0.0) throw ConfigError("trainer.weight_decay must be >= 0");
}

// ---------------------------------------------------------------------------
// Contrastive objective
// ---------------------------------------------------------------------------

namespace {

void check_pair(const EmbeddingBatch& text, const EmbeddingBatch& image, double temperature) {
  if (text.vectors.rows() != image.vectors.rows() || text.vectors.cols() != image.vectors.cols()) {
    throw ShapeError("contrastive: text and image batch shapes differ");
  }
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
}

/// Row-wise softmax with the usual max subtraction.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    Eigen::RowVectorXd e = (m.row(i).array() - mx).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

/// Row-wise log-softmax.
Eigen::MatrixXd row_log_softmax(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = m.row(i).array() - mx;
    const double lse = std::log(shifted.array().exp().sum());
    out.row(i) = shifted.array() - lse;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd similarity_logits(const EmbeddingBatch& text, const EmbeddingBatch& image,
                                  double temperature) {
  check_pair(text, image, temperature);
  return text.vectors * image.vectors.transpose() / temperature;
}

Eigen::MatrixXd contrastive_targets(const EmbeddingBatch& text, const EmbeddingBatch& image,
                                    double temperature, TargetMode mode) {
  check_pair(text, image, temperature);
  const Eigen::Index b = text.vectors.rows();
  if (mode == TargetMode::kIdentity) {
    return Eigen::MatrixXd::Identity(b, b);
  }
  const Eigen::MatrixXd text_sim = text.vectors * text.vectors.transpose();
  const Eigen::MatrixXd image_sim = image.vectors * image.vectors.transpose();
  return row_softmax(((text_sim + image_sim) / 2.0) / temperature);
}

double clip_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("clip_loss: logits and targets shapes differ");
  }
  const Eigen::Index b = logits.rows();
  const Eigen::MatrixXd log_rows = row_log_softmax(logits);
  const Eigen::MatrixXd log_cols = row_log_softmax(logits.transpose());
  // Row CE uses target rows; column CE uses target columns.
  const double row_ce = -(targets.cwiseProduct(log_rows)).sum();
  const double col_ce = -(targets.transpose().cwiseProduct(log_cols)).sum();
  return 0.5 * (row_ce + col_ce) / static_cast<double>(b);
}

Eigen::MatrixXd clip_loss_logits_grad(const Eigen::MatrixXd& logits,
                                      const Eigen::MatrixXd& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("clip_loss_logits_grad: logits and targets shapes differ");
  }
  const Eigen::Index b = logits.rows();
  const Eigen::MatrixXd p_rows = row_softmax(logits);
  const Eigen::MatrixXd p_cols = row_softmax(logits.transpose()).transpose();
  // For each row i: d(rowCE_i)/dlogits = row_softmax_i * sum(t_i) - t_i; target
  // rows sum to 1 so the scale factor is 1. Likewise for columns.
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double trow = targets.row(i).sum();
    grad.row(i) += p_rows.row(i) * trow - targets.row(i);
  }
  for (Eigen::Index j = 0; j < b; ++j) {
    const double tcol = targets.col(j).sum();
    grad.col(j) += p_cols.col(j) * tcol - targets.col(j);
  }
  return grad / (2.0 * static_cast<double>(b));
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

PlateauScheduler::PlateauScheduler(double initial_lr, double factor, int patience,
                                   double threshold)
    : lr_(initial_lr), factor_(factor), patience_(patience), threshold_(threshold) {
  if (!(initial_lr > 0.0)) throw ConfigError("scheduler: initial lr must be > 0");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("scheduler: factor must be in (0,1)");
  if (patience < 1) throw ConfigError("scheduler: patience must be >= 1");
}

double PlateauScheduler::observe(double validation_loss) {
  if (!has_best_ || validation_loss < best_ - threshold_) {
    best_ = has_best_ ? std::min(best_, validation_loss) : validation_loss;
    has_best_ = true;
    bad_epochs_ = 0;
    return lr_;
  }
  ++bad_epochs_;
  if (bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

AdamW::AdamW(Eigen::Index n, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), beta1_(beta1), beta2_(beta2),
      eps_(eps) {}

void AdamW::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                 double weight_decay) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("AdamW: parameter/gradient size mismatch");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grads.cwiseProduct(grads);
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const Eigen::VectorXd m_hat = m_ / bias1;
  const Eigen::VectorXd v_hat = v_ / bias2;
  // Decoupled decay: applied to the parameters directly, not through the
  // adaptive step.
  params -= lr * weight_decay * params;
  params -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
}

void AdamW::restore(Eigen::VectorXd m, Eigen::VectorXd v, int64_t t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<size_t>& idx, size_t begin,
                          size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = m.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

struct BatchLoss {
  double loss = 0.0;
  Eigen::MatrixXd d_image;  // dLoss/d(projected image rows)
  Eigen::MatrixXd d_text;
};

BatchLoss batch_objective(const EmbeddingBatch& text, const EmbeddingBatch& image,
                          double temperature, TargetMode mode, bool with_grad) {
  BatchLoss out;
  const Eigen::MatrixXd logits = similarity_logits(text, image, temperature);
  const Eigen::MatrixXd targets = contrastive_targets(text, image, temperature, mode);
  out.loss = clip_loss(logits, targets);
  if (with_grad) {
    // Targets are treated as constants (stop-gradient labels).
    const Eigen::MatrixXd d_logits = clip_loss_logits_grad(logits, targets);
    out.d_text = d_logits * image.vectors / temperature;
    out.d_image = d_logits.transpose() * text.vectors / temperature;
  }
  return out;
}

double validation_loss(const PairedFeatures& val, const ProjectionHead& image_head,
                       const ProjectionHead& text_head, const TrainerConfig& config,
                       TargetMode mode) {
  const size_t n = static_cast<size_t>(val.image_features.rows());
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  double total = 0.0;
  size_t counted = 0;
  for (size_t begin = 0; begin < n; begin += config.batch_size) {
    const size_t end = std::min(n, begin + config.batch_size);
    if (end - begin < 2) break;  // a 1-sample contrastive batch is degenerate
    EmbeddingBatch img = project(take_rows(val.image_features, idx, begin, end), image_head,
                                 Modality::kImage);
    EmbeddingBatch txt = project(take_rows(val.text_features, idx, begin, end), text_head,
                                 Modality::kText);
    const BatchLoss bl = batch_objective(txt, img, config.temperature, mode, false);
    total += bl.loss * static_cast<double>(end - begin);
    counted += end - begin;
  }
  return counted == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : total / static_cast<double>(counted);
}

}  // namespace

TrainResult train(const TrainerConfig& config, const PairedFeatures& train_set,
                  const PairedFeatures& val_set, const TrainOptions& options) {
  validate(config);
  const Eigen::Index n_train = train_set.image_features.rows();
  const Eigen::Index n_val = val_set.image_features.rows();
  if (n_train == 0 || n_val == 0) throw InvalidInputError("train: empty dataset");
  if (train_set.text_features.rows() != n_train || val_set.text_features.rows() != n_val) {
    throw ShapeError("train: image/text pair counts differ");
  }
  if (config.batch_size > n_train) {
    throw InvalidInputError("train: batch_size exceeds training set size");
  }

  ProjectionHeadConfig img_cfg{static_cast<int>(train_set.image_features.cols()),
                               config.projection_dim, options.dropout_rate, options.layer_norm,
                               options.l2_normalize};
  ProjectionHeadConfig txt_cfg = img_cfg;
  txt_cfg.input_dim = static_cast<int>(train_set.text_features.cols());

  ProjectionHead image_head = ProjectionHead::random_init(img_cfg, mix_seed(config.seed, 1));
  ProjectionHead text_head = ProjectionHead::random_init(txt_cfg, mix_seed(config.seed, 2));

  const Eigen::Index n_img_params = image_head.parameter_count();
  Eigen::VectorXd params(n_img_params + text_head.parameter_count());
  params << image_head.pack_parameters(), text_head.pack_parameters();
  AdamW optimizer(params.size());
  PlateauScheduler scheduler(config.learning_rate, config.plateau_factor, config.plateau_patience);

  TrainResult result;
  result.best.config = config;
  result.best.options = options;
  result.best.best_validation_loss = std::numeric_limits<double>::infinity();

  double lr = config.learning_rate;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(config.seed, static_cast<uint64_t>(epoch)));
    std::vector<size_t> order = permutation(static_cast<size_t>(n_train), shuffle_rng);

    double epoch_loss = 0.0;
    size_t counted = 0;
    int step_in_epoch = 0;
    for (size_t begin = 0; begin + 1 < order.size(); begin += config.batch_size) {
      const size_t end = std::min(order.size(), begin + config.batch_size);
      if (end - begin < 2) break;
      ++step_in_epoch;
      Rng dropout_rng(mix_seed(mix_seed(config.seed, static_cast<uint64_t>(epoch)),
                               0xd0u + static_cast<uint64_t>(step_in_epoch)));

      ProjectionHead::Cache img_cache, txt_cache;
      EmbeddingBatch img;
      img.vectors = image_head.forward(take_rows(train_set.image_features, order, begin, end),
                                       true, &dropout_rng, &img_cache);
      img.modality = Modality::kImage;
      img.normalized = options.l2_normalize;
      EmbeddingBatch txt;
      txt.vectors = text_head.forward(take_rows(train_set.text_features, order, begin, end), true,
                                      &dropout_rng, &txt_cache);
      txt.modality = Modality::kText;
      txt.normalized = options.l2_normalize;

      const BatchLoss bl = batch_objective(txt, img, config.temperature, options.target_mode,
                                           true);
      if (!std::isfinite(bl.loss)) {
        throw TrainingDivergedError("train: non-finite loss at epoch " + std::to_string(epoch),
                                    epoch);
      }
      epoch_loss += bl.loss * static_cast<double>(end - begin);
      counted += end - begin;

      const auto img_grads = image_head.backward(img_cache, bl.d_image);
      const auto txt_grads = text_head.backward(txt_cache, bl.d_text);
      Eigen::VectorXd grads(params.size());
      grads << ProjectionHead::pack_gradients(img_grads), ProjectionHead::pack_gradients(txt_grads);

      optimizer.step(params, grads, lr, config.weight_decay);
      image_head.unpack_parameters(params.head(n_img_params));
      text_head.unpack_parameters(params.tail(params.size() - n_img_params));
    }
    const double train_loss = epoch_loss / static_cast<double>(counted);
    const double val_loss =
        validation_loss(val_set, image_head, text_head, config, options.target_mode);
    if (!std::isfinite(val_loss)) {
      throw TrainingDivergedError("train: non-finite validation loss at epoch " +
                                      std::to_string(epoch),
                                  epoch);
    }
    lr = scheduler.observe(val_loss);
    result.records.push_back(TrainRecord{epoch, train_loss, val_loss, lr});

    if (val_loss < result.best.best_validation_loss) {
      result.best.best_validation_loss = val_loss;
      result.best.best_epoch = epoch;
      result.best.image_head = image_head;
      result.best.text_head = text_head;
      result.best.opt_m = optimizer.m();
      result.best.opt_v = optimizer.v();
      result.best.opt_t = optimizer.t();
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

int select_winner(const std::vector<GridCellOutcome>& cells) {
  int winner = -1;
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    if (cell.diverged) continue;
    if (winner < 0) {
      winner = static_cast<int>(i);
      continue;
    }
    const auto& best = cells[static_cast<size_t>(winner)];
    if (cell.best_validation_loss < best.best_validation_loss) {
      winner = static_cast<int>(i);
    } else if (cell.best_validation_loss == best.best_validation_loss) {
      if (cell.config.learning_rate < best.config.learning_rate ||
          (cell.config.learning_rate == best.config.learning_rate &&
           cell.config.projection_dim < best.config.projection_dim)) {
        winner = static_cast<int>(i);
      }
    }
  }
  return winner;
}

GridResult grid_search(const std::vector<TrainerConfig>& grid, const PairedFeatures& train_set,
                       const PairedFeatures& val_set, const TrainOptions& options) {
  if (grid.empty()) throw InvalidInputError("grid_search: empty grid");
  GridResult result;
  for (const auto& config : grid) {
    GridCellOutcome cell;
    cell.config = config;
    try {
      const TrainResult tr = train(config, train_set, val_set, options);
      cell.best_validation_loss = tr.best.best_validation_loss;
    } catch (const TrainingDivergedError& e) {
      cell.diverged = true;
      cell.diverged_epoch = e.epoch();
    }
    result.cells.push_back(cell);
  }
  result.winner = select_winner(result.cells);
  return result;
}

nlohmann::json grid_report_json(const GridResult& result) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json c{{"learning_rate", cell.config.learning_rate},
                     {"projection_dim", cell.config.projection_dim}};
    if (cell.diverged) {
      c["status"] = "diverged";
      c["diverged_epoch"] = cell.diverged_epoch;
      c["validation_loss"] = nullptr;
    } else {
      c["status"] = "ok";
      c["validation_loss"] = cell.best_validation_loss;
    }
    cells.push_back(c);
  }
  nlohmann::json j{{"cells", cells}};
  if (result.winner >= 0) {
    const auto& w = result.cells[static_cast<size_t>(result.winner)];
    j["winner"] = {{"index", result.winner},
                   {"learning_rate", w.config.learning_rate},
                   {"projection_dim", w.config.projection_dim},
                   {"validation_loss", w.best_validation_loss}};
  } else {
    j["winner"] = nullptr;
  }
  return j;
}

void write_train_log(const std::string& path, const std::vector<TrainRecord>& records) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("write_train_log: cannot open " + path);
  for (const auto& r : records) {
    out << nlohmann::json{{"epoch", r.epoch},
                          {"train_loss", r.train_loss},
                          {"validation_loss", r.validation_loss},
                          {"current_lr", r.current_lr}}
               .dump()
        << "\n";
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

nlohmann::json head_to_json(const ProjectionHead& head) {
  return nlohmann::json{{"input_dim", head.config.input_dim},
                        {"projection_dim", head.config.projection_dim},
                        {"dropout_rate", head.config.dropout_rate},
                        {"layer_norm", head.config.layer_norm},
                        {"l2_normalize", head.config.l2_normalize},
                        {"w1", matrix_to_json(head.w1)},
                        {"b1", vector_to_json(head.b1)},
                        {"w2", matrix_to_json(head.w2)},
                        {"b2", vector_to_json(head.b2)},
                        {"ln_gamma", vector_to_json(head.ln_gamma)},
                        {"ln_beta", vector_to_json(head.ln_beta)}};
}

ProjectionHead head_from_json(const nlohmann::json& j) {
  ProjectionHead head;
  head.config.input_dim = j.at("input_dim").get<int>();
  head.config.projection_dim = j.at("projection_dim").get<int>();
  head.config.dropout_rate = j.at("dropout_rate").get<double>();
  head.config.layer_norm = j.at("layer_norm").get<bool>();
  head.config.l2_normalize = j.at("l2_normalize").get<bool>();
  head.w1 = matrix_from_json(j.at("w1"));
  head.b1 = vector_from_json(j.at("b1"));
  head.w2 = matrix_from_json(j.at("w2"));
  head.b2 = vector_from_json(j.at("b2"));
  head.ln_gamma = vector_from_json(j.at("ln_gamma"));
  head.ln_beta = vector_from_json(j.at("ln_beta"));
  return head;
}

}  // namespace

nlohmann::json checkpoint_to_json(const Checkpoint& cp) {
  return nlohmann::json{
      {"version", cp.version},
      {"trainer",
       {{"learning_rate", cp.config.learning_rate},
        {"projection_dim", cp.config.projection_dim},
        {"temperature", cp.config.temperature},
        {"batch_size", cp.config.batch_size},
        {"max_epochs", cp.config.max_epochs},
        {"plateau_factor", cp.config.plateau_factor},
        {"plateau_patience", cp.config.plateau_patience},
        {"weight_decay", cp.config.weight_decay},
        {"seed", cp.config.seed}}},
      {"options",
       {{"dropout_rate", cp.options.dropout_rate},
        {"layer_norm", cp.options.layer_norm},
        {"l2_normalize", cp.options.l2_normalize},
        {"target_mode", cp.options.target_mode == TargetMode::kSoft ? "soft" : "identity"}}},
      {"image_head", head_to_json(cp.image_head)},
      {"text_head", head_to_json(cp.text_head)},
      {"optimizer",
       {{"m", vector_to_json(cp.opt_m)}, {"v", vector_to_json(cp.opt_v)}, {"t", cp.opt_t}}},
      {"normalization",
       {{"mean", cp.normalization.mean}, {"std", cp.normalization.std}}},
      {"best_validation_loss", cp.best_validation_loss},
      {"best_epoch", cp.best_epoch},
      {"image_backend", cp.image_backend},
      {"text_backend", cp.text_backend}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint cp;
  try {
    cp.version = j.at("version").get<std::string>();
    if (cp.version != Checkpoint{}.version) {
      throw ConfigError("checkpoint: unsupported version " + cp.version);
    }
    const auto& t = j.at("trainer");
    cp.config.learning_rate = t.at("learning_rate").get<double>();
    cp.config.projection_dim = t.at("projection_dim").get<int>();
    cp.config.temperature = t.at("temperature").get<double>();
    cp.config.batch_size = t.at("batch_size").get<int>();
    cp.config.max_epochs = t.at("max_epochs").get<int>();
    cp.config.plateau_factor = t.at("plateau_factor").get<double>();
    cp.config.plateau_patience = t.at("plateau_patience").get<int>();
    cp.config.weight_decay = t.at("weight_decay").get<double>();
    cp.config.seed = t.at("seed").get<uint64_t>();
    const auto& o = j.at("options");
    cp.options.dropout_rate = o.at("dropout_rate").get<double>();
    cp.options.layer_norm = o.at("layer_norm").get<bool>();
    cp.options.l2_normalize = o.at("l2_normalize").get<bool>();
    cp.options.target_mode =
        o.at("target_mode").get<std::string>() == "identity" ? TargetMode::kIdentity
                                                             : TargetMode::kSoft;
    cp.image_head = head_from_json(j.at("image_head"));
    cp.text_head = head_from_json(j.at("text_head"));
    const auto& opt = j.at("optimizer");
    cp.opt_m = vector_from_json(opt.at("m"));
    cp.opt_v = vector_from_json(opt.at("v"));
    cp.opt_t = opt.at("t").get<int64_t>();
    const auto& n = j.at("normalization");
    cp.normalization.mean = n.at("mean").get<std::array<double, 3>>();
    cp.normalization.std = n.at("std").get<std::array<double, 3>>();
    cp.best_validation_loss = j.at("best_validation_loss").get<double>();
    cp.best_epoch = j.at("best_epoch").get<int>();
    cp.image_backend = j.at("image_backend").get<std::string>();
    cp.text_backend = j.at("text_backend").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed json: ") + e.what());
  }
  return cp;
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("save_checkpoint: cannot open " + path);
  out << checkpoint_to_json(cp).dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("load_checkpoint: " + path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace promptseg
