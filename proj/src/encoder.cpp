#include "promptseg/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kNormGuard = 1e-12;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * phi;
}

}  // namespace

ProjectionHead ProjectionHead::random_init(const ProjectionHeadConfig& config, uint64_t seed) {
  if (config.input_dim <= 0 || config.projection_dim <= 0) {
    throw ConfigError("projection head dims must be positive");
  }
  ProjectionHead head;
  head.config = config;
  const int d_in = config.input_dim;
  const int d = config.projection_dim;
  Rng rng(mix_seed(seed, 0x4eadu));
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(d));
  head.w1.resize(d, d_in);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d_in; ++j) head.w1(i, j) = s1 * rng.normal();
  }
  head.w2.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) head.w2(i, j) = s2 * rng.normal();
  }
  head.b1 = Eigen::VectorXd::Zero(d);
  head.b2 = Eigen::VectorXd::Zero(d);
  head.ln_gamma = Eigen::VectorXd::Ones(d);
  head.ln_beta = Eigen::VectorXd::Zero(d);
  return head;
}

ProjectionHead ProjectionHead::identity_debug(int input_dim, int projection_dim) {
  ProjectionHead head;
  head.config.input_dim = input_dim;
  head.config.projection_dim = projection_dim;
  head.config.dropout_rate = 0.0;
  head.config.layer_norm = false;
  head.config.l2_normalize = true;
  head.w1 = Eigen::MatrixXd::Zero(projection_dim, input_dim);
  for (int i = 0; i < std::min(projection_dim, input_dim); ++i) head.w1(i, i) = 1.0;
  head.w2 = Eigen::MatrixXd::Zero(projection_dim, projection_dim);
  head.b1 = Eigen::VectorXd::Zero(projection_dim);
  head.b2 = Eigen::VectorXd::Zero(projection_dim);
  head.ln_gamma = Eigen::VectorXd::Ones(projection_dim);
  head.ln_beta = Eigen::VectorXd::Zero(projection_dim);
  return head;
}

Eigen::MatrixXd ProjectionHead::forward(const Eigen::MatrixXd& x, bool training, Rng* rng,
                                        Cache* cache) const {
  if (x.cols() != config.input_dim) {
    throw ShapeError("projection head: input width " + std::to_string(x.cols()) +
                     " != configured " + std::to_string(config.input_dim));
  }
  const auto b = x.rows();
  const int d = config.projection_dim;

  Eigen::MatrixXd p = x * w1.transpose();
  p.rowwise() += b1.transpose();

  Eigen::MatrixXd g = p.unaryExpr([](double v) { return gelu(v); });
  Eigen::MatrixXd f = g * w2.transpose();
  f.rowwise() += b2.transpose();

  Eigen::MatrixXd drop_mask;
  if (training && config.dropout_rate > 0.0) {
    if (rng == nullptr) throw InvalidInputError("projection head: training forward needs an rng");
    drop_mask.resize(b, d);
    const double keep = 1.0 - config.dropout_rate;
    for (Eigen::Index i = 0; i < b; ++i) {
      for (int j = 0; j < d; ++j) drop_mask(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    f = f.cwiseProduct(drop_mask);
  }

  Eigen::MatrixXd r = f + p;  // residual from the first linear output

  Eigen::MatrixXd ln;
  Eigen::MatrixXd xhat;
  Eigen::VectorXd inv_sigma;
  if (config.layer_norm) {
    ln.resize(b, d);
    xhat.resize(b, d);
    inv_sigma.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
      const double mu = r.row(i).mean();
      const Eigen::RowVectorXd centered = r.row(i).array() - mu;
      const double var = centered.squaredNorm() / d;
      const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
      inv_sigma(i) = inv;
      xhat.row(i) = centered * inv;
      ln.row(i) = xhat.row(i).cwiseProduct(ln_gamma.transpose()) + ln_beta.transpose();
    }
  } else {
    ln = r;
  }

  Eigen::MatrixXd y;
  Eigen::VectorXd norms;
  if (config.l2_normalize) {
    y.resize(b, d);
    norms.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
      const double n = std::max(ln.row(i).norm(), kNormGuard);
      norms(i) = n;
      y.row(i) = ln.row(i) / n;
    }
  } else {
    y = ln;
  }

  if (cache != nullptr) {
    cache->x = x;
    cache->p = p;
    cache->g = g;
    cache->xhat = xhat;
    cache->ln = ln;
    cache->y = y;
    cache->drop_mask = drop_mask;
    cache->inv_sigma = inv_sigma;
    cache->norms = norms;
    cache->training = training;
  }
  return y;
}

ProjectionHead::Gradients ProjectionHead::backward(const Cache& cache,
                                                   const Eigen::MatrixXd& grad_out,
                                                   Eigen::MatrixXd* grad_input) const {
  const auto b = cache.x.rows();
  const int d = config.projection_dim;

  Eigen::MatrixXd d_ln;
  if (config.l2_normalize) {
    d_ln.resize(b, d);
    for (Eigen::Index i = 0; i < b; ++i) {
      const double dot = cache.y.row(i).dot(grad_out.row(i));
      d_ln.row(i) = (grad_out.row(i) - cache.y.row(i) * dot) / cache.norms(i);
    }
  } else {
    d_ln = grad_out;
  }

  Gradients grads;
  Eigen::MatrixXd d_r;
  if (config.layer_norm) {
    grads.ln_gamma = d_ln.cwiseProduct(cache.xhat).colwise().sum().transpose();
    grads.ln_beta = d_ln.colwise().sum().transpose();
    d_r.resize(b, d);
    for (Eigen::Index i = 0; i < b; ++i) {
      const Eigen::RowVectorXd dxhat = d_ln.row(i).cwiseProduct(ln_gamma.transpose());
      const double mean_dxhat = dxhat.mean();
      const double mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
      d_r.row(i) = cache.inv_sigma(i) *
                   (dxhat.array() - mean_dxhat - cache.xhat.row(i).array() * mean_dxhat_xhat);
    }
  } else {
    grads.ln_gamma = Eigen::VectorXd::Zero(d);
    grads.ln_beta = Eigen::VectorXd::Zero(d);
    d_r = d_ln;
  }

  Eigen::MatrixXd d_f = d_r;
  if (cache.training && config.dropout_rate > 0.0) {
    d_f = d_f.cwiseProduct(cache.drop_mask);
  }

  grads.w2 = d_f.transpose() * cache.g;
  grads.b2 = d_f.colwise().sum().transpose();
  Eigen::MatrixXd d_g = d_f * w2;

  Eigen::MatrixXd d_p = d_r;  // residual branch
  d_p += d_g.cwiseProduct(cache.p.unaryExpr([](double v) { return gelu_grad(v); }));

  grads.w1 = d_p.transpose() * cache.x;
  grads.b1 = d_p.colwise().sum().transpose();
  if (grad_input != nullptr) *grad_input = d_p * w1;
  return grads;
}

int ProjectionHead::parameter_count() const {
  const int d = config.projection_dim;
  const int d_in = config.input_dim;
  return d * d_in + d + d * d + d + d + d;
}

Eigen::VectorXd ProjectionHead::pack_parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index off = 0;
  auto put_mat = [&](const Eigen::MatrixXd& m) {
    std::memcpy(flat.data() + off, m.data(), sizeof(double) * m.size());
    off += m.size();
  };
  auto put_vec = [&](const Eigen::VectorXd& v) {
    std::memcpy(flat.data() + off, v.data(), sizeof(double) * v.size());
    off += v.size();
  };
  put_mat(w1);
  put_vec(b1);
  put_mat(w2);
  put_vec(b2);
  put_vec(ln_gamma);
  put_vec(ln_beta);
  return flat;
}

void ProjectionHead::unpack_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("projection head: parameter vector size mismatch");
  }
  Eigen::Index off = 0;
  auto get_mat = [&](Eigen::MatrixXd& m) {
    std::memcpy(m.data(), flat.data() + off, sizeof(double) * m.size());
    off += m.size();
  };
  auto get_vec = [&](Eigen::VectorXd& v) {
    std::memcpy(v.data(), flat.data() + off, sizeof(double) * v.size());
    off += v.size();
  };
  get_mat(w1);
  get_vec(b1);
  get_mat(w2);
  get_vec(b2);
  get_vec(ln_gamma);
  get_vec(ln_beta);
}

Eigen::VectorXd ProjectionHead::pack_gradients(const Gradients& g) {
  Eigen::VectorXd flat(g.w1.size() + g.b1.size() + g.w2.size() + g.b2.size() + g.ln_gamma.size() +
                       g.ln_beta.size());
  Eigen::Index off = 0;
  auto put = [&](const auto& m) {
    std::memcpy(flat.data() + off, m.data(), sizeof(double) * m.size());
    off += m.size();
  };
  put(g.w1);
  put(g.b1);
  put(g.w2);
  put(g.b2);
  put(g.ln_gamma);
  put(g.ln_beta);
  return flat;
}

EmbeddingBatch project(const Eigen::MatrixXd& raw, const ProjectionHead& head, Modality modality) {
  EmbeddingBatch batch;
  batch.vectors = head.forward(raw, /*training=*/false);
  batch.modality = modality;
  batch.normalized = head.config.l2_normalize;
  return batch;
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

Eigen::MatrixXd mock_hash_encode(const std::vector<std::string>& inputs, int dim) {
  if (dim < 1) throw InvalidInputError("mock_hash_encode: dim must be >= 1");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), dim);
  for (size_t i = 0; i < inputs.size(); ++i) {
    Rng rng(fnv1a64(inputs[i]));
    for (int j = 0; j < dim; ++j) out(static_cast<Eigen::Index>(i), j) = rng.normal();
  }
  return out;
}

Eigen::MatrixXd MockHashImageBackend::encode(const std::vector<PreprocessedImage>& inputs) const {
  std::vector<std::string> keys;
  keys.reserve(inputs.size());
  for (const auto& img : inputs) {
    const ImageU8 quantized = denormalize(img, norm_);
    keys.emplace_back(reinterpret_cast<const char*>(quantized.data.data()),
                      quantized.data.size());
  }
  return mock_hash_encode(keys, dim_);
}

OracleRegistry::OracleRegistry(std::vector<std::string> labels, int dim)
    : labels_(std::move(labels)), dim_(dim) {
  if (dim_ < static_cast<int>(labels_.size()) + 1) {
    throw ConfigError("oracle registry: dim must be >= label count + 1");
  }
}

OracleRegistry::OracleRegistry(std::vector<std::pair<std::string, Rgb>> labeled_colors, int dim)
    : dim_(dim) {
  for (auto& [label, color] : labeled_colors) {
    labels_.push_back(std::move(label));
    colors_.push_back(color);
  }
  has_colors_ = true;
  if (dim_ < static_cast<int>(labels_.size()) + 1) {
    throw ConfigError("oracle registry: dim must be >= label count + 1");
  }
}

bool OracleRegistry::has_label(const std::string& label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

Rgb OracleRegistry::color_of(const std::string& label) const {
  if (!has_colors_) throw LookupError("oracle registry has no colors");
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return colors_[i];
  }
  throw LookupError("oracle registry: unregistered label " + label);
}

Eigen::VectorXd OracleRegistry::encode_label(const std::string& label) const {
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
      v(static_cast<Eigen::Index>(i) + 1) = 1.0;  // slot 0 reserved for background
      return v;
    }
  }
  throw LookupError("oracle registry: unregistered label " + label);
}

Eigen::VectorXd OracleRegistry::background_vector() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  v(0) = 1.0;
  return v;
}

std::optional<std::string> OracleRegistry::label_for_color(Rgb color, int tolerance) const {
  if (!has_colors_) return std::nullopt;
  for (size_t i = 0; i < labels_.size(); ++i) {
    const Rgb c = colors_[i];
    if (std::abs(c.r - color.r) <= tolerance && std::abs(c.g - color.g) <= tolerance &&
        std::abs(c.b - color.b) <= tolerance) {
      return labels_[i];
    }
  }
  return std::nullopt;
}

Eigen::VectorXd oracle_paired_encode(const OracleRegistry& registry, const std::string& label,
                                     Modality) {
  // Both modalities share the same orthonormal vector per label by design.
  return registry.encode_label(label);
}

Eigen::MatrixXd OracleTextBackend::encode(const std::vector<std::string>& inputs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), registry_.dim());
  for (size_t i = 0; i < inputs.size(); ++i) {
    const std::string& text = inputs[i];
    if (registry_.has_label(text)) {
      out.row(static_cast<Eigen::Index>(i)) = registry_.encode_label(text).transpose();
      continue;
    }
    std::optional<std::string> found;
    for (const auto& label : registry_.labels()) {
      if (text.find(label) != std::string::npos) {
        if (found.has_value()) {
          throw LookupError("oracle text encoder: ambiguous input '" + text + "'");
        }
        found = label;
      }
    }
    if (!found.has_value()) {
      throw LookupError("oracle text encoder: no registered label in '" + text + "'");
    }
    out.row(static_cast<Eigen::Index>(i)) = registry_.encode_label(*found).transpose();
  }
  return out;
}

std::optional<std::string> OracleImageBackend::dominant_label(const PreprocessedImage& img) const {
  const ImageU8 rgb = denormalize(img, norm_);
  std::vector<int64_t> counts(registry_.labels().size(), 0);
  for (size_t i = 0; i < rgb.data.size(); i += 3) {
    const Rgb px{rgb.data[i], rgb.data[i + 1], rgb.data[i + 2]};
    const auto label = registry_.label_for_color(px);
    if (!label.has_value()) continue;
    for (size_t k = 0; k < registry_.labels().size(); ++k) {
      if (registry_.labels()[k] == *label) {
        ++counts[k];
        break;
      }
    }
  }
  int64_t best_count = 0;
  size_t best = counts.size();
  for (size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > best_count) {
      best_count = counts[k];
      best = k;
    }
  }
  if (best == counts.size()) return std::nullopt;
  return registry_.labels()[best];
}

Eigen::MatrixXd OracleImageBackend::encode(const std::vector<PreprocessedImage>& inputs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), registry_.dim());
  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto label = dominant_label(inputs[i]);
    const Eigen::VectorXd v =
        label.has_value() ? registry_.encode_label(*label) : registry_.background_vector();
    out.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return out;
}

}  // namespace promptseg
