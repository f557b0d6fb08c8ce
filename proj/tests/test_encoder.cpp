#include <doctest.h>

#include <cmath>

#include "promptseg/encoder.hpp"
#include "promptseg/errors.hpp"

using namespace promptseg;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

}  // namespace

TEST_CASE("project output rows are unit norm and deterministic") {
  ProjectionHeadConfig cfg{12, 7, 0.1, true, true};
  const ProjectionHead head = ProjectionHead::random_init(cfg, 5);
  const Eigen::MatrixXd x = random_matrix(4, 12, 8);

  const EmbeddingBatch a = project(x, head, Modality::kImage);
  const EmbeddingBatch b = project(x, head, Modality::kImage);
  CHECK(a.normalized);
  CHECK(a.vectors == b.vectors);
  CHECK(a.vectors.cols() == 7);
  for (Eigen::Index i = 0; i < a.vectors.rows(); ++i) {
    CHECK(a.vectors.row(i).norm() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("identity debug head reduces to normalized truncation/padding") {
  SUBCASE("padding") {
    const ProjectionHead head = ProjectionHead::identity_debug(3, 5);
    Eigen::MatrixXd x(1, 3);
    x << 3.0, 0.0, 4.0;
    const Eigen::MatrixXd y = head.forward(x);
    CHECK(y(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(y(0, 1) == doctest::Approx(0.0));
    CHECK(y(0, 2) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(y(0, 3) == doctest::Approx(0.0));
    CHECK(y(0, 4) == doctest::Approx(0.0));
  }
  SUBCASE("truncation") {
    const ProjectionHead head = ProjectionHead::identity_debug(4, 2);
    Eigen::MatrixXd x(1, 4);
    x << 1.0, 1.0, 9.0, 9.0;
    const Eigen::MatrixXd y = head.forward(x);
    CHECK(y(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(y(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  }
}

TEST_CASE("project preserves batch order under permutation") {
  ProjectionHeadConfig cfg{6, 4, 0.0, true, true};
  const ProjectionHead head = ProjectionHead::random_init(cfg, 12);
  const Eigen::MatrixXd x = random_matrix(5, 6, 3);
  const Eigen::MatrixXd y = head.forward(x);

  Eigen::MatrixXd x_perm(5, 6);
  const int perm[5] = {3, 1, 4, 0, 2};
  for (int i = 0; i < 5; ++i) x_perm.row(i) = x.row(perm[i]);
  const Eigen::MatrixXd y_perm = head.forward(x_perm);
  for (int i = 0; i < 5; ++i) {
    CHECK((y_perm.row(i) - y.row(perm[i])).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("project rejects mismatched input width") {
  const ProjectionHead head = ProjectionHead::random_init({8, 4, 0.0, true, true}, 1);
  CHECK_THROWS_AS(head.forward(Eigen::MatrixXd::Zero(2, 7)), ShapeError);
}

TEST_CASE("analytic parameter gradients match central finite differences") {
  ProjectionHeadConfig cfg{8, 5, 0.0, true, true};
  ProjectionHead head = ProjectionHead::random_init(cfg, 77);
  const Eigen::MatrixXd x = random_matrix(3, 8, 13);
  const Eigen::MatrixXd probe = random_matrix(3, 5, 14);  // loss = sum(Y .* probe)

  ProjectionHead::Cache cache;
  head.forward(x, false, nullptr, &cache);
  Eigen::MatrixXd grad_input;
  const auto grads = head.backward(cache, probe, &grad_input);
  const Eigen::VectorXd analytic = ProjectionHead::pack_gradients(grads);

  Eigen::VectorXd params = head.pack_parameters();
  const double h = 1e-5;
  double max_rel = 0.0;
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    Eigen::VectorXd p = params;
    p(k) += h;
    head.unpack_parameters(p);
    const double up = (head.forward(x).cwiseProduct(probe)).sum();
    p(k) -= 2 * h;
    head.unpack_parameters(p);
    const double down = (head.forward(x).cwiseProduct(probe)).sum();
    const double fd = (up - down) / (2 * h);
    max_rel = std::max(max_rel, rel_err(analytic(k), fd));
  }
  head.unpack_parameters(params);
  CHECK(max_rel < 1e-4);

  // Input gradient too.
  double max_rel_x = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::MatrixXd xp = x;
      xp(r, c) += h;
      const double up = (head.forward(xp).cwiseProduct(probe)).sum();
      xp(r, c) -= 2 * h;
      const double down = (head.forward(xp).cwiseProduct(probe)).sum();
      max_rel_x = std::max(max_rel_x, rel_err(grad_input(r, c), (up - down) / (2 * h)));
    }
  }
  CHECK(max_rel_x < 1e-4);
}

TEST_CASE("gradcheck holds with layer norm and l2 disabled too") {
  ProjectionHeadConfig cfg{6, 6, 0.0, false, false};
  ProjectionHead head = ProjectionHead::random_init(cfg, 3);
  const Eigen::MatrixXd x = random_matrix(3, 6, 4);
  const Eigen::MatrixXd probe = random_matrix(3, 6, 5);

  ProjectionHead::Cache cache;
  head.forward(x, false, nullptr, &cache);
  const Eigen::VectorXd analytic = ProjectionHead::pack_gradients(head.backward(cache, probe));

  Eigen::VectorXd params = head.pack_parameters();
  const double h = 1e-5;
  double max_rel = 0.0;
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    Eigen::VectorXd p = params;
    p(k) += h;
    head.unpack_parameters(p);
    const double up = (head.forward(x).cwiseProduct(probe)).sum();
    p(k) -= 2 * h;
    head.unpack_parameters(p);
    const double down = (head.forward(x).cwiseProduct(probe)).sum();
    max_rel = std::max(max_rel, rel_err(analytic(k), (up - down) / (2 * h)));
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("mock hash encoder is deterministic per input") {
  const Eigen::MatrixXd m = mock_hash_encode({"a", "a"}, 32);
  CHECK(m.row(0) == m.row(1));

  const Eigen::MatrixXd empty = mock_hash_encode({}, 16);
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 16);

  CHECK_THROWS_AS(mock_hash_encode({"x"}, 0), InvalidInputError);
}

TEST_CASE("mock hash encoder rows for distinct inputs are near orthogonal") {
  Rng rng(2024);
  std::vector<std::string> inputs;
  for (int i = 0; i < 2000; ++i) inputs.push_back("s" + std::to_string(rng.next()));
  const Eigen::MatrixXd m = mock_hash_encode(inputs, 512);
  double max_abs = 0.0;
  double sum_abs = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    const auto a = m.row(2 * pair);
    const auto b = m.row(2 * pair + 1);
    const double cos = a.dot(b) / (a.norm() * b.norm());
    max_abs = std::max(max_abs, std::abs(cos));
    sum_abs += std::abs(cos);
  }
  CHECK(max_abs < 0.5);
  CHECK(sum_abs / 1000.0 < 0.05);
}

TEST_CASE("oracle paired encoder: pairing, orthogonality, Gram identity") {
  const OracleRegistry registry({"bulbasaur", "charmander", "squirtle", "pikachu"}, 128);

  const Eigen::VectorXd img = oracle_paired_encode(registry, "bulbasaur", Modality::kImage);
  const Eigen::VectorXd txt = oracle_paired_encode(registry, "bulbasaur", Modality::kText);
  CHECK(img.dot(txt) == doctest::Approx(1.0));

  const Eigen::VectorXd other = oracle_paired_encode(registry, "charmander", Modality::kText);
  CHECK(std::abs(txt.dot(other)) <= 1e-9);

  Eigen::MatrixXd all(4, 128);
  int row = 0;
  for (const auto& label : registry.labels()) {
    all.row(row++) = registry.encode_label(label).transpose();
  }
  const Eigen::MatrixXd gram = all * all.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-9);

  CHECK_THROWS_AS(oracle_paired_encode(registry, "mewtwo", Modality::kText), LookupError);
  CHECK_THROWS_AS(OracleRegistry(std::vector<std::string>{"a", "b", "c"}, 3), ConfigError);
}

TEST_CASE("oracle text backend resolves captions by substring") {
  const OracleRegistry registry(std::vector<std::string>{"pikachu", "eevee"}, 8);
  const OracleTextBackend backend(registry);
  const Eigen::MatrixXd direct = backend.encode({"pikachu"});
  const Eigen::MatrixXd caption = backend.encode({"This is an image of pikachu"});
  CHECK(direct == caption);
  CHECK_THROWS_AS(backend.encode({"mystery creature"}), LookupError);
}
