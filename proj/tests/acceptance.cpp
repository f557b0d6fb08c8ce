// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with its runtime so the gate can be read off the log directly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "promptseg/config.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/eval.hpp"
#include "promptseg/filters.hpp"
#include "promptseg/imageio.hpp"
#include "promptseg/proposals.hpp"
#include "promptseg/run.hpp"
#include "promptseg/rng.hpp"
#include "promptseg/scene.hpp"
#include "promptseg/selector.hpp"
#include "promptseg/trainer.hpp"

#include "helpers.hpp"

using namespace promptseg;
namespace fs = std::filesystem;

namespace {

class Criterion {
 public:
  Criterion(std::string id, std::string label, double time_limit_s)
      : id_(std::move(id)), label_(std::move(label)), limit_(time_limit_s),
        start_(std::chrono::steady_clock::now()) {}

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      failures_.push_back(what);
      CHECK_MESSAGE(ok, (id_ + ": " + what));
    }
  }

  ~Criterion() {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    bool ok = failures_.empty();
    if (limit_ > 0 && elapsed > limit_) {
      ok = false;
      CHECK_MESSAGE(elapsed <= limit_, (id_ + ": runtime " + std::to_string(elapsed) +
                                        "s exceeds " + std::to_string(limit_) + "s"));
    }
    std::printf("ACCEPTANCE %s %s: %s (%.2fs)\n", id_.c_str(), label_.c_str(),
                ok ? "PASS" : "FAIL", elapsed);
    std::fflush(stdout);
  }

 private:
  std::string id_, label_;
  double limit_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> failures_;
};

double brute_force_clip_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
  const Eigen::Index b = logits.rows();
  auto ce = [](const Eigen::VectorXd& l, const Eigen::VectorXd& t) {
    double mx = l.maxCoeff();
    double z = 0.0;
    for (Eigen::Index i = 0; i < l.size(); ++i) z += std::exp(l(i) - mx);
    double total = 0.0;
    for (Eigen::Index i = 0; i < l.size(); ++i) total -= t(i) * (l(i) - mx - std::log(z));
    return total;
  };
  double acc = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    acc += 0.5 * ce(logits.row(i).transpose(), targets.row(i).transpose());
    acc += 0.5 * ce(logits.col(i), targets.col(i));
  }
  return acc / static_cast<double>(b);
}

const std::vector<std::pair<std::string, Rgb>> kClasses = {
    {"ruby", Rgb{200, 30, 30}},     {"jade", Rgb{30, 200, 30}},
    {"sapphire", Rgb{30, 30, 200}}, {"amber", Rgb{220, 180, 30}},
    {"violet", Rgb{140, 30, 200}},  {"teal", Rgb{30, 190, 190}},
    {"slate", Rgb{90, 90, 110}},    {"coral", Rgb{240, 110, 90}},
};

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("C1 loss math") {
  Criterion criterion("C1", "loss-math", 5.0);

  for (int b : {2, 8, 64}) {
    const double loss = clip_loss(Eigen::MatrixXd::Constant(b, b, 1.5),
                                  Eigen::MatrixXd::Identity(b, b));
    criterion.expect(std::abs(loss - std::log(static_cast<double>(b))) < 1e-6,
                     "uniform-logits loss != ln " + std::to_string(b));
  }

  Rng rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXd logits(4, 4), targets(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) logits(i, j) = 3.0 * rng.normal();
      Eigen::RowVector4d t;
      for (int j = 0; j < 4; ++j) t(j) = rng.uniform() + 1e-3;
      targets.row(i) = t / t.sum();
    }
    criterion.expect(
        std::abs(clip_loss(logits, targets) - brute_force_clip_loss(logits, targets)) < 1e-6,
        "brute-force per-element mismatch");

    const Eigen::MatrixXd analytic = clip_loss_logits_grad(logits, targets);
    const double h = 1e-5;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        Eigen::MatrixXd lp = logits;
        lp(i, j) += h;
        const double up = clip_loss(lp, targets);
        lp(i, j) -= 2 * h;
        const double down = clip_loss(lp, targets);
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(analytic(i, j) - fd) /
                           std::max(1e-6, std::abs(analytic(i, j)) + std::abs(fd));
        criterion.expect(rel < 1e-4, "gradient vs finite differences");
      }
    }
  }
}

TEST_CASE("C2 grid decision reproduction") {
  Criterion criterion("C2", "grid-decision", 1.0);
  const double table[12][3] = {
      {0.00001, 128, 0.9507}, {0.00001, 512, 0.9627}, {0.0001, 128, 0.7791},
      {0.0001, 512, 0.7935},  {0.001, 128, 2.077},    {0.001, 512, 2.075},
      {0.01, 128, 2.074},     {0.01, 512, 2.074},     {0.1, 128, 2.074},
      {0.1, 512, 2.074},      {0.5, 128, 2.074},      {0.5, 512, 2.074},
  };
  std::vector<GridCellOutcome> cells;
  for (const auto& row : table) {
    GridCellOutcome cell;
    cell.config.learning_rate = row[0];
    cell.config.projection_dim = static_cast<int>(row[1]);
    cell.best_validation_loss = row[2];
    cells.push_back(cell);
  }
  const int winner = select_winner(cells);
  criterion.expect(winner >= 0, "no winner");
  if (winner >= 0) {
    criterion.expect(cells[winner].config.learning_rate == 0.0001, "winner lr != 0.0001");
    criterion.expect(cells[winner].config.projection_dim == 128, "winner dim != 128");
    criterion.expect(cells[winner].best_validation_loss == 0.7791, "winner loss != 0.7791");
  }
}

TEST_CASE("C3 scheduler contract") {
  Criterion criterion("C3", "plateau-scheduler", 1.0);
  const double initial = 0.01;
  PlateauScheduler sched(initial, 0.9, 5);
  double lr = initial;
  for (int epoch = 1; epoch <= 11; ++epoch) {
    lr = sched.observe(0.7791);
    if (epoch == 5) criterion.expect(lr == initial, "decayed before epoch 6");
    if (epoch == 6) criterion.expect(lr == initial * 0.9, "first decay not at epoch 6");
    if (epoch == 10) criterion.expect(lr == initial * 0.9, "second decay fired early");
  }
  criterion.expect(lr == initial * 0.9 * 0.9, "lr after 11 epochs != initial * 0.9^2");
}

TEST_CASE("C4 filter invariants") {
  Criterion criterion("C4", "filter-invariants", 30.0);
  Rng rng(8111);
  int violations = 0;
  for (int set_idx = 0; set_idx < 100; ++set_idx) {
    const int count = 5 + static_cast<int>(rng.below(26));  // 5..30 masks
    std::vector<Mask> masks;
    for (int i = 0; i < count; ++i) {
      Mask m = rle_encode(testing::random_rect_raster(64, 64, 4, 28, rng));
      m.id = i;
      m.quality = 0.25 + 0.75 * rng.uniform();
      masks.push_back(std::move(m));
    }

    const auto split = split_intersections(masks, FilterConfig{});
    // Union preservation + disjointness via per-pixel counts.
    std::vector<int> cover(64 * 64, 0);
    for (const auto& m : split) {
      const BinaryRaster r = rle_decode(m);
      for (size_t p = 0; p < r.data.size(); ++p) cover[p] += r.data[p];
    }
    std::vector<int> input_cover(64 * 64, 0);
    for (const auto& m : masks) {
      const BinaryRaster r = rle_decode(m);
      for (size_t p = 0; p < r.data.size(); ++p) input_cover[p] |= r.data[p];
    }
    for (size_t p = 0; p < cover.size(); ++p) {
      if (cover[p] != input_cover[p]) ++violations;
    }

    const auto once = filter_pipeline(masks, FilterConfig{});
    const auto twice = filter_pipeline(once, FilterConfig{});
    if (once.size() != twice.size()) {
      ++violations;
    } else {
      for (size_t i = 0; i < once.size(); ++i) {
        if (!(rle_decode(once[i]) == rle_decode(twice[i])) || once[i].id != twice[i].id) {
          ++violations;
        }
      }
    }
  }
  criterion.expect(violations == 0,
                   "filter invariant violations: " + std::to_string(violations));
}

TEST_CASE("C5 oracle end-to-end selection") {
  Criterion criterion("C5", "oracle-end-to-end", 60.0);

  SyntheticExemplarProvider provider(kClasses);
  const OracleRegistry registry(kClasses, static_cast<int>(kClasses.size()) + 1);
  const OracleImageBackend image_backend(registry);
  const OracleTextBackend text_backend(registry);
  const int dim = registry.dim();
  const ProjectionHead head = ProjectionHead::identity_debug(dim, dim);
  const SelectorConfig render;
  const ColorKeyOracle oracle(kClasses);

  DistractorOptions distractors;
  distractors.duplicates = true;
  distractors.dilated = true;

  int correct = 0;
  int brute_force_agreement = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const uint64_t seed = mix_seed(0xacce5, static_cast<uint64_t>(i));
    Rng class_rng(mix_seed(seed, 1));
    std::vector<std::string> pool;
    for (const auto& [name, color] : kClasses) pool.push_back(name);
    shuffle(pool, class_rng);
    std::array<Exemplar, 4> exemplars;
    for (size_t k = 0; k < 4; ++k) exemplars[k] = provider.get(pool[k], mix_seed(seed, 2 + k));
    const CompositeSample composite = compose(exemplars, Layout::kGrid2x2, seed);
    Rng prompt_rng(mix_seed(seed, 7));
    const size_t prompt_cell = prompt_rng.below(4);
    const std::string prompt = composite.cells[prompt_cell].class_name;

    const SyntheticScene scene = composite_scene(composite, provider, distractors);
    const auto proposals =
        validate_proposals(synthetic_propose(scene), kCompositeSize, kCompositeSize);
    const auto candidates = filter_pipeline(proposals, FilterConfig{});

    const SelectionResult result = select_segment(composite.image, candidates, prompt, head,
                                                  head, image_backend, text_backend, render);
    if (judge(result, composite, oracle, render)) ++correct;

    // Independent brute-force argmax over re-rendered, re-encoded candidates.
    const Eigen::VectorXd text_vec =
        project(text_backend.encode({prompt}), head, Modality::kText).vectors.row(0);
    int best_id = -1;
    double best_score = -2.0;
    int64_t best_area = -1;
    for (const auto& mask : candidates) {
      const SegmentCrop crop = render_segment(composite.image, mask, render.render_mode, render);
      const Eigen::VectorXd vec =
          project(image_backend.encode({crop.pixels}), head, Modality::kImage).vectors.row(0);
      const double score = vec.dot(text_vec);
      if (score > best_score || (score == best_score &&
                                 (mask.area > best_area ||
                                  (mask.area == best_area && mask.id < best_id)))) {
        best_id = mask.id;
        best_score = score;
        best_area = mask.area;
      }
    }
    if (best_id == result.chosen_mask_id) ++brute_force_agreement;
  }
  criterion.expect(correct == n, "accuracy " + std::to_string(correct) + "/200 != 1.0");
  criterion.expect(brute_force_agreement == n,
                   "brute-force argmax disagreed on " +
                       std::to_string(n - brute_force_agreement) + " trials");
}

TEST_CASE("C6 chance floor") {
  Criterion criterion("C6", "chance-floor", 60.0);
  SyntheticExemplarProvider provider(kClasses);
  const ColorKeyOracle oracle(kClasses);
  EvalOptions options;
  options.n_samples = 200;
  options.seed = 424242;

  EvalEntry chance;
  chance.name = "uniform-random";
  chance.selector = SelectorKind::kUniformRandom;
  const auto reports = evaluate_synthetic({chance}, provider, oracle, options);
  const double acc = reports.at(0).accuracy;
  criterion.expect(acc > 0.25 - 0.08 && acc < 0.25 + 0.08,
                   "random-chooser accuracy " + std::to_string(acc) + " outside 0.25 +/- 0.08");
}

TEST_CASE("C7 toy learning signal") {
  Criterion criterion("C7", "toy-overfit", 120.0);
  for (uint64_t seed : {1ull, 2ull}) {
    std::vector<std::string> keys;
    for (int i = 0; i < 16; ++i) keys.push_back("toy" + std::to_string(i));
    PairedFeatures data;
    data.image_features = mock_hash_encode(keys, 48);
    std::vector<std::string> captions;
    for (const auto& k : keys) captions.push_back("caption " + k);
    data.text_features = mock_hash_encode(captions, 48);

    TrainerConfig config;
    config.learning_rate = 3e-3;
    config.projection_dim = 32;
    config.temperature = 0.1;
    config.batch_size = 8;
    config.max_epochs = 100;  // 2 steps per epoch -> 200 steps
    config.seed = seed;
    TrainOptions options;
    options.dropout_rate = 0.0;

    const TrainResult result = train(config, data, data, options);
    const double initial = result.records.front().train_loss;
    const double final_loss = result.records.back().train_loss;
    criterion.expect(final_loss < std::log(8.0),
                     "seed " + std::to_string(seed) + ": final loss " +
                         std::to_string(final_loss) + " >= ln(8)");
    criterion.expect(final_loss < 0.5 * initial,
                     "seed " + std::to_string(seed) + ": final loss not below half of initial");
  }
}

TEST_CASE("C8 determinism") {
  Criterion criterion("C8", "determinism", 120.0);
  const std::string dir = testing::make_temp_dir("acceptance_det");

  // Toy manifest; oracle backends never open the image files.
  {
    std::ofstream m(dir + "/manifest.jsonl");
    for (const auto& [cls, color] : kClasses) {
      for (int i = 0; i < 2; ++i) {
        m << nlohmann::json{{"image_path", cls + "/" + std::to_string(i) + ".png"},
                            {"class_name", cls}}
                 .dump()
          << "\n";
      }
    }
  }

  auto train_run = [&](const std::string& out) {
    const RunConfig cfg = load_config(
        Command::kTrainClip, "",
        {"data.manifest=" + dir + "/manifest.jsonl", "out_dir=" + out, "seed=7",
         "trainer.seed=7", "backends.image.kind=oracle", "backends.text.kind=oracle",
         "trainer.max_epochs=4", "trainer.batch_size=4", "trainer.projection_dim=8"});
    run(cfg);
  };
  train_run(dir + "/run_a");
  train_run(dir + "/run_b");
  for (const std::string artifact :
       {"checkpoint.json", "train_log.jsonl", "train_manifest.jsonl", "val_manifest.jsonl"}) {
    const std::string a = file_bytes(dir + "/run_a/" + artifact);
    const std::string b = file_bytes(dir + "/run_b/" + artifact);
    criterion.expect(!a.empty() && a == b, artifact + " differs between identical runs");
  }

  auto eval_run = [&](const std::string& out) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [name, color] : kClasses) {
      classes.push_back({{"name", name}, {"color", {color.r, color.g, color.b}}});
    }
    const nlohmann::json config = {
        {"out_dir", out},
        {"seed", 13},
        {"evaluate",
         {{"n_samples", 10},
          {"dump_composites", true},
          {"classes", classes},
          {"entries",
           {{{"name", "identity"}, {"heads", "identity"}},
            {{"name", "chance"}, {"selector", "uniform_random"}}}}}}};
    const std::string path = out + "_config.json";
    std::ofstream(path) << config.dump();
    run(load_config(Command::kEvaluate, path, {}));
  };
  eval_run(dir + "/eval_a");
  eval_run(dir + "/eval_b");
  for (const std::string artifact :
       {"reports.json", "summary.txt", "composites/composite_0.png",
        "composites/composite_0.json"}) {
    const std::string a = file_bytes(dir + "/eval_a/" + artifact);
    const std::string b = file_bytes(dir + "/eval_b/" + artifact);
    criterion.expect(!a.empty() && a == b, artifact + " differs between identical runs");
  }
}

TEST_CASE("C9 optional integration") {
  Criterion criterion("C9", "real-backbone-integration", 0.0);
  // Not CI-gated: needs real backbones and datasets. The manual runbook lives
  // in docs/INTEGRATION.md.
  std::printf("ACCEPTANCE C9 real-backbone-integration: SKIP (manual runbook)\n");
}
