#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "promptseg/classifier.hpp"
#include "promptseg/config.hpp"
#include "promptseg/data_ingest.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/eval.hpp"
#include "promptseg/imageio.hpp"
#include "promptseg/run.hpp"
#include "promptseg/scene.hpp"
#include "promptseg/trainer.hpp"

#include "helpers.hpp"

using namespace promptseg;
namespace fs = std::filesystem;

namespace {

std::string write_file(const std::string& dir, const std::string& name,
                       const std::string& content) {
  const std::string path = dir + "/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Manifest over synthetic class names; oracle backends never open the files.
std::string write_toy_manifest(const std::string& dir, int per_class) {
  std::ostringstream lines;
  for (const std::string cls : {"ruby", "jade", "sapphire", "amber"}) {
    for (int i = 0; i < per_class; ++i) {
      lines << nlohmann::json{{"image_path", cls + "/" + std::to_string(i) + ".png"},
                              {"class_name", cls}}
                   .dump()
            << "\n";
    }
  }
  return write_file(dir, "manifest.jsonl", lines.str());
}

}  // namespace

TEST_CASE("flag overrides take precedence over the config file") {
  const std::string dir = testing::make_temp_dir("cfg");
  const std::string path =
      write_file(dir, "c.json", R"({"trainer": {"learning_rate": 0.001}})");
  const RunConfig cfg =
      load_config(Command::kTrainClip, path, {"trainer.learning_rate=0.0001"});
  CHECK(cfg.trainer.learning_rate == 0.0001);
}

TEST_CASE("misspelled keys are hard errors naming the key") {
  const std::string dir = testing::make_temp_dir("cfg");
  const std::string path =
      write_file(dir, "c.json", R"({"trainer": {"learning_rat": 0.001}})");
  CHECK_THROWS_WITH_AS(load_config(Command::kTrainClip, path, {}),
                       doctest::Contains("trainer.learning_rat"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(Command::kTrainClip, "", {"trainer.learning_rat=1"}),
                       doctest::Contains("trainer.learning_rat"), ConfigError);
}

TEST_CASE("defaulted config echoes the plateau schedule constants") {
  const RunConfig cfg = load_config(Command::kTrainClip, "", {});
  const nlohmann::json echo = config_to_json(cfg);
  CHECK(echo.at("trainer").at("plateau_factor") == 0.9);
  CHECK(echo.at("trainer").at("plateau_patience") == 5);
}

TEST_CASE("validation rejects an out-of-range train fraction by name") {
  const std::string dir = testing::make_temp_dir("cfg");
  const std::string manifest = write_toy_manifest(dir, 2);
  RunConfig cfg = load_config(Command::kTrainClip, "",
                              {"data.manifest=" + manifest, "data.train_fraction=1.5",
                               "out_dir=" + dir + "/run"});
  CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("data.train_fraction"),
                       ConfigError);
}

TEST_CASE("relative out dirs land under the cache root env var") {
  const std::string dir = testing::make_temp_dir("cacheroot");
  setenv("PROMPTSEG_CACHE_ROOT", dir.c_str(), 1);
  const RunConfig cfg = load_config(Command::kTrainClip, "", {"out_dir=myrun"});
  unsetenv("PROMPTSEG_CACHE_ROOT");
  CHECK(cfg.out_dir == dir + "/myrun");
}

TEST_CASE("train-clip run writes checkpoint, log, splits and frozen config") {
  const std::string dir = testing::make_temp_dir("run_train");
  const std::string manifest = write_toy_manifest(dir, 3);
  const RunConfig cfg = load_config(
      Command::kTrainClip, "",
      {"data.manifest=" + manifest, "out_dir=" + dir + "/run", "seed=4",
       "backends.image.kind=oracle", "backends.text.kind=oracle", "trainer.max_epochs=3",
       "trainer.batch_size=2", "trainer.projection_dim=8"});
  CHECK(run(cfg) == 0);
  CHECK(fs::exists(dir + "/run/config.json"));
  CHECK(fs::exists(dir + "/run/checkpoint.json"));
  CHECK(fs::exists(dir + "/run/train_log.jsonl"));
  CHECK(fs::exists(dir + "/run/train_manifest.jsonl"));
  CHECK(fs::exists(dir + "/run/val_manifest.jsonl"));

  const Checkpoint cp = load_checkpoint(dir + "/run/checkpoint.json");
  CHECK(cp.image_backend == "oracle-image");
  CHECK(cp.config.max_epochs == 3);
}

TEST_CASE("grid-search run reports a winner consistent with its own cells") {
  const std::string dir = testing::make_temp_dir("run_grid");
  const std::string manifest = write_toy_manifest(dir, 3);
  const RunConfig cfg = load_config(
      Command::kGridSearch, "",
      {"data.manifest=" + manifest, "out_dir=" + dir + "/run", "backends.image.kind=oracle",
       "backends.text.kind=oracle", "trainer.max_epochs=2", "trainer.batch_size=2",
       "grid.learning_rates=[0.001,0.0001]", "grid.projection_dims=[8]"});
  CHECK(run(cfg) == 0);

  nlohmann::json report;
  std::ifstream(dir + "/run/grid_report.json") >> report;
  REQUIRE(report.at("cells").size() == 2);
  // Recompute the argmin from the recorded cells.
  int best = -1;
  double best_loss = 1e18;
  for (size_t i = 0; i < report.at("cells").size(); ++i) {
    const auto& cell = report.at("cells").at(i);
    if (cell.at("status") != "ok") continue;
    const double loss = cell.at("validation_loss").get<double>();
    if (loss < best_loss) {
      best_loss = loss;
      best = static_cast<int>(i);
    }
  }
  CHECK(report.at("winner").at("index").get<int>() == best);
}

TEST_CASE("segment run writes overlay, mask and scores") {
  const std::string dir = testing::make_temp_dir("run_segment");
  const std::vector<std::pair<std::string, Rgb>> palette = {
      {"ruby", Rgb{200, 30, 30}},
      {"jade", Rgb{30, 200, 30}},
      {"sapphire", Rgb{30, 30, 200}},
      {"amber", Rgb{220, 180, 30}},
  };
  const SyntheticScene scene = random_rect_scene(448, 448, 4, palette, 3, 48, 90);
  std::ofstream(dir + "/scene.json") << scene_to_json(scene).dump();
  save_png(dir + "/image.png", render_scene(scene));

  const RunConfig cfg = load_config(
      Command::kSegment, "",
      {"segment.image=" + dir + "/image.png", "segment.scene=" + dir + "/scene.json",
       "segment.prompt=" + scene.regions[2].label, "segment.heads=identity",
       "backends.image.kind=oracle", "backends.text.kind=oracle", "out_dir=" + dir + "/run"});
  CHECK(run(cfg) == 0);
  CHECK(fs::exists(dir + "/run/overlay.png"));
  CHECK(fs::exists(dir + "/run/chosen_mask.png"));
  CHECK(fs::exists(dir + "/run/chosen_mask.json"));

  nlohmann::json scores;
  std::ifstream(dir + "/run/scores.json") >> scores;
  CHECK(scores.at("chosen_mask_id").get<int>() == 2);
  CHECK(scores.at("prompt") == scene.regions[2].label);
}

TEST_CASE("filter-masks run rewrites the mask file") {
  const std::string dir = testing::make_temp_dir("run_filter");
  BinaryRaster raster = BinaryRaster::zeros(32, 32);
  for (int y = 2; y < 20; ++y) {
    for (int x = 2; x < 20; ++x) raster.set(y, x, 1);
  }
  Mask a = rle_encode(raster);
  a.id = 0;
  Mask b = a;
  b.id = 1;
  b.quality = 0.4;
  save_masks_json(dir + "/masks.json", {a, b});

  const RunConfig cfg =
      load_config(Command::kFilterMasks, "",
                  {"segment.masks=" + dir + "/masks.json", "out_dir=" + dir + "/run"});
  CHECK(run(cfg) == 0);
  const auto filtered = load_masks_json(dir + "/run/filtered_masks.json");
  REQUIRE(filtered.size() == 1);
  CHECK(filtered[0].id == 0);
}

TEST_CASE("evaluate run emits reports and a summary table") {
  const std::string dir = testing::make_temp_dir("run_eval");
  const nlohmann::json config = {
      {"out_dir", dir + "/run"},
      {"seed", 21},
      {"evaluate",
       {{"n_samples", 8},
        {"classes",
         {{{"name", "ruby"}, {"color", {200, 30, 30}}},
          {{"name", "jade"}, {"color", {30, 200, 30}}},
          {{"name", "sapphire"}, {"color", {30, 30, 200}}},
          {{"name", "amber"}, {"color", {220, 180, 30}}}}},
        {"entries",
         {{{"name", "identity"}, {"heads", "identity"}},
          {{"name", "chance"}, {"selector", "uniform_random"}}}}}}};
  const std::string path = write_file(dir, "eval.json", config.dump());
  const RunConfig cfg = load_config(Command::kEvaluate, path, {});
  CHECK(run(cfg) == 0);

  nlohmann::json reports;
  std::ifstream(dir + "/run/reports.json") >> reports;
  REQUIRE(reports.size() == 2);
  CHECK(reports.at(0).at("name") == "identity");
  CHECK(reports.at(0).at("accuracy") == 1.0);
  const std::string summary = read_file(dir + "/run/summary.txt");
  CHECK(summary.find("identity") != std::string::npos);
  CHECK(summary.find("chance") != std::string::npos);
}

TEST_CASE("train-classifier run learns the color classes perfectly") {
  const std::string dir = testing::make_temp_dir("run_classifier");
  // Real image files this time: solid-color exemplars per class.
  const std::vector<std::pair<std::string, Rgb>> classes = {
      {"ruby", Rgb{200, 30, 30}},
      {"jade", Rgb{30, 200, 30}},
      {"sapphire", Rgb{30, 30, 200}},
  };
  SyntheticExemplarProvider provider(classes);
  std::ostringstream manifest_lines;
  for (const auto& [name, color] : classes) {
    for (int i = 0; i < 6; ++i) {
      const std::string path = dir + "/" + name + "_" + std::to_string(i) + ".png";
      save_png(path, provider.get(name, static_cast<uint64_t>(i)).image);
      manifest_lines << nlohmann::json{{"image_path", path}, {"class_name", name}}.dump() << "\n";
    }
  }
  const std::string manifest = write_file(dir, "manifest.jsonl", manifest_lines.str());

  const RunConfig cfg = load_config(
      Command::kTrainClassifier, "",
      {"classifier.manifest=" + manifest, "out_dir=" + dir + "/run", "seed=2",
       "classifier.max_epochs=40", "classifier.pool_grid=8"});
  CHECK(run(cfg) == 0);

  const LinearClassifier model = load_classifier(dir + "/run/classifier.json");
  CHECK(model.validation_accuracy == 1.0);

  // The trained oracle classifies a fresh exemplar correctly.
  PixelPoolBackend backend(8);
  LinearClassifierOracle oracle(model, backend);
  const PreprocessedImage probe = preprocess_image(provider.get("jade", 99).image);
  CHECK(oracle.predict(probe) == "jade");
}

TEST_CASE("cli binary maps config errors to exit 2 and emits error json") {
  const char* bin = std::getenv("PROMPTSEG_CLI_BIN");
  if (bin == nullptr || !fs::exists(bin)) {
    MESSAGE("PROMPTSEG_CLI_BIN not set; skipping subprocess checks");
    return;
  }
  const std::string dir = testing::make_temp_dir("cli");
  const std::string manifest = write_toy_manifest(dir, 2);

  const std::string cmd = std::string(bin) + " train-clip --manifest " + manifest +
                          " --out " + dir + "/run --set data.train_fraction=1.5 2>" + dir +
                          "/err.txt";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 2);
  const std::string err = read_file(dir + "/err.txt");
  CHECK(err.find("train_fraction") != std::string::npos);
  CHECK(err.find("\"error\"") != std::string::npos);

  // Unknown key through the generic --section.key=value addressing.
  const std::string cmd2 = std::string(bin) + " train-clip --manifest " + manifest +
                           " --out " + dir + "/run2 --trainer.learning_rat=0.1 2>" + dir +
                           "/err2.txt";
  const int status2 = std::system(cmd2.c_str());
  REQUIRE(WIFEXITED(status2));
  CHECK(WEXITSTATUS(status2) == 2);
  CHECK(read_file(dir + "/err2.txt").find("learning_rat") != std::string::npos);
}

TEST_CASE("cli binary runs the happy segment path with exit 0") {
  const char* bin = std::getenv("PROMPTSEG_CLI_BIN");
  if (bin == nullptr || !fs::exists(bin)) {
    MESSAGE("PROMPTSEG_CLI_BIN not set; skipping subprocess checks");
    return;
  }
  const std::string dir = testing::make_temp_dir("cli_segment");
  const std::vector<std::pair<std::string, Rgb>> palette = {
      {"ruby", Rgb{200, 30, 30}}, {"jade", Rgb{30, 200, 30}}};
  const SyntheticScene scene = random_rect_scene(256, 256, 2, palette, 8, 48, 80);
  std::ofstream(dir + "/scene.json") << scene_to_json(scene).dump();
  save_png(dir + "/image.png", render_scene(scene));

  const std::string cmd = std::string(bin) + " segment --image " + dir +
                          "/image.png --scene " + dir + "/scene.json --prompt " +
                          scene.regions[0].label +
                          " --set segment.heads=identity"
                          " --set backends.image.kind=oracle --set backends.text.kind=oracle"
                          " --out " +
                          dir + "/run >" + dir + "/out.txt 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(dir + "/run/overlay.png"));
  CHECK(fs::exists(dir + "/run/scores.json"));
}
