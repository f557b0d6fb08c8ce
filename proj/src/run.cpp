#include "promptseg/run.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "promptseg/classifier.hpp"
#include "promptseg/data_ingest.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/eval.hpp"
#include "promptseg/featurefile.hpp"
#include "promptseg/imageio.hpp"
#include "promptseg/proposals.hpp"

namespace promptseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write " + path);
  out << j.dump(2) << "\n";
}

CaptionStyle caption_style(const RunConfig& cfg) {
  return cfg.data.caption_style == "sentence" ? CaptionStyle::kSentence : CaptionStyle::kNameOnly;
}

/// Raw features for the trainer, per the configured backend kinds. Oracle
/// backends never touch the image files; mock image hashing does.
PairedFeatures encode_pairs(const std::vector<CaptionedSample>& samples, const RunConfig& cfg,
                            const OracleRegistry* registry) {
  PairedFeatures out;
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());

  // Text side.
  std::vector<std::string> captions;
  captions.reserve(samples.size());
  for (const auto& s : samples) captions.push_back(s.caption);
  if (cfg.text_backend.kind == "mock") {
    out.text_features = mock_hash_encode(captions, cfg.text_backend.dim);
  } else if (cfg.text_backend.kind == "oracle") {
    OracleTextBackend backend(*registry);
    out.text_features = backend.encode(captions);
  } else {
    FeatureFileTextBackend backend(FeatureFile::load(cfg.text_backend.path),
                                   cfg.text_backend.path);
    out.text_features = backend.encode(captions);
  }

  // Image side.
  if (cfg.image_backend.kind == "oracle") {
    out.image_features.resize(n, registry->dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      out.image_features.row(i) =
          registry->encode_label(samples[static_cast<size_t>(i)].class_name).transpose();
    }
  } else if (cfg.image_backend.kind == "mock") {
    MockHashImageBackend backend(cfg.image_backend.dim, cfg.data.normalization);
    std::vector<PreprocessedImage> images;
    images.reserve(samples.size());
    for (const auto& s : samples) {
      PreprocessedImage img = preprocess_image(load_image(s.image_path), cfg.data.normalization);
      img.source_path = s.image_path;
      images.push_back(std::move(img));
    }
    out.image_features = backend.encode(images);
  } else {
    FeatureFileImageBackend backend(FeatureFile::load(cfg.image_backend.path),
                                    cfg.image_backend.path);
    std::vector<PreprocessedImage> keys(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) keys[i].source_path = samples[i].image_path;
    out.image_features = backend.encode(keys);
  }
  return out;
}

struct DatasetFeatures {
  PairedFeatures train;
  PairedFeatures val;
  std::unique_ptr<OracleRegistry> registry;
  std::string image_descriptor;
  std::string text_descriptor;
};

DatasetFeatures prepare_dataset(const RunConfig& cfg, const std::string& out_dir) {
  const DatasetManifest manifest = load_manifest(cfg.data.manifest);
  auto [train_manifest, val_manifest] =
      split_dataset(manifest, SplitSpec{cfg.data.train_fraction, cfg.seed}, cfg.data.stratify);
  save_manifest(out_dir + "/train_manifest.jsonl", train_manifest);
  save_manifest(out_dir + "/val_manifest.jsonl", val_manifest);

  DatasetFeatures out;
  if (cfg.image_backend.kind == "oracle" || cfg.text_backend.kind == "oracle") {
    out.registry = std::make_unique<OracleRegistry>(
        manifest.class_names, static_cast<int>(manifest.class_names.size()) + 1);
  }
  const CaptionStyle style = caption_style(cfg);
  out.train = encode_pairs(build_captions(train_manifest, style), cfg, out.registry.get());
  out.val = encode_pairs(build_captions(val_manifest, style), cfg, out.registry.get());
  out.image_descriptor = cfg.image_backend.kind == "mock"
                             ? "mock-hash-image:" + std::to_string(cfg.image_backend.dim)
                         : cfg.image_backend.kind == "oracle"
                             ? "oracle-image"
                             : "feature-file-image:" + cfg.image_backend.path;
  out.text_descriptor = cfg.text_backend.kind == "mock"
                            ? "mock-hash-text:" + std::to_string(cfg.text_backend.dim)
                        : cfg.text_backend.kind == "oracle"
                            ? "oracle-text"
                            : "feature-file-text:" + cfg.text_backend.path;
  return out;
}

int run_train_clip(const RunConfig& cfg) {
  DatasetFeatures data = prepare_dataset(cfg, cfg.out_dir);
  TrainResult result = train(cfg.trainer, data.train, data.val, cfg.heads);
  result.best.normalization = cfg.data.normalization;
  result.best.image_backend = data.image_descriptor;
  result.best.text_backend = data.text_descriptor;
  save_checkpoint(cfg.out_dir + "/checkpoint.json", result.best);
  write_train_log(cfg.out_dir + "/train_log.jsonl", result.records);
  std::cout << "train-clip: best validation loss " << result.best.best_validation_loss
            << " at epoch " << result.best.best_epoch << "\n";
  return 0;
}

int run_grid_search(const RunConfig& cfg) {
  DatasetFeatures data = prepare_dataset(cfg, cfg.out_dir);
  std::vector<TrainerConfig> grid;
  for (double lr : cfg.grid.learning_rates) {
    for (int dim : cfg.grid.projection_dims) {
      TrainerConfig cell = cfg.trainer;
      cell.learning_rate = lr;
      cell.projection_dim = dim;
      grid.push_back(cell);
    }
  }
  const GridResult result = grid_search(grid, data.train, data.val, cfg.heads);
  write_json_file(cfg.out_dir + "/grid_report.json", grid_report_json(result));
  if (result.winner >= 0) {
    const auto& w = result.cells[static_cast<size_t>(result.winner)];
    std::cout << "grid-search: winner lr=" << w.config.learning_rate
              << " dim=" << w.config.projection_dim << " loss=" << w.best_validation_loss << "\n";
  } else {
    std::cout << "grid-search: every cell diverged\n";
  }
  return 0;
}

struct SelectorSetup {
  ProjectionHead image_head, text_head;
  std::unique_ptr<OracleRegistry> registry;
  std::unique_ptr<ImageBackend> image_backend;
  std::unique_ptr<TextBackend> text_backend;
  SelectorConfig render;
};

SelectorSetup build_selector(const RunConfig& cfg, const SyntheticScene* scene) {
  SelectorSetup setup;
  setup.render = cfg.selector_config();

  if (cfg.image_backend.kind == "oracle" || cfg.text_backend.kind == "oracle") {
    if (scene == nullptr) {
      throw ConfigError("oracle backends need segment.scene (labels and colors)");
    }
    std::vector<std::pair<std::string, Rgb>> classes;
    for (const auto& region : scene->regions) classes.emplace_back(region.label, region.color);
    setup.registry =
        std::make_unique<OracleRegistry>(classes, static_cast<int>(classes.size()) + 1);
  }

  auto make_image_backend = [&]() -> std::unique_ptr<ImageBackend> {
    if (cfg.image_backend.kind == "mock") {
      return std::make_unique<MockHashImageBackend>(cfg.image_backend.dim,
                                                    setup.render.normalization);
    }
    if (cfg.image_backend.kind == "oracle") {
      return std::make_unique<OracleImageBackend>(*setup.registry, setup.render.normalization);
    }
    return std::make_unique<FeatureFileImageBackend>(FeatureFile::load(cfg.image_backend.path),
                                                     cfg.image_backend.path);
  };
  auto make_text_backend = [&]() -> std::unique_ptr<TextBackend> {
    if (cfg.text_backend.kind == "mock") {
      return std::make_unique<MockHashTextBackend>(cfg.text_backend.dim);
    }
    if (cfg.text_backend.kind == "oracle") {
      return std::make_unique<OracleTextBackend>(*setup.registry);
    }
    return std::make_unique<FeatureFileTextBackend>(FeatureFile::load(cfg.text_backend.path),
                                                    cfg.text_backend.path);
  };
  setup.image_backend = make_image_backend();
  setup.text_backend = make_text_backend();

  if (cfg.segment.heads == "checkpoint") {
    const Checkpoint cp = load_checkpoint(cfg.segment.checkpoint);
    setup.image_head = cp.image_head;
    setup.text_head = cp.text_head;
    setup.render.normalization = cp.normalization;
    if (setup.image_head.config.input_dim != setup.image_backend->dim() ||
        setup.text_head.config.input_dim != setup.text_backend->dim()) {
      throw ConfigError("segment: checkpoint input dims do not match the configured backends");
    }
  } else {
    setup.image_head = ProjectionHead::identity_debug(setup.image_backend->dim(),
                                                      setup.image_backend->dim());
    setup.text_head =
        ProjectionHead::identity_debug(setup.text_backend->dim(), setup.text_backend->dim());
  }
  return setup;
}

int run_segment(const RunConfig& cfg) {
  const ImageU8 image = load_image(cfg.segment.image);

  std::unique_ptr<ProposalBackend> proposer;
  std::unique_ptr<SyntheticScene> scene;
  if (!cfg.segment.scene.empty()) {
    scene = std::make_unique<SyntheticScene>(load_scene_json(cfg.segment.scene));
    proposer = std::make_unique<SyntheticSceneBackend>(*scene);
  } else {
    proposer = std::make_unique<MaskFileBackend>(cfg.segment.masks);
  }
  const std::vector<Mask> proposals =
      validate_proposals(proposer->propose(image), image.height, image.width);
  const std::vector<Mask> candidates = filter_pipeline(proposals, cfg.filters);
  if (candidates.empty()) throw NoCandidatesError("segment: filters removed every proposal");

  SelectorSetup setup = build_selector(cfg, scene.get());
  const SelectionResult result =
      select_segment(image, candidates, cfg.segment.prompt, setup.image_head, setup.text_head,
                     *setup.image_backend, *setup.text_backend, setup.render);

  json scores = json::object();
  for (const auto& [id, score] : result.scores) scores[std::to_string(id)] = score;
  write_json_file(cfg.out_dir + "/scores.json", json{{"prompt", result.prompt},
                                                     {"chosen_mask_id", result.chosen_mask_id},
                                                     {"scores", scores}});
  write_json_file(cfg.out_dir + "/chosen_mask.json", mask_to_json(result.chosen_mask));
  const BinaryRaster chosen = rle_decode(result.chosen_mask);
  save_mask_png(cfg.out_dir + "/chosen_mask.png", chosen);
  save_png(cfg.out_dir + "/overlay.png", overlay_mask(image, chosen, Rgb{255, 0, 0}, 0.5));
  std::cout << "segment: chose mask " << result.chosen_mask_id << " (score "
            << result.scores.at(result.chosen_mask_id) << ") for prompt '" << result.prompt
            << "'\n";
  return 0;
}

int run_filter_masks(const RunConfig& cfg) {
  const std::vector<Mask> masks = load_masks_json(cfg.segment.masks);
  const std::vector<Mask> filtered = filter_pipeline(masks, cfg.filters);
  save_masks_json(cfg.out_dir + "/filtered_masks.json", filtered);
  std::cout << "filter-masks: " << masks.size() << " -> " << filtered.size() << " masks\n";
  return 0;
}

int run_evaluate(const RunConfig& cfg) {
  SyntheticExemplarProvider provider(cfg.evaluate.classes);

  std::unique_ptr<ImageBackend> oracle_features;
  std::unique_ptr<ClassifierOracle> oracle;
  if (cfg.evaluate.oracle_kind == "classifier") {
    oracle_features = std::make_unique<PixelPoolBackend>(cfg.evaluate.oracle_pool_grid);
    oracle = std::make_unique<LinearClassifierOracle>(
        load_classifier(cfg.evaluate.oracle_checkpoint), *oracle_features);
  } else {
    oracle = std::make_unique<ColorKeyOracle>(cfg.evaluate.classes, cfg.data.normalization);
  }

  std::vector<EvalEntry> entries;
  for (const auto& e : cfg.evaluate.entries) {
    EvalEntry entry;
    entry.name = e.name;
    entry.selector = e.selector == "uniform_random" ? SelectorKind::kUniformRandom
                                                    : SelectorKind::kPromptArgmax;
    entry.heads.kind = e.heads == "random"       ? HeadsSpec::Kind::kRandom
                       : e.heads == "checkpoint" ? HeadsSpec::Kind::kCheckpoint
                                                 : HeadsSpec::Kind::kIdentity;
    entry.heads.checkpoint_path = e.checkpoint;
    entry.heads.seed = e.seed;
    entry.heads.projection_dim = e.projection_dim;
    entries.push_back(std::move(entry));
  }

  EvalOptions options;
  options.n_samples = cfg.evaluate.n_samples;
  options.seed = cfg.seed;
  options.distractors = cfg.evaluate.distractors;
  options.filters = cfg.filters;
  options.render = cfg.selector_config();
  if (cfg.evaluate.dump_composites) options.dump_dir = cfg.out_dir + "/composites";

  const std::vector<EvalReport> reports =
      evaluate_synthetic(entries, provider, *oracle, options);

  json report_array = json::array();
  for (const auto& r : reports) report_array.push_back(eval_report_json(r));
  write_json_file(cfg.out_dir + "/reports.json", report_array);
  const std::string table = summary_table(reports);
  std::ofstream summary(cfg.out_dir + "/summary.txt");
  summary << table;
  std::cout << table;
  return 0;
}

int run_train_classifier(const RunConfig& cfg) {
  const DatasetManifest manifest = load_manifest(cfg.classifier.manifest);
  auto [train_manifest, val_manifest] = split_dataset(
      manifest, SplitSpec{cfg.classifier.train_fraction, cfg.seed}, /*stratified=*/true);

  std::unique_ptr<ImageBackend> backend;
  if (cfg.classifier.backend == "pixel-pool") {
    backend = std::make_unique<PixelPoolBackend>(cfg.classifier.pool_grid);
  } else {
    backend = std::make_unique<FeatureFileImageBackend>(
        FeatureFile::load(cfg.classifier.feature_file), cfg.classifier.feature_file);
  }

  std::map<std::string, int> class_index;
  for (size_t i = 0; i < manifest.class_names.size(); ++i) {
    class_index[manifest.class_names[i]] = static_cast<int>(i);
  }
  auto featurize = [&](const DatasetManifest& part) {
    LabeledFeatures lf;
    lf.classes = manifest.class_names;
    std::vector<PreprocessedImage> images;
    images.reserve(part.entries.size());
    for (const auto& entry : part.entries) {
      if (cfg.classifier.backend == "pixel-pool") {
        PreprocessedImage img =
            preprocess_image(load_image(entry.image_path), cfg.data.normalization);
        img.source_path = entry.image_path;
        images.push_back(std::move(img));
      } else {
        PreprocessedImage key;
        key.source_path = entry.image_path;
        images.push_back(std::move(key));
      }
      lf.labels.push_back(class_index.at(entry.class_name));
    }
    lf.features = backend->encode(images);
    return lf;
  };
  const LabeledFeatures train_lf = featurize(train_manifest);
  const LabeledFeatures val_lf = featurize(val_manifest);

  ClassifierTrainConfig tc;
  tc.learning_rate = cfg.classifier.learning_rate;
  tc.max_epochs = cfg.classifier.max_epochs;
  tc.batch_size = cfg.classifier.batch_size;
  tc.seed = cfg.seed;
  LinearClassifier model = train_linear_classifier(train_lf, val_lf, tc);
  model.feature_backend = backend->descriptor();
  save_classifier(cfg.out_dir + "/classifier.json", model);
  write_json_file(cfg.out_dir + "/metrics.json",
                  json{{"validation_accuracy", model.validation_accuracy},
                       {"classes", model.classes.size()},
                       {"train_samples", train_lf.labels.size()},
                       {"val_samples", val_lf.labels.size()}});
  std::cout << "train-classifier: validation accuracy " << model.validation_accuracy << "\n";
  return 0;
}

}  // namespace

int run(const RunConfig& config) {
  validate_config(config);
  fs::create_directories(config.out_dir);
  write_json_file(config.out_dir + "/config.json", config_to_json(config));
  switch (config.command) {
    case Command::kTrainClip: return run_train_clip(config);
    case Command::kGridSearch: return run_grid_search(config);
    case Command::kSegment: return run_segment(config);
    case Command::kFilterMasks: return run_filter_masks(config);
    case Command::kEvaluate: return run_evaluate(config);
    case Command::kTrainClassifier: return run_train_classifier(config);
  }
  throw ConfigError("unknown command");
}

}  // namespace promptseg
