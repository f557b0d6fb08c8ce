#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptseg/filters.hpp"
#include "promptseg/image.hpp"
#include "promptseg/scene.hpp"
#include "promptseg/selector.hpp"
#include "promptseg/trainer.hpp"

namespace promptseg {

enum class Command {
  kTrainClip,
  kGridSearch,
  kSegment,
  kFilterMasks,
  kEvaluate,
  kTrainClassifier,
};

std::string command_name(Command command);

struct BackendSpec {
  std::string kind = "mock";  // mock | oracle | feature-file
  int dim = 64;               // mock embedding width
  std::string path;           // feature-file source
};

/// Fully resolved run configuration; key paths in the config file mirror the
/// nested fields here, and flag overrides use the same `section.key` paths.
struct RunConfig {
  Command command = Command::kTrainClip;
  std::string out_dir;
  uint64_t seed = 0;
  int jobs = 1;

  struct Data {
    std::string manifest;
    double train_fraction = 0.8;
    bool stratify = false;
    std::string caption_style = "name_only";  // name_only | sentence
    Normalization normalization;
  } data;

  TrainerConfig trainer;
  TrainOptions heads;
  BackendSpec image_backend;
  BackendSpec text_backend;
  FilterConfig filters;

  struct Selector {
    std::string render_mode = "masked_crop";  // masked_crop | bbox_crop
    int bbox_margin = 4;
  } selector;

  struct Grid {
    std::vector<double> learning_rates;
    std::vector<int> projection_dims;
  } grid;

  struct Segment {
    std::string image;
    std::string prompt;
    std::string checkpoint;
    std::string masks;  // proposals from a mask JSON file
    std::string scene;  // or from a synthetic scene JSON
    std::string heads = "checkpoint";  // checkpoint | identity
  } segment;

  struct EvalEntryConfig {
    std::string name;
    std::string heads = "identity";  // identity | random | checkpoint
    std::string checkpoint;
    std::string selector = "prompt_argmax";  // prompt_argmax | uniform_random
    uint64_t seed = 0;
    int projection_dim = 0;
  };

  struct Evaluate {
    int n_samples = 400;
    std::vector<std::pair<std::string, Rgb>> classes;
    std::vector<EvalEntryConfig> entries;
    std::string oracle_kind = "color-key";  // color-key | classifier
    std::string oracle_checkpoint;
    int oracle_pool_grid = 16;
    DistractorOptions distractors;
    bool dump_composites = false;
  } evaluate;

  struct Classifier {
    std::string manifest;
    std::string backend = "pixel-pool";  // pixel-pool | feature-file
    std::string feature_file;
    int pool_grid = 16;
    double learning_rate = 0.05;
    int max_epochs = 50;
    int batch_size = 16;
    double train_fraction = 0.8;
  } classifier;

  SelectorConfig selector_config() const;
};

/// Parse a config file (optional) and apply `section.key=value` overrides on
/// top. Unknown keys anywhere are hard errors naming the full key path.
RunConfig load_config(Command command, const std::string& config_path,
                      const std::vector<std::string>& overrides);

/// Per-command invariant checks (paths exist, numeric ranges); throws
/// ConfigError naming the offending field.
void validate_config(const RunConfig& config);

/// Effective config echo, every field present.
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace promptseg
