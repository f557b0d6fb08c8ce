#include "promptseg/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string command_name(Command command) {
  switch (command) {
    case Command::kTrainClip: return "train-clip";
    case Command::kGridSearch: return "grid-search";
    case Command::kSegment: return "segment";
    case Command::kFilterMasks: return "filter-masks";
    case Command::kEvaluate: return "evaluate";
    case Command::kTrainClassifier: return "train-classifier";
  }
  return "unknown";
}

SelectorConfig RunConfig::selector_config() const {
  SelectorConfig cfg;
  cfg.render_mode =
      selector.render_mode == "bbox_crop" ? RenderMode::kBboxCrop : RenderMode::kMaskedCrop;
  cfg.bbox_margin = selector.bbox_margin;
  cfg.normalization = data.normalization;
  return cfg;
}

namespace {

// Allowed keys. A leaf "" is a scalar/array value; {"__array__": {...}} is an
// array of objects with the given element keys.
const json& config_schema() {
  static const json schema = {
      {"out_dir", ""},
      {"seed", ""},
      {"jobs", ""},
      {"data",
       {{"manifest", ""},
        {"train_fraction", ""},
        {"stratify", ""},
        {"caption_style", ""},
        {"normalization", {{"mean", ""}, {"std", ""}}}}},
      {"trainer",
       {{"learning_rate", ""},
        {"projection_dim", ""},
        {"temperature", ""},
        {"batch_size", ""},
        {"max_epochs", ""},
        {"plateau_factor", ""},
        {"plateau_patience", ""},
        {"weight_decay", ""},
        {"seed", ""}}},
      {"heads",
       {{"dropout_rate", ""}, {"layer_norm", ""}, {"l2_normalize", ""}, {"target_mode", ""}}},
      {"backends",
       {{"image", {{"kind", ""}, {"dim", ""}, {"path", ""}}},
        {"text", {{"kind", ""}, {"dim", ""}, {"path", ""}}}}},
      {"filters",
       {{"dup_iou_threshold", ""},
        {"overlap_threshold", ""},
        {"enable_dedup", ""},
        {"enable_split", ""}}},
      {"selector", {{"render_mode", ""}, {"bbox_margin", ""}}},
      {"grid", {{"learning_rates", ""}, {"projection_dims", ""}}},
      {"segment",
       {{"image", ""},
        {"prompt", ""},
        {"checkpoint", ""},
        {"masks", ""},
        {"scene", ""},
        {"heads", ""}}},
      {"evaluate",
       {{"n_samples", ""},
        {"classes", {{"__array__", {{"name", ""}, {"color", ""}}}}},
        {"entries",
         {{"__array__",
           {{"name", ""},
            {"heads", ""},
            {"checkpoint", ""},
            {"selector", ""},
            {"seed", ""},
            {"projection_dim", ""}}}}},
        {"oracle", {{"kind", ""}, {"checkpoint", ""}, {"pool_grid", ""}}},
        {"distractors", {{"duplicates", ""}, {"dilated", ""}, {"dilation_px", ""}}},
        {"dump_composites", ""}}},
      {"classifier",
       {{"manifest", ""},
        {"backend", ""},
        {"feature_file", ""},
        {"pool_grid", ""},
        {"learning_rate", ""},
        {"max_epochs", ""},
        {"batch_size", ""},
        {"train_fraction", ""}}}};
  return schema;
}

void check_unknown_keys(const json& user, const json& schema, const std::string& prefix) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.is_object() || !schema.contains(key)) {
      throw ConfigError("unknown config key: " + path);
    }
    const json& sub = schema.at(key);
    if (sub.is_object() && sub.contains("__array__")) {
      if (!value.is_array()) throw ConfigError("config key " + path + " must be an array");
      for (size_t i = 0; i < value.size(); ++i) {
        check_unknown_keys(value.at(i), sub.at("__array__"), path + "[" + std::to_string(i) + "]");
      }
    } else if (sub.is_object()) {
      check_unknown_keys(value, sub, path);
    }
  }
}

/// Parse the value side of an override: JSON scalar when it parses, raw
/// string otherwise.
json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value, got: " + spec);
  }
  const std::string path = spec.substr(0, eq);
  const json value = parse_override_value(spec.substr(eq + 1));

  json* node = &doc;
  size_t begin = 0;
  while (true) {
    const size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) throw ConfigError("override has an empty key segment: " + spec);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key " + key + ": " + e.what());
  }
}

Rgb parse_color(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("config key " + path + " must be [r,g,b]");
  }
  return Rgb{j.at(0).get<uint8_t>(), j.at(1).get<uint8_t>(), j.at(2).get<uint8_t>()};
}

}  // namespace

RunConfig load_config(Command command, const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file " + config_path);
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ConfigError("config file " + config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  check_unknown_keys(doc, config_schema(), "");

  RunConfig cfg;
  cfg.command = command;
  cfg.out_dir = get_or<std::string>(doc, "out_dir", "runs/" + command_name(command));
  cfg.seed = get_or<uint64_t>(doc, "seed", 0);
  cfg.jobs = get_or<int>(doc, "jobs", 1);

  // Relative run directories live under the cache root when it is set.
  if (const char* root = std::getenv("PROMPTSEG_CACHE_ROOT");
      root != nullptr && *root != '\0' && !fs::path(cfg.out_dir).is_absolute()) {
    cfg.out_dir = (fs::path(root) / cfg.out_dir).string();
  }

  if (doc.contains("data")) {
    const json& d = doc.at("data");
    cfg.data.manifest = get_or<std::string>(d, "manifest", "");
    cfg.data.train_fraction = get_or<double>(d, "train_fraction", 0.8);
    cfg.data.stratify = get_or<bool>(d, "stratify", false);
    cfg.data.caption_style = get_or<std::string>(d, "caption_style", "name_only");
    if (d.contains("normalization")) {
      const json& n = d.at("normalization");
      cfg.data.normalization.mean = get_or<std::array<double, 3>>(n, "mean", {0.485, 0.456, 0.406});
      cfg.data.normalization.std = get_or<std::array<double, 3>>(n, "std", {0.229, 0.224, 0.225});
    }
  }
  if (doc.contains("trainer")) {
    const json& t = doc.at("trainer");
    cfg.trainer.learning_rate = get_or<double>(t, "learning_rate", cfg.trainer.learning_rate);
    cfg.trainer.projection_dim = get_or<int>(t, "projection_dim", cfg.trainer.projection_dim);
    cfg.trainer.temperature = get_or<double>(t, "temperature", cfg.trainer.temperature);
    cfg.trainer.batch_size = get_or<int>(t, "batch_size", cfg.trainer.batch_size);
    cfg.trainer.max_epochs = get_or<int>(t, "max_epochs", cfg.trainer.max_epochs);
    cfg.trainer.plateau_factor = get_or<double>(t, "plateau_factor", cfg.trainer.plateau_factor);
    cfg.trainer.plateau_patience = get_or<int>(t, "plateau_patience", cfg.trainer.plateau_patience);
    cfg.trainer.weight_decay = get_or<double>(t, "weight_decay", cfg.trainer.weight_decay);
    cfg.trainer.seed = get_or<uint64_t>(t, "seed", cfg.trainer.seed);
  }
  if (doc.contains("heads")) {
    const json& h = doc.at("heads");
    cfg.heads.dropout_rate = get_or<double>(h, "dropout_rate", cfg.heads.dropout_rate);
    cfg.heads.layer_norm = get_or<bool>(h, "layer_norm", cfg.heads.layer_norm);
    cfg.heads.l2_normalize = get_or<bool>(h, "l2_normalize", cfg.heads.l2_normalize);
    const std::string mode = get_or<std::string>(h, "target_mode", "soft");
    if (mode != "soft" && mode != "identity") {
      throw ConfigError("heads.target_mode must be soft or identity");
    }
    cfg.heads.target_mode = mode == "identity" ? TargetMode::kIdentity : TargetMode::kSoft;
  }
  if (doc.contains("backends")) {
    const json& b = doc.at("backends");
    auto parse_backend = [&](const char* key, BackendSpec& spec) {
      if (!b.contains(key)) return;
      const json& s = b.at(key);
      spec.kind = get_or<std::string>(s, "kind", spec.kind);
      spec.dim = get_or<int>(s, "dim", spec.dim);
      spec.path = get_or<std::string>(s, "path", spec.path);
    };
    parse_backend("image", cfg.image_backend);
    parse_backend("text", cfg.text_backend);
  }
  if (doc.contains("filters")) {
    const json& f = doc.at("filters");
    cfg.filters.dup_iou_threshold =
        get_or<double>(f, "dup_iou_threshold", cfg.filters.dup_iou_threshold);
    cfg.filters.overlap_threshold =
        get_or<double>(f, "overlap_threshold", cfg.filters.overlap_threshold);
    cfg.filters.enable_dedup = get_or<bool>(f, "enable_dedup", cfg.filters.enable_dedup);
    cfg.filters.enable_split = get_or<bool>(f, "enable_split", cfg.filters.enable_split);
  }
  if (doc.contains("selector")) {
    const json& s = doc.at("selector");
    cfg.selector.render_mode = get_or<std::string>(s, "render_mode", cfg.selector.render_mode);
    cfg.selector.bbox_margin = get_or<int>(s, "bbox_margin", cfg.selector.bbox_margin);
  }
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    cfg.grid.learning_rates = get_or<std::vector<double>>(g, "learning_rates", {});
    cfg.grid.projection_dims = get_or<std::vector<int>>(g, "projection_dims", {});
  }
  if (doc.contains("segment")) {
    const json& s = doc.at("segment");
    cfg.segment.image = get_or<std::string>(s, "image", "");
    cfg.segment.prompt = get_or<std::string>(s, "prompt", "");
    cfg.segment.checkpoint = get_or<std::string>(s, "checkpoint", "");
    cfg.segment.masks = get_or<std::string>(s, "masks", "");
    cfg.segment.scene = get_or<std::string>(s, "scene", "");
    cfg.segment.heads = get_or<std::string>(s, "heads", "checkpoint");
  }
  if (doc.contains("evaluate")) {
    const json& e = doc.at("evaluate");
    cfg.evaluate.n_samples = get_or<int>(e, "n_samples", cfg.evaluate.n_samples);
    if (e.contains("classes")) {
      for (size_t i = 0; i < e.at("classes").size(); ++i) {
        const json& c = e.at("classes").at(i);
        cfg.evaluate.classes.emplace_back(
            c.at("name").get<std::string>(),
            parse_color(c.at("color"), "evaluate.classes[" + std::to_string(i) + "].color"));
      }
    }
    if (e.contains("entries")) {
      for (const json& en : e.at("entries")) {
        RunConfig::EvalEntryConfig entry;
        entry.name = get_or<std::string>(en, "name", "entry");
        entry.heads = get_or<std::string>(en, "heads", "identity");
        entry.checkpoint = get_or<std::string>(en, "checkpoint", "");
        entry.selector = get_or<std::string>(en, "selector", "prompt_argmax");
        entry.seed = get_or<uint64_t>(en, "seed", 0);
        entry.projection_dim = get_or<int>(en, "projection_dim", 0);
        cfg.evaluate.entries.push_back(std::move(entry));
      }
    }
    if (e.contains("oracle")) {
      const json& o = e.at("oracle");
      cfg.evaluate.oracle_kind = get_or<std::string>(o, "kind", cfg.evaluate.oracle_kind);
      cfg.evaluate.oracle_checkpoint = get_or<std::string>(o, "checkpoint", "");
      cfg.evaluate.oracle_pool_grid = get_or<int>(o, "pool_grid", cfg.evaluate.oracle_pool_grid);
    }
    if (e.contains("distractors")) {
      const json& d = e.at("distractors");
      cfg.evaluate.distractors.duplicates = get_or<bool>(d, "duplicates", false);
      cfg.evaluate.distractors.dilated = get_or<bool>(d, "dilated", false);
      cfg.evaluate.distractors.dilation_px = get_or<int>(d, "dilation_px", 1);
    }
    cfg.evaluate.dump_composites = get_or<bool>(e, "dump_composites", false);
  }
  if (doc.contains("classifier")) {
    const json& c = doc.at("classifier");
    cfg.classifier.manifest = get_or<std::string>(c, "manifest", "");
    cfg.classifier.backend = get_or<std::string>(c, "backend", cfg.classifier.backend);
    cfg.classifier.feature_file = get_or<std::string>(c, "feature_file", "");
    cfg.classifier.pool_grid = get_or<int>(c, "pool_grid", cfg.classifier.pool_grid);
    cfg.classifier.learning_rate = get_or<double>(c, "learning_rate", cfg.classifier.learning_rate);
    cfg.classifier.max_epochs = get_or<int>(c, "max_epochs", cfg.classifier.max_epochs);
    cfg.classifier.batch_size = get_or<int>(c, "batch_size", cfg.classifier.batch_size);
    cfg.classifier.train_fraction =
        get_or<double>(c, "train_fraction", cfg.classifier.train_fraction);
  }
  return cfg;
}

namespace {

void require_file(const std::string& path, const std::string& field) {
  if (path.empty()) throw ConfigError(field + " is required");
  if (!fs::exists(path)) throw ConfigError(field + ": no such file: " + path);
}

void validate_backend(const BackendSpec& spec, const std::string& field) {
  if (spec.kind != "mock" && spec.kind != "oracle" && spec.kind != "feature-file") {
    throw ConfigError(field + ".kind must be mock, oracle or feature-file");
  }
  if (spec.kind == "mock" && spec.dim < 1) throw ConfigError(field + ".dim must be >= 1");
  if (spec.kind == "feature-file") require_file(spec.path, field + ".path");
}

}  // namespace

void validate_config(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("out_dir is required");
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (cfg.data.caption_style != "name_only" && cfg.data.caption_style != "sentence") {
    throw ConfigError("data.caption_style must be name_only or sentence");
  }
  if (cfg.selector.render_mode != "masked_crop" && cfg.selector.render_mode != "bbox_crop") {
    throw ConfigError("selector.render_mode must be masked_crop or bbox_crop");
  }
  if (cfg.selector.bbox_margin < 0) throw ConfigError("selector.bbox_margin must be >= 0");
  validate(cfg.filters);

  const bool needs_dataset =
      cfg.command == Command::kTrainClip || cfg.command == Command::kGridSearch;
  if (needs_dataset) {
    require_file(cfg.data.manifest, "data.manifest");
    if (!(cfg.data.train_fraction > 0.0 && cfg.data.train_fraction < 1.0)) {
      throw ConfigError("data.train_fraction must be in (0,1)");
    }
    validate(cfg.trainer);
    validate_backend(cfg.image_backend, "backends.image");
    validate_backend(cfg.text_backend, "backends.text");
  }
  switch (cfg.command) {
    case Command::kTrainClip:
      break;
    case Command::kGridSearch:
      if (cfg.grid.learning_rates.empty() || cfg.grid.projection_dims.empty()) {
        throw ConfigError("grid.learning_rates and grid.projection_dims must be non-empty");
      }
      break;
    case Command::kSegment: {
      require_file(cfg.segment.image, "segment.image");
      if (cfg.segment.prompt.empty()) throw ConfigError("segment.prompt is required");
      const bool has_masks = !cfg.segment.masks.empty();
      const bool has_scene = !cfg.segment.scene.empty();
      if (has_masks == has_scene) {
        throw ConfigError("segment needs exactly one of segment.masks or segment.scene");
      }
      if (has_masks) require_file(cfg.segment.masks, "segment.masks");
      if (has_scene) require_file(cfg.segment.scene, "segment.scene");
      if (cfg.segment.heads == "checkpoint") {
        require_file(cfg.segment.checkpoint, "segment.checkpoint");
      } else if (cfg.segment.heads != "identity") {
        throw ConfigError("segment.heads must be checkpoint or identity");
      }
      validate_backend(cfg.image_backend, "backends.image");
      validate_backend(cfg.text_backend, "backends.text");
      break;
    }
    case Command::kFilterMasks:
      require_file(cfg.segment.masks, "segment.masks");
      break;
    case Command::kEvaluate: {
      if (cfg.evaluate.n_samples < 1) throw ConfigError("evaluate.n_samples must be >= 1");
      if (cfg.evaluate.classes.size() < 4) {
        throw ConfigError("evaluate.classes needs at least 4 classes");
      }
      if (cfg.evaluate.entries.empty()) throw ConfigError("evaluate.entries must be non-empty");
      for (const auto& entry : cfg.evaluate.entries) {
        if (entry.heads != "identity" && entry.heads != "random" && entry.heads != "checkpoint") {
          throw ConfigError("evaluate entry " + entry.name +
                            ": heads must be identity, random or checkpoint");
        }
        if (entry.heads == "checkpoint") {
          require_file(entry.checkpoint, "evaluate entry " + entry.name + " checkpoint");
        }
        if (entry.selector != "prompt_argmax" && entry.selector != "uniform_random") {
          throw ConfigError("evaluate entry " + entry.name +
                            ": selector must be prompt_argmax or uniform_random");
        }
      }
      if (cfg.evaluate.oracle_kind == "classifier") {
        require_file(cfg.evaluate.oracle_checkpoint, "evaluate.oracle.checkpoint");
      } else if (cfg.evaluate.oracle_kind != "color-key") {
        throw ConfigError("evaluate.oracle.kind must be color-key or classifier");
      }
      if (cfg.evaluate.distractors.dilation_px < 1) {
        throw ConfigError("evaluate.distractors.dilation_px must be >= 1");
      }
      break;
    }
    case Command::kTrainClassifier: {
      require_file(cfg.classifier.manifest, "classifier.manifest");
      if (cfg.classifier.backend != "pixel-pool" && cfg.classifier.backend != "feature-file") {
        throw ConfigError("classifier.backend must be pixel-pool or feature-file");
      }
      if (cfg.classifier.backend == "feature-file") {
        require_file(cfg.classifier.feature_file, "classifier.feature_file");
      }
      if (!(cfg.classifier.train_fraction > 0.0 && cfg.classifier.train_fraction < 1.0)) {
        throw ConfigError("classifier.train_fraction must be in (0,1)");
      }
      if (cfg.classifier.learning_rate <= 0.0) {
        throw ConfigError("classifier.learning_rate must be > 0");
      }
      if (cfg.classifier.max_epochs < 1) throw ConfigError("classifier.max_epochs must be >= 1");
      break;
    }
  }
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json classes = json::array();
  for (const auto& [name, color] : cfg.evaluate.classes) {
    classes.push_back({{"name", name}, {"color", {color.r, color.g, color.b}}});
  }
  json entries = json::array();
  for (const auto& e : cfg.evaluate.entries) {
    entries.push_back({{"name", e.name},
                       {"heads", e.heads},
                       {"checkpoint", e.checkpoint},
                       {"selector", e.selector},
                       {"seed", e.seed},
                       {"projection_dim", e.projection_dim}});
  }
  return json{
      {"command", command_name(cfg.command)},
      {"out_dir", cfg.out_dir},
      {"seed", cfg.seed},
      {"jobs", cfg.jobs},
      {"data",
       {{"manifest", cfg.data.manifest},
        {"train_fraction", cfg.data.train_fraction},
        {"stratify", cfg.data.stratify},
        {"caption_style", cfg.data.caption_style},
        {"normalization",
         {{"mean", cfg.data.normalization.mean}, {"std", cfg.data.normalization.std}}}}},
      {"trainer",
       {{"learning_rate", cfg.trainer.learning_rate},
        {"projection_dim", cfg.trainer.projection_dim},
        {"temperature", cfg.trainer.temperature},
        {"batch_size", cfg.trainer.batch_size},
        {"max_epochs", cfg.trainer.max_epochs},
        {"plateau_factor", cfg.trainer.plateau_factor},
        {"plateau_patience", cfg.trainer.plateau_patience},
        {"weight_decay", cfg.trainer.weight_decay},
        {"seed", cfg.trainer.seed}}},
      {"heads",
       {{"dropout_rate", cfg.heads.dropout_rate},
        {"layer_norm", cfg.heads.layer_norm},
        {"l2_normalize", cfg.heads.l2_normalize},
        {"target_mode", cfg.heads.target_mode == TargetMode::kIdentity ? "identity" : "soft"}}},
      {"backends",
       {{"image",
         {{"kind", cfg.image_backend.kind},
          {"dim", cfg.image_backend.dim},
          {"path", cfg.image_backend.path}}},
        {"text",
         {{"kind", cfg.text_backend.kind},
          {"dim", cfg.text_backend.dim},
          {"path", cfg.text_backend.path}}}}},
      {"filters",
       {{"dup_iou_threshold", cfg.filters.dup_iou_threshold},
        {"overlap_threshold", cfg.filters.overlap_threshold},
        {"enable_dedup", cfg.filters.enable_dedup},
        {"enable_split", cfg.filters.enable_split}}},
      {"selector",
       {{"render_mode", cfg.selector.render_mode}, {"bbox_margin", cfg.selector.bbox_margin}}},
      {"grid",
       {{"learning_rates", cfg.grid.learning_rates},
        {"projection_dims", cfg.grid.projection_dims}}},
      {"segment",
       {{"image", cfg.segment.image},
        {"prompt", cfg.segment.prompt},
        {"checkpoint", cfg.segment.checkpoint},
        {"masks", cfg.segment.masks},
        {"scene", cfg.segment.scene},
        {"heads", cfg.segment.heads}}},
      {"evaluate",
       {{"n_samples", cfg.evaluate.n_samples},
        {"classes", classes},
        {"entries", entries},
        {"oracle",
         {{"kind", cfg.evaluate.oracle_kind},
          {"checkpoint", cfg.evaluate.oracle_checkpoint},
          {"pool_grid", cfg.evaluate.oracle_pool_grid}}},
        {"distractors",
         {{"duplicates", cfg.evaluate.distractors.duplicates},
          {"dilated", cfg.evaluate.distractors.dilated},
          {"dilation_px", cfg.evaluate.distractors.dilation_px}}},
        {"dump_composites", cfg.evaluate.dump_composites}}},
      {"classifier",
       {{"manifest", cfg.classifier.manifest},
        {"backend", cfg.classifier.backend},
        {"feature_file", cfg.classifier.feature_file},
        {"pool_grid", cfg.classifier.pool_grid},
        {"learning_rate", cfg.classifier.learning_rate},
        {"max_epochs", cfg.classifier.max_epochs},
        {"batch_size", cfg.classifier.batch_size},
        {"train_fraction", cfg.classifier.train_fraction}}}};
}

}  // namespace promptseg
