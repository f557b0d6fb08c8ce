#include "promptseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "promptseg/errors.hpp"
#include "promptseg/imageio.hpp"
#include "promptseg/proposals.hpp"
#include "promptseg/rng.hpp"
#include "promptseg/trainer.hpp"

namespace promptseg {

// ---------------------------------------------------------------------------
// Exemplar providers
// ---------------------------------------------------------------------------

SyntheticExemplarProvider::SyntheticExemplarProvider(
    std::vector<std::pair<std::string, Rgb>> classes)
    : classes_(std::move(classes)) {
  std::set<std::string> names;
  for (const auto& [name, color] : classes_) {
    if (!names.insert(name).second) {
      throw InvalidInputError("exemplar provider: duplicate class " + name);
    }
    if (color == kCompositeBackground) {
      throw InvalidInputError("exemplar provider: class color equals composite background");
    }
  }
}

std::vector<std::string> SyntheticExemplarProvider::class_names() const {
  std::vector<std::string> names;
  names.reserve(classes_.size());
  for (const auto& [name, color] : classes_) names.push_back(name);
  return names;
}

Rgb SyntheticExemplarProvider::color_of(const std::string& class_name) const {
  for (const auto& [name, color] : classes_) {
    if (name == class_name) return color;
  }
  throw LookupError("exemplar provider: unknown class " + class_name);
}

Exemplar SyntheticExemplarProvider::get(const std::string& class_name, uint64_t seed) const {
  const Rgb color = color_of(class_name);
  Rng rng(mix_seed(seed, fnv1a64(class_name)));

  const int size = kCompositeCellSize;
  const int extent = 96 + static_cast<int>(rng.below(65));  // 96..160
  const int cx = size / 2 - 16 + static_cast<int>(rng.below(33));
  const int cy = size / 2 - 16 + static_cast<int>(rng.below(33));

  ImageU8 img = ImageU8::filled(size, size, kCompositeBackground);
  const bool ellipse = (fnv1a64(class_name) & 1) != 0;
  const double rx = extent / 2.0;
  const double ry = extent / 2.5;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      bool inside;
      if (ellipse) {
        const double dx = (x - cx) / rx;
        const double dy = (y - cy) / ry;
        inside = dx * dx + dy * dy <= 1.0;
      } else {
        inside = std::abs(x - cx) * 2 <= extent && std::abs(y - cy) * 2 <= extent;
      }
      if (inside) {
        uint8_t* p = img.px(y, x);
        p[0] = color.r;
        p[1] = color.g;
        p[2] = color.b;
      }
    }
  }
  return Exemplar{class_name, std::move(img)};
}

ManifestExemplarProvider::ManifestExemplarProvider(DatasetManifest manifest)
    : manifest_(std::move(manifest)) {
  for (size_t i = 0; i < manifest_.entries.size(); ++i) {
    by_class_[manifest_.entries[i].class_name].push_back(i);
  }
}

std::vector<std::string> ManifestExemplarProvider::class_names() const {
  return manifest_.class_names;
}

Exemplar ManifestExemplarProvider::get(const std::string& class_name, uint64_t seed) const {
  auto it = by_class_.find(class_name);
  if (it == by_class_.end() || it->second.empty()) {
    throw LookupError("exemplar provider: no images for class " + class_name);
  }
  Rng rng(mix_seed(seed, fnv1a64(class_name)));
  const size_t idx = it->second[rng.below(it->second.size())];
  ImageU8 img = load_image(manifest_.entries[idx].image_path);
  return Exemplar{class_name, resize_bilinear(img, kCompositeCellSize, kCompositeCellSize)};
}

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

CompositeSample compose(const std::array<Exemplar, 4>& exemplars, Layout layout, uint64_t seed) {
  if (layout != Layout::kGrid2x2) throw InvalidInputError("compose: unsupported layout");
  std::set<std::string> classes;
  for (const auto& e : exemplars) {
    if (!classes.insert(e.class_name).second) {
      throw InvalidInputError("compose: duplicate class " + e.class_name);
    }
  }

  CompositeSample sample;
  sample.seed = seed;
  sample.image = ImageU8::filled(kCompositeSize, kCompositeSize, kCompositeBackground);

  // Seeded assignment of exemplars to cells.
  Rng rng(mix_seed(seed, 0xce11));
  std::vector<size_t> slot_of = permutation(4, rng);

  const std::array<std::pair<int, int>, 4> cell_origin{{{0, 0},
                                                        {kCompositeCellSize, 0},
                                                        {0, kCompositeCellSize},
                                                        {kCompositeCellSize, kCompositeCellSize}}};
  for (size_t cell = 0; cell < 4; ++cell) {
    const Exemplar& ex = exemplars[slot_of[cell]];
    ImageU8 tile = ex.image;
    if (tile.height != kCompositeCellSize || tile.width != kCompositeCellSize) {
      tile = resize_bilinear(tile, kCompositeCellSize, kCompositeCellSize);
    }
    const auto [ox, oy] = cell_origin[cell];
    BinaryRaster gt = BinaryRaster::zeros(kCompositeSize, kCompositeSize);
    for (int y = 0; y < kCompositeCellSize; ++y) {
      for (int x = 0; x < kCompositeCellSize; ++x) {
        const uint8_t* src = tile.px(y, x);
        uint8_t* dst = sample.image.px(oy + y, ox + x);
        dst[0] = src[0];
        dst[1] = src[1];
        dst[2] = src[2];
        const bool foreground = std::abs(src[0] - kCompositeBackground.r) > 8 ||
                                std::abs(src[1] - kCompositeBackground.g) > 8 ||
                                std::abs(src[2] - kCompositeBackground.b) > 8;
        if (foreground) gt.set(oy + y, ox + x, 1);
      }
    }
    Mask gt_mask = rle_encode(gt);
    gt_mask.id = static_cast<int>(cell);
    gt_mask.quality = 1.0;
    sample.cells[cell] = CompositeCell{
        ex.class_name, BBox{ox, oy, kCompositeCellSize, kCompositeCellSize}, std::move(gt_mask)};
  }
  return sample;
}

SyntheticScene composite_scene(const CompositeSample& composite,
                               const SyntheticExemplarProvider& provider,
                               const DistractorOptions& distractors) {
  SyntheticScene scene;
  scene.height = kCompositeSize;
  scene.width = kCompositeSize;
  scene.background = kCompositeBackground;
  scene.distractors = distractors;
  for (const auto& cell : composite.cells) {
    scene.regions.push_back(SceneRegion{cell.class_name, provider.color_of(cell.class_name),
                                        rle_decode(cell.ground_truth)});
  }
  return scene;
}

bool judge(const SelectionResult& result, const CompositeSample& composite,
           const ClassifierOracle& oracle, const SelectorConfig& render) {
  const bool known = std::any_of(composite.cells.begin(), composite.cells.end(),
                                 [&](const CompositeCell& c) { return c.class_name == result.prompt; });
  if (!known) {
    throw InvalidInputError("judge: prompt '" + result.prompt + "' not among composite classes");
  }
  const SegmentCrop crop =
      render_segment(composite.image, result.chosen_mask, render.render_mode, render);
  return oracle.predict(crop.pixels) == result.prompt;
}

// ---------------------------------------------------------------------------
// Evaluation loop
// ---------------------------------------------------------------------------

namespace {

struct EntryState {
  ProjectionHead image_head;
  ProjectionHead text_head;
  bool uses_heads = false;
};

EntryState prepare_entry(const EvalEntry& entry, int backend_dim) {
  EntryState state;
  switch (entry.heads.kind) {
    case HeadsSpec::Kind::kIdentity:
      state.image_head = ProjectionHead::identity_debug(backend_dim, backend_dim);
      state.text_head = ProjectionHead::identity_debug(backend_dim, backend_dim);
      break;
    case HeadsSpec::Kind::kRandom: {
      const int d = entry.heads.projection_dim > 0 ? entry.heads.projection_dim : backend_dim;
      ProjectionHeadConfig cfg{backend_dim, d, 0.0, true, true};
      state.image_head = ProjectionHead::random_init(cfg, mix_seed(entry.heads.seed, 1));
      state.text_head = ProjectionHead::random_init(cfg, mix_seed(entry.heads.seed, 2));
      break;
    }
    case HeadsSpec::Kind::kCheckpoint: {
      const Checkpoint cp = load_checkpoint(entry.heads.checkpoint_path);
      if (cp.image_head.config.input_dim != backend_dim ||
          cp.text_head.config.input_dim != backend_dim) {
        throw ConfigError("evaluate: checkpoint input dims do not match the oracle backend (" +
                          std::to_string(backend_dim) + ")");
      }
      state.image_head = cp.image_head;
      state.text_head = cp.text_head;
      break;
    }
  }
  state.uses_heads = true;
  return state;
}

}  // namespace

std::vector<EvalReport> evaluate_synthetic(const std::vector<EvalEntry>& entries,
                                           const SyntheticExemplarProvider& provider,
                                           const ClassifierOracle& oracle,
                                           const EvalOptions& options) {
  if (entries.empty()) throw InvalidInputError("evaluate: no entries");
  if (options.n_samples < 1) throw InvalidInputError("evaluate: n_samples must be >= 1");
  const auto class_names = provider.class_names();
  if (class_names.size() < 4) throw InvalidInputError("evaluate: need at least 4 classes");

  const int dim = static_cast<int>(class_names.size()) + 1;
  OracleRegistry registry(provider.classes(), dim);
  OracleImageBackend image_backend(registry, options.render.normalization);
  OracleTextBackend text_backend(registry);

  std::vector<EntryState> states;
  states.reserve(entries.size());
  for (const auto& entry : entries) states.push_back(prepare_entry(entry, dim));

  const bool dumping = !options.dump_dir.empty();
  if (dumping) std::filesystem::create_directories(options.dump_dir);

  struct Tally {
    int total = 0, correct = 0;
    std::map<std::string, std::pair<int, int>> per_class;  // class -> (correct, total)
  };
  std::vector<Tally> tallies(entries.size());

  for (int i = 0; i < options.n_samples; ++i) {
    const uint64_t sample_seed = mix_seed(options.seed, static_cast<uint64_t>(i));

    Rng class_rng(mix_seed(sample_seed, 1));
    std::vector<std::string> pool = class_names;
    shuffle(pool, class_rng);
    std::array<Exemplar, 4> exemplars;
    for (size_t k = 0; k < 4; ++k) {
      exemplars[k] = provider.get(pool[k], mix_seed(sample_seed, 2 + k));
    }
    const CompositeSample composite = compose(exemplars, Layout::kGrid2x2, sample_seed);

    Rng prompt_rng(mix_seed(sample_seed, 7));
    const std::string prompt = composite.cells[prompt_rng.below(4)].class_name;

    const SyntheticScene scene = composite_scene(composite, provider, options.distractors);
    const std::vector<Mask> proposals =
        validate_proposals(synthetic_propose(scene), kCompositeSize, kCompositeSize);
    const std::vector<Mask> candidates = filter_pipeline(proposals, options.filters);
    if (candidates.empty()) throw NoCandidatesError("evaluate: filters removed every proposal");

    if (dumping) {
      const std::string stem = options.dump_dir + "/composite_" + std::to_string(i);
      save_png(stem + ".png", composite.image);
      nlohmann::json gt = nlohmann::json::array();
      for (const auto& cell : composite.cells) {
        gt.push_back({{"class_name", cell.class_name},
                      {"cell_bbox", {cell.cell_bbox.x, cell.cell_bbox.y, cell.cell_bbox.w,
                                     cell.cell_bbox.h}},
                      {"ground_truth", mask_to_json(cell.ground_truth)}});
      }
      std::ofstream out(stem + ".json");
      out << nlohmann::json{{"seed", sample_seed}, {"prompt", prompt}, {"cells", gt}}.dump(2)
          << "\n";
    }

    for (size_t e = 0; e < entries.size(); ++e) {
      SelectionResult result;
      if (entries[e].selector == SelectorKind::kUniformRandom) {
        // Chooser stream keyed by the entry name so entry order cannot change
        // any entry's outcomes.
        Rng chooser(mix_seed(mix_seed(sample_seed, fnv1a64(entries[e].name)), 0xc4005e));
        const size_t pick = chooser.below(candidates.size());
        result.prompt = prompt;
        for (const auto& c : candidates) result.scores[c.id] = 0.0;
        result.scores[candidates[pick].id] = 1.0;
        result.chosen_mask_id = candidates[pick].id;
        result.chosen_mask = candidates[pick];
      } else {
        result = select_segment(composite.image, candidates, prompt, states[e].image_head,
                                states[e].text_head, image_backend, text_backend, options.render);
      }
      const bool ok = judge(result, composite, oracle, options.render);
      ++tallies[e].total;
      tallies[e].correct += ok ? 1 : 0;
      auto& pc = tallies[e].per_class[prompt];
      ++pc.second;
      pc.first += ok ? 1 : 0;
    }
  }

  std::vector<EvalReport> reports;
  for (size_t e = 0; e < entries.size(); ++e) {
    EvalReport report;
    report.name = entries[e].name;
    report.total = tallies[e].total;
    report.correct = tallies[e].correct;
    report.accuracy = report.total == 0 ? 0.0
                                        : static_cast<double>(report.correct) / report.total;
    for (const auto& [cls, counts] : tallies[e].per_class) {
      report.per_class_accuracy[cls] =
          counts.second == 0 ? 0.0 : static_cast<double>(counts.first) / counts.second;
    }
    report.config_snapshot = nlohmann::json{
        {"n_samples", options.n_samples},
        {"seed", options.seed},
        {"selector",
         entries[e].selector == SelectorKind::kUniformRandom ? "uniform-random" : "prompt-argmax"},
        {"heads", entries[e].heads.kind == HeadsSpec::Kind::kIdentity ? "identity"
                  : entries[e].heads.kind == HeadsSpec::Kind::kRandom ? "random"
                                                                      : "checkpoint"},
        {"checkpoint", entries[e].heads.checkpoint_path},
        {"oracle", oracle.descriptor()},
        {"oracle_reported_accuracy", oracle.reported_accuracy()},
        {"render_mode",
         options.render.render_mode == RenderMode::kMaskedCrop ? "masked_crop" : "bbox_crop"},
        {"filters",
         {{"dup_iou_threshold", options.filters.dup_iou_threshold},
          {"overlap_threshold", options.filters.overlap_threshold},
          {"enable_dedup", options.filters.enable_dedup},
          {"enable_split", options.filters.enable_split}}},
        {"distractors",
         {{"duplicates", options.distractors.duplicates},
          {"dilated", options.distractors.dilated},
          {"dilation_px", options.distractors.dilation_px}}},
        {"classes", class_names}};
    reports.push_back(std::move(report));
  }
  return reports;
}

nlohmann::json eval_report_json(const EvalReport& report) {
  return nlohmann::json{{"name", report.name},
                        {"total", report.total},
                        {"correct", report.correct},
                        {"accuracy", report.accuracy},
                        {"per_class_accuracy", report.per_class_accuracy},
                        {"config_snapshot", report.config_snapshot}};
}

std::string summary_table(const std::vector<EvalReport>& reports) {
  size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.name.size());
  std::ostringstream out;
  out << std::string(width, ' ') << "  Accuracy\n";
  for (const auto& r : reports) {
    std::ostringstream pct;
    pct.setf(std::ios::fixed);
    pct.precision(2);
    pct << r.accuracy * 100.0 << "%";
    out << r.name << std::string(width - r.name.size(), ' ') << "  " << pct.str() << "\n";
  }
  return out.str();
}

}  // namespace promptseg
