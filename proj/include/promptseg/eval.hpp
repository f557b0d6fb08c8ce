#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptseg/classifier.hpp"
#include "promptseg/data_ingest.hpp"
#include "promptseg/filters.hpp"
#include "promptseg/image.hpp"
#include "promptseg/mask.hpp"
#include "promptseg/scene.hpp"
#include "promptseg/selector.hpp"

namespace promptseg {

struct CompositeCell {
  std::string class_name;
  BBox cell_bbox;
  Mask ground_truth;
};

/// 448x448 canvas holding four class exemplars in a 2x2 grid on white.
struct CompositeSample {
  ImageU8 image;
  std::array<CompositeCell, 4> cells;
  uint64_t seed = 0;
};

inline constexpr Rgb kCompositeBackground{255, 255, 255};
inline constexpr int kCompositeSize = 448;
inline constexpr int kCompositeCellSize = 224;

struct Exemplar {
  std::string class_name;
  ImageU8 image;
};

class ExemplarProvider {
 public:
  virtual ~ExemplarProvider() = default;
  virtual Exemplar get(const std::string& class_name, uint64_t seed) const = 0;
  virtual std::vector<std::string> class_names() const = 0;
};

/// Solid-color shapes (rectangle or ellipse keyed by the class name) on a
/// white 224x224 canvas; geometry jitters with the seed, color stays fixed.
class SyntheticExemplarProvider : public ExemplarProvider {
 public:
  explicit SyntheticExemplarProvider(std::vector<std::pair<std::string, Rgb>> classes);
  Exemplar get(const std::string& class_name, uint64_t seed) const override;
  std::vector<std::string> class_names() const override;
  const std::vector<std::pair<std::string, Rgb>>& classes() const { return classes_; }
  Rgb color_of(const std::string& class_name) const;

 private:
  std::vector<std::pair<std::string, Rgb>> classes_;
};

/// Picks a real exemplar image for the class from a manifest (by seed) and
/// resizes it to the cell size.
class ManifestExemplarProvider : public ExemplarProvider {
 public:
  explicit ManifestExemplarProvider(DatasetManifest manifest);
  Exemplar get(const std::string& class_name, uint64_t seed) const override;
  std::vector<std::string> class_names() const override;

 private:
  DatasetManifest manifest_;
  std::map<std::string, std::vector<size_t>> by_class_;
};

enum class Layout { kGrid2x2 };

/// Paste the four exemplars into the cells of a 2x2 grid (cell assignment is
/// a seeded permutation). Ground-truth masks are the exemplars' non-white
/// pixels inside their cells; ids are the cell indices 0..3. Throws
/// InvalidInputError on duplicate classes.
CompositeSample compose(const std::array<Exemplar, 4>& exemplars, Layout layout, uint64_t seed);

/// Scene whose regions are the composite's ground-truth masks (labels and
/// colors from the synthetic class registry); feeds the synthetic proposer.
SyntheticScene composite_scene(const CompositeSample& composite,
                               const SyntheticExemplarProvider& provider,
                               const DistractorOptions& distractors);

/// True iff the oracle labels the chosen segment's rendering with the
/// prompt's class. Throws InvalidInputError when the prompt is not one of the
/// composite's classes.
bool judge(const SelectionResult& result, const CompositeSample& composite,
           const ClassifierOracle& oracle, const SelectorConfig& render = {});

struct EvalReport {
  std::string name;
  int total = 0;
  int correct = 0;
  double accuracy = 0.0;
  std::map<std::string, double> per_class_accuracy;
  nlohmann::json config_snapshot;
};

nlohmann::json eval_report_json(const EvalReport& report);

enum class SelectorKind { kPromptArgmax, kUniformRandom };

struct HeadsSpec {
  enum class Kind { kIdentity, kRandom, kCheckpoint };
  Kind kind = Kind::kIdentity;
  std::string checkpoint_path;
  int projection_dim = 0;  // for kRandom; 0 means same as the backend dim
  uint64_t seed = 0;       // for kRandom
};

struct EvalEntry {
  std::string name;
  HeadsSpec heads;
  SelectorKind selector = SelectorKind::kPromptArgmax;
};

struct EvalOptions {
  int n_samples = 400;
  uint64_t seed = 0;
  DistractorOptions distractors;
  FilterConfig filters;
  SelectorConfig render;
  std::string dump_dir;  // when set, composites + ground truth are written here
};

/// The full protocol over synthetic composites: every entry sees the
/// byte-identical composite/prompt stream (paired comparison), selections are
/// judged by the oracle, and one report per entry comes back.
std::vector<EvalReport> evaluate_synthetic(const std::vector<EvalEntry>& entries,
                                           const SyntheticExemplarProvider& provider,
                                           const ClassifierOracle& oracle,
                                           const EvalOptions& options);

/// "model name -> accuracy" summary table, one row per report.
std::string summary_table(const std::vector<EvalReport>& reports);

}  // namespace promptseg
