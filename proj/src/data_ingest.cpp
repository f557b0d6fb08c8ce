#include "promptseg/data_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "promptseg/errors.hpp"
#include "promptseg/rng.hpp"

namespace promptseg {

DatasetManifest DatasetManifest::from_entries(std::vector<ManifestEntry> entries) {
  DatasetManifest manifest;
  manifest.entries = std::move(entries);
  std::set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (seen.insert(e.class_name).second) manifest.class_names.push_back(e.class_name);
  }
  validate_manifest(manifest);
  return manifest;
}

void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::string> classes(manifest.class_names.begin(), manifest.class_names.end());
  if (classes.size() != manifest.class_names.size()) {
    throw InvalidInputError("manifest: class_names contains duplicates");
  }
  std::set<std::string> paths;
  for (const auto& e : manifest.entries) {
    if (!classes.count(e.class_name)) {
      throw InvalidInputError("manifest: entry class '" + e.class_name + "' not in class_names");
    }
    if (!paths.insert(e.image_path).second) {
      throw InvalidInputError("manifest: duplicate image_path " + e.image_path);
    }
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("load_manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.image_path = j.at("image_path").get<std::string>();
      e.class_name = j.at("class_name").get<std::string>();
      e.caption = j.value("caption", "");
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw InvalidInputError("load_manifest: " + path + " line " + std::to_string(lineno) +
                              ": " + ex.what());
    }
  }
  return DatasetManifest::from_entries(std::move(entries));
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("save_manifest: cannot open " + path);
  for (const auto& e : manifest.entries) {
    nlohmann::json j{{"image_path", e.image_path}, {"class_name", e.class_name}};
    if (!e.caption.empty()) j["caption"] = e.caption;
    out << j.dump() << "\n";
  }
}

std::string build_caption(const std::string& class_name, CaptionStyle style) {
  if (class_name.empty()) throw InvalidInputError("build_caption: empty class name");
  std::string name;
  name.reserve(class_name.size());
  for (char c : class_name) {
    name.push_back(c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  switch (style) {
    case CaptionStyle::kNameOnly:
      return name;
    case CaptionStyle::kSentence:
      return "This is an image of " + name;
  }
  throw InvalidInputError("build_caption: unknown style");
}

std::vector<CaptionedSample> build_captions(const DatasetManifest& manifest, CaptionStyle style) {
  std::vector<CaptionedSample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    out.push_back(CaptionedSample{e.image_path, build_caption(e.class_name, style), e.class_name});
  }
  return out;
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec, bool stratified) {
  if (manifest.entries.empty()) throw InvalidInputError("split_dataset: empty manifest");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw InvalidInputError("split_dataset: train_fraction must be in (0,1)");
  }
  const size_t n = manifest.entries.size();
  const size_t n_train = static_cast<size_t>(std::floor(spec.train_fraction * n));

  std::vector<uint8_t> in_train(n, 0);
  if (!stratified) {
    Rng rng(mix_seed(spec.seed, 0x5b117));
    std::vector<size_t> order = permutation(n, rng);
    for (size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;
  } else {
    // Group entry indices per class, preserving manifest order.
    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < n; ++i) by_class[manifest.entries[i].class_name].push_back(i);

    // Largest-remainder quotas so the total is exactly n_train.
    struct Quota {
      const std::string* cls;
      size_t base;
      double remainder;
    };
    std::vector<Quota> quotas;
    size_t assigned = 0;
    for (const auto& cls : manifest.class_names) {
      auto it = by_class.find(cls);
      if (it == by_class.end()) continue;
      const double exact = spec.train_fraction * static_cast<double>(it->second.size());
      const size_t base = static_cast<size_t>(std::floor(exact));
      quotas.push_back(Quota{&cls, base, exact - static_cast<double>(base)});
      assigned += base;
    }
    std::vector<size_t> quota_order(quotas.size());
    for (size_t i = 0; i < quotas.size(); ++i) quota_order[i] = i;
    std::stable_sort(quota_order.begin(), quota_order.end(), [&](size_t a, size_t b) {
      return quotas[a].remainder > quotas[b].remainder;
    });
    for (size_t i = 0; i < quota_order.size() && assigned < n_train; ++i) {
      const auto& q = quotas[quota_order[i]];
      if (q.base < by_class[*q.cls].size()) {
        ++quotas[quota_order[i]].base;
        ++assigned;
      }
    }
    if (assigned != n_train) {
      // Remainders alone could not fill the quota (tiny classes); greedily top
      // up classes that still have spare entries.
      for (auto& q : quotas) {
        while (assigned < n_train && q.base < by_class[*q.cls].size()) {
          ++q.base;
          ++assigned;
        }
      }
    }
    for (const auto& q : quotas) {
      auto& idx = by_class[*q.cls];
      Rng rng(mix_seed(spec.seed, fnv1a64(*q.cls)));
      shuffle(idx, rng);
      for (size_t i = 0; i < q.base; ++i) in_train[idx[i]] = 1;
    }
  }

  std::vector<ManifestEntry> train_entries, val_entries;
  for (size_t i = 0; i < n; ++i) {
    (in_train[i] ? train_entries : val_entries).push_back(manifest.entries[i]);
  }
  DatasetManifest train, val;
  train.entries = std::move(train_entries);
  val.entries = std::move(val_entries);
  train.class_names = manifest.class_names;
  val.class_names = manifest.class_names;
  return {std::move(train), std::move(val)};
}

}  // namespace promptseg
