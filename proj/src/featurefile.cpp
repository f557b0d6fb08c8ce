#include "promptseg/featurefile.hpp"

#include <cstring>
#include <fstream>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {
constexpr char kMagic[] = "PSEGFEAT1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;
}  // namespace

FeatureFile FeatureFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("feature file: cannot open " + path);
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw InvalidInputError("feature file: bad magic in " + path);
  }
  uint32_t dim = 0;
  uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || dim == 0) throw InvalidInputError("feature file: bad header in " + path);

  FeatureFile file;
  file.dim = static_cast<int>(dim);
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t keylen = 0;
    in.read(reinterpret_cast<char*>(&keylen), sizeof(keylen));
    std::string key(keylen, '\0');
    in.read(key.data(), keylen);
    Eigen::VectorXd v(dim);
    in.read(reinterpret_cast<char*>(v.data()), sizeof(double) * dim);
    if (!in) throw InvalidInputError("feature file: truncated entry in " + path);
    file.features.emplace(std::move(key), std::move(v));
  }
  return file;
}

void FeatureFile::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("feature file: cannot write " + path);
  out.write(kMagic, kMagicLen);
  const uint32_t d = static_cast<uint32_t>(dim);
  const uint64_t count = features.size();
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  // Deterministic order: sort keys.
  std::vector<const std::string*> keys;
  keys.reserve(features.size());
  for (const auto& [k, v] : features) keys.push_back(&k);
  std::sort(keys.begin(), keys.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const std::string* k : keys) {
    const auto& v = features.at(*k);
    if (v.size() != dim) throw InvalidInputError("feature file: inconsistent dim for key " + *k);
    const uint32_t keylen = static_cast<uint32_t>(k->size());
    out.write(reinterpret_cast<const char*>(&keylen), sizeof(keylen));
    out.write(k->data(), keylen);
    out.write(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
  }
}

FeatureFileTextBackend::FeatureFileTextBackend(FeatureFile file, std::string name)
    : file_(std::move(file)), name_(std::move(name)) {}

Eigen::MatrixXd FeatureFileTextBackend::encode(const std::vector<std::string>& inputs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), file_.dim);
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto it = file_.features.find(inputs[i]);
    if (it == file_.features.end()) {
      throw LookupError("feature file " + name_ + ": no features for text '" + inputs[i] + "'");
    }
    out.row(static_cast<Eigen::Index>(i)) = it->second.transpose();
  }
  return out;
}

FeatureFileImageBackend::FeatureFileImageBackend(FeatureFile file, std::string name)
    : file_(std::move(file)), name_(std::move(name)) {}

Eigen::MatrixXd FeatureFileImageBackend::encode(const std::vector<PreprocessedImage>& inputs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), file_.dim);
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto it = file_.features.find(inputs[i].source_path);
    if (it == file_.features.end()) {
      throw LookupError("feature file " + name_ + ": no features for image '" +
                        inputs[i].source_path + "'");
    }
    out.row(static_cast<Eigen::Index>(i)) = it->second.transpose();
  }
  return out;
}

}  // namespace promptseg
