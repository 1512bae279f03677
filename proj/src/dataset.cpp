#include "nucgrade/dataset.hpp"

#include "nucgrade/errors.hpp"
#include "nucgrade/png_io.hpp"
#include "nucgrade/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace fs = std::filesystem;

namespace nucgrade {
namespace {

constexpr const char* kImageSuffix = ".img.png";
constexpr const char* kInstanceSuffix = ".inst.png";
constexpr const char* kTypeSuffix = ".type.png";

}  // namespace

void save_sample(const std::string& dir, const LabeledSample& sample) {
  fs::create_directories(dir);
  const std::int32_t max_id = sample.instances.max_id();
  if (max_id > 0xffff) {
    throw DataError(sample.id + ": instance ids exceed the 16-bit dataset format");
  }
  write_rgb_png(dir + "/" + sample.id + kImageSuffix, sample.image);
  Plane<std::uint16_t> inst(sample.instances.height(), sample.instances.width(), 0);
  for (std::size_t i = 0; i < inst.v.size(); ++i) {
    inst.v[i] = std::uint16_t(sample.instances.ids.v[i]);
  }
  write_gray16_png(dir + "/" + sample.id + kInstanceSuffix, inst);
  write_gray8_png(dir + "/" + sample.id + kTypeSuffix, sample.classes.classes);
}

std::vector<std::string> list_sample_ids(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir + ": not a directory");
  std::vector<std::string> ids;
  const std::string suffix = kImageSuffix;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

LabeledSample load_sample(const std::string& dir, const std::string& id) {
  const std::string img_path = dir + "/" + id + kImageSuffix;
  const std::string inst_path = dir + "/" + id + kInstanceSuffix;
  const std::string type_path = dir + "/" + id + kTypeSuffix;
  for (const std::string& p : {img_path, inst_path, type_path}) {
    if (!fs::exists(p)) throw DataError(id + ": missing dataset file " + p);
  }
  LabeledSample sample;
  sample.id = id;
  sample.image = read_rgb_png(img_path);
  const Plane<std::uint16_t> inst = read_gray16_png(inst_path);
  const Plane<std::uint8_t> types = read_gray8_png(type_path);
  if (inst.rows != sample.image.height || inst.cols != sample.image.width ||
      types.rows != sample.image.height || types.cols != sample.image.width) {
    throw DataError(id + ": triple shape mismatch between image, instance and type maps");
  }
  sample.instances = InstanceMap(inst.rows, inst.cols);
  for (std::size_t i = 0; i < inst.v.size(); ++i) sample.instances.ids.v[i] = inst.v[i];
  sample.instances = relabel_dense(sample.instances);
  sample.classes.classes = types;
  return sample;
}

std::vector<LabeledSample> load_dataset(const std::string& dir) {
  std::vector<LabeledSample> samples;
  for (const std::string& id : list_sample_ids(dir)) {
    LabeledSample sample = load_sample(dir, id);
    const auto violations = validate_sample(sample);
    if (!violations.empty()) {
      throw DataError(id + ": invalid sample: " + violations.front() +
                      (violations.size() > 1
                           ? " (+" + std::to_string(violations.size() - 1) + " more)"
                           : ""));
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

SplitIndices split_dataset(std::size_t n_samples, const std::array<double, 3>& fractions,
                           std::uint64_t seed) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t(0));
  RandomStream rng(derive_seed(seed, 0x5011f7));
  for (std::size_t i = n_samples; i > 1; --i) {  // Fisher-Yates
    const std::size_t j = std::size_t(rng.uniform_int(std::uint64_t(i)));
    std::swap(order[i - 1], order[j]);
  }

  std::size_t n_train = std::size_t(std::llround(double(n_samples) * fractions[0]));
  std::size_t n_val = std::size_t(std::llround(double(n_samples) * fractions[1]));
  n_train = std::min(n_train, n_samples);
  n_val = std::min(n_val, n_samples - n_train);

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + std::ptrdiff_t(n_train));
  out.val.assign(order.begin() + std::ptrdiff_t(n_train),
                 order.begin() + std::ptrdiff_t(n_train + n_val));
  out.test.assign(order.begin() + std::ptrdiff_t(n_train + n_val), order.end());
  return out;
}

}  // namespace nucgrade
