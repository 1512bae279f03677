#pragma once

#include "nucgrade/core_types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nucgrade {

// Dataset directory layout: for each sample id S the triple
//   S.img.png   8-bit RGB image
//   S.inst.png  16-bit single-channel instance ids
//   S.type.png  8-bit single-channel class codes 0..4
// Round trips are lossless.

void save_sample(const std::string& dir, const LabeledSample& sample);

// Lists the sample ids with an .img.png file, sorted.
std::vector<std::string> list_sample_ids(const std::string& dir);

// Loads one triple; relabels instance ids densely on ingest. Throws DataError
// on missing files or shape mismatch within the triple.
LabeledSample load_sample(const std::string& dir, const std::string& id);

// Loads and validates every sample in the directory, sorted by id.
// Throws DataError naming the offending sample on any violation.
std::vector<LabeledSample> load_dataset(const std::string& dir);

// Deterministic seeded shuffle, then partition with sizes rounded to sum to
// the total. Returns indices into `n_samples`.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};
SplitIndices split_dataset(std::size_t n_samples, const std::array<double, 3>& fractions,
                           std::uint64_t seed);

}  // namespace nucgrade
