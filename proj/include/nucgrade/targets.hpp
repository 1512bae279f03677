#pragma once

#include "nucgrade/core_types.hpp"
#include "nucgrade/tensor.hpp"

#include <stdexcept>

namespace nucgrade {

// Per-pixel distance to the nearest non-instance pixel, normalized so every
// instance has maximum exactly 1. Background stays 0.
struct DistanceMap {
  Plane<double> values;

  DistanceMap() = default;
  DistanceMap(int h, int w) : values(h, w, 0.0) {}
  int height() const { return values.rows; }
  int width() const { return values.cols; }
};

enum class TaskScheme {
  kTask1,  // merges grade 1 and grade 2: {0,1,2,3,4} -> {0,1,1,2,3}
  kTask2,  // merges grade 2 and grade 3: {0,1,2,3,4} -> {0,1,2,2,3}
};

inline constexpr int kTaskClasses = 4;

// All training targets derived from one labeled sample.
struct TargetBundle {
  Plane<std::uint8_t> binary;        // 1 iff instance pixel
  DistanceMap distance;
  Plane<std::uint8_t> task1;         // codes 0..3
  Plane<std::uint8_t> task2;         // codes 0..3
  ClassMap final;                    // codes 0..4
  ImagePatch aux100;                 // (H/4) x (W/4) box-averaged image
};

Plane<std::uint8_t> binary_map_from_instances(const InstanceMap& instances);

// Exact per-instance Euclidean distance transform: for each instance, every
// one of its pixels gets the distance to the nearest in-image pixel that does
// not belong to that instance, then values are divided by the instance
// maximum. A touching neighbor instance counts as background, so valleys form
// between touching nuclei.
DistanceMap distance_map_from_instances(const InstanceMap& instances);

// Cross-category relabeling. Throws std::invalid_argument on codes > 4.
Plane<std::uint8_t> remap_labels(const ClassMap& classes, TaskScheme scheme);
std::uint8_t remap_code(std::uint8_t code, TaskScheme scheme);

// Box-average 4x downsampling with round-half-away-from-zero, i.e. each
// output sample is floor(mean + 0.5). Throws std::invalid_argument unless
// H and W are divisible by 4.
ImagePatch downsample_4x(const ImagePatch& image);

// One-hot encoding over n channels; throws std::invalid_argument on code >= n.
template <typename T>
Tensor<T> one_hot(const Plane<std::uint8_t>& codes, int n) {
  Tensor<T> out(1, codes.rows, codes.cols, n);
  for (int r = 0; r < codes.rows; ++r) {
    for (int c = 0; c < codes.cols; ++c) {
      const int code = codes(r, c);
      if (code >= n) throw std::invalid_argument("one_hot: code out of range");
      out.at(0, r, c, code) = T(1);
    }
  }
  return out;
}

// Composes all target constructions. Expects a sample that passes
// validate_sample.
TargetBundle build_targets(const LabeledSample& sample);

}  // namespace nucgrade
