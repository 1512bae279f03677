#pragma once

#include "nucgrade/plane.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nucgrade {

// Class codes. 0 is background; 1..4 are the annotated nucleus types.
enum class NucleusClass : std::uint8_t {
  kBackground = 0,
  kGrade1 = 1,
  kGrade2 = 2,
  kGrade3 = 3,
  kEndothelial = 4,
};

inline constexpr int kNumClasses = 5;      // including background
inline constexpr int kNumNucleusTypes = 4; // codes 1..4
inline constexpr int kPatchDivisor = 32;   // backbone downsampling depth

const char* class_name(int code);

// 8-bit RGB patch, interleaved row-major.
struct ImagePatch {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // height*width*3

  ImagePatch() = default;
  ImagePatch(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(std::size_t(h) * w * 3, fill) {}

  std::uint8_t& at(int r, int c, int ch) { return pixels[(std::size_t(r) * width + c) * 3 + ch]; }
  std::uint8_t at(int r, int c, int ch) const {
    return pixels[(std::size_t(r) * width + c) * 3 + ch];
  }
};

// Instance labels: 0 = background, k > 0 = nucleus instance k.
// Valid maps have dense ids 1..max and 4-connected instances.
struct InstanceMap {
  Plane<std::int32_t> ids;

  InstanceMap() = default;
  InstanceMap(int h, int w) : ids(h, w, 0) {}
  int height() const { return ids.rows; }
  int width() const { return ids.cols; }
  std::int32_t max_id() const;
};

// Per-pixel class codes, paired with an InstanceMap.
struct ClassMap {
  Plane<std::uint8_t> classes;

  ClassMap() = default;
  ClassMap(int h, int w) : classes(h, w, 0) {}
  int height() const { return classes.rows; }
  int width() const { return classes.cols; }
};

struct LabeledSample {
  std::string id;
  ImagePatch image;
  InstanceMap instances;
  ClassMap classes;
};

// Post-processed prediction: instances plus one class label (1..4) per id.
struct TypedInstanceMap {
  InstanceMap instances;
  std::map<std::int32_t, std::uint8_t> labels;
};

// 4-connected component labeling of the nonzero support, where two pixels
// connect only if they carry the same value. Components are labeled 1..K by
// row-major order of their first pixel. Returns the label plane; `count`
// receives K.
Plane<std::int32_t> label_same_value_components_4(const Plane<std::int32_t>& values, int* count);

// Relabels instance ids densely to 1..K by row-major first occurrence.
// Idempotent.
InstanceMap relabel_dense(const InstanceMap& m);

// Checks every type invariant of a LabeledSample. Returns human-readable
// violation descriptions; empty list means the sample is well formed.
std::vector<std::string> validate_sample(const LabeledSample& sample);

}  // namespace nucgrade
