#pragma once

#include "nucgrade/core_types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nucgrade {

enum class AugOp { kFlip, kRotation, kBlur };

AugOp parse_aug_op(const std::string& name);
const char* aug_op_name(AugOp op);

// Seeded stochastic augmentation. Geometric transforms (flips, right-angle
// rotations) apply identically to image, instance and class maps; blur
// touches the image only. Training targets are rebuilt downstream from the
// augmented sample, never transformed.
LabeledSample augment(const LabeledSample& sample, const std::vector<AugOp>& ops,
                      std::uint64_t seed);

// Deterministic primitives, also used directly by tests.
LabeledSample flip_horizontal(const LabeledSample& sample);
LabeledSample flip_vertical(const LabeledSample& sample);
LabeledSample rotate90(const LabeledSample& sample, int quarter_turns);
ImagePatch gaussian_blur3x3(const ImagePatch& image);

}  // namespace nucgrade
