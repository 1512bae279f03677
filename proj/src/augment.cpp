#include "nucgrade/augment.hpp"

#include "nucgrade/errors.hpp"
#include "nucgrade/rng.hpp"

#include <algorithm>

namespace nucgrade {
namespace {

template <typename F>
LabeledSample transform_geometry(const LabeledSample& in, int out_h, int out_w, F&& src_of) {
  LabeledSample out;
  out.id = in.id;
  out.image = ImagePatch(out_h, out_w);
  out.instances = InstanceMap(out_h, out_w);
  out.classes = ClassMap(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const auto [sr, sc] = src_of(r, c);
      for (int ch = 0; ch < 3; ++ch) out.image.at(r, c, ch) = in.image.at(sr, sc, ch);
      out.instances.ids(r, c) = in.instances.ids(sr, sc);
      out.classes.classes(r, c) = in.classes.classes(sr, sc);
    }
  }
  return out;
}

}  // namespace

AugOp parse_aug_op(const std::string& name) {
  if (name == "flip") return AugOp::kFlip;
  if (name == "rotation") return AugOp::kRotation;
  if (name == "blur") return AugOp::kBlur;
  throw ConfigError("unknown augmentation: " + name);
}

const char* aug_op_name(AugOp op) {
  switch (op) {
    case AugOp::kFlip: return "flip";
    case AugOp::kRotation: return "rotation";
    case AugOp::kBlur: return "blur";
  }
  return "?";
}

LabeledSample flip_horizontal(const LabeledSample& s) {
  const int h = s.image.height, w = s.image.width;
  return transform_geometry(s, h, w,
                            [w](int r, int c) { return std::pair<int, int>{r, w - 1 - c}; });
}

LabeledSample flip_vertical(const LabeledSample& s) {
  const int h = s.image.height, w = s.image.width;
  return transform_geometry(s, h, w,
                            [h](int r, int c) { return std::pair<int, int>{h - 1 - r, c}; });
}

LabeledSample rotate90(const LabeledSample& s, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return s;
  const int h = s.image.height, w = s.image.width;
  switch (k) {
    case 1:  // 90 degrees counter-clockwise: out(r,c) = in(c, W-1-r) on swapped dims
      return transform_geometry(
          s, w, h, [h](int r, int c) { return std::pair<int, int>{c, h - 1 - r}; });
    case 2:
      return transform_geometry(
          s, h, w, [h, w](int r, int c) { return std::pair<int, int>{h - 1 - r, w - 1 - c}; });
    default:  // 3
      return transform_geometry(
          s, w, h, [w](int r, int c) { return std::pair<int, int>{w - 1 - c, r}; });
  }
}

ImagePatch gaussian_blur3x3(const ImagePatch& image) {
  // separable (1 2 1)/4 kernel with clamped borders, floor(x + 0.5) rounding
  static constexpr int kKernel[3] = {1, 2, 1};
  ImagePatch out(image.height, image.width);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        int sum = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int sr = std::clamp(r + dr, 0, image.height - 1);
            const int sc = std::clamp(c + dc, 0, image.width - 1);
            sum += kKernel[dr + 1] * kKernel[dc + 1] * image.at(sr, sc, ch);
          }
        }
        out.at(r, c, ch) = std::uint8_t((sum + 8) / 16);
      }
    }
  }
  return out;
}

LabeledSample augment(const LabeledSample& sample, const std::vector<AugOp>& ops,
                      std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, 0xa46));
  const bool use_flip = std::count(ops.begin(), ops.end(), AugOp::kFlip) > 0;
  const bool use_rot = std::count(ops.begin(), ops.end(), AugOp::kRotation) > 0;
  const bool use_blur = std::count(ops.begin(), ops.end(), AugOp::kBlur) > 0;

  LabeledSample out = sample;
  if (use_rot) {
    out = rotate90(out, int(rng.uniform_int(std::uint64_t(4))));
  }
  if (use_flip) {
    if (rng.bernoulli(0.5)) out = flip_horizontal(out);
    if (rng.bernoulli(0.5)) out = flip_vertical(out);
  }
  if (use_blur && rng.bernoulli(0.5)) {
    out.image = gaussian_blur3x3(out.image);
  }
  return out;
}

}  // namespace nucgrade
