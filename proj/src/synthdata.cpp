#include "nucgrade/synthdata.hpp"

#include "nucgrade/errors.hpp"
#include "nucgrade/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace nucgrade {
namespace {

struct Rgb {
  int r, g, b;
};

constexpr Rgb kBackground = {224, 206, 221};
constexpr Rgb kTumorBody = {148, 106, 176};
constexpr Rgb kEndoBody = {96, 112, 178};
constexpr Rgb kNucleolus = {52, 24, 80};

std::uint8_t clamp8(int v) { return std::uint8_t(std::clamp(v, 0, 255)); }

// small deterministic per-pixel noise, independent of placement order
int pixel_noise(std::uint64_t seed, int r, int c, int ch, int amplitude) {
  std::uint64_t s = seed ^ (std::uint64_t(r) * 0x100000001b3ull) ^
                    (std::uint64_t(c) * 0x9e3779b97f4a7c15ull) ^ (std::uint64_t(ch) << 56);
  const std::uint64_t h = splitmix64(s);
  return int(h % std::uint64_t(2 * amplitude + 1)) - amplitude;
}

struct Ellipse {
  double cy, cx;    // center
  double a, b;      // semi-axes (a along the rotated x axis)
  double cos_t, sin_t;

  bool contains(double y, double x, double shrink = 0.0) const {
    const double dy = y - cy, dx = x - cx;
    const double u = (dx * cos_t + dy * sin_t) / std::max(0.5, a - shrink);
    const double v = (-dx * sin_t + dy * cos_t) / std::max(0.5, b - shrink);
    return u * u + v * v <= 1.0;
  }
};

std::vector<std::pair<int, int>> rasterize(const Ellipse& e, int h, int w) {
  std::vector<std::pair<int, int>> pixels;
  const double reach = std::max(e.a, e.b) + 1.0;
  const int r0 = std::max(0, int(std::floor(e.cy - reach)));
  const int r1 = std::min(h - 1, int(std::ceil(e.cy + reach)));
  const int c0 = std::max(0, int(std::floor(e.cx - reach)));
  const int c1 = std::min(w - 1, int(std::ceil(e.cx + reach)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (e.contains(double(r), double(c))) pixels.push_back({r, c});
    }
  }
  return pixels;
}

bool is_single_4_component(const std::vector<std::pair<int, int>>& pixels) {
  if (pixels.empty()) return false;
  // pixels are in row-major order from rasterize; flood from the first one
  std::vector<std::pair<int, int>> sorted = pixels;
  std::vector<char> seen(sorted.size(), 0);
  auto find = [&](int r, int c) -> int {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(r, c));
    if (it == sorted.end() || *it != std::make_pair(r, c)) return -1;
    return int(it - sorted.begin());
  };
  std::vector<int> stack = {0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const auto [r, c] = sorted[std::size_t(stack.back())];
    stack.pop_back();
    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int idx = find(r + dr[k], c + dc[k]);
      if (idx >= 0 && !seen[std::size_t(idx)]) {
        seen[std::size_t(idx)] = 1;
        ++visited;
        stack.push_back(idx);
      }
    }
  }
  return visited == sorted.size();
}

bool fully_inside(const std::vector<std::pair<int, int>>& pixels, const Ellipse& e, int h, int w) {
  const double reach = std::max(e.a, e.b) + 1.0;
  return e.cy - reach >= 0 && e.cy + reach < h && e.cx - reach >= 0 && e.cx + reach < w &&
         !pixels.empty();
}

bool overlaps(const Plane<std::int32_t>& ids, const std::vector<std::pair<int, int>>& pixels) {
  for (const auto& [r, c] : pixels) {
    if (ids(r, c) != 0) return true;
  }
  return false;
}

}  // namespace

void validate_params(const SynthParams& p) {
  if (p.canvas_h < kPatchDivisor || p.canvas_w < kPatchDivisor ||
      p.canvas_h % kPatchDivisor != 0 || p.canvas_w % kPatchDivisor != 0) {
    throw ConfigError("synth: canvas dimensions must be positive multiples of 32");
  }
  if (p.n_instances < 0) throw ConfigError("synth: n_instances must be >= 0");
  if (p.radius_min < 2.0 || p.radius_max < p.radius_min) {
    throw ConfigError("synth: radii must satisfy 2 <= min <= max");
  }
  if (p.touching_fraction < 0.0 || p.touching_fraction > 1.0) {
    throw ConfigError("synth: touching_fraction must lie in [0,1]");
  }
  double mix_sum = 0.0;
  for (double wgt : p.class_mix) {
    if (wgt < 0.0) throw ConfigError("synth: class_mix weights must be non-negative");
    mix_sum += wgt;
  }
  if (mix_sum <= 0.0) throw ConfigError("synth: class_mix must have positive total weight");
  if (p.nucleolus_intensity < 0.0 || p.nucleolus_intensity > 1.0) {
    throw ConfigError("synth: nucleolus_intensity must lie in [0,1]");
  }
}

LabeledSample generate(const SynthParams& params, const std::string& sample_id) {
  validate_params(params);
  RandomStream rng(derive_seed(params.seed, 0xa17e));
  const std::uint64_t noise_seed = derive_seed(params.seed, 0xbead);

  const int h = params.canvas_h, w = params.canvas_w;
  LabeledSample sample;
  sample.id = sample_id;
  sample.image = ImagePatch(h, w);
  sample.instances = InstanceMap(h, w);
  sample.classes = ClassMap(h, w);

  auto sample_class = [&]() {
    const double total = params.class_mix[0] + params.class_mix[1] + params.class_mix[2] +
                         params.class_mix[3];
    double x = rng.uniform01() * total;
    for (int cls = 1; cls <= 4; ++cls) {
      x -= params.class_mix[std::size_t(cls - 1)];
      if (x < 0.0) return cls;
    }
    return 4;
  };

  struct Placed {
    Ellipse shape;
    int cls;
    std::vector<std::pair<int, int>> pixels;
  };
  std::vector<Placed> placed;

  auto touches_id = [&](const std::vector<std::pair<int, int>>& pixels, std::int32_t target) {
    for (const auto& [r, c] : pixels) {
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (!sample.instances.ids.in_bounds(r + dr, c + dc)) continue;
          if (sample.instances.ids(r + dr, c + dc) == target) return true;
        }
      }
    }
    return false;
  };
  auto touches_any = [&](const std::vector<std::pair<int, int>>& pixels) {
    for (const auto& [r, c] : pixels) {
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (!sample.instances.ids.in_bounds(r + dr, c + dc)) continue;
          if (sample.instances.ids(r + dr, c + dc) != 0) return true;
        }
      }
    }
    return false;
  };

  const int kAttempts = 400;
  for (int i = 0; i < params.n_instances; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < kAttempts && !done; ++attempt) {
      const int cls = sample_class();
      const double a = rng.uniform(params.radius_min, params.radius_max);
      const double b = cls == int(NucleusClass::kEndothelial)
                           ? std::max(2.0, a / 2.8)
                           : rng.uniform(std::max(2.0, 0.7 * a), a);
      const double theta = rng.uniform(0.0, 3.14159265358979323846);
      Ellipse e{0.0, 0.0, a, b, std::cos(theta), std::sin(theta)};

      const bool want_touch = !placed.empty() && rng.bernoulli(params.touching_fraction);
      if (want_touch) {
        const std::size_t j = std::size_t(rng.uniform_int(std::uint64_t(placed.size())));
        const Placed& target = placed[j];
        const double phi = rng.uniform(0.0, 6.28318530717958647692);
        const double reach = std::max(e.a, e.b) + std::max(target.shape.a, target.shape.b);
        for (double d = reach + 3.0; d >= 1.0; d -= 1.0) {
          e.cy = target.shape.cy + d * std::sin(phi);
          e.cx = target.shape.cx + d * std::cos(phi);
          auto pixels = rasterize(e, h, w);
          if (!fully_inside(pixels, e, h, w)) continue;
          if (overlaps(sample.instances.ids, pixels)) break;  // stepped too far in
          if (touches_id(pixels, std::int32_t(j) + 1) && is_single_4_component(pixels) &&
              pixels.size() >= 8) {
            placed.push_back({e, cls, pixels});
            done = true;
            break;
          }
        }
      } else {
        const double margin = std::max(e.a, e.b) + 2.0;
        if (2.0 * margin + 2.0 >= double(std::min(h, w))) continue;
        e.cy = rng.uniform(margin, double(h) - margin - 1.0);
        e.cx = rng.uniform(margin, double(w) - margin - 1.0);
        auto pixels = rasterize(e, h, w);
        if (pixels.size() < 8 || !is_single_4_component(pixels)) continue;
        if (overlaps(sample.instances.ids, pixels) || touches_any(pixels)) continue;
        placed.push_back({e, cls, pixels});
        done = true;
      }
      if (done) {
        const std::int32_t id = std::int32_t(placed.size());
        for (const auto& [r, c] : placed.back().pixels) {
          sample.instances.ids(r, c) = id;
          sample.classes.classes(r, c) = std::uint8_t(placed.back().cls);
        }
      }
    }
    if (!done) {
      throw PlacementError("synth: failed to place instance " + std::to_string(i + 1) + " of " +
                           std::to_string(params.n_instances));
    }
  }

  // render: background, bodies, bright rim, grade-scaled nucleolus
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      sample.image.at(r, c, 0) = clamp8(kBackground.r + pixel_noise(noise_seed, r, c, 0, 5));
      sample.image.at(r, c, 1) = clamp8(kBackground.g + pixel_noise(noise_seed, r, c, 1, 5));
      sample.image.at(r, c, 2) = clamp8(kBackground.b + pixel_noise(noise_seed, r, c, 2, 5));
    }
  }
  for (std::size_t idx = 0; idx < placed.size(); ++idx) {
    const Placed& inst = placed[idx];
    const bool endo = inst.cls == int(NucleusClass::kEndothelial);
    const Rgb body = endo ? kEndoBody : kTumorBody;
    const int jitter = int(rng.uniform_int(std::uint64_t(13))) - 6;
    const double dot_radius = inst.cls == int(NucleusClass::kGrade2)   ? 1.6
                              : inst.cls == int(NucleusClass::kGrade3) ? 3.2
                                                                       : 0.0;
    const double k = params.nucleolus_intensity;
    for (const auto& [r, c] : inst.pixels) {
      Rgb col = {body.r + jitter, body.g + jitter, body.b + jitter};
      const bool rim = !inst.shape.contains(double(r), double(c), 1.6);
      if (rim) {
        col.r = col.r * 13 / 10;
        col.g = col.g * 13 / 10;
        col.b = col.b * 13 / 10;
      }
      const double dy = double(r) - inst.shape.cy, dx = double(c) - inst.shape.cx;
      if (dot_radius > 0.0 && dy * dy + dx * dx <= dot_radius * dot_radius) {
        col.r = int(col.r * (1.0 - k) + kNucleolus.r * k);
        col.g = int(col.g * (1.0 - k) + kNucleolus.g * k);
        col.b = int(col.b * (1.0 - k) + kNucleolus.b * k);
      }
      sample.image.at(r, c, 0) = clamp8(col.r + pixel_noise(noise_seed, r, c, 3, 3));
      sample.image.at(r, c, 1) = clamp8(col.g + pixel_noise(noise_seed, r, c, 4, 3));
      sample.image.at(r, c, 2) = clamp8(col.b + pixel_noise(noise_seed, r, c, 5, 3));
    }
  }
  return sample;
}

}  // namespace nucgrade
