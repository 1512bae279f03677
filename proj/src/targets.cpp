#include "nucgrade/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nucgrade {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform (Felzenszwalb-Huttenlocher lower envelope).
// Entries with f == inf contribute no parabola; an all-inf input stays inf.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = int(f.size());
  d.assign(f.size(), kInf);
  v.assign(f.size(), 0);
  z.assign(f.size() + 1, 0.0);
  auto intersect = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
  };
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);  // z[0] = -inf guarantees k >= 0 here
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) return;
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < double(q)) ++k;
    double dq = double(q) - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Exact squared EDT of `seed` (0 = seed, inf = free) over an r x c grid.
void edt_2d(Plane<double>& g) {
  const int rows = g.rows, cols = g.cols;
  std::vector<double> f, d;
  std::vector<int> v;
  std::vector<double> z;
  f.resize(std::size_t(std::max(rows, cols)));
  // columns
  for (int c = 0; c < cols; ++c) {
    f.resize(std::size_t(rows));
    for (int r = 0; r < rows; ++r) f[std::size_t(r)] = g(r, c);
    edt_1d(f, d, v, z);
    for (int r = 0; r < rows; ++r) g(r, c) = d[std::size_t(r)];
  }
  // rows
  for (int r = 0; r < rows; ++r) {
    f.resize(std::size_t(cols));
    for (int c = 0; c < cols; ++c) f[std::size_t(c)] = g(r, c);
    edt_1d(f, d, v, z);
    for (int c = 0; c < cols; ++c) g(r, c) = d[std::size_t(c)];
  }
}

struct Box {
  int r0 = std::numeric_limits<int>::max();
  int c0 = std::numeric_limits<int>::max();
  int r1 = -1;
  int c1 = -1;
  void expand(int r, int c) {
    r0 = std::min(r0, r);
    c0 = std::min(c0, c);
    r1 = std::max(r1, r);
    c1 = std::max(c1, c);
  }
  bool valid() const { return r1 >= 0; }
};

}  // namespace

Plane<std::uint8_t> binary_map_from_instances(const InstanceMap& instances) {
  Plane<std::uint8_t> out(instances.height(), instances.width(), 0);
  for (std::size_t i = 0; i < instances.ids.v.size(); ++i) {
    out.v[i] = instances.ids.v[i] > 0 ? 1 : 0;
  }
  return out;
}

DistanceMap distance_map_from_instances(const InstanceMap& instances) {
  const int h = instances.height(), w = instances.width();
  DistanceMap out(h, w);
  const std::int32_t max_id = instances.max_id();
  if (max_id == 0) return out;

  std::vector<Box> boxes(std::size_t(max_id) + 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int32_t id = instances.ids(r, c);
      if (id > 0) boxes[std::size_t(id)].expand(r, c);
    }
  }

  for (std::int32_t id = 1; id <= max_id; ++id) {
    const Box& b = boxes[std::size_t(id)];
    if (!b.valid()) continue;
    // The nearest non-self pixel of any instance pixel lies within one step
    // of the instance boundary, so a margin of the box diagonal + 1 is a safe
    // working region.
    const int bw = b.c1 - b.c0 + 1, bh = b.r1 - b.r0 + 1;
    const int margin = int(std::ceil(std::sqrt(double(bw) * bw + double(bh) * bh))) + 1;
    const int r0 = std::max(0, b.r0 - margin), r1 = std::min(h - 1, b.r1 + margin);
    const int c0 = std::max(0, b.c0 - margin), c1 = std::min(w - 1, b.c1 + margin);

    Plane<double> g(r1 - r0 + 1, c1 - c0 + 1, 0.0);
    bool has_seed = false;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const bool self = instances.ids(r, c) == id;
        g(r - r0, c - c0) = self ? kInf : 0.0;
        has_seed |= !self;
      }
    }
    if (!has_seed) {
      // degenerate: the instance covers the whole image; flat map of ones
      for (int r = b.r0; r <= b.r1; ++r)
        for (int c = b.c0; c <= b.c1; ++c)
          if (instances.ids(r, c) == id) out.values(r, c) = 1.0;
      continue;
    }
    edt_2d(g);
    double max_d = 0.0;
    for (int r = b.r0; r <= b.r1; ++r) {
      for (int c = b.c0; c <= b.c1; ++c) {
        if (instances.ids(r, c) != id) continue;
        const double dist = std::sqrt(g(r - r0, c - c0));
        out.values(r, c) = dist;
        max_d = std::max(max_d, dist);
      }
    }
    if (max_d > 0.0) {
      for (int r = b.r0; r <= b.r1; ++r)
        for (int c = b.c0; c <= b.c1; ++c)
          if (instances.ids(r, c) == id) out.values(r, c) /= max_d;
    }
  }
  return out;
}

std::uint8_t remap_code(std::uint8_t code, TaskScheme scheme) {
  static constexpr std::uint8_t kTask1Map[5] = {0, 1, 1, 2, 3};
  static constexpr std::uint8_t kTask2Map[5] = {0, 1, 2, 2, 3};
  if (code >= kNumClasses) throw std::invalid_argument("remap_labels: class code out of range");
  return scheme == TaskScheme::kTask1 ? kTask1Map[code] : kTask2Map[code];
}

Plane<std::uint8_t> remap_labels(const ClassMap& classes, TaskScheme scheme) {
  Plane<std::uint8_t> out(classes.height(), classes.width(), 0);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = remap_code(classes.classes.v[i], scheme);
  return out;
}

ImagePatch downsample_4x(const ImagePatch& image) {
  if (image.height % 4 != 0 || image.width % 4 != 0) {
    throw std::invalid_argument("downsample_4x: dimensions must be divisible by 4");
  }
  ImagePatch out(image.height / 4, image.width / 4);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        int sum = 0;
        for (int dr = 0; dr < 4; ++dr)
          for (int dc = 0; dc < 4; ++dc) sum += image.at(4 * r + dr, 4 * c + dc, ch);
        // floor(mean + 0.5) == round-half-away-from-zero for non-negatives
        out.at(r, c, ch) = std::uint8_t((sum + 8) / 16);
      }
    }
  }
  return out;
}

TargetBundle build_targets(const LabeledSample& sample) {
  TargetBundle bundle;
  bundle.binary = binary_map_from_instances(sample.instances);
  bundle.distance = distance_map_from_instances(sample.instances);
  bundle.task1 = remap_labels(sample.classes, TaskScheme::kTask1);
  bundle.task2 = remap_labels(sample.classes, TaskScheme::kTask2);
  bundle.final = sample.classes;
  bundle.aux100 = downsample_4x(sample.image);
  return bundle;
}

}  // namespace nucgrade
