#include "nucgrade/targets.hpp"

#include "nucgrade/synthdata.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace nucgrade;
using nucgrade::testing::map_from_strings;

namespace {

// Independent oracle: literal all-pairs nearest non-self pixel search.
DistanceMap brute_force_distance(const InstanceMap& m) {
  const int h = m.height(), w = m.width();
  DistanceMap out(h, w);
  const std::int32_t max_id = m.max_id();
  std::vector<double> max_of(std::size_t(max_id) + 1, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int32_t id = m.ids(r, c);
      if (id == 0) continue;
      long best = -1;
      for (int rr = 0; rr < h; ++rr) {
        for (int cc = 0; cc < w; ++cc) {
          if (m.ids(rr, cc) == id) continue;
          const long d2 = long(rr - r) * (rr - r) + long(cc - c) * (cc - c);
          if (best < 0 || d2 < best) best = d2;
        }
      }
      const double d = best < 0 ? 1.0 : std::sqrt(double(best));
      out.values(r, c) = d;
      max_of[std::size_t(id)] = std::max(max_of[std::size_t(id)], d);
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int32_t id = m.ids(r, c);
      if (id > 0 && max_of[std::size_t(id)] > 0) out.values(r, c) /= max_of[std::size_t(id)];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("binary map marks exactly the instance pixels") {
  const InstanceMap empty(8, 8);
  const auto zero = binary_map_from_instances(empty);
  for (auto v : zero.v) CHECK(v == 0);

  const InstanceMap m = map_from_strings({
      "..11",
      "2...",
  });
  const auto b = binary_map_from_instances(m);
  long count = 0;
  for (std::size_t i = 0; i < b.v.size(); ++i) {
    CHECK(int(b.v[i] != 0) == int(m.ids.v[i] > 0));
    count += b.v[i];
  }
  CHECK(count == 3);
}

TEST_CASE("binary map foreground count matches generator geometry") {
  SynthParams p;
  p.seed = 11;
  p.canvas_h = p.canvas_w = 64;
  p.n_instances = 2;
  const LabeledSample s = generate(p);
  long area = 0;
  for (auto id : s.instances.ids.v) area += id > 0;
  long fg = 0;
  for (auto v : binary_map_from_instances(s.instances).v) fg += v;
  CHECK(fg == area);
}

TEST_CASE("distance map: single-pixel instance") {
  InstanceMap m(8, 8);
  m.ids(3, 3) = 1;
  const DistanceMap d = distance_map_from_instances(m);
  CHECK(d.values(3, 3) == doctest::Approx(1.0));
}

TEST_CASE("distance map: 3x3 square is 0.5 on the ring, 1 at the center") {
  InstanceMap m(9, 9);
  for (int r = 3; r <= 5; ++r)
    for (int c = 3; c <= 5; ++c) m.ids(r, c) = 1;
  const DistanceMap d = distance_map_from_instances(m);
  for (int r = 3; r <= 5; ++r) {
    for (int c = 3; c <= 5; ++c) {
      const double expected = (r == 4 && c == 4) ? 1.0 : 0.5;
      CHECK(d.values(r, c) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  CHECK(d.values(0, 0) == 0.0);
}

TEST_CASE("distance map: touching instances form a valley") {
  // two 5x5 squares sharing an edge
  InstanceMap m(16, 24);
  for (int r = 4; r < 9; ++r) {
    for (int c = 4; c < 9; ++c) m.ids(r, c) = 1;
    for (int c = 9; c < 14; ++c) m.ids(r, c) = 2;
  }
  const DistanceMap d = distance_map_from_instances(m);
  // along the shared edge both sides stay below half of the interior max
  for (int r = 4; r < 9; ++r) {
    CHECK(d.values(r, 8) < 0.5);
    CHECK(d.values(r, 9) < 0.5);
    CHECK(d.values(r, 8) > 0.0);
  }
  CHECK(d.values(6, 6) == doctest::Approx(1.0));
  CHECK(d.values(6, 11) == doctest::Approx(1.0));
  CHECK(brute_force_distance(m).values.v == d.values.v);
}

TEST_CASE("distance map equals brute force on random maps") {
  RandomStream rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const InstanceMap m = testing::random_instance_map(rng, 40, 40, 5);
    const DistanceMap fast = distance_map_from_instances(m);
    const DistanceMap slow = brute_force_distance(m);
    for (std::size_t i = 0; i < fast.values.v.size(); ++i) {
      CHECK(std::abs(fast.values.v[i] - slow.values.v[i]) <= 1e-9);
    }
  }
}

TEST_CASE("distance map: per-instance max is exactly 1 and disk argmax is central") {
  InstanceMap m(32, 32);
  const double cy = 15.0, cx = 16.0, rad = 7.0;
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      if ((r - cy) * (r - cy) + (c - cx) * (c - cx) <= rad * rad) m.ids(r, c) = 1;
    }
  }
  const DistanceMap d = distance_map_from_instances(m);
  double best = 0;
  int best_r = -1, best_c = -1;
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      if (d.values(r, c) > best) {
        best = d.values(r, c);
        best_r = r;
        best_c = c;
      }
    }
  }
  CHECK(best == 1.0);
  CHECK(std::abs(best_r - cy) <= 1.0);
  CHECK(std::abs(best_c - cx) <= 1.0);
}

TEST_CASE("remap tables follow the cross-category merges") {
  // task1 merges grades 1 and 2; task2 merges grades 2 and 3
  CHECK(remap_code(0, TaskScheme::kTask1) == 0);
  CHECK(remap_code(1, TaskScheme::kTask1) == 1);
  CHECK(remap_code(2, TaskScheme::kTask1) == 1);
  CHECK(remap_code(3, TaskScheme::kTask1) == 2);
  CHECK(remap_code(4, TaskScheme::kTask1) == 3);
  CHECK(remap_code(0, TaskScheme::kTask2) == 0);
  CHECK(remap_code(1, TaskScheme::kTask2) == 1);
  CHECK(remap_code(2, TaskScheme::kTask2) == 2);
  CHECK(remap_code(3, TaskScheme::kTask2) == 2);
  CHECK(remap_code(4, TaskScheme::kTask2) == 3);
  CHECK_THROWS_AS(remap_code(5, TaskScheme::kTask1), std::invalid_argument);
}

TEST_CASE("remap surjectivity when all five codes occur") {
  ClassMap cm(1, 5);
  for (int c = 0; c < 5; ++c) cm.classes(0, c) = std::uint8_t(c);
  for (const auto scheme : {TaskScheme::kTask1, TaskScheme::kTask2}) {
    const auto mapped = remap_labels(cm, scheme);
    std::array<bool, 4> seen{};
    for (auto v : mapped.v) seen[v] = true;
    for (bool s : seen) CHECK(s);
  }
}

TEST_CASE("downsample_4x dimensions, constants and rounding") {
  ImagePatch img(512, 512, 77);
  const ImagePatch out = downsample_4x(img);
  CHECK(out.height == 128);
  CHECK(out.width == 128);
  for (auto v : out.pixels) CHECK(v == 77);

  // 4x4 checkerboard of 0/255 averages to 127.5, rounds half away from zero
  ImagePatch board(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      for (int ch = 0; ch < 3; ++ch) board.at(r, c, ch) = ((r + c) % 2) ? 255 : 0;
  const ImagePatch one = downsample_4x(board);
  CHECK(one.height == 1);
  CHECK(one.at(0, 0, 0) == 128);

  ImagePatch bad(6, 6, 0);
  CHECK_THROWS_AS(downsample_4x(bad), std::invalid_argument);
}

TEST_CASE("one_hot encodes and round-trips") {
  Plane<std::uint8_t> codes(2, 3, 0);
  codes(0, 1) = 2;
  codes(1, 2) = 4;
  const Tensor<float> oh = one_hot<float>(codes, 5);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      float sum = 0;
      int argmax = 0;
      for (int ch = 0; ch < 5; ++ch) {
        sum += oh.at(0, r, c, ch);
        if (oh.at(0, r, c, ch) > oh.at(0, r, c, argmax)) argmax = ch;
      }
      CHECK(sum == 1.0f);
      CHECK(argmax == codes(r, c));
    }
  }
  Plane<std::uint8_t> bad(1, 1, 7);
  CHECK_THROWS_AS(one_hot<float>(bad, 5), std::invalid_argument);
}

TEST_CASE("build_targets composes consistently") {
  SynthParams p;
  p.seed = 3;
  p.canvas_h = p.canvas_w = 64;
  p.n_instances = 5;
  p.touching_fraction = 0.3;
  const LabeledSample s = generate(p);
  REQUIRE(validate_sample(s).empty());
  const TargetBundle b = build_targets(s);

  for (std::size_t i = 0; i < b.binary.v.size(); ++i) {
    CHECK(int(b.binary.v[i] != 0) == int(b.final.classes.v[i] != 0));
    CHECK(b.task1.v[i] == remap_code(b.final.classes.v[i], TaskScheme::kTask1));
    CHECK(b.task2.v[i] == remap_code(b.final.classes.v[i], TaskScheme::kTask2));
  }
  CHECK(b.aux100.height == 16);
  CHECK(b.aux100.width == 16);

  // endothelial-only sample: task maps only use codes {0,3}
  SynthParams pe = p;
  pe.class_mix = {0, 0, 0, 1};
  const TargetBundle be = build_targets(generate(pe));
  for (std::size_t i = 0; i < be.task1.v.size(); ++i) {
    CHECK((be.task1.v[i] == 0 || be.task1.v[i] == 3));
    CHECK((be.task2.v[i] == 0 || be.task2.v[i] == 3));
  }

  // empty sample: all-zero binary and distance
  SynthParams p0 = p;
  p0.n_instances = 0;
  const TargetBundle b0 = build_targets(generate(p0));
  for (auto v : b0.binary.v) CHECK(v == 0);
  for (auto v : b0.distance.values.v) CHECK(v == 0.0);
}
