#include "nucgrade/metrics.hpp"

#include "nucgrade/metrics_oracle.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace nucgrade;
using nucgrade::testing::map_from_strings;

TEST_CASE("dice closed forms") {
  Plane<std::uint8_t> a(4, 4, 0), b(4, 4, 0);
  CHECK(dice(a, b) == 1.0);  // both empty

  a(0, 0) = a(0, 1) = 1;
  b(2, 2) = b(2, 3) = 1;
  CHECK(dice(a, b) == 0.0);  // disjoint

  // |G|=4, |P|=2 with P inside G -> 2*2/(2+4)
  Plane<std::uint8_t> g(4, 4, 0), p(4, 4, 0);
  g(1, 1) = g(1, 2) = g(2, 1) = g(2, 2) = 1;
  p(1, 1) = p(1, 2) = 1;
  CHECK(dice(p, g) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  Plane<std::uint8_t> same = g;
  CHECK(dice(same, g) == 1.0);
}

TEST_CASE("aji closed forms") {
  const InstanceMap gt = map_from_strings({
      ".11..",
      ".11..",
      ".....",
  });
  CHECK(aji(gt, gt) == 1.0);

  const InstanceMap none(3, 5);
  CHECK(aji(none, gt) == 0.0);        // prediction empty
  CHECK(aji(none, none) == 1.0);      // both empty

  // one GT of 4 px; prediction overlaps 2 and adds 2 extra -> C=2, U=6
  const InstanceMap pred = map_from_strings({
      "..11.",
      "..11.",
      ".....",
  });
  CHECK(aji(pred, gt) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("aji marks reused predictions once") {
  // two GT instances both best-match prediction 1; prediction 2 never used
  const InstanceMap gt = map_from_strings({
      "11.22",
      "11.22",
      ".....",
      "....3",
  });
  const InstanceMap pred = map_from_strings({
      "11111",
      "11111",
      ".....",
      "....2",
  });
  // gt1: inter 4, union 10; gt2: inter 4, union 10; gt3 matches pred2 1/1
  // C = 4+4+1, U = 10+10+1, no unused predictions
  CHECK(aji(pred, gt) == doctest::Approx(9.0 / 21.0).epsilon(1e-12));
}

TEST_CASE("match_instances uniqueness and thresholds") {
  const InstanceMap gt = map_from_strings({
      "111...",
      "111...",
      "...222",
      "...222",
  });
  Matching m = match_instances(gt, gt);
  CHECK(m.pairs.size() == 2);
  for (const auto& pair : m.pairs) CHECK(pair.iou == 1.0);
  CHECK(m.unmatched_gt.empty());
  CHECK(m.unmatched_pred.empty());

  // |G|=10, |P|=10, overlap 4 -> IoU 4/16 = 0.25: no pair
  const InstanceMap g10 = map_from_strings({
      "11111.....",
      "11111.....",
  });
  const InstanceMap p10 = map_from_strings({
      "...1111111",
      "...111....",
  });
  long inter = 0;
  for (std::size_t i = 0; i < g10.ids.v.size(); ++i) {
    inter += g10.ids.v[i] > 0 && p10.ids.v[i] > 0;
  }
  CHECK(inter == 4);
  m = match_instances(p10, g10);
  CHECK(m.pairs.empty());
  CHECK(m.unmatched_gt.size() == 1);
  CHECK(m.unmatched_pred.size() == 1);
}

TEST_CASE("match uniqueness under random maps") {
  RandomStream rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const InstanceMap gt = testing::random_instance_map(rng, 32, 32, 5);
    const InstanceMap pred = testing::perturb_instance_map(gt, rng);
    const Matching m = match_instances(pred, gt);
    std::set<std::int32_t> gts, preds;
    for (const auto& pair : m.pairs) {
      CHECK(pair.iou > 0.5);
      CHECK(gts.insert(pair.gt_id).second);
      CHECK(preds.insert(pair.pred_id).second);
    }
  }
}

TEST_CASE("panoptic_quality closed forms") {
  Matching perfect;
  perfect.pairs = {{1, 1, 1.0}, {2, 2, 1.0}, {3, 3, 1.0}};
  PqTriple t = panoptic_quality(perfect);
  CHECK(t.dq == 1.0);
  CHECK(t.sq == 1.0);
  CHECK(t.pq == 1.0);

  Matching one_tp;
  one_tp.pairs = {{1, 1, 0.6}};
  t = panoptic_quality(one_tp);
  CHECK(t.dq == 1.0);
  CHECK(t.sq == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(t.pq == doctest::Approx(0.6).epsilon(1e-12));

  Matching misses;
  misses.unmatched_gt = {1};
  misses.unmatched_pred = {1};
  t = panoptic_quality(misses);
  CHECK(t.dq == 0.0);
  CHECK(t.sq == 0.0);
  CHECK(t.pq == 0.0);

  t = panoptic_quality(Matching{});
  CHECK(t.dq == 1.0);
  CHECK(t.sq == 1.0);
  CHECK(t.pq == 1.0);

  // pq = dq * sq whenever TP >= 1
  Matching mixed;
  mixed.pairs = {{1, 2, 0.7}, {2, 1, 0.9}};
  mixed.unmatched_gt = {3};
  t = panoptic_quality(mixed);
  CHECK(std::abs(t.pq - t.dq * t.sq) <= 1e-9);
}

TEST_CASE("per-class pq restriction and omission rules") {
  // two instances: gt classes G1 and G2, perfect masks
  const InstanceMap gt = map_from_strings({
      "11.22",
      "11.22",
  });
  ClassMap classes(2, 5);
  for (int r = 0; r < 2; ++r) {
    classes.classes(r, 0) = classes.classes(r, 1) = 1;
    classes.classes(r, 3) = classes.classes(r, 4) = 2;
  }
  TypedInstanceMap pred;
  pred.instances = gt;
  pred.labels = {{1, 1}, {2, 2}};
  auto [pcs, apq] = per_class_pq(pred, gt, classes);
  CHECK(pcs.size() == 2);
  CHECK(pcs.at(1) == 1.0);
  CHECK(pcs.at(2) == 1.0);
  CHECK(apq == 1.0);
  CHECK(pcs.count(3) == 0);  // absent from both sides -> omitted

  // mislabeling G2 as G1: FP for class 1, FN for class 2
  pred.labels = {{1, 1}, {2, 1}};
  auto [pcs2, apq2] = per_class_pq(pred, gt, classes);
  CHECK(pcs2.at(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));  // 1 TP, 1 FP
  CHECK(pcs2.at(2) == 0.0);                                        // 1 FN
  CHECK(apq2 == doctest::Approx((2.0 / 3.0 + 0.0) / 2.0).epsilon(1e-9));
}

TEST_CASE("metrics are invariant under instance relabeling") {
  RandomStream rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const InstanceMap gt = testing::random_instance_map(rng, 32, 32, 5);
    const InstanceMap pred = testing::perturb_instance_map(gt, rng);

    // permute prediction ids
    const std::int32_t max_id = pred.max_id();
    std::vector<std::int32_t> perm(std::size_t(max_id) + 1);
    for (std::int32_t i = 0; i <= max_id; ++i) perm[std::size_t(i)] = i;
    for (std::int32_t i = max_id; i > 1; --i) {
      std::swap(perm[std::size_t(i)], perm[1 + rng.uniform_int(std::uint64_t(i))]);
    }
    InstanceMap shuffled = pred;
    for (auto& id : shuffled.ids.v) id = perm[std::size_t(id)];

    CHECK(aji(pred, gt) == doctest::Approx(aji(shuffled, gt)).epsilon(1e-12));
    const PqTriple a = panoptic_quality(match_instances(pred, gt));
    const PqTriple b = panoptic_quality(match_instances(shuffled, gt));
    CHECK(a.pq == doctest::Approx(b.pq).epsilon(1e-12));
    CHECK(dice(pred, gt) == dice(shuffled, gt));
  }
}

TEST_CASE("fast path equals the oracle on random small maps") {
  RandomStream rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const InstanceMap gt = testing::random_instance_map(rng, 32, 32, 5);
    const InstanceMap pred = testing::perturb_instance_map(gt, rng);
    if (gt.max_id() > 12 || pred.max_id() > 12) continue;
    const MetricsReport o = oracle_metrics(pred, gt);
    CHECK(std::abs(dice(pred, gt) - o.dice) <= 1e-9);
    CHECK(std::abs(aji(pred, gt) - o.aji) <= 1e-9);
    const PqTriple t = panoptic_quality(match_instances(pred, gt));
    CHECK(std::abs(t.dq - o.dq) <= 1e-9);
    CHECK(std::abs(t.sq - o.sq) <= 1e-9);
    CHECK(std::abs(t.pq - o.pq) <= 1e-9);
  }
}

TEST_CASE("oracle conventions") {
  const InstanceMap empty(8, 8);
  const MetricsReport r = oracle_metrics(empty, empty);
  CHECK(r.dice == 1.0);
  CHECK(r.aji == 1.0);
  CHECK(r.pq == 1.0);

  // single matching pair: aji equals the pq-pair IoU when IoU > 0.5
  const InstanceMap gt = map_from_strings({
      "1111",
      "1111",
  });
  const InstanceMap pred = map_from_strings({
      ".111",
      ".111",
  });
  const MetricsReport o = oracle_metrics(pred, gt);
  CHECK(o.aji == doctest::Approx(6.0 / 8.0).epsilon(1e-12));
  CHECK(o.sq == doctest::Approx(6.0 / 8.0).epsilon(1e-12));
  CHECK(o.aji == doctest::Approx(o.sq).epsilon(1e-12));

  InstanceMap too_big(80, 80);
  CHECK_THROWS_AS(oracle_metrics(too_big, too_big), std::invalid_argument);
}

TEST_CASE("monotone sanity: shrinking toward the GT partner never lowers IoU") {
  // P superset of P' superset of (G ∩ P): IoU must not decrease
  const InstanceMap gt = map_from_strings({
      ".1111.",
      ".1111.",
      "......",
  });
  const InstanceMap big = map_from_strings({
      "111111",
      "111111",
      "......",
  });
  const InstanceMap smaller = map_from_strings({
      ".11111",
      ".11111",
      "......",
  });
  const InstanceMap core = map_from_strings({
      ".1111.",
      ".1111.",
      "......",
  });
  auto iou_of = [&](const InstanceMap& p) {
    const Matching m = match_instances(p, gt);
    REQUIRE(m.pairs.size() == 1);
    return m.pairs[0].iou;
  };
  const double a = iou_of(big), b = iou_of(smaller), c = iou_of(core);
  CHECK(b >= a);
  CHECK(c >= b);
  CHECK(c == 1.0);
}

TEST_CASE("metrics report serialization keys") {
  MetricsReport r;
  r.dice = 0.5;
  r.per_class_pq = {{1, 0.25}, {4, 0.75}};
  r.apq = 0.5;
  const std::string s = serialize_metrics(r);
  CHECK(s.find("dice=0.500000000") != std::string::npos);
  CHECK(s.find("pq_g1=0.250000000") != std::string::npos);
  CHECK(s.find("pq_endo=0.750000000") != std::string::npos);
  CHECK(s.find("pq_g2=") == std::string::npos);  // absent class omitted
  CHECK(s.find("apq=") != std::string::npos);
  CHECK(s.find("dq=") != std::string::npos);
  CHECK(s.find("sq=") != std::string::npos);
}
