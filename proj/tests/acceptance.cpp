// Acceptance suite: runs each acceptance criterion at its stated tolerance
// and prints one [PASS]/[FAIL] line per criterion. Criterion names may be
// passed as arguments to run a subset; no arguments runs everything.

#include "nucgrade/augment.hpp"
#include "nucgrade/checkpoint.hpp"
#include "nucgrade/dataset.hpp"
#include "nucgrade/losses.hpp"
#include "nucgrade/metrics.hpp"
#include "nucgrade/metrics_oracle.hpp"
#include "nucgrade/network.hpp"
#include "nucgrade/optimizer.hpp"
#include "nucgrade/postprocess.hpp"
#include "nucgrade/rng.hpp"
#include "nucgrade/synthdata.hpp"
#include "nucgrade/targets.hpp"
#include "nucgrade/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nucgrade;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string work_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("nucgrade_acceptance_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

// ---------------------------------------------------------------------------
// shared helpers

InstanceMap random_small_map(RandomStream& rng, int hw, int blobs) {
  while (true) {
    Plane<std::int32_t> paint(hw, hw, 0);
    for (int b = 1; b <= blobs; ++b) {
      const double cy = rng.uniform(2.0, hw - 2.0);
      const double cx = rng.uniform(2.0, hw - 2.0);
      const double a = rng.uniform(2.0, hw / 5.0);
      const double bb = rng.uniform(2.0, hw / 5.0);
      for (int r = 0; r < hw; ++r) {
        for (int c = 0; c < hw; ++c) {
          const double dy = (r - cy) / a, dx = (c - cx) / bb;
          if (dy * dy + dx * dx <= 1.0) paint(r, c) = b;
        }
      }
    }
    int count = 0;
    InstanceMap m;
    m.ids = label_same_value_components_4(paint, &count);
    if (count <= 12) return m;
  }
}

InstanceMap perturb(const InstanceMap& gt, RandomStream& rng) {
  while (true) {
    Plane<std::int32_t> paint(gt.height(), gt.width(), 0);
    const int dy = rng.uniform_int(-2, 2), dx = rng.uniform_int(-2, 2);
    const double drop = rng.uniform01() * 0.3;
    for (int r = 0; r < gt.height(); ++r) {
      for (int c = 0; c < gt.width(); ++c) {
        const int sr = r - dy, sc = c - dx;
        if (sr < 0 || sr >= gt.height() || sc < 0 || sc >= gt.width()) continue;
        const std::int32_t id = gt.ids(sr, sc);
        if (id > 0 && !(id % 7 == 3 && drop > 0.15)) paint(r, c) = id;
      }
    }
    if (rng.bernoulli(0.5)) {  // boundary erosion
      Plane<std::int32_t> eroded = paint;
      for (int r = 0; r < paint.rows; ++r) {
        for (int c = 0; c < paint.cols; ++c) {
          if (paint(r, c) == 0) continue;
          bool boundary = false;
          constexpr int drs[4] = {-1, 1, 0, 0};
          constexpr int dcs[4] = {0, 0, -1, 1};
          for (int k = 0; k < 4; ++k) {
            const int nr = r + drs[k], nc = c + dcs[k];
            if (!paint.in_bounds(nr, nc) || paint(nr, nc) != paint(r, c)) boundary = true;
          }
          if (boundary && rng.bernoulli(0.4)) eroded(r, c) = 0;
        }
      }
      paint = eroded;
    }
    int count = 0;
    InstanceMap m;
    m.ids = label_same_value_components_4(paint, &count);
    if (count <= 12) return m;
  }
}

NetworkConfig desk_network(int input) {
  NetworkConfig n;
  n.input_h = n.input_w = input;
  n.backbone_widths = {8, 12, 16, 24, 32};
  n.backbone_blocks = {1, 1, 1, 1};
  n.hrfe_stream_widths = {8, 12, 16};
  n.hrfe_exchanges = 1;
  n.hrfe_blocks = 1;
  n.lunet_widths = {8, 12, 16};
  return n;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------
// criteria

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rng(20260811);
  double max_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int hw = 24 + int(rng.uniform_int(41ull));  // 24..64
    const InstanceMap gt = random_small_map(rng, hw, 2 + int(rng.uniform_int(7ull)));
    const InstanceMap pred = perturb(gt, rng);
    const MetricsReport o = oracle_metrics(pred, gt);
    const double d = dice(pred, gt);
    const double a = aji(pred, gt);
    const PqTriple t = panoptic_quality(match_instances(pred, gt));
    for (double err : {std::abs(d - o.dice), std::abs(a - o.aji), std::abs(t.dq - o.dq),
                       std::abs(t.sq - o.sq), std::abs(t.pq - o.pq)}) {
      max_err = std::max(max_err, err);
    }
    if (max_err > 1e-9) {
      return {false, "fast path deviates from oracle by " + std::to_string(max_err) +
                         " at trial " + std::to_string(trial)};
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "200 cases, max |fast - oracle| = " << max_err << ", " << secs << " s";
  return {secs < 60.0, os.str()};
}

Outcome hand_worked_metrics() {
  std::ostringstream os;
  bool ok = true;
  auto expect = [&](const char* name, double got, double want) {
    const bool good = std::abs(got - want) < 1e-12;
    ok = ok && good;
    if (!good) os << name << ": got " << got << " want " << want << "; ";
  };

  {  // AJI 1/3: one 4-px GT, prediction overlaps 2 plus 2 extra
    InstanceMap gt(3, 5), pred(3, 5);
    gt.ids(0, 1) = gt.ids(0, 2) = gt.ids(1, 1) = gt.ids(1, 2) = 1;
    pred.ids(0, 2) = pred.ids(0, 3) = pred.ids(1, 2) = pred.ids(1, 3) = 1;
    expect("aji", aji(pred, gt), 1.0 / 3.0);
  }
  {  // PQ (1, 0.6, 0.6): single TP with IoU 0.6 -> 3/5 overlap construction
    InstanceMap gt(4, 8), pred(4, 8);
    // |G|=5, |P|=4, inter=3 -> less clean; build IoU 0.6 as 6/10
    for (int c = 0; c < 8; ++c) gt.ids(0, c) = 1;      // 8 px
    for (int c = 2; c < 8; ++c) pred.ids(0, c) = 1;    // 6 px, inter 6
    pred.ids(1, 0) = pred.ids(1, 1) = 0;
    for (int c = 0; c < 2; ++c) pred.ids(2, c) = 1;    // +2 px outside
    // |P| = 8, inter 6, union 10 -> IoU 0.6
    const PqTriple t = panoptic_quality(match_instances(pred, gt));
    expect("dq", t.dq, 1.0);
    expect("sq", t.sq, 0.6);
    expect("pq", t.pq, 0.6);
  }
  {  // PQ (0,0,0): disjoint single instances
    InstanceMap gt(2, 4), pred(2, 4);
    gt.ids(0, 0) = 1;
    pred.ids(1, 3) = 1;
    const PqTriple t = panoptic_quality(match_instances(pred, gt));
    expect("dq0", t.dq, 0.0);
    expect("sq0", t.sq, 0.0);
    expect("pq0", t.pq, 0.0);
  }
  {  // Dice 2/3: |G|=4, |P|=2, P inside G
    Plane<std::uint8_t> g(3, 3, 0), p(3, 3, 0);
    g(0, 0) = g(0, 1) = g(1, 0) = g(1, 1) = 1;
    p(0, 0) = p(0, 1) = 1;
    expect("dice", dice(p, g), 2.0 / 3.0);
  }
  return {ok, ok ? "AJI 1/3, PQ (1,0.6,0.6) and (0,0,0), Dice 2/3 all exact" : os.str()};
}

Outcome distance_correctness() {
  RandomStream rng(31337);
  double max_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const InstanceMap m = random_small_map(rng, 64, 2 + int(rng.uniform_int(8ull)));
    const DistanceMap fast = distance_map_from_instances(m);

    // brute force all-pairs, per instance
    const std::int32_t max_id = m.max_id();
    std::vector<double> inst_max(std::size_t(max_id) + 1, 0.0);
    Plane<double> slow(64, 64, 0.0);
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < 64; ++c) {
        const std::int32_t id = m.ids(r, c);
        if (id == 0) continue;
        long best = -1;
        for (int rr = 0; rr < 64; ++rr) {
          for (int cc = 0; cc < 64; ++cc) {
            if (m.ids(rr, cc) == id) continue;
            const long d2 = long(rr - r) * (rr - r) + long(cc - c) * (cc - c);
            if (best < 0 || d2 < best) best = d2;
          }
        }
        slow(r, c) = std::sqrt(double(best));
        inst_max[std::size_t(id)] = std::max(inst_max[std::size_t(id)], slow(r, c));
      }
    }
    std::vector<double> seen_max(std::size_t(max_id) + 1, 0.0);
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < 64; ++c) {
        const std::int32_t id = m.ids(r, c);
        const double want = id == 0 ? 0.0 : slow(r, c) / inst_max[std::size_t(id)];
        max_err = std::max(max_err, std::abs(fast.values(r, c) - want));
        if (id > 0) seen_max[std::size_t(id)] = std::max(seen_max[std::size_t(id)], fast.values(r, c));
      }
    }
    for (std::int32_t id = 1; id <= max_id; ++id) {
      if (seen_max[std::size_t(id)] != 1.0) {
        return {false, "per-instance max is " + std::to_string(seen_max[std::size_t(id)]) +
                           ", not exactly 1"};
      }
    }
    if (max_err > 1e-9) break;
  }
  std::ostringstream os;
  os << "50 random 64x64 maps, max |fast - brute force| = " << max_err
     << ", per-instance max exactly 1";
  return {max_err <= 1e-9, os.str()};
}

Outcome remap_fusion() {
  // remap tables: task1 merges G1+G2, task2 merges G2+G3
  const std::uint8_t t1_expected[5] = {0, 1, 1, 2, 3};
  const std::uint8_t t2_expected[5] = {0, 1, 2, 2, 3};
  for (int c = 0; c < 5; ++c) {
    if (remap_code(std::uint8_t(c), TaskScheme::kTask1) != t1_expected[c] ||
        remap_code(std::uint8_t(c), TaskScheme::kTask2) != t2_expected[c]) {
      return {false, "remap table mismatch at code " + std::to_string(c)};
    }
  }
  if (remap_code(1, TaskScheme::kTask1) != remap_code(2, TaskScheme::kTask1) ||
      remap_code(2, TaskScheme::kTask2) != remap_code(3, TaskScheme::kTask2)) {
    return {false, "merge rules violated"};
  }

  // analytically constructed fusion layer recovers all five classes
  NetworkConfig cfg = desk_network(64);
  ChrNet<float> model(cfg, 99);
  auto* w = model.find_parameter("fusion.w");
  auto* b = model.find_parameter("fusion.b");
  if (!w || !b) return {false, "fusion parameters not found"};
  w->value.set_zero();
  b->value.set_zero();
  for (int cls = 0; cls < 5; ++cls) {
    w->value.at(0, 0, remap_code(std::uint8_t(cls), TaskScheme::kTask1), cls) = 10.f;
    w->value.at(0, 0, 4 + remap_code(std::uint8_t(cls), TaskScheme::kTask2), cls) = 10.f;
  }
  for (int cls = 0; cls < 5; ++cls) {
    Tensor<float> t1(1, 1, 1, 4), t2(1, 1, 1, 4);
    t1[remap_code(std::uint8_t(cls), TaskScheme::kTask1)] = 1.f;
    t2[remap_code(std::uint8_t(cls), TaskScheme::kTask2)] = 1.f;
    Graph<float> g(false, false);
    const auto& probs = g.value(model.fusion_forward(g, g.input(t1), g.input(t2)));
    int argmax = 0;
    for (int ch = 1; ch < 5; ++ch) {
      if (probs[ch] > probs[argmax]) argmax = ch;
    }
    if (argmax != cls) {
      return {false, "fusion argmax " + std::to_string(argmax) + " for true class " +
                         std::to_string(cls)};
    }
  }
  return {true, "merge tables exact; analytic fusion recovers all five classes"};
}

Outcome loss_correctness() {
  std::ostringstream os;
  // closed forms to 1e-6
  {
    Tensor<double> t(1, 4, 4, 1);
    for (int i = 0; i < 16; ++i) t[i] = i % 2;
    Tensor<double> half(1, 4, 4, 1);
    half.fill(0.5);
    if (std::abs(binary_ce(half, t) - std::log(2.0)) > 1e-6) return {false, "bce != ln 2"};

    Tensor<double> u4(1, 2, 2, 4);
    u4.fill(0.25);
    Tensor<double> oh4(1, 2, 2, 4);
    for (int p = 0; p < 4; ++p) oh4[p * 4 + p % 4] = 1.0;
    if (std::abs(categorical_ce(u4, oh4) - std::log(4.0)) > 1e-6) return {false, "cce != ln 4"};

    Tensor<double> u5(1, 2, 2, 5);
    u5.fill(0.2);
    Tensor<double> oh5(1, 2, 2, 5);
    for (int p = 0; p < 4; ++p) oh5[p * 5 + p % 5] = 1.0;
    if (std::abs(categorical_ce(u5, oh5) - std::log(5.0)) > 1e-6) return {false, "cce != ln 5"};

    // Eq (1) with default weights and unit components
    Graph<double> g(false, true);
    const LossWeights w;
    auto scalar = [&](double v) { return g.input(Tensor<double>::scalar(v)); };
    const double total = g.value(g.weighted_sum({{w.lambda_bc, scalar(1.0)},
                                                 {w.lambda_dist, scalar(1.0)},
                                                 {w.lambda_mc1, scalar(1.0)},
                                                 {w.lambda_mc2, scalar(1.0)},
                                                 {w.lambda_mcf, scalar(1.0)}}))[0];
    if (std::abs(total - 6.0) > 1e-6) return {false, "unit components total != 6"};
  }

  // per-term finite differences on 4x4 random inputs
  RandomStream rng(808);
  auto fd_check = [&](const std::function<int(Graph<double>&)>& build, Parameter<double>& p,
                      const char* tag) -> bool {
    p.zero_grad();
    Graph<double> g(true);
    g.backward(build(g));
    double worst = 0.0;
    for (int s = 0; s < 12; ++s) {
      const std::int64_t k = std::int64_t(rng.uniform_int(std::uint64_t(p.value.size())));
      const double saved = p.value[k];
      const double h = 1e-6;
      p.value[k] = saved + h;
      Graph<double> gu(true, false);
      const double up = gu.value(build(gu))[0];
      p.value[k] = saved - h;
      Graph<double> gd(true, false);
      const double down = gd.value(build(gd))[0];
      p.value[k] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = p.grad[k];
      if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
    }
    if (worst >= 1e-3) os << tag << " rel err " << worst << "; ";
    return worst < 1e-3;
  };

  bool ok = true;
  {
    Parameter<double> p("p", Tensor<double>(1, 4, 4, 1));
    Tensor<double> t(1, 4, 4, 1);
    for (int i = 0; i < 16; ++i) {
      p.value[i] = 0.1 + 0.05 * (i % 13);
      t[i] = i % 3 == 0;
    }
    ok &= fd_check([&](Graph<double>& g) { return g.bce_loss(g.param(p), t); }, p, "bce");
    ok &= fd_check([&](Graph<double>& g) { return g.l1_loss(g.param(p), t); }, p, "l1");
  }
  {
    Parameter<double> p("p", Tensor<double>(1, 4, 4, 4));
    Tensor<double> t(1, 4, 4, 4);
    RandomStream r2(9);
    for (int px = 0; px < 16; ++px) {
      t[px * 4 + int(r2.uniform_int(4ull))] = 1.0;
      for (int c = 0; c < 4; ++c) p.value[px * 4 + c] = r2.normal();
    }
    ok &= fd_check([&](Graph<double>& g) { return g.cce_loss(g.softmax(g.param(p)), t); }, p,
                   "softmax+cce");
  }
  if (!ok) return {false, os.str()};

  // full tiny network at 16x16, widths 4,4,8,8,8, 64-bit
  NetworkConfig cfg;
  cfg.input_h = cfg.input_w = 16;
  cfg.backbone_widths = {4, 4, 8, 8, 8};
  cfg.backbone_blocks = {1, 1, 1, 1};
  cfg.hrfe_stream_widths = {4, 6, 8};
  cfg.hrfe_exchanges = 1;
  cfg.hrfe_blocks = 1;
  cfg.lunet_widths = {4, 6, 8};
  cfg.min_input_divisor = 16;
  ChrNet<double> model(cfg, 4321);

  Tensor<double> image(1, 16, 16, 3), aux(1, 4, 4, 3);
  RandomStream r3(77);
  for (std::int64_t i = 0; i < image.size(); ++i) image[i] = r3.uniform01();
  for (std::int64_t i = 0; i < aux.size(); ++i) aux[i] = r3.uniform01();
  TargetTensors<double> targets;
  targets.binary = Tensor<double>(1, 16, 16, 1);
  targets.distance = Tensor<double>(1, 16, 16, 1);
  targets.task1 = Tensor<double>(1, 16, 16, 4);
  targets.task2 = Tensor<double>(1, 16, 16, 4);
  targets.final = Tensor<double>(1, 16, 16, 5);
  for (int px = 0; px < 256; ++px) {
    const bool fg = r3.bernoulli(0.5);
    targets.binary[px] = fg;
    targets.distance[px] = fg ? r3.uniform01() : 0.0;
    targets.task1[px * 4 + int(r3.uniform_int(4ull))] = 1.0;
    targets.task2[px * 4 + int(r3.uniform_int(4ull))] = 1.0;
    targets.final[px * 5 + int(r3.uniform_int(5ull))] = 1.0;
  }
  const LossWeights w;
  auto net_loss = [&](Graph<double>& g) {
    const auto out = model.forward(g, image, aux);
    return total_loss_node(g, out, targets, w);
  };
  model.zero_grads();
  Graph<double> g(true);
  g.backward(net_loss(g));

  RandomStream pick(5150);
  double worst = 0.0;
  std::string worst_name;
  int checked = 0;
  for (auto* p : model.parameters()) {
    for (int s = 0; s < 2; ++s) {
      const std::int64_t k = std::int64_t(pick.uniform_int(std::uint64_t(p->value.size())));
      const double saved = p->value[k];
      const double h = 1e-6;
      p->value[k] = saved + h;
      Graph<double> gu(true, false);
      const double up = gu.value(net_loss(gu))[0];
      p->value[k] = saved - h;
      Graph<double> gd(true, false);
      const double down = gd.value(net_loss(gd))[0];
      p->value[k] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = p->grad[k];
      ++checked;
      if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
      const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
      if (err > worst) {
        worst = err;
        worst_name = p->name;
      }
    }
  }
  std::ostringstream res;
  res << "closed forms exact; per-term FD ok; full-network FD over " << checked
      << " sampled coordinates, worst rel err " << worst << " (" << worst_name << ")";
  return {worst < 1e-3, res.str()};
}

Outcome shape_contract() {
  NetworkConfig cfg;
  cfg.backbone_widths = {4, 4, 8, 8, 8};
  cfg.backbone_blocks = {1, 1, 1, 1};
  cfg.hrfe_stream_widths = {2, 3, 4};
  cfg.hrfe_exchanges = 1;
  cfg.hrfe_blocks = 1;
  cfg.lunet_widths = {2, 3, 4};
  std::ostringstream os;
  for (const int hw : {64, 128, 256, 512}) {
    cfg.input_h = cfg.input_w = hw;
    ChrNet<float> model(cfg, 7);
    const int batches = hw <= 128 ? 2 : 1;
    for (int n = 1; n <= batches; ++n) {
      RandomStream rng(std::uint64_t(hw) + n);
      Tensor<float> img(n, hw, hw, 3), aux(n, hw / 4, hw / 4, 3);
      for (std::int64_t i = 0; i < img.size(); ++i) img[i] = float(rng.uniform01());
      for (std::int64_t i = 0; i < aux.size(); ++i) aux[i] = float(rng.uniform01());
      Graph<float> g(false, false);
      const auto out = model.forward(g, img, aux);
      auto bad = [&](int id, int c) {
        const auto& s = g.value(id).shape();
        return s != std::array<int, 4>{n, hw, hw, c};
      };
      if (bad(out.binary, 1) || bad(out.distance, 1) || bad(out.task1, 4) ||
          bad(out.task2, 4) || bad(out.final, 5)) {
        return {false, "shape mismatch at " + std::to_string(hw) + " batch " + std::to_string(n)};
      }
    }
    os << hw << " ";
  }
  return {true, "sizes " + os.str() + "pass with and without batching"};
}

Outcome watershed_properties() {
  // touching-disk pair on a 48x48 canvas
  InstanceMap gt(48, 48);
  for (int r = 0; r < 48; ++r) {
    for (int c = 0; c < 48; ++c) {
      const double d1 = (r - 24.0) * (r - 24.0) + (c - 15.0) * (c - 15.0);
      const double d2 = (r - 24.0) * (r - 24.0) + (c - 32.0) * (c - 32.0);
      if (d1 <= 81.0) gt.ids(r, c) = 1;
      else if (d2 <= 81.0) gt.ids(r, c) = 2;
    }
  }
  const auto mask = binary_map_from_instances(gt);
  const DistanceMap d = distance_map_from_instances(gt);
  PostprocessParams p;
  const MarkerMap markers = find_markers(d, mask, p);
  std::int32_t n_markers = 0;
  for (auto v : markers.markers.v) n_markers = std::max(n_markers, v);
  const InstanceMap split = watershed_split(mask, d, markers, p);
  if (split.max_id() != 2) {
    return {false, "touching pair produced " + std::to_string(split.max_id()) + " instances"};
  }
  // partition: foreground pixels carry exactly one id, background none
  for (std::size_t i = 0; i < mask.v.size(); ++i) {
    if ((split.ids.v[i] > 0) != (mask.v[i] != 0)) return {false, "mask partition violated"};
  }
  if (n_markers != 2) return {false, "expected 2 markers"};

  // instance count = markers - dropped (nothing dropped here)
  PostprocessParams p1 = p;
  p1.min_instance_area = 1;
  RandomStream rng(2211);
  for (int trial = 0; trial < 10; ++trial) {
    const InstanceMap m = random_small_map(rng, 48, 5);
    const auto msk = binary_map_from_instances(m);
    const DistanceMap dm = distance_map_from_instances(m);
    const MarkerMap mk = find_markers(dm, msk, p1);
    std::int32_t nm = 0;
    for (auto v : mk.markers.v) nm = std::max(nm, v);
    if (watershed_split(msk, dm, mk, p1).max_id() != nm) {
      return {false, "instance count != marker count with area filter off"};
    }
  }

  // brute-force steepest-ascent oracle; disagreements within 1 px of its boundary
  InstanceMap oracle(48, 48);
  for (int r = 0; r < 48; ++r) {
    for (int c = 0; c < 48; ++c) {
      if (mask(r, c) == 0) continue;
      int cr = r, cc = c;
      for (int step = 0; step < 48 * 48; ++step) {
        if (markers.markers(cr, cc) > 0) break;
        int br = cr, bc = cc;
        double best = d.values(cr, cc);
        constexpr int drs[4] = {-1, 1, 0, 0};
        constexpr int dcs[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int nr = cr + drs[k], nc = cc + dcs[k];
          if (nr < 0 || nr >= 48 || nc < 0 || nc >= 48 || mask(nr, nc) == 0) continue;
          if (d.values(nr, nc) > best) {
            best = d.values(nr, nc);
            br = nr;
            bc = nc;
          }
        }
        if (br == cr && bc == cc) break;
        cr = br;
        cc = bc;
      }
      oracle.ids(r, c) = markers.markers(cr, cc);
    }
  }
  for (int r = 0; r < 48; ++r) {
    for (int c = 0; c < 48; ++c) {
      if (split.ids(r, c) == oracle.ids(r, c)) continue;
      bool near = false;
      for (int dr = -1; dr <= 1 && !near; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= 48 || nc < 0 || nc >= 48) continue;
          if (oracle.ids(nr, nc) != 0 && oracle.ids(nr, nc) != oracle.ids(r, c)) near = true;
        }
      }
      if (!near) {
        return {false, "disagreement with descent oracle beyond 1 px of its boundary"};
      }
    }
  }
  return {true, "partition, marker-count relation and oracle agreement within 1 px"};
}

struct TrainSetup {
  std::string data_dir;
  TrainConfig cfg;
};

TrainSetup overfit_setup(std::uint64_t seed) {
  TrainSetup s;
  s.data_dir = work_dir("overfit_data_" + std::to_string(seed));
  for (int i = 0; i < 2; ++i) {
    SynthParams p;
    p.seed = derive_seed(seed, std::uint64_t(i) + 40);
    p.canvas_h = p.canvas_w = 128;
    p.n_instances = 6;
    p.radius_min = 7;
    p.radius_max = 12;
    p.touching_fraction = 0.2;
    char name[16];
    std::snprintf(name, sizeof(name), "ov_%d", i);
    save_sample(s.data_dir, generate(p, name));
  }
  s.cfg.data_dir = s.data_dir;
  s.cfg.split = {1.0, 0.0, 0.0};
  s.cfg.split_seed = 1;
  s.cfg.epochs_frozen = 0;
  s.cfg.epochs_finetune = 0;  // set per chunk
  s.cfg.lr_initial = 1e-3;
  s.cfg.lr_after = 1e-3;
  s.cfg.lr_drop_epoch = 1000;
  s.cfg.batch_size = 2;
  s.cfg.augmentations = {};
  s.cfg.seed = seed;
  s.cfg.network = desk_network(128);
  return s;
}

struct TrainMetrics {
  double dice = 0.0;
  double apq = 0.0;
};

TrainMetrics training_set_metrics(const TrainConfig& cfg, const std::string& ckpt_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  ChrNet<float> model(cfg.network, cfg.seed);
  // restore weights by name
  for (auto* p : model.parameters()) p->value.vec() = ckpt.arrays.at(p->name).vec();
  for (auto* s : model.bn_stats()) {
    s->running_mean.vec() = ckpt.arrays.at(s->name + ".running_mean").vec();
    s->running_var.vec() = ckpt.arrays.at(s->name + ".running_var").vec();
  }
  const auto samples = load_dataset(cfg.data_dir);
  double dice_sum = 0.0;
  ClassPqAccumulator pooled;
  for (const auto& sample : samples) {
    const TargetBundle bundle = build_targets(sample);
    const NetworkOutputs out =
        model.infer(image_to_tensor<float>(sample.image), image_to_tensor<float>(bundle.aux100));
    const TypedInstanceMap typed = post_process(out, cfg.postprocess);
    dice_sum += dice(typed.instances, sample.instances);
    pooled.add(typed, sample.instances, sample.classes);
  }
  return {dice_sum / double(samples.size()), pooled.apq()};
}

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream os;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    TrainSetup setup = overfit_setup(seed);
    const std::string run_dir = work_dir("overfit_run_" + std::to_string(seed));
    std::vector<double> losses;
    TrainMetrics tm;
    int epochs = 0;
    bool reached = false;
    while (epochs < 200) {
      epochs = std::min(200, epochs + 25);
      setup.cfg.epochs_finetune = epochs;
      const TrainResult r = train(setup.cfg, run_dir, /*resume=*/epochs > 25);
      losses.insert(losses.end(), r.train_loss.begin(), r.train_loss.end());
      tm = training_set_metrics(setup.cfg, r.final_checkpoint);
      if (tm.dice > 0.95 && tm.apq > 0.8) {
        reached = true;
        break;
      }
    }
    const double mins =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    os << "seed " << seed << ": epochs " << epochs << " dice " << tm.dice << " apq " << tm.apq
       << " (" << mins << " min)";
    if (reached) {
      // smoothed (10-epoch window) training loss is non-increasing
      std::vector<double> smoothed;
      for (std::size_t k = 0; k + 10 <= losses.size(); ++k) {
        double sum = 0;
        for (std::size_t j = k; j < k + 10; ++j) sum += losses[j];
        smoothed.push_back(sum / 10.0);
      }
      for (std::size_t k = 0; k + 1 < smoothed.size(); ++k) {
        if (smoothed[k + 1] > smoothed[k] + 1e-4) {
          return {false, os.str() + "; smoothed loss increased at window " + std::to_string(k)};
        }
      }
      const bool in_time = mins < 15.0;
      return {in_time, os.str() + (in_time ? "" : "; exceeded 15 min")};
    }
    os << "; ";
  }
  return {false, os.str() + "no seed reached dice > 0.95 and apq > 0.8"};
}

Outcome determinism() {
  const std::string data = work_dir("determ_data");
  for (int i = 0; i < 6; ++i) {
    SynthParams p;
    p.seed = 500 + std::uint64_t(i);
    p.canvas_h = p.canvas_w = 64;
    p.n_instances = 4;
    p.radius_min = 4;
    p.radius_max = 8;
    char name[16];
    std::snprintf(name, sizeof(name), "d_%d", i);
    save_sample(data, generate(p, name));
  }
  TrainConfig cfg;
  cfg.data_dir = data;
  cfg.split = {0.5, 0.25, 0.25};
  cfg.epochs_frozen = 1;
  cfg.epochs_finetune = 1;
  cfg.lr_drop_epoch = 25;
  cfg.lr_initial = 1e-3;
  cfg.lr_after = 1e-4;
  cfg.batch_size = 2;
  cfg.seed = 11;
  cfg.deterministic = true;
  cfg.network = desk_network(64);

  const std::string run_a = work_dir("determ_a");
  const std::string run_b = work_dir("determ_b");
  const TrainResult a = train(cfg, run_a);
  const TrainResult b = train(cfg, run_b);

  auto file_bytes = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (file_bytes(a.final_checkpoint) != file_bytes(b.final_checkpoint)) {
    return {false, "final checkpoints differ bitwise"};
  }
  const MetricsReport ra = evaluate_checkpoint(cfg, a.final_checkpoint, "test", work_dir("determ_ea"));
  const MetricsReport rb = evaluate_checkpoint(cfg, b.final_checkpoint, "test", work_dir("determ_eb"));
  if (serialize_metrics(ra) != serialize_metrics(rb)) {
    return {false, "metric reports differ"};
  }
  return {true, "two seeded runs: identical checkpoints and metric reports"};
}

Outcome ablation_direction() {
  // one fixed 200-sample synthetic set shared by every run
  const std::string data = work_dir("ablation_data");
  for (int i = 0; i < 200; ++i) {
    SynthParams p;
    p.seed = derive_seed(909, std::uint64_t(i));
    p.canvas_h = p.canvas_w = 64;
    p.n_instances = 5;
    p.radius_min = 4;
    p.radius_max = 8;
    p.touching_fraction = 0.35;
    char name[16];
    std::snprintf(name, sizeof(name), "ab_%03d", i);
    save_sample(data, generate(p, name));
  }

  TrainConfig base;
  base.data_dir = data;
  base.split = {0.7, 0.05, 0.25};
  base.split_seed = 4;
  base.epochs_frozen = 0;
  base.epochs_finetune = 4;
  base.lr_initial = 1e-3;
  base.lr_after = 1e-3;
  base.lr_drop_epoch = 100;
  base.batch_size = 8;
  base.augmentations = {};
  base.network = desk_network(64);
  base.network.backbone_widths = {6, 8, 12, 16, 16};
  base.network.hrfe_stream_widths = {6, 8, 12};
  base.network.lunet_widths = {6, 8, 12};

  std::vector<double> pq_full, pq_shr;
  std::ostringstream os;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    for (const bool single_head : {false, true}) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.network.variant =
          single_head ? NetworkConfig::Variant::kSingleHead : NetworkConfig::Variant::kFull;
      const std::string run = work_dir("ablation_" + std::to_string(seed) +
                                       (single_head ? "_shr" : "_full"));
      const TrainResult r = train(cfg, run);
      const MetricsReport m =
          evaluate_checkpoint(cfg, r.final_checkpoint, "test", run + "/eval");
      (single_head ? pq_shr : pq_full).push_back(m.pq);
    }
  }
  const double med_full = median3(pq_full);
  const double med_shr = median3(pq_shr);
  os << "full PQ {" << pq_full[0] << "," << pq_full[1] << "," << pq_full[2] << "} median "
     << med_full << " vs single-head {" << pq_shr[0] << "," << pq_shr[1] << "," << pq_shr[2]
     << "} median " << med_shr;
  return {med_full >= med_shr, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric_oracle", metric_oracle},
      {"hand_worked_metrics", hand_worked_metrics},
      {"distance_correctness", distance_correctness},
      {"remap_fusion", remap_fusion},
      {"loss_correctness", loss_correctness},
      {"shape_contract", shape_contract},
      {"watershed_properties", watershed_properties},
      {"overfit", overfit},
      {"determinism", determinism},
      {"ablation_direction", ablation_direction},
  };

  std::vector<std::string> selected(argv + 1, argv + argc);
  bool all_pass = true;
  int ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), name) == selected.end()) {
      continue;
    }
    ++ran;
    Outcome outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << name << ": " << outcome.detail
              << std::endl;
    all_pass = all_pass && outcome.pass;
  }
  if (ran == 0) {
    std::cerr << "unknown criterion; available:";
    for (const auto& [name, fn] : criteria) std::cerr << " " << name;
    std::cerr << std::endl;
    return 2;
  }
  return all_pass ? 0 : 1;
}
