#include "nucgrade/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace nucgrade {
namespace {

void require_same_shape(int ha, int wa, int hb, int wb, const char* op) {
  if (ha != hb || wa != wb) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Sparse contingency table between two instance maps: per-id areas and
// overlap counts for co-occurring (gt, pred) id pairs.
struct Contingency {
  std::vector<long> gt_area;    // index by gt id
  std::vector<long> pred_area;  // index by pred id
  std::unordered_map<std::int64_t, long> inter;
  std::int32_t max_gt = 0;
  std::int32_t max_pred = 0;

  static std::int64_t key(std::int32_t g, std::int32_t p) {
    return (std::int64_t(g) << 32) | std::uint32_t(p);
  }
  long overlap(std::int32_t g, std::int32_t p) const {
    auto it = inter.find(key(g, p));
    return it == inter.end() ? 0 : it->second;
  }
};

Contingency build_contingency(const InstanceMap& pred, const InstanceMap& gt) {
  require_same_shape(pred.height(), pred.width(), gt.height(), gt.width(), "metrics");
  Contingency t;
  t.max_gt = gt.max_id();
  t.max_pred = pred.max_id();
  t.gt_area.assign(std::size_t(t.max_gt) + 1, 0);
  t.pred_area.assign(std::size_t(t.max_pred) + 1, 0);
  for (std::size_t i = 0; i < gt.ids.v.size(); ++i) {
    const std::int32_t g = gt.ids.v[i], p = pred.ids.v[i];
    if (g > 0) ++t.gt_area[std::size_t(g)];
    if (p > 0) ++t.pred_area[std::size_t(p)];
    if (g > 0 && p > 0) ++t.inter[Contingency::key(g, p)];
  }
  return t;
}

// Instance ids grouped by class code. GT classes come from the class map
// (majority over the instance in case of slack inputs); prediction classes
// come from the label table.
std::array<std::vector<char>, kNumClasses> gt_ids_by_class(const InstanceMap& gt_instances,
                                                           const ClassMap& gt_classes) {
  const std::int32_t max_id = gt_instances.max_id();
  std::vector<std::array<long, kNumClasses>> votes(std::size_t(max_id) + 1,
                                                   std::array<long, kNumClasses>{});
  for (std::size_t i = 0; i < gt_instances.ids.v.size(); ++i) {
    const std::int32_t id = gt_instances.ids.v[i];
    const int cls = gt_classes.classes.v[i];
    if (id > 0 && cls > 0 && cls < kNumClasses) ++votes[std::size_t(id)][std::size_t(cls)];
  }
  std::array<std::vector<char>, kNumClasses> by_class;
  for (int c = 1; c < kNumClasses; ++c) by_class[std::size_t(c)].assign(std::size_t(max_id) + 1, 0);
  for (std::int32_t id = 1; id <= max_id; ++id) {
    int best = 0;
    long best_votes = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      if (votes[std::size_t(id)][std::size_t(c)] > best_votes) {
        best_votes = votes[std::size_t(id)][std::size_t(c)];
        best = c;
      }
    }
    if (best > 0) by_class[std::size_t(best)][std::size_t(id)] = 1;
  }
  return by_class;
}

InstanceMap restrict_to_ids(const InstanceMap& m, const std::vector<char>& keep) {
  InstanceMap out(m.height(), m.width());
  for (std::size_t i = 0; i < m.ids.v.size(); ++i) {
    const std::int32_t id = m.ids.v[i];
    if (id > 0 && std::size_t(id) < keep.size() && keep[std::size_t(id)]) out.ids.v[i] = id;
  }
  return out;
}

}  // namespace

double dice(const Plane<std::uint8_t>& pred_mask, const Plane<std::uint8_t>& gt_mask) {
  require_same_shape(pred_mask.rows, pred_mask.cols, gt_mask.rows, gt_mask.cols, "dice");
  long np = 0, ng = 0, ni = 0;
  for (std::size_t i = 0; i < pred_mask.v.size(); ++i) {
    const bool p = pred_mask.v[i] != 0, g = gt_mask.v[i] != 0;
    np += p;
    ng += g;
    ni += p && g;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * double(ni) / double(np + ng);
}

double dice(const InstanceMap& pred, const InstanceMap& gt) {
  require_same_shape(pred.height(), pred.width(), gt.height(), gt.width(), "dice");
  long np = 0, ng = 0, ni = 0;
  for (std::size_t i = 0; i < pred.ids.v.size(); ++i) {
    const bool p = pred.ids.v[i] > 0, g = gt.ids.v[i] > 0;
    np += p;
    ng += g;
    ni += p && g;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * double(ni) / double(np + ng);
}

double aji(const InstanceMap& pred, const InstanceMap& gt) {
  const Contingency t = build_contingency(pred, gt);
  long c_sum = 0, u_sum = 0;
  std::vector<char> used(std::size_t(t.max_pred) + 1, 0);

  // overlap candidates per gt id, in ascending pred id
  std::vector<std::vector<std::int32_t>> candidates(std::size_t(t.max_gt) + 1);
  for (const auto& [key, count] : t.inter) {
    (void)count;
    candidates[std::size_t(key >> 32)].push_back(std::int32_t(key & 0xffffffff));
  }
  for (auto& c : candidates) std::sort(c.begin(), c.end());

  for (std::int32_t g = 1; g <= t.max_gt; ++g) {
    const long ga = t.gt_area[std::size_t(g)];
    if (ga == 0) continue;
    std::int32_t best_p = 0;
    double best_j = -1.0;
    long best_inter = 0;
    for (std::int32_t p : candidates[std::size_t(g)]) {
      const long inter = t.overlap(g, p);
      const long uni = ga + t.pred_area[std::size_t(p)] - inter;
      const double j = double(inter) / double(uni);
      if (j > best_j) {  // ties keep the lower pred id (ascending scan)
        best_j = j;
        best_p = p;
        best_inter = inter;
      }
    }
    if (best_p == 0) {
      u_sum += ga;
      continue;
    }
    c_sum += best_inter;
    u_sum += ga + t.pred_area[std::size_t(best_p)] - best_inter;
    used[std::size_t(best_p)] = 1;
  }

  long unused_pred = 0;
  for (std::int32_t p = 1; p <= t.max_pred; ++p) {
    if (!used[std::size_t(p)]) unused_pred += t.pred_area[std::size_t(p)];
  }
  const double denom = double(u_sum) + double(unused_pred);
  if (denom == 0.0) return 1.0;  // both maps empty
  return double(c_sum) / denom;
}

Matching match_instances(const InstanceMap& pred, const InstanceMap& gt) {
  const Contingency t = build_contingency(pred, gt);
  Matching m;
  std::vector<char> gt_matched(std::size_t(t.max_gt) + 1, 0);
  std::vector<char> pred_matched(std::size_t(t.max_pred) + 1, 0);

  std::vector<std::pair<std::int64_t, long>> entries(t.inter.begin(), t.inter.end());
  std::sort(entries.begin(), entries.end());  // deterministic pair order
  for (const auto& [key, inter] : entries) {
    const std::int32_t g = std::int32_t(key >> 32), p = std::int32_t(key & 0xffffffff);
    const long uni = t.gt_area[std::size_t(g)] + t.pred_area[std::size_t(p)] - inter;
    const double iou = double(inter) / double(uni);
    if (iou > 0.5) {
      m.pairs.push_back({g, p, iou});
      gt_matched[std::size_t(g)] = 1;
      pred_matched[std::size_t(p)] = 1;
    }
  }
  for (std::int32_t g = 1; g <= t.max_gt; ++g) {
    if (t.gt_area[std::size_t(g)] > 0 && !gt_matched[std::size_t(g)]) m.unmatched_gt.push_back(g);
  }
  for (std::int32_t p = 1; p <= t.max_pred; ++p) {
    if (t.pred_area[std::size_t(p)] > 0 && !pred_matched[std::size_t(p)])
      m.unmatched_pred.push_back(p);
  }
  return m;
}

PqTriple panoptic_quality(const Matching& m) {
  const double tp = double(m.pairs.size());
  const double fp = double(m.unmatched_pred.size());
  const double fn = double(m.unmatched_gt.size());
  if (tp + fp + fn == 0.0) return {1.0, 1.0, 1.0};
  PqTriple out;
  out.dq = tp / (tp + 0.5 * fp + 0.5 * fn);
  double iou_sum = 0.0;
  for (const auto& pair : m.pairs) iou_sum += pair.iou;
  out.sq = tp > 0.0 ? iou_sum / tp : 0.0;
  out.pq = out.dq * out.sq;
  return out;
}

void ClassPqAccumulator::add(const TypedInstanceMap& pred, const InstanceMap& gt_instances,
                             const ClassMap& gt_classes) {
  const auto gt_by_class = gt_ids_by_class(gt_instances, gt_classes);
  const std::int32_t max_pred = pred.instances.max_id();
  for (int cls = 1; cls < kNumClasses; ++cls) {
    std::vector<char> pred_keep(std::size_t(max_pred) + 1, 0);
    bool pred_any = false;
    for (const auto& [id, label] : pred.labels) {
      if (label == cls && id > 0 && id <= max_pred) {
        pred_keep[std::size_t(id)] = 1;
        pred_any = true;
      }
    }
    bool gt_any = false;
    for (char k : gt_by_class[std::size_t(cls)]) gt_any |= k != 0;
    if (!pred_any && !gt_any) continue;

    Stat& s = stats_[std::size_t(cls)];
    s.present = true;
    const InstanceMap gt_c = restrict_to_ids(gt_instances, gt_by_class[std::size_t(cls)]);
    const InstanceMap pred_c = restrict_to_ids(pred.instances, pred_keep);
    const Matching m = match_instances(pred_c, gt_c);
    s.tp += long(m.pairs.size());
    s.fp += long(m.unmatched_pred.size());
    s.fn += long(m.unmatched_gt.size());
    for (const auto& pair : m.pairs) s.iou_sum += pair.iou;
  }
}

std::map<int, double> ClassPqAccumulator::per_class_pq() const {
  std::map<int, double> out;
  for (int cls = 1; cls < kNumClasses; ++cls) {
    const Stat& s = stats_[std::size_t(cls)];
    if (!s.present) continue;
    const double tp = double(s.tp), fp = double(s.fp), fn = double(s.fn);
    const double dq = tp + 0.5 * fp + 0.5 * fn > 0.0 ? tp / (tp + 0.5 * fp + 0.5 * fn) : 1.0;
    const double sq = s.tp > 0 ? s.iou_sum / tp : 0.0;
    out[cls] = dq * sq;
  }
  return out;
}

double ClassPqAccumulator::apq() const {
  const auto pcs = per_class_pq();
  if (pcs.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& [cls, pq] : pcs) {
    (void)cls;
    sum += pq;
  }
  return sum / double(pcs.size());
}

std::pair<std::map<int, double>, double> per_class_pq(const TypedInstanceMap& pred,
                                                      const InstanceMap& gt_instances,
                                                      const ClassMap& gt_classes) {
  ClassPqAccumulator acc;
  acc.add(pred, gt_instances, gt_classes);
  return {acc.per_class_pq(), acc.apq()};
}

MetricsReport compute_metrics(const TypedInstanceMap& pred, const InstanceMap& gt_instances,
                              const ClassMap& gt_classes) {
  MetricsReport r;
  r.dice = dice(pred.instances, gt_instances);
  r.aji = aji(pred.instances, gt_instances);
  const PqTriple t = panoptic_quality(match_instances(pred.instances, gt_instances));
  r.dq = t.dq;
  r.sq = t.sq;
  r.pq = t.pq;
  auto [pcs, apq] = per_class_pq(pred, gt_instances, gt_classes);
  r.per_class_pq = pcs;
  r.apq = apq;
  return r;
}

std::string serialize_metrics(const MetricsReport& report) {
  static const char* kClassKeys[kNumClasses] = {nullptr, "pq_g1", "pq_g2", "pq_g3", "pq_endo"};
  char buf[64];
  std::string out;
  auto emit = [&](const char* key, double value) {
    std::snprintf(buf, sizeof(buf), "%s=%.9f\n", key, value);
    out += buf;
  };
  emit("dice", report.dice);
  emit("aji", report.aji);
  emit("dq", report.dq);
  emit("sq", report.sq);
  emit("pq", report.pq);
  for (int cls = 1; cls < kNumClasses; ++cls) {
    auto it = report.per_class_pq.find(cls);
    if (it != report.per_class_pq.end()) emit(kClassKeys[cls], it->second);
  }
  emit("apq", report.apq);
  return out;
}

}  // namespace nucgrade
