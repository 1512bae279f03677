#pragma once

#include "nucgrade/core_types.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace nucgrade {

// IoU > 0.5 instance matching. Such pairs are unique per instance.
struct MatchedPair {
  std::int32_t gt_id = 0;
  std::int32_t pred_id = 0;
  double iou = 0.0;
};

struct Matching {
  std::vector<MatchedPair> pairs;
  std::vector<std::int32_t> unmatched_gt;
  std::vector<std::int32_t> unmatched_pred;
};

struct PqTriple {
  double dq = 1.0;
  double sq = 1.0;
  double pq = 1.0;
};

struct MetricsReport {
  double dice = 1.0;
  double aji = 1.0;
  double dq = 1.0;
  double sq = 1.0;
  double pq = 1.0;
  std::map<int, double> per_class_pq;  // class codes 1..4, absent classes omitted
  double apq = 1.0;
};

// 2|P∩G| / (|P|+|G|); 1 when both masks are empty. Nonzero entries count as
// foreground.
double dice(const Plane<std::uint8_t>& pred_mask, const Plane<std::uint8_t>& gt_mask);
double dice(const InstanceMap& pred, const InstanceMap& gt);

// Aggregated Jaccard Index. GT instances are visited in ascending id; each
// picks the prediction with maximal pairwise Jaccard (ties -> lower pred id)
// and contributes intersection/union to the accumulators; predictions never
// selected add their full area to the denominator. 1 when both maps empty.
double aji(const InstanceMap& pred, const InstanceMap& gt);

Matching match_instances(const InstanceMap& pred, const InstanceMap& gt);

// dq = TP/(TP+FP/2+FN/2), sq = mean matched IoU (0 without TP), pq = dq*sq.
// All three are 1 when both maps are empty.
PqTriple panoptic_quality(const Matching& m);

// Pools per-class detection statistics over an evaluation set, following the
// MoNuSAC convention: classes absent from both sides are omitted and aPQ is
// the mean of the present per-class PQ values.
class ClassPqAccumulator {
 public:
  void add(const TypedInstanceMap& pred, const InstanceMap& gt_instances,
           const ClassMap& gt_classes);
  std::map<int, double> per_class_pq() const;
  double apq() const;  // 1 when no class is present at all

 private:
  struct Stat {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double iou_sum = 0.0;
    bool present = false;
  };
  std::array<Stat, kNumClasses> stats_{};
};

// Single-image convenience wrapper around ClassPqAccumulator.
std::pair<std::map<int, double>, double> per_class_pq(const TypedInstanceMap& pred,
                                                      const InstanceMap& gt_instances,
                                                      const ClassMap& gt_classes);

// Full single-image report (class-agnostic metrics plus per-class PQ).
MetricsReport compute_metrics(const TypedInstanceMap& pred, const InstanceMap& gt_instances,
                              const ClassMap& gt_classes);

// Flat key=value record with keys dice, aji, dq, sq, pq, pq_g1, pq_g2,
// pq_g3, pq_endo, apq; absent classes omit their key.
std::string serialize_metrics(const MetricsReport& report);

}  // namespace nucgrade
