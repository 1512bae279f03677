#include "nucgrade/metrics_oracle.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

namespace nucgrade {
namespace {

using PixelSet = std::set<std::pair<int, int>>;

std::vector<PixelSet> pixel_sets(const InstanceMap& m) {
  std::vector<PixelSet> sets(std::size_t(m.max_id()) + 1);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      const std::int32_t id = m.ids(r, c);
      if (id > 0) sets[std::size_t(id)].insert({r, c});
    }
  }
  return sets;
}

std::size_t intersection_size(const PixelSet& a, const PixelSet& b) {
  std::size_t n = 0;
  for (const auto& px : a) n += b.count(px);
  return n;
}

PixelSet set_union(const std::vector<PixelSet>& sets) {
  PixelSet u;
  for (const auto& s : sets) u.insert(s.begin(), s.end());
  return u;
}

}  // namespace

MetricsReport oracle_metrics(const InstanceMap& pred, const InstanceMap& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw std::invalid_argument("oracle_metrics: shape mismatch");
  }
  if (pred.height() > 64 || pred.width() > 64 || pred.max_id() > 12 || gt.max_id() > 12) {
    throw std::invalid_argument("oracle_metrics: size cap exceeded (64x64, 12 instances)");
  }

  const std::vector<PixelSet> gsets = pixel_sets(gt);
  const std::vector<PixelSet> psets = pixel_sets(pred);
  const PixelSet gfg = set_union(gsets);
  const PixelSet pfg = set_union(psets);

  MetricsReport r;

  // dice over foreground unions
  if (gfg.empty() && pfg.empty()) {
    r.dice = 1.0;
  } else {
    r.dice = 2.0 * double(intersection_size(pfg, gfg)) / double(pfg.size() + gfg.size());
  }

  // aji, per the stated greedy-per-gt algorithm
  {
    double c_sum = 0.0, u_sum = 0.0;
    std::set<std::size_t> used;
    for (std::size_t g = 1; g < gsets.size(); ++g) {
      if (gsets[g].empty()) continue;
      std::size_t best_p = 0;
      double best_j = -1.0;
      for (std::size_t p = 1; p < psets.size(); ++p) {
        if (psets[p].empty()) continue;
        const std::size_t inter = intersection_size(gsets[g], psets[p]);
        if (inter == 0) continue;
        const double j = double(inter) / double(gsets[g].size() + psets[p].size() - inter);
        if (j > best_j) {
          best_j = j;
          best_p = p;
        }
      }
      if (best_p == 0) {
        u_sum += double(gsets[g].size());
        continue;
      }
      const std::size_t inter = intersection_size(gsets[g], psets[best_p]);
      c_sum += double(inter);
      u_sum += double(gsets[g].size() + psets[best_p].size() - inter);
      used.insert(best_p);
    }
    double leftover = 0.0;
    for (std::size_t p = 1; p < psets.size(); ++p) {
      if (!psets[p].empty() && !used.count(p)) leftover += double(psets[p].size());
    }
    r.aji = (u_sum + leftover) == 0.0 ? 1.0 : c_sum / (u_sum + leftover);
  }

  // pq via exhaustive IoU > 0.5 matching
  {
    long tp = 0;
    double iou_sum = 0.0;
    std::set<std::size_t> matched_g, matched_p;
    for (std::size_t g = 1; g < gsets.size(); ++g) {
      if (gsets[g].empty()) continue;
      for (std::size_t p = 1; p < psets.size(); ++p) {
        if (psets[p].empty()) continue;
        const std::size_t inter = intersection_size(gsets[g], psets[p]);
        const double iou = double(inter) / double(gsets[g].size() + psets[p].size() - inter);
        if (iou > 0.5) {
          ++tp;
          iou_sum += iou;
          matched_g.insert(g);
          matched_p.insert(p);
        }
      }
    }
    long n_g = 0, n_p = 0;
    for (std::size_t g = 1; g < gsets.size(); ++g) n_g += !gsets[g].empty();
    for (std::size_t p = 1; p < psets.size(); ++p) n_p += !psets[p].empty();
    const long fn = n_g - long(matched_g.size());
    const long fp = n_p - long(matched_p.size());
    if (tp + fp + fn == 0) {
      r.dq = r.sq = r.pq = 1.0;
    } else {
      r.dq = double(tp) / (double(tp) + 0.5 * double(fp) + 0.5 * double(fn));
      r.sq = tp > 0 ? iou_sum / double(tp) : 0.0;
      r.pq = r.dq * r.sq;
    }
  }

  return r;
}

}  // namespace nucgrade
