#include "nucgrade/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace nucgrade {
namespace {

Plane<double> mean3x3(const Plane<double>& in) {
  Plane<double> out(in.rows, in.cols, 0.0);
  for (int r = 0; r < in.rows; ++r) {
    for (int c = 0; c < in.cols; ++c) {
      double sum = 0.0;
      int count = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (!in.in_bounds(r + dr, c + dc)) continue;
          sum += in(r + dr, c + dc);
          ++count;
        }
      }
      out(r, c) = sum / double(count);  // in-image support only
    }
  }
  return out;
}

// Area filter + dense relabel by row-major first occurrence.
InstanceMap filter_and_relabel(const InstanceMap& m, int min_area) {
  std::vector<long> area(std::size_t(m.max_id()) + 1, 0);
  for (std::int32_t id : m.ids.v)
    if (id > 0) ++area[std::size_t(id)];
  InstanceMap kept(m.height(), m.width());
  for (std::size_t i = 0; i < m.ids.v.size(); ++i) {
    const std::int32_t id = m.ids.v[i];
    if (id > 0 && area[std::size_t(id)] >= min_area) kept.ids.v[i] = id;
  }
  return relabel_dense(kept);
}

struct ClassVote {
  std::vector<long> votes;        // index by class code 1..4
  std::vector<double> prob_sum;   // mean-probability accumulator, 1..4
  long pixels = 0;
};

}  // namespace

MarkerMap find_markers(const DistanceMap& distance, const Plane<std::uint8_t>& mask,
                       const PostprocessParams& p) {
  if (!distance.values.same_shape(mask)) {
    throw std::invalid_argument("find_markers: shape mismatch");
  }
  const Plane<double> smoothed =
      p.smoothing == Smoothing::kMean3x3 ? mean3x3(distance.values) : distance.values;
  const int h = mask.rows, w = mask.cols;
  const int rad = std::max(1, p.peak_radius);
  const int rad2 = rad * rad;

  Plane<std::int32_t> peaks(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask(r, c) == 0) continue;
      const double v = smoothed(r, c);
      if (v < p.peak_min_value) continue;
      bool is_max = true;
      for (int dr = -rad; dr <= rad && is_max; ++dr) {
        for (int dc = -rad; dc <= rad; ++dc) {
          if (dr * dr + dc * dc > rad2) continue;
          const int nr = r + dr, nc = c + dc;
          if (!smoothed.in_bounds(nr, nc)) continue;
          if (smoothed(nr, nc) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks(r, c) = 1;
    }
  }

  MarkerMap out(h, w);
  int count = 0;
  out.markers = label_same_value_components_4(peaks, &count);
  return out;
}

InstanceMap watershed_split(const Plane<std::uint8_t>& mask, const DistanceMap& distance,
                            const MarkerMap& markers, const PostprocessParams& p) {
  if (!mask.same_shape(distance.values) || !mask.same_shape(markers.markers)) {
    throw std::invalid_argument("watershed_split: shape mismatch");
  }
  const int h = mask.rows, w = mask.cols;
  InstanceMap labels(h, w);

  struct Entry {
    double value;
    std::int32_t label;
    std::int32_t pos;  // row-major index, final tie-break
    bool operator<(const Entry& o) const {
      if (value != o.value) return value < o.value;  // max-heap on value
      if (label != o.label) return label > o.label;  // then lower label first
      return pos > o.pos;                            // then row-major order
    }
  };
  std::priority_queue<Entry> queue;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int32_t m = markers.markers(r, c);
      if (m > 0 && mask(r, c) != 0) {
        labels.ids(r, c) = m;
        queue.push({distance.values(r, c), m, std::int32_t(r) * w + c});
      }
    }
  }

  constexpr int dr[4] = {-1, 1, 0, 0};
  constexpr int dc[4] = {0, 0, -1, 1};
  while (!queue.empty()) {
    const Entry e = queue.top();
    queue.pop();
    const int r = e.pos / w, c = e.pos % w;
    if (labels.ids(r, c) != e.label) continue;  // superseded entry
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
      if (mask(nr, nc) == 0 || labels.ids(nr, nc) != 0) continue;
      labels.ids(nr, nc) = e.label;
      queue.push({distance.values(nr, nc), e.label, std::int32_t(nr) * w + nc});
    }
  }

  return filter_and_relabel(labels, p.min_instance_area);
}

TypedInstanceMap majority_vote(const InstanceMap& instances, const Tensor<float>& final_probs) {
  const int h = instances.height(), w = instances.width();
  if (final_probs.h() != h || final_probs.w() != w || final_probs.c() != kNumClasses) {
    throw std::invalid_argument("majority_vote: shape mismatch");
  }
  const std::int32_t max_id = instances.max_id();
  std::vector<ClassVote> stats(std::size_t(max_id) + 1);
  for (auto& s : stats) {
    s.votes.assign(kNumClasses, 0);
    s.prob_sum.assign(kNumClasses, 0.0);
  }

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int32_t id = instances.ids(r, c);
      if (id == 0) continue;
      ClassVote& s = stats[std::size_t(id)];
      ++s.pixels;
      int arg = 0;
      float best = final_probs.at(0, r, c, 0);
      for (int ch = 1; ch < kNumClasses; ++ch) {
        const float v = final_probs.at(0, r, c, ch);
        if (v > best) {
          best = v;
          arg = ch;
        }
      }
      ++s.votes[std::size_t(arg)];
      for (int ch = 1; ch < kNumClasses; ++ch) s.prob_sum[std::size_t(ch)] += final_probs.at(0, r, c, ch);
    }
  }

  TypedInstanceMap out;
  out.instances = instances;
  for (std::int32_t id = 1; id <= max_id; ++id) {
    const ClassVote& s = stats[std::size_t(id)];
    if (s.pixels == 0) continue;
    long best_votes = 0;
    for (int cls = 1; cls < kNumClasses; ++cls) best_votes = std::max(best_votes, s.votes[std::size_t(cls)]);
    int label = 0;
    double best_mean = -1.0;
    if (best_votes > 0) {
      // majority over non-background votes; ties -> higher mean prob, then lower code
      for (int cls = 1; cls < kNumClasses; ++cls) {
        if (s.votes[std::size_t(cls)] != best_votes) continue;
        const double mean = s.prob_sum[std::size_t(cls)] / double(s.pixels);
        if (mean > best_mean) {
          best_mean = mean;
          label = cls;
        }
      }
    } else {
      // all pixels voted background: highest mean foreground probability
      for (int cls = 1; cls < kNumClasses; ++cls) {
        const double mean = s.prob_sum[std::size_t(cls)] / double(s.pixels);
        if (mean > best_mean) {
          best_mean = mean;
          label = cls;
        }
      }
    }
    out.labels[id] = std::uint8_t(label);
  }
  return out;
}

TypedInstanceMap post_process(const NetworkOutputs& outputs, const PostprocessParams& p, int n) {
  const int h = outputs.binary.h(), w = outputs.binary.w();
  Plane<std::uint8_t> mask(h, w, 0);
  DistanceMap distance(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      mask(r, c) = outputs.binary.at(n, r, c, 0) >= p.mask_threshold ? 1 : 0;
      distance.values(r, c) = double(outputs.distance.at(n, r, c, 0));
    }
  }
  const MarkerMap markers = find_markers(distance, mask, p);
  const InstanceMap instances = watershed_split(mask, distance, markers, p);

  Tensor<float> probs(1, h, w, kNumClasses);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < kNumClasses; ++ch) probs.at(0, r, c, ch) = outputs.final.at(n, r, c, ch);
  return majority_vote(instances, probs);
}

TypedInstanceMap components_from_classes(const Tensor<float>& final_probs,
                                         const PostprocessParams& p, int n) {
  const int h = final_probs.h(), w = final_probs.w();
  Plane<std::int32_t> fg(h, w, 0);
  Tensor<float> probs(1, h, w, kNumClasses);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      int arg = 0;
      float best = final_probs.at(n, r, c, 0);
      for (int ch = 1; ch < kNumClasses; ++ch) {
        const float v = final_probs.at(n, r, c, ch);
        if (v > best) {
          best = v;
          arg = ch;
        }
      }
      fg(r, c) = arg > 0 ? 1 : 0;
      for (int ch = 0; ch < kNumClasses; ++ch) probs.at(0, r, c, ch) = final_probs.at(n, r, c, ch);
    }
  }
  int count = 0;
  InstanceMap components;
  components.ids = label_same_value_components_4(fg, &count);
  components = filter_and_relabel(components, p.min_instance_area);
  return majority_vote(components, probs);
}

}  // namespace nucgrade
