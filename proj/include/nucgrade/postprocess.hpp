#pragma once

#include "nucgrade/core_types.hpp"
#include "nucgrade/targets.hpp"
#include "nucgrade/tensor.hpp"

namespace nucgrade {

// Watershed seeds: 0 = no marker, k > 0 = seed region for instance k.
// Each marker id is one 4-connected component inside the foreground mask.
struct MarkerMap {
  Plane<std::int32_t> markers;

  MarkerMap() = default;
  MarkerMap(int h, int w) : markers(h, w, 0) {}
};

enum class Smoothing { kNone, kMean3x3 };

struct PostprocessParams {
  double mask_threshold = 0.5;
  double peak_min_value = 0.4;
  int peak_radius = 3;
  Smoothing smoothing = Smoothing::kMean3x3;
  int min_instance_area = 10;
};

// The five per-pixel prediction maps of one forward pass, as plain tensors
// (softmax heads keep every classification map on the per-pixel simplex).
template <typename T>
struct NetworkOutputsT {
  Tensor<T> binary;    // (N,H,W,1) in (0,1)
  Tensor<T> distance;  // (N,H,W,1) in (0,1)
  Tensor<T> task1;     // (N,H,W,4)
  Tensor<T> task2;     // (N,H,W,4)
  Tensor<T> final;     // (N,H,W,5)
};

using NetworkOutputs = NetworkOutputsT<float>;

// Peak detection on the (optionally 3x3-mean-smoothed) distance map. A pixel
// is a peak iff it lies in the mask, its smoothed value >= peak_min_value and
// no strictly greater value exists within the Euclidean disk of peak_radius.
// Plateau peaks merge into 4-connected marker components, labeled 1..K in
// row-major order of their first pixel.
MarkerMap find_markers(const DistanceMap& distance, const Plane<std::uint8_t>& mask,
                       const PostprocessParams& p);

// Marker-controlled watershed: floods the mask from the markers in order of
// descending distance. Ties at equal level resolve to the lower marker id,
// then to row-major pixel order. Components below min_instance_area are
// removed and the result is relabeled densely.
InstanceMap watershed_split(const Plane<std::uint8_t>& mask, const DistanceMap& distance,
                            const MarkerMap& markers, const PostprocessParams& p);

// Per-pixel argmax over the 5-class map, then per-instance majority vote over
// the non-background votes. Instances whose pixels all vote background fall
// back to the class with the highest mean probability; vote ties break by
// higher mean probability, then lower class code.
TypedInstanceMap majority_vote(const InstanceMap& instances, const Tensor<float>& final_probs);

// mask = binary >= mask_threshold, then find_markers -> watershed_split ->
// majority_vote. Operates on image index `n` of the batched outputs.
TypedInstanceMap post_process(const NetworkOutputs& outputs, const PostprocessParams& p,
                              int n = 0);

// Fallback instance extraction used by the single-head ablation variant:
// foreground = argmax class > 0, instances = 4-connected components (area
// filtered), labels by majority vote.
TypedInstanceMap components_from_classes(const Tensor<float>& final_probs,
                                         const PostprocessParams& p, int n = 0);

}  // namespace nucgrade
