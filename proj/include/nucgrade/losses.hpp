#pragma once

#include "nucgrade/graph.hpp"
#include "nucgrade/postprocess.hpp"
#include "nucgrade/targets.hpp"

namespace nucgrade {

// Weights of the five-term training objective. lambda_dist defaults to 2,
// all others to 1.
struct LossWeights {
  double lambda_bc = 1.0;
  double lambda_dist = 2.0;
  double lambda_mc1 = 1.0;
  double lambda_mc2 = 1.0;
  double lambda_mcf = 1.0;
};

// Training targets as dense tensors (one-hot class maps included).
template <typename T>
struct TargetTensors {
  Tensor<T> binary;    // (1,H,W,1)
  Tensor<T> distance;  // (1,H,W,1)
  Tensor<T> task1;     // (1,H,W,4) one-hot
  Tensor<T> task2;     // (1,H,W,4) one-hot
  Tensor<T> final;     // (1,H,W,5) one-hot
};

template <typename T>
TargetTensors<T> to_target_tensors(const TargetBundle& bundle) {
  const int h = bundle.binary.rows, w = bundle.binary.cols;
  TargetTensors<T> t;
  t.binary = Tensor<T>(1, h, w, 1);
  t.distance = Tensor<T>(1, h, w, 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      t.binary.at(0, r, c, 0) = T(bundle.binary(r, c));
      t.distance.at(0, r, c, 0) = T(bundle.distance.values(r, c));
    }
  }
  t.task1 = one_hot<T>(bundle.task1, kTaskClasses);
  t.task2 = one_hot<T>(bundle.task2, kTaskClasses);
  t.final = one_hot<T>(bundle.final.classes, kNumClasses);
  return t;
}

// Plain scalar losses, evaluated through the same kernels as the training
// graph. Probabilities are clamped to [1e-7, 1-1e-7] inside the logs; all
// three are means over pixels, so loss weights are resolution independent.

template <typename T>
T binary_ce(const Tensor<T>& pred, const Tensor<T>& target) {
  Graph<T> g(false, false);
  return g.value(g.bce_loss(g.input(pred), target))[0];
}

template <typename T>
T l1_distance(const Tensor<T>& pred, const Tensor<T>& target) {
  Graph<T> g(false, false);
  return g.value(g.l1_loss(g.input(pred), target))[0];
}

template <typename T>
T categorical_ce(const Tensor<T>& pred, const Tensor<T>& target) {
  Graph<T> g(false, false);
  return g.value(g.cce_loss(g.input(pred), target))[0];
}

template <typename T>
T total_loss(const NetworkOutputsT<T>& outputs, const TargetTensors<T>& targets,
             const LossWeights& w) {
  return T(w.lambda_bc) * binary_ce(outputs.binary, targets.binary) +
         T(w.lambda_dist) * l1_distance(outputs.distance, targets.distance) +
         T(w.lambda_mc1) * categorical_ce(outputs.task1, targets.task1) +
         T(w.lambda_mc2) * categorical_ce(outputs.task2, targets.task2) +
         T(w.lambda_mcf) * categorical_ce(outputs.final, targets.final);
}

// Graph-side composition used by the training loop. `ids` are the node ids
// of the five prediction maps.
template <typename T>
struct OutputIds {
  int binary = -1;
  int distance = -1;
  int task1 = -1;
  int task2 = -1;
  int final = -1;
};

template <typename T>
int total_loss_node(Graph<T>& g, const OutputIds<T>& out, const TargetTensors<T>& targets,
                    const LossWeights& w) {
  std::vector<std::pair<T, int>> terms;
  if (out.binary >= 0) terms.push_back({T(w.lambda_bc), g.bce_loss(out.binary, targets.binary)});
  if (out.distance >= 0)
    terms.push_back({T(w.lambda_dist), g.l1_loss(out.distance, targets.distance)});
  if (out.task1 >= 0) terms.push_back({T(w.lambda_mc1), g.cce_loss(out.task1, targets.task1)});
  if (out.task2 >= 0) terms.push_back({T(w.lambda_mc2), g.cce_loss(out.task2, targets.task2)});
  terms.push_back({T(w.lambda_mcf), g.cce_loss(out.final, targets.final)});
  return g.weighted_sum(terms);
}

}  // namespace nucgrade
