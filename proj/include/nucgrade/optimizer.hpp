#pragma once

#include "nucgrade/graph.hpp"

#include <cmath>
#include <vector>

namespace nucgrade {

// Adam with a shared step counter. Moment slots follow the parameter list
// order; frozen parameters are skipped entirely (their moments stay zero).
template <typename T>
class Adam {
 public:
  explicit Adam(const std::vector<Parameter<T>*>& params) {
    for (auto* p : params) {
      const auto& s = p->value.shape();
      m_.emplace_back(s[0], s[1], s[2], s[3]);
      v_.emplace_back(s[0], s[1], s[2], s[3]);
    }
  }

  void step(const std::vector<Parameter<T>*>& params, double lr) {
    ++t_;
    const T b1 = T(0.9), b2 = T(0.999), eps = T(1e-8);
    const T c1 = T(1.0 / (1.0 - std::pow(0.9, double(t_))));
    const T c2 = T(1.0 / (1.0 - std::pow(0.999, double(t_))));
    const T tlr = T(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i];
      if (!p.trainable) continue;
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      const std::int64_t n = p.value.size();
      for (std::int64_t k = 0; k < n; ++k) {
        const T g = p.grad[k];
        m[k] = b1 * m[k] + (T(1) - b1) * g;
        v[k] = b2 * v[k] + (T(1) - b2) * g * g;
        p.value[k] -= tlr * (m[k] * c1) / (std::sqrt(v[k] * c2) + eps);
      }
    }
  }

  long long step_count() const { return t_; }
  void set_step_count(long long t) { t_ = t; }
  std::vector<Tensor<T>>& moments_m() { return m_; }
  std::vector<Tensor<T>>& moments_v() { return v_; }

 private:
  std::vector<Tensor<T>> m_, v_;
  long long t_ = 0;
};

}  // namespace nucgrade
