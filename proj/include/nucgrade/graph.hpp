#pragma once

#define EIGEN_DONT_PARALLELIZE

#include "nucgrade/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nucgrade {

// Named model parameter. Gradients accumulate across backward passes until
// zero_grad. `trainable=false` marks the parameter frozen for the optimizer;
// gradients are still computed so freeze phases stay observable.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(v), grad(v.shape()[0], v.shape()[1], v.shape()[2], v.shape()[3]) {}
  void zero_grad() { grad.set_zero(); }
};

// Batch-norm running statistics (buffers, not parameters).
template <typename T>
struct BnStats {
  std::string name;
  Tensor<T> running_mean;  // (1,1,1,C)
  Tensor<T> running_var;

  BnStats() = default;
  BnStats(std::string n, int c) : name(std::move(n)), running_mean(1, 1, 1, c), running_var(1, 1, 1, c) {
    running_var.fill(T(1));
  }
};

// Reverse-mode tape over NHWC tensors. Every reduction runs in a fixed
// order (serial or fixed-size blocks), so results are bitwise reproducible
// for a given build regardless of thread count.
template <typename T>
class Graph {
 public:
  static constexpr T kLossEps = T(1e-7);

  explicit Graph(bool training, bool record = true) : training_(training), record_(record) {}

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on demand
    std::function<void(Graph&)> backward;
    Parameter<T>* param = nullptr;
  };

  bool training() const { return training_; }
  bool recording() const { return record_; }

  const Tensor<T>& value(int id) const { return nodes_[std::size_t(id)].value; }
  Tensor<T>& grad(int id) { return ensure_grad(id); }
  std::size_t node_count() const { return nodes_.size(); }

  int input(const Tensor<T>& v) { return push(v); }

  int param(Parameter<T>& p) {
    const int id = push(p.value);
    nodes_[std::size_t(id)].param = &p;
    if (record_) {
      nodes_[std::size_t(id)].backward = [id](Graph& g) {
        Node& node = g.nodes_[std::size_t(id)];
        node.param->grad.vec() += node.grad.vec();
      };
    }
    return id;
  }

  // --- convolution -------------------------------------------------------

  // SAME-padded convolution; weight layout (kh,kw,cin,cout), optional bias.
  int conv2d(int x_id, Parameter<T>& weight, Parameter<T>* bias, int stride) {
    const Tensor<T>& x = value(x_id);
    const int kh = weight.value.n(), kw = weight.value.h();
    const int cin = weight.value.w(), cout = weight.value.c();
    if (x.c() != cin) throw std::invalid_argument("conv2d: channel mismatch");
    const int ho = ceil_div(x.h(), stride), wo = ceil_div(x.w(), stride);
    Tensor<T> y(x.n(), ho, wo, cout);
    conv_forward(x, weight.value, bias ? &bias->value : nullptr, y, stride);

    const int w_id = param(weight);
    const int b_id = bias ? param(*bias) : -1;
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, w_id, b_id, y_id, stride](Graph& g) {
        const Tensor<T>& x = g.value(x_id);
        const Tensor<T>& w = g.value(w_id);
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        conv_backward(x, w, dy, g.ensure_grad(x_id), g.ensure_grad(w_id),
                      b_id >= 0 ? &g.ensure_grad(b_id) : nullptr, stride);
      };
    }
    return y_id;
  }

  // --- normalization ------------------------------------------------------

  int batch_norm(int x_id, Parameter<T>& gamma, Parameter<T>& beta, BnStats<T>& stats,
                 T momentum = T(0.9), T eps = T(1e-5)) {
    const Tensor<T>& x = value(x_id);
    const int c = x.c();
    const std::int64_t rows = std::int64_t(x.n()) * x.h() * x.w();
    Tensor<T> mean(1, 1, 1, c), var(1, 1, 1, c);

    if (training_) {
      channel_mean_var(x, mean, var);
      for (int i = 0; i < c; ++i) {
        stats.running_mean[i] = momentum * stats.running_mean[i] + (T(1) - momentum) * mean[i];
        stats.running_var[i] = momentum * stats.running_var[i] + (T(1) - momentum) * var[i];
      }
    } else {
      mean = stats.running_mean.deep_copy();
      var = stats.running_var.deep_copy();
    }

    Tensor<T> inv_std(1, 1, 1, c);
    for (int i = 0; i < c; ++i) inv_std[i] = T(1) / std::sqrt(var[i] + eps);

    Tensor<T> y(x.n(), x.h(), x.w(), c);
    Tensor<T> xhat = record_ ? Tensor<T>(x.n(), x.h(), x.w(), c) : Tensor<T>();
    {
      auto xm = x.mat();
      auto ym = y.mat();
      const T* g = gamma.value.data();
      const T* b = beta.value.data();
#pragma omp parallel for schedule(static)
      for (std::int64_t r = 0; r < rows; ++r) {
        for (int i = 0; i < c; ++i) {
          const T h = (xm(r, i) - mean[i]) * inv_std[i];
          if (record_) xhat.mat()(r, i) = h;
          ym(r, i) = g[i] * h + b[i];
        }
      }
    }

    const int g_id = param(gamma);
    const int b_id = param(beta);
    const int y_id = push(y);
    if (record_) {
      const bool training = training_;
      nodes_[std::size_t(y_id)].backward = [x_id, g_id, b_id, y_id, xhat, inv_std, rows, c,
                                            training](Graph& g) {
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        const Tensor<T>& gamma_v = g.value(g_id);
        Tensor<T>& dx = g.ensure_grad(x_id);
        Tensor<T>& dgamma = g.ensure_grad(g_id);
        Tensor<T>& dbeta = g.ensure_grad(b_id);

        // per-channel sums of dy and dy*xhat, fixed block order
        Tensor<T> sum_dy(1, 1, 1, c), sum_dyx(1, 1, 1, c);
        channel_sums(dy, xhat, sum_dy, sum_dyx);
        for (int i = 0; i < c; ++i) {
          dgamma[i] += sum_dyx[i];
          dbeta[i] += sum_dy[i];
        }
        auto dym = dy.mat();
        auto dxm = dx.mat();
        auto xhm = xhat.mat();
        const T inv_rows = T(1) / T(rows);
        if (training) {
#pragma omp parallel for schedule(static)
          for (std::int64_t r = 0; r < rows; ++r) {
            for (int i = 0; i < c; ++i) {
              const T t = dym(r, i) - inv_rows * sum_dy[i] - xhm(r, i) * inv_rows * sum_dyx[i];
              dxm(r, i) += gamma_v[i] * inv_std[i] * t;
            }
          }
        } else {
#pragma omp parallel for schedule(static)
          for (std::int64_t r = 0; r < rows; ++r) {
            for (int i = 0; i < c; ++i) dxm(r, i) += gamma_v[i] * inv_std[i] * dym(r, i);
          }
        }
      };
    }
    return y_id;
  }

  // LayerNorm over channels, for (N,1,1,C) context vectors.
  int layer_norm(int x_id, Parameter<T>& gamma, Parameter<T>& beta, T eps = T(1e-5)) {
    const Tensor<T>& x = value(x_id);
    const int c = x.c();
    const std::int64_t rows = std::int64_t(x.n()) * x.h() * x.w();
    Tensor<T> y(x.n(), x.h(), x.w(), c);
    Tensor<T> xhat = record_ ? Tensor<T>(x.n(), x.h(), x.w(), c) : Tensor<T>();
    Tensor<T> inv_std(int(rows), 1, 1, 1);
    for (std::int64_t r = 0; r < rows; ++r) {
      double mean = 0.0, var = 0.0;
      for (int i = 0; i < c; ++i) mean += double(x.mat()(r, i));
      mean /= double(c);
      for (int i = 0; i < c; ++i) {
        const double d = double(x.mat()(r, i)) - mean;
        var += d * d;
      }
      var /= double(c);
      const T istd = T(1.0 / std::sqrt(var + double(eps)));
      inv_std[r] = istd;
      for (int i = 0; i < c; ++i) {
        const T h = (x.mat()(r, i) - T(mean)) * istd;
        if (record_) xhat.mat()(r, i) = h;
        y.mat()(r, i) = gamma.value[i] * h + beta.value[i];
      }
    }
    const int g_id = param(gamma);
    const int b_id = param(beta);
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, g_id, b_id, y_id, xhat, inv_std, rows,
                                            c](Graph& g) {
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        const Tensor<T>& gamma_v = g.value(g_id);
        Tensor<T>& dx = g.ensure_grad(x_id);
        Tensor<T>& dgamma = g.ensure_grad(g_id);
        Tensor<T>& dbeta = g.ensure_grad(b_id);
        for (std::int64_t r = 0; r < rows; ++r) {
          T sum_dh = T(0), sum_dhx = T(0);
          for (int i = 0; i < c; ++i) {
            const T dh = dy.mat()(r, i) * gamma_v[i];
            sum_dh += dh;
            sum_dhx += dh * xhat.mat()(r, i);
            dgamma[i] += dy.mat()(r, i) * xhat.mat()(r, i);
            dbeta[i] += dy.mat()(r, i);
          }
          const T inv_c = T(1) / T(c);
          for (int i = 0; i < c; ++i) {
            const T dh = dy.mat()(r, i) * gamma_v[i];
            dx.mat()(r, i) += inv_std[r] * (dh - inv_c * sum_dh - xhat.mat()(r, i) * inv_c * sum_dhx);
          }
        }
      };
    }
    return y_id;
  }

  // --- activations --------------------------------------------------------

  int relu(int x_id) {
    const Tensor<T>& x = value(x_id);
    Tensor<T> y(x.n(), x.h(), x.w(), x.c());
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, y_id](Graph& g) {
        const Tensor<T>& y = g.value(y_id);
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        Tensor<T>& dx = g.ensure_grad(x_id);
        const std::int64_t n = y.size();
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) dx[i] += y[i] > T(0) ? dy[i] : T(0);
      };
    }
    return y_id;
  }

  int sigmoid(int x_id) {
    const Tensor<T>& x = value(x_id);
    Tensor<T> y(x.n(), x.h(), x.w(), x.c());
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, y_id](Graph& g) {
        const Tensor<T>& y = g.value(y_id);
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        Tensor<T>& dx = g.ensure_grad(x_id);
        const std::int64_t n = y.size();
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
      };
    }
    return y_id;
  }

  // softmax over the channel axis
  int softmax(int x_id) {
    const Tensor<T>& x = value(x_id);
    const int c = x.c();
    const std::int64_t rows = std::int64_t(x.n()) * x.h() * x.w();
    Tensor<T> y(x.n(), x.h(), x.w(), c);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
      T m = x.mat()(r, 0);
      for (int i = 1; i < c; ++i) m = std::max(m, x.mat()(r, i));
      T sum = T(0);
      for (int i = 0; i < c; ++i) {
        const T e = std::exp(x.mat()(r, i) - m);
        y.mat()(r, i) = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (int i = 0; i < c; ++i) y.mat()(r, i) *= inv;
    }
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, y_id, rows, c](Graph& g) {
        const Tensor<T>& y = g.value(y_id);
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        Tensor<T>& dx = g.ensure_grad(x_id);
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < rows; ++r) {
          T dot = T(0);
          for (int i = 0; i < c; ++i) dot += dy.mat()(r, i) * y.mat()(r, i);
          for (int i = 0; i < c; ++i) dx.mat()(r, i) += y.mat()(r, i) * (dy.mat()(r, i) - dot);
        }
      };
    }
    return y_id;
  }

  // --- structure ops ------------------------------------------------------

  int add(int a_id, int b_id) {
    const Tensor<T>& a = value(a_id);
    const Tensor<T>& b = value(b_id);
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> y(a.n(), a.h(), a.w(), a.c());
    y.vec() = a.vec() + b.vec();
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [a_id, b_id, y_id](Graph& g) {
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        g.ensure_grad(a_id).vec() += dy.vec();
        g.ensure_grad(b_id).vec() += dy.vec();
      };
    }
    return y_id;
  }

  int concat_channels(const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("concat: empty input list");
    const Tensor<T>& first = value(ids[0]);
    int c_total = 0;
    for (int id : ids) {
      const Tensor<T>& t = value(id);
      if (t.n() != first.n() || t.h() != first.h() || t.w() != first.w()) {
        throw std::invalid_argument("concat: spatial shape mismatch");
      }
      c_total += t.c();
    }
    Tensor<T> y(first.n(), first.h(), first.w(), c_total);
    const std::int64_t rows = std::int64_t(first.n()) * first.h() * first.w();
    int offset = 0;
    for (int id : ids) {
      const Tensor<T>& t = value(id);
      auto ym = y.mat();
      ym.block(0, offset, rows, t.c()) = t.mat();
      offset += t.c();
    }
    const int y_id = push(y);
    if (record_) {
      std::vector<int> srcs = ids;
      nodes_[std::size_t(y_id)].backward = [srcs, y_id, rows](Graph& g) {
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        int offset = 0;
        for (int id : srcs) {
          Tensor<T>& dx = g.ensure_grad(id);
          dx.mat() += dy.mat().block(0, offset, rows, dx.c());
          offset += dx.c();
        }
      };
    }
    return y_id;
  }

  int maxpool3x3s2(int x_id) {
    const Tensor<T>& x = value(x_id);
    const int ho = ceil_div(x.h(), 2), wo = ceil_div(x.w(), 2);
    const int pad_h = std::max((ho - 1) * 2 + 3 - x.h(), 0) / 2;
    const int pad_w = std::max((wo - 1) * 2 + 3 - x.w(), 0) / 2;
    Tensor<T> y(x.n(), ho, wo, x.c());
    auto arg = std::make_shared<std::vector<std::int64_t>>(std::size_t(y.size()));
#pragma omp parallel for schedule(static)
    for (int n = 0; n < x.n(); ++n) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          for (int c = 0; c < x.c(); ++c) {
            T best = -std::numeric_limits<T>::infinity();
            std::int64_t best_idx = -1;
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 + ky - pad_h, ix = ox * 2 + kx - pad_w;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                const T v = x.at(n, iy, ix, c);
                if (v > best) {
                  best = v;
                  best_idx = std::int64_t(x.index(n, iy, ix, c));
                }
              }
            }
            y.at(n, oy, ox, c) = best;
            (*arg)[y.index(n, oy, ox, c)] = best_idx;
          }
        }
      }
    }
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, y_id, arg](Graph& g) {
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        Tensor<T>& dx = g.ensure_grad(x_id);
        const std::int64_t n = dy.size();
        for (std::int64_t i = 0; i < n; ++i) {
          if ((*arg)[std::size_t(i)] >= 0) dx[(*arg)[std::size_t(i)]] += dy[i];
        }
      };
    }
    return y_id;
  }

  // Bilinear upsampling by an integer factor (half-pixel convention).
  int upsample_bilinear(int x_id, int factor) {
    if (factor == 1) return x_id;
    const Tensor<T>& x = value(x_id);
    const int ho = x.h() * factor, wo = x.w() * factor;
    Tensor<T> y(x.n(), ho, wo, x.c());
    const auto ycoef = interp_coefs(x.h(), factor);
    const auto xcoef = interp_coefs(x.w(), factor);
    const int c = x.c();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < x.n(); ++n) {
      for (int oy = 0; oy < ho; ++oy) {
        const auto& [y0, y1, wy0, wy1] = ycoef[std::size_t(oy)];
        for (int ox = 0; ox < wo; ++ox) {
          const auto& [x0, x1, wx0, wx1] = xcoef[std::size_t(ox)];
          for (int i = 0; i < c; ++i) {
            y.at(n, oy, ox, i) = T(wy0 * wx0) * x.at(n, y0, x0, i) +
                                 T(wy0 * wx1) * x.at(n, y0, x1, i) +
                                 T(wy1 * wx0) * x.at(n, y1, x0, i) +
                                 T(wy1 * wx1) * x.at(n, y1, x1, i);
          }
        }
      }
    }
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, y_id, ycoef, xcoef, ho, wo, c](Graph& g) {
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        Tensor<T>& dx = g.ensure_grad(x_id);
#pragma omp parallel for schedule(static)
        for (int n = 0; n < dy.n(); ++n) {
          for (int oy = 0; oy < ho; ++oy) {
            const auto& [y0, y1, wy0, wy1] = ycoef[std::size_t(oy)];
            for (int ox = 0; ox < wo; ++ox) {
              const auto& [x0, x1, wx0, wx1] = xcoef[std::size_t(ox)];
              for (int i = 0; i < c; ++i) {
                const T d = dy.at(n, oy, ox, i);
                dx.at(n, y0, x0, i) += T(wy0 * wx0) * d;
                dx.at(n, y0, x1, i) += T(wy0 * wx1) * d;
                dx.at(n, y1, x0, i) += T(wy1 * wx0) * d;
                dx.at(n, y1, x1, i) += T(wy1 * wx1) * d;
              }
            }
          }
        }
      };
    }
    return y_id;
  }

  // Global-context pooling: softmax over space of `logits` (N,H,W,1), then
  // the attention-weighted sum of x, giving (N,1,1,C).
  int spatial_attention_pool(int x_id, int logits_id) {
    const Tensor<T>& x = value(x_id);
    const Tensor<T>& a = value(logits_id);
    if (a.c() != 1 || a.n() != x.n() || a.h() != x.h() || a.w() != x.w()) {
      throw std::invalid_argument("spatial_attention_pool: shape mismatch");
    }
    const std::int64_t hw = std::int64_t(x.h()) * x.w();
    const int c = x.c();
    Tensor<T> alpha(x.n(), x.h(), x.w(), 1);
    Tensor<T> ctx(x.n(), 1, 1, c);
    for (int n = 0; n < x.n(); ++n) {
      const std::int64_t base = n * hw;
      T m = a[base];
      for (std::int64_t p = 1; p < hw; ++p) m = std::max(m, a[base + p]);
      T sum = T(0);
      for (std::int64_t p = 0; p < hw; ++p) {
        const T e = std::exp(a[base + p] - m);
        alpha[base + p] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (std::int64_t p = 0; p < hw; ++p) alpha[base + p] *= inv;
      for (std::int64_t p = 0; p < hw; ++p) {
        const T w = alpha[base + p];
        for (int i = 0; i < c; ++i) ctx.at(n, 0, 0, i) += w * x.mat()(base + p, i);
      }
    }
    const int y_id = push(ctx);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, logits_id, y_id, alpha, hw, c](Graph& g) {
        const Tensor<T>& x = g.value(x_id);
        const Tensor<T>& dctx = g.nodes_[std::size_t(y_id)].grad;
        Tensor<T>& dx = g.ensure_grad(x_id);
        Tensor<T>& da = g.ensure_grad(logits_id);
        for (int n = 0; n < x.n(); ++n) {
          const std::int64_t base = n * hw;
          // dalpha_p = dot(dctx_n, x_p); softmax backward onto logits
          T dot_alpha = T(0);
          std::vector<T> dalpha(std::size_t(hw));
          for (std::int64_t p = 0; p < hw; ++p) {
            T d = T(0);
            for (int i = 0; i < c; ++i) d += dctx.at(n, 0, 0, i) * x.mat()(base + p, i);
            dalpha[std::size_t(p)] = d;
            dot_alpha += d * alpha[base + p];
          }
          for (std::int64_t p = 0; p < hw; ++p) {
            da[base + p] += alpha[base + p] * (dalpha[std::size_t(p)] - dot_alpha);
            const T w = alpha[base + p];
            for (int i = 0; i < c; ++i) dx.mat()(base + p, i) += w * dctx.at(n, 0, 0, i);
          }
        }
      };
    }
    return y_id;
  }

  // x (N,H,W,C) + ctx (N,1,1,C), broadcast over space.
  int broadcast_add(int x_id, int ctx_id) {
    const Tensor<T>& x = value(x_id);
    const Tensor<T>& t = value(ctx_id);
    if (t.n() != x.n() || t.h() != 1 || t.w() != 1 || t.c() != x.c()) {
      throw std::invalid_argument("broadcast_add: shape mismatch");
    }
    Tensor<T> y(x.n(), x.h(), x.w(), x.c());
    const std::int64_t hw = std::int64_t(x.h()) * x.w();
    const int c = x.c();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < x.n(); ++n) {
      for (std::int64_t p = 0; p < hw; ++p) {
        for (int i = 0; i < c; ++i) {
          y.mat()(n * hw + p, i) = x.mat()(n * hw + p, i) + t.at(n, 0, 0, i);
        }
      }
    }
    const int y_id = push(y);
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [x_id, ctx_id, y_id, hw, c](Graph& g) {
        const Tensor<T>& dy = g.nodes_[std::size_t(y_id)].grad;
        Tensor<T>& dx = g.ensure_grad(x_id);
        Tensor<T>& dt = g.ensure_grad(ctx_id);
        dx.vec() += dy.vec();
        for (int n = 0; n < dy.n(); ++n) {
          for (std::int64_t p = 0; p < hw; ++p) {
            for (int i = 0; i < c; ++i) dt.at(n, 0, 0, i) += dy.mat()(n * hw + p, i);
          }
        }
      };
    }
    return y_id;
  }

  // --- losses (targets are constants) --------------------------------------

  int bce_loss(int pred_id, const Tensor<T>& target) {
    const Tensor<T>& p = value(pred_id);
    if (!p.same_shape(target)) throw std::invalid_argument("binary_ce: shape mismatch");
    const std::int64_t n = p.size();
    const double total = blocked_sum<double>(n, 1 << 16, [&](std::int64_t lo, std::int64_t hi) {
      double s = 0.0;
      for (std::int64_t i = lo; i < hi; ++i) {
        const double q = std::clamp(double(p[i]), double(kLossEps), 1.0 - double(kLossEps));
        const double t = double(target[i]);
        s += -(t * std::log(q) + (1.0 - t) * std::log1p(-q));
      }
      return s;
    });
    const int y_id = push(Tensor<T>::scalar(T(total / double(n))));
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [pred_id, y_id, target, n](Graph& g) {
        const T d = g.nodes_[std::size_t(y_id)].grad[0];
        const Tensor<T>& p = g.value(pred_id);
        Tensor<T>& dp = g.ensure_grad(pred_id);
        const T inv_n = T(1) / T(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
          if (p[i] <= kLossEps || p[i] >= T(1) - kLossEps) continue;  // clamped: flat
          const T t = target[i];
          dp[i] += d * inv_n * (-t / p[i] + (T(1) - t) / (T(1) - p[i]));
        }
      };
    }
    return y_id;
  }

  int l1_loss(int pred_id, const Tensor<T>& target) {
    const Tensor<T>& p = value(pred_id);
    if (!p.same_shape(target)) throw std::invalid_argument("l1_distance: shape mismatch");
    const std::int64_t n = p.size();
    const double total = blocked_sum<double>(n, 1 << 16, [&](std::int64_t lo, std::int64_t hi) {
      double s = 0.0;
      for (std::int64_t i = lo; i < hi; ++i) s += std::abs(double(p[i]) - double(target[i]));
      return s;
    });
    const int y_id = push(Tensor<T>::scalar(T(total / double(n))));
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [pred_id, y_id, target, n](Graph& g) {
        const T d = g.nodes_[std::size_t(y_id)].grad[0];
        const Tensor<T>& p = g.value(pred_id);
        Tensor<T>& dp = g.ensure_grad(pred_id);
        const T inv_n = T(1) / T(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
          const T diff = p[i] - target[i];
          dp[i] += d * inv_n * (diff > T(0) ? T(1) : diff < T(0) ? T(-1) : T(0));
        }
      };
    }
    return y_id;
  }

  // Mean over pixels of -sum_c t_c log p_c; target is one-hot.
  int cce_loss(int pred_id, const Tensor<T>& target) {
    const Tensor<T>& p = value(pred_id);
    if (!p.same_shape(target)) throw std::invalid_argument("categorical_ce: shape mismatch");
    const std::int64_t n = p.size();
    const std::int64_t pixels = std::int64_t(p.n()) * p.h() * p.w();
    const double total = blocked_sum<double>(n, 1 << 16, [&](std::int64_t lo, std::int64_t hi) {
      double s = 0.0;
      for (std::int64_t i = lo; i < hi; ++i) {
        if (target[i] == T(0)) continue;
        const double q = std::clamp(double(p[i]), double(kLossEps), 1.0 - double(kLossEps));
        s += -double(target[i]) * std::log(q);
      }
      return s;
    });
    const int y_id = push(Tensor<T>::scalar(T(total / double(pixels))));
    if (record_) {
      nodes_[std::size_t(y_id)].backward = [pred_id, y_id, target, n, pixels](Graph& g) {
        const T d = g.nodes_[std::size_t(y_id)].grad[0];
        const Tensor<T>& p = g.value(pred_id);
        Tensor<T>& dp = g.ensure_grad(pred_id);
        const T inv = T(1) / T(pixels);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
          if (target[i] == T(0)) continue;
          if (p[i] <= kLossEps || p[i] >= T(1) - kLossEps) continue;
          dp[i] += d * inv * (-target[i] / p[i]);
        }
      };
    }
    return y_id;
  }

  // Weighted sum of scalar nodes.
  int weighted_sum(const std::vector<std::pair<T, int>>& terms) {
    T total = T(0);
    for (const auto& [w, id] : terms) total += w * value(id)[0];
    const int y_id = push(Tensor<T>::scalar(total));
    if (record_) {
      std::vector<std::pair<T, int>> ts = terms;
      nodes_[std::size_t(y_id)].backward = [ts, y_id](Graph& g) {
        const T d = g.nodes_[std::size_t(y_id)].grad[0];
        for (const auto& [w, id] : ts) g.ensure_grad(id)[0] += w * d;
      };
    }
    return y_id;
  }

  // --- engine ---------------------------------------------------------------

  void backward(int loss_id) {
    if (!record_) throw std::logic_error("backward on a non-recording graph");
    ensure_grad(loss_id).fill(T(1));
    for (std::int64_t i = std::int64_t(loss_id); i >= 0; --i) {
      Node& node = nodes_[std::size_t(i)];
      if (node.backward && !node.grad.empty()) node.backward(*this);
    }
  }

 private:
  static int ceil_div(int a, int b) { return (a + b - 1) / b; }

  int push(const Tensor<T>& v) {
    nodes_.push_back(Node{v, Tensor<T>(), nullptr, nullptr});
    return int(nodes_.size()) - 1;
  }

  Tensor<T>& ensure_grad(int id) {
    Node& node = nodes_[std::size_t(id)];
    if (node.grad.empty()) {
      const auto& s = node.value.shape();
      node.grad = Tensor<T>(s[0], s[1], s[2], s[3]);
    }
    return node.grad;
  }

  struct Coef {
    int i0, i1;
    double w0, w1;
  };
  static std::vector<Coef> interp_coefs(int in, int factor) {
    std::vector<Coef> coefs(std::size_t(in) * factor);
    for (int o = 0; o < in * factor; ++o) {
      const double src = (double(o) + 0.5) / double(factor) - 0.5;
      int i0 = int(std::floor(src));
      const double frac = src - double(i0);
      int i1 = i0 + 1;
      i0 = std::clamp(i0, 0, in - 1);
      i1 = std::clamp(i1, 0, in - 1);
      coefs[std::size_t(o)] = {i0, i1, 1.0 - frac, frac};
    }
    return coefs;
  }

  // ---- convolution kernels ----

  static void conv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                           Tensor<T>& y, int stride) {
    const int kh = w.n(), kw = w.h(), cin = w.w(), cout = w.c();
    const int ho = y.h(), wo = y.w();
    const int pad_h = std::max((ho - 1) * stride + kh - x.h(), 0) / 2;
    const int pad_w = std::max((wo - 1) * stride + kw - x.w(), 0) / 2;
    const std::int64_t rows = std::int64_t(y.n()) * ho * wo;
    const int k_cols = kh * kw * cin;
    const std::int64_t chunk = 4096;
    const std::int64_t n_chunks = (rows + chunk - 1) / chunk;
    typename Tensor<T>::ConstMatrixMap wmat(w.data(), k_cols, cout);

#pragma omp parallel for schedule(static, 1)
    for (std::int64_t ci = 0; ci < n_chunks; ++ci) {
      const std::int64_t lo = ci * chunk, hi = std::min(rows, lo + chunk);
      typename Tensor<T>::Matrix col(hi - lo, k_cols);
      im2col(x, lo, hi, kh, kw, stride, pad_h, pad_w, ho, wo, col);
      typename Tensor<T>::MatrixMap out(y.data() + lo * cout, hi - lo, cout);
      out.noalias() = col * wmat;
      if (bias) {
        typename Tensor<T>::ConstMatrixMap b(bias->data(), 1, cout);
        out.rowwise() += b.row(0);
      }
    }
  }

  static void conv_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                            Tensor<T>& dx, Tensor<T>& dw, Tensor<T>* db, int stride) {
    const int kh = w.n(), kw = w.h(), cin = w.w(), cout = w.c();
    const int ho = dy.h(), wo = dy.w();
    const int pad_h = std::max((ho - 1) * stride + kh - x.h(), 0) / 2;
    const int pad_w = std::max((wo - 1) * stride + kw - x.w(), 0) / 2;
    const std::int64_t rows = std::int64_t(dy.n()) * ho * wo;
    const int k_cols = kh * kw * cin;
    const std::int64_t chunk = 4096;
    const std::int64_t n_chunks = (rows + chunk - 1) / chunk;
    typename Tensor<T>::ConstMatrixMap wmat(w.data(), k_cols, cout);
    typename Tensor<T>::ConstMatrixMap dym(dy.data(), rows, cout);

    // dW: per-chunk partials, combined in chunk order
    std::vector<typename Tensor<T>::Matrix> dw_parts(std::size_t(n_chunks));
    // dX: full dcol buffer, GEMM per chunk, then one serial col2im pass
    typename Tensor<T>::Matrix dcol(rows, k_cols);

#pragma omp parallel for schedule(static, 1)
    for (std::int64_t ci = 0; ci < n_chunks; ++ci) {
      const std::int64_t lo = ci * chunk, hi = std::min(rows, lo + chunk);
      typename Tensor<T>::Matrix col(hi - lo, k_cols);
      im2col(x, lo, hi, kh, kw, stride, pad_h, pad_w, ho, wo, col);
      dw_parts[std::size_t(ci)].noalias() = col.transpose() * dym.middleRows(lo, hi - lo);
      dcol.middleRows(lo, hi - lo).noalias() = dym.middleRows(lo, hi - lo) * wmat.transpose();
    }

    typename Tensor<T>::MatrixMap dwm(dw.data(), k_cols, cout);
    for (std::int64_t ci = 0; ci < n_chunks; ++ci) dwm += dw_parts[std::size_t(ci)];

    if (db) {
      typename Tensor<T>::MatrixMap dbm(db->data(), 1, cout);
      const std::int64_t block = 4096;
      for (std::int64_t lo = 0; lo < rows; lo += block) {
        const std::int64_t hi = std::min(rows, lo + block);
        dbm.row(0) += dym.middleRows(lo, hi - lo).colwise().sum();
      }
    }

    // serial col2im scatter (overlapping windows), fixed order
    const int xh = x.h(), xw = x.w();
    for (std::int64_t r = 0; r < rows; ++r) {
      const int n = int(r / (std::int64_t(ho) * wo));
      const int rem = int(r % (std::int64_t(ho) * wo));
      const int oy = rem / wo, ox = rem % wo;
      int col_idx = 0;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad_h;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad_w;
          if (iy >= 0 && iy < xh && ix >= 0 && ix < xw) {
            T* dst = dx.data() + dx.index(n, iy, ix, 0);
            const T* src = dcol.data() + r * k_cols + col_idx;
            for (int i = 0; i < cin; ++i) dst[i] += src[i];
          }
          col_idx += cin;
        }
      }
    }
  }

  static void im2col(const Tensor<T>& x, std::int64_t row_lo, std::int64_t row_hi, int kh, int kw,
                     int stride, int pad_h, int pad_w, int ho, int wo,
                     typename Tensor<T>::Matrix& col) {
    const int cin = x.c();
    const int xh = x.h(), xw = x.w();
    for (std::int64_t r = row_lo; r < row_hi; ++r) {
      const int n = int(r / (std::int64_t(ho) * wo));
      const int rem = int(r % (std::int64_t(ho) * wo));
      const int oy = rem / wo, ox = rem % wo;
      T* dst = col.data() + (r - row_lo) * col.cols();
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad_h;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad_w;
          if (iy >= 0 && iy < xh && ix >= 0 && ix < xw) {
            const T* src = x.data() + x.index(n, iy, ix, 0);
            for (int i = 0; i < cin; ++i) dst[i] = src[i];
          } else {
            for (int i = 0; i < cin; ++i) dst[i] = T(0);
          }
          dst += cin;
        }
      }
    }
  }

  static void channel_mean_var(const Tensor<T>& x, Tensor<T>& mean, Tensor<T>& var) {
    const int c = x.c();
    const std::int64_t rows = std::int64_t(x.n()) * x.h() * x.w();
    auto xm = x.mat();
    std::vector<double> sum(std::size_t(c), 0.0), sum2(std::size_t(c), 0.0);
    const std::int64_t block = 4096;
    for (std::int64_t lo = 0; lo < rows; lo += block) {
      const std::int64_t hi = std::min(rows, lo + block);
      for (std::int64_t r = lo; r < hi; ++r) {
        for (int i = 0; i < c; ++i) {
          const double v = double(xm(r, i));
          sum[std::size_t(i)] += v;
          sum2[std::size_t(i)] += v * v;
        }
      }
    }
    for (int i = 0; i < c; ++i) {
      const double m = sum[std::size_t(i)] / double(rows);
      mean[i] = T(m);
      var[i] = T(std::max(0.0, sum2[std::size_t(i)] / double(rows) - m * m));
    }
  }

  static void channel_sums(const Tensor<T>& dy, const Tensor<T>& xhat, Tensor<T>& sum_dy,
                           Tensor<T>& sum_dyx) {
    const int c = dy.c();
    const std::int64_t rows = std::int64_t(dy.n()) * dy.h() * dy.w();
    auto dym = dy.mat();
    auto xm = xhat.mat();
    std::vector<double> s1(std::size_t(c), 0.0), s2(std::size_t(c), 0.0);
    for (std::int64_t r = 0; r < rows; ++r) {
      for (int i = 0; i < c; ++i) {
        s1[std::size_t(i)] += double(dym(r, i));
        s2[std::size_t(i)] += double(dym(r, i)) * double(xm(r, i));
      }
    }
    for (int i = 0; i < c; ++i) {
      sum_dy[i] = T(s1[std::size_t(i)]);
      sum_dyx[i] = T(s2[std::size_t(i)]);
    }
  }

  std::vector<Node> nodes_;
  bool training_;
  bool record_;
};

}  // namespace nucgrade
