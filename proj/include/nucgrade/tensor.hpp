#pragma once

#include <Eigen/Core>

#include <array>
#include <cassert>
#include <cstdint>
#include <memory>
#include <vector>

namespace nucgrade {

// Dense NHWC tensor templated on scalar. Copies are shallow (shared buffer);
// ops allocate fresh outputs, so aliasing never bites in practice.
// Convolution weights reuse the same container with the convention
// (kh, kw, cin, cout) mapped onto (n, h, w, c).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int h, int w, int c)
      : shape_{n, h, w, c},
        data_(std::make_shared<std::vector<T>>(std::size_t(n) * h * w * c, T(0))) {}

  static Tensor zeros(int n, int h, int w, int c) { return Tensor(n, h, w, c); }
  static Tensor scalar(T v) {
    Tensor t(1, 1, 1, 1);
    (*t.data_)[0] = v;
    return t;
  }

  int n() const { return shape_[0]; }
  int h() const { return shape_[1]; }
  int w() const { return shape_[2]; }
  int c() const { return shape_[3]; }
  const std::array<int, 4>& shape() const { return shape_; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::int64_t size() const {
    return std::int64_t(shape_[0]) * shape_[1] * shape_[2] * shape_[3];
  }
  bool empty() const { return !data_ || data_->empty(); }

  T* data() { return data_->data(); }
  const T* data() const { return data_->data(); }

  T& operator[](std::int64_t i) { return (*data_)[std::size_t(i)]; }
  const T& operator[](std::int64_t i) const { return (*data_)[std::size_t(i)]; }

  T& at(int n, int h, int w, int c) { return (*data_)[index(n, h, w, c)]; }
  const T& at(int n, int h, int w, int c) const { return (*data_)[index(n, h, w, c)]; }

  std::size_t index(int n, int h, int w, int c) const {
    return ((std::size_t(n) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
  }

  Tensor deep_copy() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<T>>(*data_);
    return t;
  }

  // Same buffer viewed under a different shape; element count must match.
  Tensor reshaped(int n, int h, int w, int c) const {
    assert(std::int64_t(n) * h * w * c == size());
    Tensor t = *this;
    t.shape_ = {n, h, w, c};
    return t;
  }

  void fill(T v) { std::fill(data_->begin(), data_->end(), v); }
  void set_zero() { fill(T(0)); }

  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
  using ConstVectorMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

  // (n*h*w) x c matrix view: one row per pixel.
  MatrixMap mat() { return MatrixMap(data(), std::int64_t(n()) * h() * w(), c()); }
  ConstMatrixMap mat() const { return ConstMatrixMap(data(), std::int64_t(n()) * h() * w(), c()); }

  VectorMap vec() { return VectorMap(data(), size()); }
  ConstVectorMap vec() const { return ConstVectorMap(data(), size()); }

 private:
  std::array<int, 4> shape_{0, 0, 0, 0};
  std::shared_ptr<std::vector<T>> data_;
};

// Deterministic blocked sum: partial sums over fixed-size row blocks are
// combined in block order, so the result does not depend on thread count.
template <typename T, typename F>
T blocked_sum(std::int64_t count, std::int64_t block, F&& partial) {
  T total = T(0);
  for (std::int64_t start = 0; start < count; start += block) {
    total += partial(start, std::min(count, start + block));
  }
  return total;
}

}  // namespace nucgrade
