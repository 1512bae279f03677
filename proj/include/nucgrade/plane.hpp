#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace nucgrade {

// Dense row-major 2D array of scalars, the shared currency of label maps,
// masks and distance maps.
template <typename T>
struct Plane {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Plane() = default;
  Plane(int r, int c, T fill = T{}) : rows(r), cols(c), v(std::size_t(r) * std::size_t(c), fill) {}

  T& operator()(int r, int c) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return v[std::size_t(r) * cols + c];
  }
  const T& operator()(int r, int c) const {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return v[std::size_t(r) * cols + c];
  }

  bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
  std::size_t size() const { return v.size(); }
  template <typename U>
  bool same_shape(const Plane<U>& o) const {
    return rows == o.rows && cols == o.cols;
  }

  using EigenMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstEigenMap =
      Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  EigenMap map() { return EigenMap(v.data(), rows, cols); }
  ConstEigenMap map() const { return ConstEigenMap(v.data(), rows, cols); }
};

template <typename T>
bool operator==(const Plane<T>& a, const Plane<T>& b) {
  return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
}

}  // namespace nucgrade
