#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

namespace smrl {

// 64-byte aligned storage. Keeping every buffer on the same alignment keeps
// vectorized kernels on the same code path, which is what makes forward
// values and gradients bit-reproducible across allocations.
template <typename T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) {}

  T* allocate(std::size_t n) {
    std::size_t bytes = (n * sizeof(T) + Align - 1) / Align * Align;
    void* p = std::aligned_alloc(Align, bytes);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { std::free(p); }

  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  bool operator==(const AlignedAllocator&) const { return true; }
  bool operator!=(const AlignedAllocator&) const { return false; }
};

using AlignedVec = std::vector<double, AlignedAllocator<double>>;

// Dense tensor of 64-bit floats, row-major. Rank 1 (vectors) and rank 2
// (matrices) cover everything in this project; a rank-1 tensor of length n
// behaves as an n-by-1 column where a matrix is expected.
struct Tensor {
  std::vector<std::size_t> shape;
  AlignedVec data;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> s) {
    Tensor t;
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    t.shape = std::move(s);
    t.data.assign(n, 0.0);
    return t;
  }

  static Tensor vec(const std::vector<double>& v) {
    Tensor t;
    t.shape = {v.size()};
    t.data.assign(v.begin(), v.end());
    return t;
  }

  static Tensor full(std::vector<std::size_t> s, double fill) {
    Tensor t = zeros(std::move(s));
    for (double& x : t.data) x = fill;
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

}  // namespace smrl
