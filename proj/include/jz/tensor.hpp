#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "jz/common.hpp"

namespace jz {

/**
 * Dense row-major array of reals. Rank is dynamic but in practice
 * everything in the model is rank 1 or 2, so 2-D accessors are provided.
 */
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<real> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(count(shape), real(0));
  }
  Tensor(std::vector<std::size_t> s, std::vector<real> d) : shape(std::move(s)), data(std::move(d)) {
    require(data.size() == count(shape), "tensor: data length does not match shape");
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, real v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(real v) { return Tensor({1}, {v}); }
  static Tensor row(std::vector<real> d) {
    std::size_t n = d.size();
    return Tensor({n}, std::move(d));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return rank() >= 1 ? shape[0] : 1; }
  std::size_t cols() const {
    require(rank() == 2, "tensor: cols() on non-matrix");
    return shape[1];
  }

  real& at(std::size_t i) { return data[i]; }
  real at(std::size_t i) const { return data[i]; }
  real& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  real at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  real* rowptr(std::size_t i) { return data.data() + i * shape[1]; }
  const real* rowptr(std::size_t i) const { return data.data() + i * shape[1]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (real v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
  }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += "x";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }
};

// ---------------------------------------------------------------------------
// Raw matrix kernels. These are the only hot loops in the project; they are
// written so the inner loop runs over contiguous memory on both operands.
// ---------------------------------------------------------------------------

/// C += A(m x k) * B(k x n)
inline void matmul_nn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  for (std::size_t i = 0; i < m; ++i) {
    const real* arow = a.rowptr(i);
    real* crow = c.rowptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const real av = arow[p];
      const real* brow = b.rowptr(p);
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C += A(m x k) * B(n x k)^T
inline void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
  for (std::size_t i = 0; i < m; ++i) {
    const real* arow = a.rowptr(i);
    real* crow = c.rowptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      const real* brow = b.rowptr(j);
      real s = 0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

/// C += A(m x k)^T * B(m x n)
inline void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  for (std::size_t p = 0; p < m; ++p) {
    const real* arow = a.rowptr(p);
    const real* brow = b.rowptr(p);
    for (std::size_t i = 0; i < k; ++i) {
      const real av = arow[i];
      real* crow = c.rowptr(i);
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline Tensor matmul_nn(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.shape[1] == b.shape[0], "matmul: shape mismatch");
  Tensor c({a.shape[0], b.shape[1]});
  matmul_nn_acc(a, b, c);
  return c;
}

inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.shape[1] == b.shape[1], "matmul_nt: shape mismatch");
  Tensor c({a.shape[0], b.shape[0]});
  matmul_nt_acc(a, b, c);
  return c;
}

}  // namespace jz
