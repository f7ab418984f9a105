#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "vdet/common.hpp"

namespace vdet {

/// Dense row-major tensor.
template <typename S>
struct BasicTensor {
  std::vector<std::size_t> shape;
  std::vector<S> data;

  BasicTensor() = default;
  explicit BasicTensor(std::vector<std::size_t> dims, S fill = S(0))
      : shape(std::move(dims)), data(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  S* row(std::size_t r) { return data.data() + r * cols(); }
  const S* row(std::size_t r) const { return data.data() + r * cols(); }

  void fill(S value) { std::fill(data.begin(), data.end(), value); }

  bool operator==(const BasicTensor&) const = default;
};

using Tensor = BasicTensor<float>;

std::string shape_string(const std::vector<std::size_t>& shape);

namespace ops {

/// c[m,n] = a[m,k] * b[k,n] (+ c when accumulate).
template <typename S>
void matmul(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate = false);

/// c[k,n] += a[m,k]^T * b[m,n]
template <typename S>
void matmul_at_b_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n);

/// c[m,n] (+)= a[m,k] * b[n,k]^T
template <typename S>
void matmul_a_bt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate = false);

}  // namespace ops
}  // namespace vdet
