#include <algorithm>
#include <sstream>

#include "vdet/tensor.hpp"

namespace vdet {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? ", " : "") << shape[i];
  ss << ']';
  return ss.str();
}

namespace ops {

// Loop orders keep the innermost loop contiguous so it vectorizes without
// reassociating any reduction; results are bit-reproducible.

template <typename S>
void matmul(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, S(0));
  for (std::size_t i = 0; i < m; ++i) {
    S* crow = c + i * n;
    const S* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = arow[p];
      const S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename S>
void matmul_at_b_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const S* arow = a + i * k;
    const S* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = arow[p];
      S* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename S>
void matmul_a_bt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate) {
  std::vector<S> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  matmul(a, bt.data(), c, m, k, n, accumulate);
}

template void matmul<float>(const float*, const float*, float*, std::size_t, std::size_t,
                            std::size_t, bool);
template void matmul<double>(const double*, const double*, double*, std::size_t, std::size_t,
                             std::size_t, bool);
template void matmul_at_b_acc<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                     std::size_t);
template void matmul_at_b_acc<double>(const double*, const double*, double*, std::size_t,
                                      std::size_t, std::size_t);
template void matmul_a_bt<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                 std::size_t, bool);
template void matmul_a_bt<double>(const double*, const double*, double*, std::size_t, std::size_t,
                                  std::size_t, bool);

}  // namespace ops
}  // namespace vdet
