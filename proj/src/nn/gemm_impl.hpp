#pragma once

// Reference gemm loop nest over dot and axpy; the scalar table uses it.

#include <algorithm>
#include <cstddef>

namespace ngd::nn::kernels::detail {

template <auto Dot, auto Axpy>
void gemm_impl(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
               std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc,
               bool accumulate) {
  if (!accumulate)
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0);

  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * ldc;
      const double* arow = a + i * lda;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av != 0.0) Axpy(av, b + p * ldb, crow, n);
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * lda;
      double* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += Dot(arow, b + j * ldb, k);
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* acol = a + p * lda;
      const double* brow = b + p * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = acol[i];
        if (av != 0.0) Axpy(av, brow, c + i * ldc, n);
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[p * lda + i] * b[j * ldb + p];
        c[i * ldc + j] += s;
      }
  }
}

}  // namespace ngd::nn::kernels::detail
