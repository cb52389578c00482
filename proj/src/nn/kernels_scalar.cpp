#include "gemm_impl.hpp"
#include "ngd/nn/kernels.hpp"

namespace ngd::nn::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_scalar(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc, bool acc) {
  detail::gemm_impl<dot_scalar, axpy_scalar>(ta, tb, m, n, k, a, lda, b, ldb,
                                             c, ldc, acc);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::Scalar, "scalar", dot_scalar,
                                 axpy_scalar, gemm_scalar};
  return table;
}

}  // namespace ngd::nn::kernels
