#pragma once

// Dense compute kernels used by the differentiation engine.
//
// Every kernel exists twice: a plain serial reference in `serial::` and an
// OpenMP version in `parallel::`. The parallel versions split work over
// independent output rows and accumulate each output in the same order as the
// reference, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace lcc::kernels {

/// Temporal convolution geometry for inputs laid out [batch, t_in, c_in] and
/// weights [window, c_in, c_out]. Output is [batch, t_out, c_out] with
/// t_out = ceil(t_in / stride) and input index t_out*stride + k*dilation - pad.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t t_in = 1;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t window = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;

  std::size_t t_out() const { return (t_in + stride - 1) / stride; }
  long pad() const { return static_cast<long>((window - 1) * dilation / 2); }
};

#define LCC_KERNEL_DECLS                                                                     \
  /* c[m,n] = a[m,k] * b[k,n] */                                                             \
  void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,     \
              std::size_t m, std::size_t k, std::size_t n);                                  \
  /* c[k,n] = a[m,k]^T * g[m,n] */                                                           \
  void matmul_tn(std::span<const double> a, std::span<const double> g, std::span<double> c,  \
                 std::size_t m, std::size_t k, std::size_t n);                               \
  /* c[m,k] = g[m,n] * b[k,n]^T */                                                           \
  void matmul_nt(std::span<const double> g, std::span<const double> b, std::span<double> c,  \
                 std::size_t m, std::size_t k, std::size_t n);                               \
  void conv1d_forward(std::span<const double> in, std::span<const double> w,                 \
                      std::span<double> out, const ConvGeometry& g);                         \
  void conv1d_backward_input(std::span<const double> grad_out, std::span<const double> w,    \
                             std::span<double> grad_in, const ConvGeometry& g);              \
  void conv1d_backward_weight(std::span<const double> in, std::span<const double> grad_out,  \
                              std::span<double> grad_w, const ConvGeometry& g);              \
  /* out[p,q] = cos(a_p, b_q) for a [p,c], b [q,c]; zero-norm rows give 0 */                 \
  void cosine_matrix(std::span<const double> a, std::span<const double> b,                   \
                     std::span<double> out, std::size_t p, std::size_t q, std::size_t c);

namespace serial {
LCC_KERNEL_DECLS
}  // namespace serial

namespace parallel {
LCC_KERNEL_DECLS
}  // namespace parallel

#undef LCC_KERNEL_DECLS

/// Row L2 norms of a [rows, cols] matrix.
void row_norms(std::span<const double> a, std::span<double> norms, std::size_t rows,
               std::size_t cols);

}  // namespace lcc::kernels
