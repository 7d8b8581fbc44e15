#include <cmath>

#include "lcc/kernels.hpp"

namespace lcc::kernels {

void row_norms(std::span<const double> a, std::span<double> norms, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += a[r * cols + j] * a[r * cols + j];
    norms[r] = std::sqrt(s);
  }
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
      c[i * n + j] = s;
    }
}

void matmul_tn(std::span<const double> a, std::span<const double> g, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * k + r] * g[i * n + j];
      c[r * n + j] = s;
    }
}

void matmul_nt(std::span<const double> g, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t r = 0; r < k; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * b[r * n + j];
      c[i * k + r] = s;
    }
}

void conv1d_forward(std::span<const double> in, std::span<const double> w, std::span<double> out,
                    const ConvGeometry& g) {
  const std::size_t t_out = g.t_out();
  const long pad = g.pad();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t co = 0; co < g.c_out; ++co) {
        double s = 0.0;
        for (std::size_t k = 0; k < g.window; ++k) {
          const long ti = static_cast<long>(t * g.stride + k * g.dilation) - pad;
          if (ti < 0 || ti >= static_cast<long>(g.t_in)) continue;
          const double* x = &in[(b * g.t_in + static_cast<std::size_t>(ti)) * g.c_in];
          for (std::size_t ci = 0; ci < g.c_in; ++ci)
            s += x[ci] * w[(k * g.c_in + ci) * g.c_out + co];
        }
        out[(b * t_out + t) * g.c_out + co] = s;
      }
}

void conv1d_backward_input(std::span<const double> grad_out, std::span<const double> w,
                           std::span<double> grad_in, const ConvGeometry& g) {
  const std::size_t t_out = g.t_out();
  const long pad = g.pad();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t t = 0; t < g.t_in; ++t)
      for (std::size_t ci = 0; ci < g.c_in; ++ci) {
        double s = 0.0;
        for (std::size_t k = 0; k < g.window; ++k) {
          const long num = static_cast<long>(t) + pad - static_cast<long>(k * g.dilation);
          if (num < 0 || num % static_cast<long>(g.stride) != 0) continue;
          const auto to = static_cast<std::size_t>(num) / g.stride;
          if (to >= t_out) continue;
          for (std::size_t co = 0; co < g.c_out; ++co)
            s += grad_out[(b * t_out + to) * g.c_out + co] * w[(k * g.c_in + ci) * g.c_out + co];
        }
        grad_in[(b * g.t_in + t) * g.c_in + ci] = s;
      }
}

void conv1d_backward_weight(std::span<const double> in, std::span<const double> grad_out,
                            std::span<double> grad_w, const ConvGeometry& g) {
  const std::size_t t_out = g.t_out();
  const long pad = g.pad();
  for (std::size_t k = 0; k < g.window; ++k)
    for (std::size_t ci = 0; ci < g.c_in; ++ci)
      for (std::size_t co = 0; co < g.c_out; ++co) {
        double s = 0.0;
        for (std::size_t b = 0; b < g.batch; ++b)
          for (std::size_t t = 0; t < t_out; ++t) {
            const long ti = static_cast<long>(t * g.stride + k * g.dilation) - pad;
            if (ti < 0 || ti >= static_cast<long>(g.t_in)) continue;
            s += in[(b * g.t_in + static_cast<std::size_t>(ti)) * g.c_in + ci] *
                 grad_out[(b * t_out + t) * g.c_out + co];
          }
        grad_w[(k * g.c_in + ci) * g.c_out + co] = s;
      }
}

void cosine_matrix(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t p, std::size_t q, std::size_t c) {
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t l = 0; l < c; ++l) {
        dot += a[i * c + l] * b[j * c + l];
        na += a[i * c + l] * a[i * c + l];
        nb += b[j * c + l] * b[j * c + l];
      }
      const double denom = std::sqrt(na) * std::sqrt(nb);
      out[i * q + j] = denom > 0.0 ? dot / denom : 0.0;
    }
}

}  // namespace serial
}  // namespace lcc::kernels
