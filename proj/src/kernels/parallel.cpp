#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcc/kernels.hpp"

namespace lcc::kernels::parallel {

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = 1 << 15;

inline long as_long(std::size_t v) { return static_cast<long>(v); }
}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (long il = 0; il < as_long(m); ++il) {
    const auto i = static_cast<std::size_t>(il);
    double* crow = &c[i * n];
    std::fill(crow, crow + n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a[i * k + l];
      const double* brow = &b[l * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> g, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (long rl = 0; rl < as_long(k); ++rl) {
    const auto r = static_cast<std::size_t>(rl);
    double* crow = &c[r * n];
    std::fill(crow, crow + n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + r];
      const double* grow = &g[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

void matmul_nt(std::span<const double> g, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (long il = 0; il < as_long(m); ++il) {
    const auto i = static_cast<std::size_t>(il);
    const double* grow = &g[i * n];
    for (std::size_t r = 0; r < k; ++r) {
      const double* brow = &b[r * n];
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
      c[i * k + r] = s;
    }
  }
}

void conv1d_forward(std::span<const double> in, std::span<const double> w, std::span<double> out,
                    const ConvGeometry& g) {
  const std::size_t t_out = g.t_out();
  const long pad = g.pad();
  const std::size_t rows = g.batch * t_out;
#pragma omp parallel for schedule(static) \
    if (rows * g.window * g.c_in * g.c_out >= kMinParallelWork)
  for (long rl = 0; rl < as_long(rows); ++rl) {
    const auto row = static_cast<std::size_t>(rl);
    const std::size_t b = row / t_out;
    const std::size_t t = row % t_out;
    double* orow = &out[row * g.c_out];
    std::fill(orow, orow + g.c_out, 0.0);
    for (std::size_t k = 0; k < g.window; ++k) {
      const long ti = static_cast<long>(t * g.stride + k * g.dilation) - pad;
      if (ti < 0 || ti >= as_long(g.t_in)) continue;
      const double* x = &in[(b * g.t_in + static_cast<std::size_t>(ti)) * g.c_in];
      for (std::size_t ci = 0; ci < g.c_in; ++ci) {
        const double xv = x[ci];
        const double* wrow = &w[(k * g.c_in + ci) * g.c_out];
        for (std::size_t co = 0; co < g.c_out; ++co) orow[co] += xv * wrow[co];
      }
    }
  }
}

void conv1d_backward_input(std::span<const double> grad_out, std::span<const double> w,
                           std::span<double> grad_in, const ConvGeometry& g) {
  const std::size_t t_out = g.t_out();
  const long pad = g.pad();
  const std::size_t rows = g.batch * g.t_in;
#pragma omp parallel for schedule(static) \
    if (rows * g.window * g.c_in * g.c_out >= kMinParallelWork)
  for (long rl = 0; rl < as_long(rows); ++rl) {
    const auto row = static_cast<std::size_t>(rl);
    const std::size_t b = row / g.t_in;
    const std::size_t t = row % g.t_in;
    double* grow = &grad_in[row * g.c_in];
    std::fill(grow, grow + g.c_in, 0.0);
    for (std::size_t k = 0; k < g.window; ++k) {
      const long num = static_cast<long>(t) + pad - static_cast<long>(k * g.dilation);
      if (num < 0 || num % static_cast<long>(g.stride) != 0) continue;
      const auto to = static_cast<std::size_t>(num) / g.stride;
      if (to >= t_out) continue;
      const double* gorow = &grad_out[(b * t_out + to) * g.c_out];
      for (std::size_t ci = 0; ci < g.c_in; ++ci) {
        const double* wrow = &w[(k * g.c_in + ci) * g.c_out];
        double s = 0.0;
        for (std::size_t co = 0; co < g.c_out; ++co) s += gorow[co] * wrow[co];
        grow[ci] += s;
      }
    }
  }
}

void conv1d_backward_weight(std::span<const double> in, std::span<const double> grad_out,
                            std::span<double> grad_w, const ConvGeometry& g) {
  const std::size_t t_out = g.t_out();
  const long pad = g.pad();
  const std::size_t rows = g.window * g.c_in;
#pragma omp parallel for schedule(static) \
    if (rows * g.batch * t_out * g.c_out >= kMinParallelWork)
  for (long rl = 0; rl < as_long(rows); ++rl) {
    const auto row = static_cast<std::size_t>(rl);
    const std::size_t k = row / g.c_in;
    const std::size_t ci = row % g.c_in;
    double* gw = &grad_w[row * g.c_out];
    std::fill(gw, gw + g.c_out, 0.0);
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t t = 0; t < t_out; ++t) {
        const long ti = static_cast<long>(t * g.stride + k * g.dilation) - pad;
        if (ti < 0 || ti >= as_long(g.t_in)) continue;
        const double xv = in[(b * g.t_in + static_cast<std::size_t>(ti)) * g.c_in + ci];
        const double* gorow = &grad_out[(b * t_out + t) * g.c_out];
        for (std::size_t co = 0; co < g.c_out; ++co) gw[co] += xv * gorow[co];
      }
  }
}

void cosine_matrix(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t p, std::size_t q, std::size_t c) {
  std::vector<double> na(p), nb(q);
  row_norms(a, na, p, c);
  row_norms(b, nb, q, c);
#pragma omp parallel for schedule(static) if (p * q * c >= kMinParallelWork)
  for (long il = 0; il < as_long(p); ++il) {
    const auto i = static_cast<std::size_t>(il);
    for (std::size_t j = 0; j < q; ++j) {
      double dot = 0.0;
      for (std::size_t l = 0; l < c; ++l) dot += a[i * c + l] * b[j * c + l];
      const double denom = na[i] * nb[j];
      out[i * q + j] = denom > 0.0 ? dot / denom : 0.0;
    }
  }
}

}  // namespace lcc::kernels::parallel
