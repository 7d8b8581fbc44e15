// Serial reference vs OpenMP kernels at sizes the backbone actually uses.
// Usage: bench_kernels [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "lcc/kernels.hpp"

using namespace lcc::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double best_ms(int repeats, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, int repeats, const std::function<void()>& s, const std::function<void()>& p) {
  const double ts = best_ms(repeats, s), tp = best_ms(repeats, p);
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   x%.2f\n", name, ts, tp, ts / tp);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 20;
  std::printf("threads: %d, best of %d\n", omp_get_max_threads(), repeats);
  std::mt19937_64 rng(1);

  {
    const std::size_t m = 512, k = 96, n = 64;
    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng), g = random_vec(m * n, rng);
    std::vector<double> c(m * n), ct(k * n), cn(m * k);
    row("matmul 512x96x64", repeats, [&] { serial::matmul(a, b, c, m, k, n); },
        [&] { parallel::matmul(a, b, c, m, k, n); });
    row("matmul_tn", repeats, [&] { serial::matmul_tn(a, g, ct, m, k, n); },
        [&] { parallel::matmul_tn(a, g, ct, m, k, n); });
    row("matmul_nt", repeats, [&] { serial::matmul_nt(g, b, cn, m, k, n); },
        [&] { parallel::matmul_nt(g, b, cn, m, k, n); });
  }
  {
    ConvGeometry geo;
    geo.batch = 27;  // nodes
    geo.t_in = 64;
    geo.c_in = 16;
    geo.c_out = 16;
    geo.window = 9;
    geo.stride = 2;
    const auto in = random_vec(geo.batch * geo.t_in * geo.c_in, rng);
    const auto w = random_vec(geo.window * geo.c_in * geo.c_out, rng);
    const auto go = random_vec(geo.batch * geo.t_out() * geo.c_out, rng);
    std::vector<double> out(go.size()), gi(in.size()), gw(w.size());
    row("conv1d forward 27x64x16", repeats, [&] { serial::conv1d_forward(in, w, out, geo); },
        [&] { parallel::conv1d_forward(in, w, out, geo); });
    row("conv1d backward input", repeats, [&] { serial::conv1d_backward_input(go, w, gi, geo); },
        [&] { parallel::conv1d_backward_input(go, w, gi, geo); });
    row("conv1d backward weight", repeats, [&] { serial::conv1d_backward_weight(in, go, gw, geo); },
        [&] { parallel::conv1d_backward_weight(in, go, gw, geo); });
  }
  {
    const std::size_t p = 16, q = 60, c = 64;
    const auto a = random_vec(p * c, rng), b = random_vec(q * c, rng);
    std::vector<double> out(p * q);
    row("cosine_matrix 16x60x64", repeats, [&] { serial::cosine_matrix(a, b, out, p, q, c); },
        [&] { parallel::cosine_matrix(a, b, out, p, q, c); });
  }
}
