// Timing comparison between the serial reference kernels and the
// OpenMP-parallel variants, plus the per-sentence-parallel batch ELBO
// against a single-threaded run. Results are asserted elsewhere to be
// bit-identical; this binary only reports speed.

#include <chrono>
#include <cstdio>
#include <vector>

#include "autr/elbo.hpp"
#include "autr/kernels.hpp"
#include "autr/rng.hpp"

using namespace autr;

namespace {

double seconds(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <class F>
double time_best_of(int reps, F&& f) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, seconds(t0, t1));
  }
  return best;
}

void bench_matmul(int n) {
  Rng rng(7, "bench");
  std::vector<float> a(static_cast<size_t>(n) * n), b(a.size()), c(a.size());
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());

  double gflop = 2.0 * n * n * static_cast<double>(n) / 1e9;
  double ts = time_best_of(3, [&] { kernels::matmul_serial(a.data(), b.data(), c.data(), n, n, n); });
  double tp = time_best_of(3, [&] { kernels::matmul_omp(a.data(), b.data(), c.data(), n, n, n); });
  std::printf("matmul %4dx%-4d  serial %8.3f ms (%6.2f GFLOP/s)   omp[%d] %8.3f ms (%6.2f GFLOP/s)  speedup %.2fx\n",
              n, n, ts * 1e3, gflop / ts, kernels::max_threads(), tp * 1e3, gflop / tp, ts / tp);
}

void bench_elbo_batch() {
  Hyper h;
  h.L = 10;
  h.E = 32;
  h.T = 8;
  h.H = 64;
  h.Dz = 16;
  h.R = 64;
  h.V = 50;
  auto params = init_params<float>(h, 11);
  auto corpus = synth_corpus(3, 32, 40, h.L);
  auto vocab = Vocabulary::build(corpus, 64);
  auto [encoded, skipped] = encode_corpus(corpus, vocab, h.L);
  h.V = vocab.size();
  params = init_params<float>(h, 11);
  Batch batch{encoded, 99};

  GradsT<float> grads;
  int hw = kernels::max_threads();
  kernels::set_max_threads(1);
  double t1 = time_best_of(3, [&] {
    elbo_batch(params, h, DecoderKind::Autr, batch, 1.0f, 0.0, &grads);
  });
  kernels::set_max_threads(hw);
  double tp = time_best_of(3, [&] {
    elbo_batch(params, h, DecoderKind::Autr, batch, 1.0f, 0.0, &grads);
  });
  std::printf("elbo batch (32 sentences, fwd+bwd)  1 thread %8.3f ms   %d threads %8.3f ms  speedup %.2fx\n",
              t1 * 1e3, hw, tp * 1e3, t1 / tp);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", kernels::max_threads());
  bench_matmul(128);
  bench_matmul(256);
  bench_matmul(512);
  bench_elbo_batch();
  return 0;
}
