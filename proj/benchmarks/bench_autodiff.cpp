#include <benchmark/benchmark.h>

#include <vector>

#include "snnid/autodiff.hpp"
#include "snnid/rng.hpp"

namespace ad = snnid::ad;

namespace {

std::vector<double> random_values(std::size_t n, double scale,
                                  std::uint64_t seed) {
  snnid::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

void BM_matvec_dense(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  ad::Tensor W = ad::Tensor::matrix(n, n, random_values(n * n, 1.0, 1));
  ad::Tensor x = ad::Tensor::vector(random_values(n, 1.0, 2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad::matvec(W, x));
  }
}
BENCHMARK(BM_matvec_dense)->Arg(128);

void BM_matvec_sparse_spikes(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  ad::Tensor W = ad::Tensor::matrix(n, n, random_values(n * n, 1.0, 1));
  // ~10% active inputs, the regime the spiking layers run in.
  snnid::Rng rng(3);
  std::vector<double> s(n, 0.0);
  for (auto& v : s)
    if (rng.uniform() < 0.1) v = 1.0;
  ad::Tensor x = ad::Tensor::vector(s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad::matvec(W, x));
  }
}
BENCHMARK(BM_matvec_sparse_spikes)->Arg(128);

void BM_tape_forward_backward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  ad::Tensor W = ad::Tensor::matrix(n, n, random_values(n * n, 0.1, 1), true);
  ad::Tensor x = ad::Tensor::vector(random_values(n, 1.0, 2), true);
  for (auto _ : state) {
    W.zero_grad();
    x.zero_grad();
    ad::Tape tape;
    auto scope = tape.record();
    tape.backward(ad::mean(ad::tanh(ad::matvec(W, x))));
    benchmark::DoNotOptimize(W.grad());
  }
}
BENCHMARK(BM_tape_forward_backward)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
