#include <benchmark/benchmark.h>

#include "snnid/converter.hpp"
#include "snnid/estimators.hpp"
#include "snnid/training.hpp"

using namespace snnid;

namespace {

void BM_simulate_measurement_grid(benchmark::State& state) {
  ConverterParams p = ConverterParams::benchmark();
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(p, 0.5e-6, 3000));
  }
}
BENCHMARK(BM_simulate_measurement_grid);

void BM_rk4_differentiable(benchmark::State& state) {
  ConverterParams p = ConverterParams::benchmark();
  for (auto _ : state) {
    ad::Tape tape;
    ad::Tape::Scope scope(tape);
    TensorParams tp{ad::Tensor::scalar(p.L, true),
                    ad::Tensor::scalar(p.C, true),
                    ad::Tensor::scalar(p.Rs, true), p.Vg, p.d, p.R};
    benchmark::DoNotOptimize(
        rk4_integrate(tp, {0.0, 1.5e-3}, 5e-6, {0.0, 0.0}));
  }
}
BENCHMARK(BM_rk4_differentiable);

void BM_snn_inference(benchmark::State& state) {
  const auto est = SnnEstimator::init(1, 128);
  ConverterParams p = ConverterParams::benchmark();
  EmiConfig emi;
  const auto inputs =
      normalize_input(subsample(add_emi(simulate(p, 0.5e-6, 3000), emi, p), 30));
  for (auto _ : state) {
    benchmark::DoNotOptimize(snn_forward(est, inputs));
  }
}
BENCHMARK(BM_snn_inference);

void BM_train_epoch_snn(benchmark::State& state) {
  SnnEstimatorHandle est(SnnEstimator::init(1, 128));
  ConverterParams p = ConverterParams::benchmark();
  EmiConfig emi;
  Waveform meas = add_emi(simulate(p, 0.5e-6, 3000), emi, p);
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        train_single(est, meas, KnownDrive::from(p), cfg));
  }
}
BENCHMARK(BM_train_epoch_snn);

}  // namespace
