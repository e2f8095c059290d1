#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "snnid/converter.hpp"
#include "snnid/errors.hpp"
#include "snnid/estimators.hpp"
#include "snnid/training.hpp"

using namespace snnid;

namespace {

Waveform clean_benchmark() {
  return simulate(ConverterParams::benchmark(), 0.5e-6, 3000);
}

Waveform noisy_benchmark(std::uint64_t seed) {
  EmiConfig emi;
  emi.seed = seed;
  return add_emi(clean_benchmark(), emi, ConverterParams::benchmark());
}

double pop_var(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return var / static_cast<double>(xs.size());
}

TensorWaveform as_tensor_waveform(const Waveform& w) {
  TensorWaveform tw;
  tw.dt = w.dt;
  tw.t0 = w.t0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    tw.iL.push_back(ad::Tensor::scalar(w.iL[k]));
    tw.Vo.push_back(ad::Tensor::scalar(w.Vo[k]));
  }
  return tw;
}

}  // namespace

TEST_CASE("cosine schedule hits base, half, and zero") {
  double base = 5e-5;
  CHECK(cosine_lr(base, 0, 3000) == base);
  CHECK(std::abs(cosine_lr(base, 1500, 3000) - base / 2) <= 1e-12 * base);
  CHECK(std::abs(cosine_lr(base, 3000, 3000)) <= 1e-12 * base);
  // monotone decreasing over the run
  double prev = cosine_lr(base, 0, 100);
  for (std::size_t e = 1; e <= 100; ++e) {
    double cur = cosine_lr(base, e, 100);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("align_to_grid matches sample times exactly") {
  Waveform meas = clean_benchmark();  // dt 0.5us, t0 0.5us
  Waveform g = align_to_grid(meas, 5e-6, 5e-6, 300);
  REQUIRE(g.size() == 300);
  CHECK(g.dt == 5e-6);
  CHECK(g.t0 == 5e-6);
  // grid point k sits on measurement index 10k + 9
  CHECK(g.iL[0] == meas.iL[9]);
  CHECK(g.Vo[0] == meas.Vo[9]);
  CHECK(g.iL[123] == meas.iL[1239]);
  CHECK(g.iL[299] == meas.iL[2999]);

  // a grid time between samples is rejected
  CHECK_THROWS_AS(align_to_grid(meas, 5e-6, 5.25e-6, 10), ConfigError);
  // a grid extending past the record is rejected
  CHECK_THROWS_AS(align_to_grid(meas, 5e-6, 5e-6, 301), ConfigError);
}

TEST_CASE("reconstruction loss: zero, unit shift, fixture, degenerate") {
  Waveform meas = align_to_grid(clean_benchmark(), 5e-6, 5e-6, 300);

  SUBCASE("identical prediction gives exactly zero") {
    ad::Tensor loss = reconstruction_loss(as_tensor_waveform(meas), meas);
    CHECK(loss.value() == 0.0);
  }

  SUBCASE("one-sigma shift on the current channel gives one") {
    double sigma = std::sqrt(pop_var(meas.iL));
    Waveform shifted = meas;
    for (double& x : shifted.iL) x += sigma;
    ad::Tensor loss = reconstruction_loss(as_tensor_waveform(shifted), meas);
    CHECK(loss.value() == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("10-point fixture against independent accumulation") {
    Waveform m;
    m.dt = 1.0;
    m.t0 = 0.0;
    Waveform p = m;
    for (int k = 0; k < 10; ++k) {
      m.iL.push_back(0.5 + 0.1 * k);
      m.Vo.push_back(3.0 - 0.2 * k);
      p.iL.push_back(0.5 + 0.1 * k + 0.01 * (k % 3));
      p.Vo.push_back(3.0 - 0.2 * k - 0.02 * (k % 4));
    }
    double want = 0.0;
    {
      double vi = pop_var(m.iL), vv = pop_var(m.Vo);
      double si = 0.0, sv = 0.0;
      for (int k = 0; k < 10; ++k) {
        si += (p.iL[k] - m.iL[k]) * (p.iL[k] - m.iL[k]);
        sv += (p.Vo[k] - m.Vo[k]) * (p.Vo[k] - m.Vo[k]);
      }
      want = si / (10 * vi) + sv / (10 * vv);
    }
    ad::Tensor loss = reconstruction_loss(as_tensor_waveform(p), m);
    CHECK(loss.value() == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("degenerate measurement channel is rejected") {
    Waveform flat = meas;
    for (double& x : flat.Vo) x = 7.0;
    CHECK_THROWS_AS(
        reconstruction_loss(as_tensor_waveform(flat), flat),
        std::invalid_argument);
  }

  SUBCASE("size and grid mismatches are rejected") {
    Waveform shorter = meas;
    shorter.iL.pop_back();
    shorter.Vo.pop_back();
    CHECK_THROWS_AS(reconstruction_loss(as_tensor_waveform(shorter), meas),
                    std::invalid_argument);
    Waveform offgrid = meas;
    offgrid.t0 += 1e-6;
    CHECK_THROWS_AS(reconstruction_loss(as_tensor_waveform(offgrid), meas),
                    std::invalid_argument);
  }
}

TEST_CASE("loss gradient w.r.t. circuit parameters matches central FD") {
  // Short horizon keeps FD affordable; target from perturbed parameters so
  // the loss sits away from its minimum.
  ConverterParams target_p = ConverterParams::benchmark();
  target_p.L *= 1.12;
  target_p.C *= 0.9;
  target_p.Rs *= 1.4;
  Waveform target = simulate(target_p, 5e-6, 60);

  auto loss_at = [&](double L, double C, double Rs) {
    TensorParams tp{ad::Tensor::scalar(L), ad::Tensor::scalar(C),
                    ad::Tensor::scalar(Rs), target_p.Vg, target_p.d,
                    target_p.R};
    TensorWaveform traj = rk4_integrate(tp, {0.0, 3.0e-4}, 5e-6, {0.0, 0.0});
    return reconstruction_loss(traj, target).value();
  };

  ConverterParams at = ConverterParams::benchmark();
  ad::Tensor L = ad::Tensor::scalar(at.L, true);
  ad::Tensor C = ad::Tensor::scalar(at.C, true);
  ad::Tensor Rs = ad::Tensor::scalar(at.Rs, true);
  ad::Tape tape;
  {
    ad::Tape::Scope scope(tape);
    TensorParams tp{L, C, Rs, at.Vg, at.d, at.R};
    TensorWaveform traj = rk4_integrate(tp, {0.0, 3.0e-4}, 5e-6, {0.0, 0.0});
    tape.backward(reconstruction_loss(traj, target));
  }

  struct Probe {
    ad::Tensor* leaf;
    int which;
  };
  double base[3] = {at.L, at.C, at.Rs};
  ad::Tensor* leaves[3] = {&L, &C, &Rs};
  for (int i = 0; i < 3; ++i) {
    double h = 1e-6 * std::abs(base[i]);
    double args[3] = {base[0], base[1], base[2]};
    args[i] = base[i] + h;
    double up = loss_at(args[0], args[1], args[2]);
    args[i] = base[i] - h;
    double dn = loss_at(args[0], args[1], args[2]);
    double fd = (up - dn) / (2 * h);
    double got = leaves[i]->grad()[0];
    CHECK(std::abs(got - fd) / std::max({1.0, std::abs(got), std::abs(fd)}) <
          1e-5);
  }
}

TEST_CASE("adam: hand-checked first step") {
  ad::Tensor x = ad::Tensor::scalar(3.0, true);
  Adam opt({{{x}, 1.0}});
  ad::Tape tape;
  {
    ad::Tape::Scope scope(tape);
    tape.backward(ad::square(x));
  }
  double g = 6.0;
  double norm = opt.step(0.1, 0.0);
  CHECK(norm == doctest::Approx(g).epsilon(1e-15));
  double m = 0.1 * g, v = 0.001 * g * g;
  double mhat = m / 0.1, vhat = v / 0.001;
  double want = 3.0 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(x.value() == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("adam: bias group runs at the multiplied rate") {
  ad::Tensor w = ad::Tensor::scalar(1.0, true);
  ad::Tensor b = ad::Tensor::scalar(1.0, true);
  Adam opt({{{w}, 1.0}, {{b}, 3.0}});
  ad::Tape tape;
  {
    ad::Tape::Scope scope(tape);
    tape.backward(ad::add(w, b));
  }
  opt.step(0.01, 0.0);
  double dw = 1.0 - w.value();
  double db = 1.0 - b.value();
  CHECK(db == doctest::Approx(3.0 * dw).epsilon(1e-12));
}

TEST_CASE("adam: clipped global norm is exact") {
  ad::Tensor x = ad::Tensor::scalar(0.0, true);
  ad::Tensor y = ad::Tensor::scalar(0.0, true);
  Adam opt({{{x, y}, 1.0}});
  ad::Tape tape;
  {
    ad::Tape::Scope scope(tape);
    tape.backward(ad::add(ad::scalar_mul(x, 3.0), ad::scalar_mul(y, 4.0)));
  }
  // raw norm 5; clip at 0.3
  double applied = opt.step(1e-3, 0.3);
  CHECK(applied == doctest::Approx(0.3).epsilon(1e-12));

  ad::Tape tape2;
  {
    ad::Tape::Scope scope(tape2);
    tape2.backward(ad::add(ad::scalar_mul(x, 3.0), ad::scalar_mul(y, 4.0)));
  }
  x.zero_grad();
  y.zero_grad();
  ad::Tape tape3;
  {
    ad::Tape::Scope scope(tape3);
    tape3.backward(ad::add(ad::scalar_mul(x, 3.0), ad::scalar_mul(y, 4.0)));
  }
  CHECK(opt.step(1e-3, 0.0) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("direct log-parameter fit recovers the truth") {
  // Sanity oracle below the estimators: optimizing raw log(L, C, Rs)
  // leaves against a clean transient must land within 1% in at most 3000
  // steps, otherwise the loss/solver/gradient chain is broken.
  ConverterParams truth = ConverterParams::benchmark();
  Waveform target = align_to_grid(clean_benchmark(), 5e-6, 5e-6, 300);

  ad::Tensor lL = ad::Tensor::scalar(std::log(100e-6), true);
  ad::Tensor lC = ad::Tensor::scalar(std::log(7e-6), true);
  ad::Tensor lRs = ad::Tensor::scalar(std::log(0.2), true);
  Adam opt({{{lL, lC, lRs}, 1.0}});

  double rel[3] = {1.0, 1.0, 1.0};
  std::size_t epochs_used = 0;
  for (std::size_t e = 0; e < 3000; ++e) {
    lL.zero_grad();
    lC.zero_grad();
    lRs.zero_grad();
    ad::Tape tape;
    {
      ad::Tape::Scope scope(tape);
      TensorParams tp{ad::exp(lL), ad::exp(lC), ad::exp(lRs), truth.Vg,
                      truth.d, truth.R};
      TensorWaveform traj =
          rk4_integrate(tp, {0.0, 1.5e-3}, 5e-6, {0.0, 0.0});
      tape.backward(reconstruction_loss(traj, target));
    }
    opt.step(0.01, 0.0);
    rel[0] = std::abs(std::exp(lL.value()) - truth.L) / truth.L;
    rel[1] = std::abs(std::exp(lC.value()) - truth.C) / truth.C;
    rel[2] = std::abs(std::exp(lRs.value()) - truth.Rs) / truth.Rs;
    epochs_used = e + 1;
    if (rel[0] < 0.003 && rel[1] < 0.003 && rel[2] < 0.003) break;
  }
  INFO("epochs used: " << epochs_used);
  CHECK(rel[0] < 0.01);
  CHECK(rel[1] < 0.01);
  CHECK(rel[2] < 0.01);
}

TEST_CASE("sample_params: componentwise ranges and determinism") {
  ParamRanges ranges;
  Rng rng(99);
  double sum_rs = 0.0, sum_l = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    ConverterParams p = sample_params(ranges, rng);
    REQUIRE(p.L >= ranges.L_range[0]);
    REQUIRE(p.L <= ranges.L_range[1]);
    REQUIRE(p.C >= ranges.C_range[0]);
    REQUIRE(p.C <= ranges.C_range[1]);
    REQUIRE(p.Rs >= ranges.Rs_range[0]);
    REQUIRE(p.Rs <= ranges.Rs_range[1]);
    CHECK(p.Vg == 20.0);  // drive stays at the benchmark
    sum_rs += p.Rs;
    sum_l += p.L;
  }
  CHECK(sum_rs / n == doctest::Approx(0.26).epsilon(0.05));
  CHECK(sum_l / n == doctest::Approx(140e-6).epsilon(0.05));

  Rng a(7), b(7), c(8);
  ConverterParams pa = sample_params(ranges, a);
  ConverterParams pb = sample_params(ranges, b);
  ConverterParams pc = sample_params(ranges, c);
  CHECK(pa.L == pb.L);
  CHECK(pa.Rs == pb.Rs);
  CHECK(pa.L != pc.L);
}

TEST_CASE("make_dataset: deterministic, in range, distinct noise") {
  ParamRanges ranges;
  auto d1 = make_dataset(ranges, 4, 42);
  auto d2 = make_dataset(ranges, 4, 42);
  REQUIRE(d1.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(d1[i].noisy.size() == 3000);
    CHECK(d1[i].truth.L == d2[i].truth.L);
    CHECK(d1[i].noisy.iL == d2[i].noisy.iL);
    CHECK(d1[i].truth.L >= ranges.L_range[0]);
    CHECK(d1[i].truth.L <= ranges.L_range[1]);
  }
  // different truths and different noise across items
  CHECK(d1[0].truth.L != d1[1].truth.L);
  CHECK(d1[0].noisy.iL[0] != d1[1].noisy.iL[0]);
}

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 1e-4;
  cfg.clip_norm = 0.3;
  cfg.seed = 1;
  return cfg;
}

double eval_loss(Estimator& est, const Waveform& meas,
                 const TrainConfig& cfg) {
  Waveform input = subsample(meas, meas.size() / 100);
  Waveform target = align_to_grid(meas, cfg.solver_dt, cfg.solver_dt,
                                  static_cast<std::size_t>(std::floor(
                                      cfg.sim_span / cfg.solver_dt + 1e-9)));
  ParamEstimate p = est.estimate(input);
  TensorParams tp{p.L, p.C, p.Rs, 20.0, 0.5, 10.0};
  TensorWaveform traj =
      rk4_integrate(tp, {0.0, cfg.sim_span}, cfg.solver_dt, {0.0, 0.0});
  return reconstruction_loss(traj, target).value();
}

}  // namespace

TEST_CASE("train_single: history shape, best checkpoint restores its loss") {
  Waveform meas = noisy_benchmark(5);
  SnnEstimatorHandle est(SnnEstimator::init(1, 8));
  TrainConfig cfg = tiny_config();
  TrainResult res = train_single(est, meas, KnownDrive{}, cfg);

  REQUIRE(res.history.size() == 3);
  double best_seen = res.history[0].loss;
  for (std::size_t e = 0; e < 3; ++e) {
    const auto& row = res.history[e];
    CHECK(row.epoch == e);
    CHECK(std::isfinite(row.loss));
    CHECK(row.lr == cosine_lr(cfg.lr, e, cfg.epochs));
    CHECK(row.L > 0.0);
    CHECK(row.C > 0.0);
    CHECK(row.Rs > 0.0);
    best_seen = std::min(best_seen, row.loss);
  }
  CHECK(res.best.loss == best_seen);
  REQUIRE(!res.best.weights.empty());

  // restoring the checkpoint reproduces the recorded loss exactly
  apply_checkpoint(est, res.best);
  CHECK(eval_loss(est, meas, cfg) == res.best.loss);
}

TEST_CASE("train_multi on one item matches train_single") {
  DatasetItem item;
  item.truth = ConverterParams::benchmark();
  item.noisy = noisy_benchmark(5);

  SnnEstimatorHandle a(SnnEstimator::init(3, 8));
  SnnEstimatorHandle b(SnnEstimator::init(3, 8));
  TrainConfig cfg = tiny_config();

  TrainResult rs = train_single(a, item.noisy, KnownDrive{}, cfg);
  TrainResult rm = train_multi(b, {item}, cfg);

  REQUIRE(rs.history.size() == rm.history.size());
  for (std::size_t e = 0; e < rs.history.size(); ++e) {
    CHECK(rs.history[e].loss == rm.history[e].loss);
    CHECK(rs.history[e].L == rm.history[e].L);
    CHECK(rs.history[e].Rs == rm.history[e].Rs);
  }
  CHECK(rs.best.epoch == rm.best.epoch);
  CHECK(rs.best.loss == rm.best.loss);
}

TEST_CASE("train rejects mixed drives and bad configs") {
  DatasetItem i0, i1;
  i0.truth = ConverterParams::benchmark();
  i0.noisy = noisy_benchmark(1);
  i1 = i0;
  i1.truth.Vg = 24.0;
  SnnEstimatorHandle est(SnnEstimator::init(1, 8));
  TrainConfig cfg = tiny_config();
  CHECK_THROWS_AS(train_multi(est, {i0, i1}, cfg), ConfigError);

  TrainConfig bad = cfg;
  bad.lr = 0.0;
  CHECK_THROWS_AS(train_single(est, i0.noisy, KnownDrive{}, bad), ConfigError);
  bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(train_single(est, i0.noisy, KnownDrive{}, bad), ConfigError);

  Waveform odd = i0.noisy;
  odd.iL.pop_back();
  odd.Vo.pop_back();
  CHECK_THROWS_AS(train_single(est, odd, KnownDrive{}, cfg), ConfigError);
}

namespace {

// Estimator that raises a numeric failure on its first call only; lets the
// trainer's skip-and-continue path run on an otherwise healthy model.
class FlakyEstimator final : public Estimator {
 public:
  explicit FlakyEstimator(SnnEstimator est) : inner_(std::move(est)) {}
  ParamEstimate estimate(const Waveform& w) const override {
    if (calls_++ == 0) throw NumericError("injected failure");
    return inner_.estimate(w);
  }
  std::vector<ad::Tensor> weight_leaves() override {
    return inner_.weight_leaves();
  }
  std::vector<ad::Tensor> bias_leaves() override {
    return inner_.bias_leaves();
  }
  void save(const std::string& path) const override { inner_.save(path); }
  void load(const std::string& path) override { inner_.load(path); }
  std::string kind() const override { return inner_.kind(); }

 private:
  SnnEstimatorHandle inner_;
  mutable int calls_ = 0;
};

}  // namespace

TEST_CASE("non-finite epoch is skipped, recorded, and training continues") {
  Waveform meas = noisy_benchmark(5);
  FlakyEstimator est(SnnEstimator::init(1, 8));
  TrainConfig cfg = tiny_config();
  TrainResult res = train_single(est, meas, KnownDrive{}, cfg);

  REQUIRE(res.history.size() == 3);
  CHECK(std::isnan(res.history[0].loss));
  CHECK(std::isfinite(res.history[1].loss));
  CHECK(std::isfinite(res.history[2].loss));
  CHECK(res.best.epoch >= 1);
}

TEST_CASE("training that never goes finite raises a numeric error") {
  Waveform meas = noisy_benchmark(5);
  SnnEstimatorHandle est(SnnEstimator::init(1, 8));
  est.model().readout.b_param.set_values({1000.0, 1000.0, 1000.0});
  TrainConfig cfg = tiny_config();
  CHECK_THROWS_AS(train_single(est, meas, KnownDrive{}, cfg), NumericError);
}

TEST_CASE("history csv format and repeat-run byte identity") {
  Waveform meas = noisy_benchmark(5);
  TrainConfig cfg = tiny_config();

  SnnEstimatorHandle e1(SnnEstimator::init(2, 8));
  SnnEstimatorHandle e2(SnnEstimator::init(2, 8));
  TrainResult r1 = train_single(e1, meas, KnownDrive{}, cfg);
  TrainResult r2 = train_single(e2, meas, KnownDrive{}, cfg);

  const char* p1 = "history_run1.csv";
  const char* p2 = "history_run2.csv";
  write_history_csv(p1, r1.history);
  write_history_csv(p2, r2.history);

  auto slurp = [](const char* p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  std::string a = slurp(p1), b = slurp(p2);
  REQUIRE(!a.empty());
  CHECK(a == b);
  CHECK(a.rfind("epoch,loss,L,C,Rs,lr\n", 0) == 0);

  std::remove(p1);
  std::remove(p2);

  // NaN epochs serialize as nan
  std::vector<HistoryRow> rows(1);
  rows[0].loss = std::numeric_limits<double>::quiet_NaN();
  write_history_csv(p1, rows);
  std::string s = slurp(p1);
  CHECK(s.find("nan") != std::string::npos);
  std::remove(p1);
}
