#include "snnid/converter.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <span>
#include <vector>

#include "doctest.h"
#include "snnid/autodiff.hpp"
#include "snnid/errors.hpp"
#include "support/finite_difference.hpp"
#include "support/linear_oracle.hpp"

namespace ad = snnid::ad;
using snnid::add_emi;
using snnid::buck_rhs;
using snnid::ConverterParams;
using snnid::EmiConfig;
using snnid::NumericError;
using snnid::rk4_integrate;
using snnid::simulate;
using snnid::subsample;
using snnid::switching_edges;
using snnid::TensorParams;
using snnid::Waveform;
using snnid::testing::BuckOracle;
using snnid::testing::central_gradient;
using snnid::testing::rel_err;

namespace {

TensorParams tensor_params(const ConverterParams& p) {
  TensorParams tp;
  tp.L = ad::Tensor::scalar(p.L);
  tp.C = ad::Tensor::scalar(p.C);
  tp.Rs = ad::Tensor::scalar(p.Rs);
  tp.Vg = p.Vg;
  tp.d = p.d;
  tp.R = p.R;
  return tp;
}

}  // namespace

TEST_CASE("model derivatives at rest and at steady state") {
  const auto p = ConverterParams::benchmark();
  const auto at_rest = buck_rhs({0.0, 0.0}, p);
  CHECK(at_rest[0] == doctest::Approx(10.0 / 138e-6).epsilon(1e-12));
  CHECK(at_rest[1] == 0.0);

  const double vo_ss = p.d * p.Vg / (1.0 + p.Rs / p.R);
  const double il_ss = vo_ss / p.R;
  CHECK(vo_ss == doctest::Approx(9.90099).epsilon(1e-5));
  const auto at_ss = buck_rhs({il_ss, vo_ss}, p);
  CHECK(std::abs(at_ss[0]) < 1e-9 * std::abs(at_rest[0]));
  CHECK(std::abs(at_ss[1]) < 1e-9 * (il_ss / p.C));
}

TEST_CASE("zero input and zero state stay at zero") {
  auto p = ConverterParams::benchmark();
  p.Vg = 1e-300;  // validate() requires > 0; drive is effectively zero
  const auto d = buck_rhs({0.0, 0.0}, p);
  CHECK(d[0] == doctest::Approx(0.0));
  CHECK(d[1] == 0.0);
  const auto w = simulate(p, 0.5e-6, 100);
  for (double v : w.iL) CHECK(std::abs(v) < 1e-280);
  for (double v : w.Vo) CHECK(std::abs(v) < 1e-280);
}

TEST_CASE("ground truth reaches the analytic steady state") {
  const auto p = ConverterParams::benchmark();
  const auto w = simulate(p, 0.5e-6, 3000);
  REQUIRE(w.size() == 3000);
  CHECK(w.t0 == 0.5e-6);
  CHECK(w.time(2999) == doctest::Approx(1.5e-3).epsilon(1e-12));
  CHECK(w.Vo.back() == doctest::Approx(9.90099).epsilon(0.005));
  CHECK(w.iL.back() == doctest::Approx(0.990099).epsilon(0.005));
}

TEST_CASE("both integration paths match the matrix-exponential solution") {
  const auto p = ConverterParams::benchmark();
  const BuckOracle oracle(p);

  // The oracle's fixed point must agree with the hand-derived steady state.
  const auto ss = oracle.steady_state();
  CHECK(ss[1] == doctest::Approx(p.d * p.Vg / (1.0 + p.Rs / p.R)).epsilon(1e-12));
  CHECK(ss[0] == doctest::Approx(ss[1] / p.R).epsilon(1e-12));

  const double dt = 0.5e-6;
  const std::size_t n = 3000;
  const auto plain = simulate(p, dt, n);
  const auto tens = rk4_integrate(tensor_params(p), {0.0, 1.5e-3}, dt,
                                  {0.0, 0.0});
  REQUIRE(tens.size() == n);

  // Pointwise relative error floored at 1% of channel amplitude; a strict
  // ratio is meaningless where the ringing current crosses zero.
  double amp_i = 0.0, amp_v = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto x = oracle.state_at(plain.time(k));
    amp_i = std::max(amp_i, std::abs(x[0]));
    amp_v = std::max(amp_v, std::abs(x[1]));
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto x = oracle.state_at(plain.time(k));
    const double ri = std::abs(plain.iL[k] - x[0]) /
                      std::max(0.01 * amp_i, std::abs(x[0]));
    const double rv = std::abs(plain.Vo[k] - x[1]) /
                      std::max(0.01 * amp_v, std::abs(x[1]));
    worst = std::max({worst, ri, rv});

    CHECK(tens.iL[k].value() ==
          doctest::Approx(plain.iL[k]).epsilon(1e-12));
    CHECK(tens.Vo[k].value() ==
          doctest::Approx(plain.Vo[k]).epsilon(1e-12));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("steady-state power balance of the averaged model") {
  const auto p = ConverterParams::benchmark();
  const auto w = simulate(p, 0.5e-6, 10000);  // 5 ms, fully settled
  const double iL = w.iL.back(), Vo = w.Vo.back();
  const double p_in = p.d * p.Vg * iL;
  const double p_out = p.Rs * iL * iL + Vo * Vo / p.R;
  CHECK(std::abs(p_in - p_out) / p_in < 1e-3);
}

TEST_CASE("trajectory gradients in log-parameter space match differences") {
  const auto p = ConverterParams::benchmark();
  const double dt = 5e-6;
  const std::size_t n = 60;
  // Fixed target from perturbed parameters gives the loss curvature.
  auto ptgt = p;
  ptgt.L *= 1.15;
  ptgt.C *= 0.9;
  ptgt.Rs *= 1.4;
  const auto target = simulate(ptgt, dt, n);

  auto loss_at = [&](std::span<const double> logp) {
    TensorParams tp = tensor_params(p);
    tp.L = ad::exp(ad::Tensor::scalar(logp[0]));
    tp.C = ad::exp(ad::Tensor::scalar(logp[1]));
    tp.Rs = ad::exp(ad::Tensor::scalar(logp[2]));
    const auto traj = rk4_integrate(tp, {0.0, dt * n}, dt, {0.0, 0.0});
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double ei = traj.iL[k].value() - target.iL[k];
      const double ev = traj.Vo[k].value() - target.Vo[k];
      acc += ei * ei + ev * ev;
    }
    return acc / static_cast<double>(n);
  };
  const std::vector<double> logp{std::log(p.L), std::log(p.C), std::log(p.Rs)};
  const auto fd = central_gradient(loss_at, logp, 1e-6);

  ad::Tensor lL = ad::Tensor::scalar(logp[0], true);
  ad::Tensor lC = ad::Tensor::scalar(logp[1], true);
  ad::Tensor lRs = ad::Tensor::scalar(logp[2], true);
  ad::Tape tape;
  {
    auto scope = tape.record();
    TensorParams tp = tensor_params(p);
    tp.L = ad::exp(lL);
    tp.C = ad::exp(lC);
    tp.Rs = ad::exp(lRs);
    const auto traj = rk4_integrate(tp, {0.0, dt * n}, dt, {0.0, 0.0});
    ad::Tensor acc = ad::Tensor::scalar(0.0);
    for (std::size_t k = 0; k < n; ++k) {
      acc = acc + ad::square(traj.iL[k] - ad::Tensor::scalar(target.iL[k]));
      acc = acc + ad::square(traj.Vo[k] - ad::Tensor::scalar(target.Vo[k]));
    }
    tape.backward(ad::scalar_mul(acc, 1.0 / static_cast<double>(n)));
  }
  CHECK(rel_err(lL.grad()[0], fd[0]) < 1e-4);
  CHECK(rel_err(lC.grad()[0], fd[1]) < 1e-4);
  CHECK(rel_err(lRs.grad()[0], fd[2]) < 1e-4);
}

TEST_CASE("absurd parameters abort integration with a step index") {
  auto p = ConverterParams::benchmark();
  p.L = 1e-15;  // femtohenry inductor, slope ~1e16 A/s: blows up fast
  CHECK_THROWS_AS(simulate(p, 0.5e-6, 100), NumericError);
  CHECK_THROWS_AS(
      rk4_integrate(tensor_params(p), {0.0, 50e-6}, 0.5e-6, {0.0, 0.0}),
      NumericError);
  try {
    simulate(p, 0.5e-6, 100);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("switching edges over the benchmark span number thirty") {
  const auto p = ConverterParams::benchmark();
  const auto w = simulate(p, 0.5e-6, 3000);
  const auto edges = switching_edges(p, w.time(0), w.time(w.size() - 1));
  CHECK(edges.size() == 30);
  // First edge is the first turn-off (the t=0 turn-on predates the first
  // sample); the last is the turn-on landing exactly on the final sample.
  CHECK(edges.front() == doctest::Approx(50e-6).epsilon(1e-12));
  CHECK(edges.back() == doctest::Approx(1500e-6).epsilon(1e-12));
  for (std::size_t i = 1; i < edges.size(); ++i)
    CHECK(edges[i] > edges[i - 1]);
}

TEST_CASE("interference is seed-deterministic and zero when disabled") {
  const auto p = ConverterParams::benchmark();
  const auto clean = simulate(p, 0.5e-6, 3000);

  EmiConfig off;
  off.background_sigma_frac = 0.0;
  off.pulse_amp_frac = 0.0;
  const auto same = add_emi(clean, off, p);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(same.iL[i] == clean.iL[i]);
    CHECK(same.Vo[i] == clean.Vo[i]);
  }

  EmiConfig cfg;
  cfg.seed = 7;
  const auto a = add_emi(clean, cfg, p);
  const auto b = add_emi(clean, cfg, p);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(a.iL[i] == b.iL[i]);
    CHECK(a.Vo[i] == b.Vo[i]);
  }
  EmiConfig other = cfg;
  other.seed = 8;
  const auto c = add_emi(clean, other, p);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (c.iL[i] != a.iL[i]) ++diff;
  CHECK(diff > 2900);
}

TEST_CASE("background noise level matches its configuration away from edges") {
  const auto p = ConverterParams::benchmark();
  const auto clean = simulate(p, 0.5e-6, 3000);
  EmiConfig cfg;
  cfg.seed = 3;
  const auto noisy = add_emi(clean, cfg, p);
  const auto edges = switching_edges(p, clean.time(0), clean.time(2999));
  const double sig_p = cfg.pulse_width / 2.0;

  for (int ch = 0; ch < 2; ++ch) {
    const auto& cv = ch == 0 ? clean.iL : clean.Vo;
    const auto& nv = ch == 0 ? noisy.iL : noisy.Vo;
    double mean = 0.0;
    for (double v : cv) mean += v;
    mean /= static_cast<double>(cv.size());
    double var = 0.0;
    for (double v : cv) var += (v - mean) * (v - mean);
    const double sd_clean = std::sqrt(var / static_cast<double>(cv.size()));

    double acc = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < cv.size(); ++i) {
      const double t = clean.time(i);
      bool near_edge = false;
      for (double te : edges)
        if (std::abs(t - te) < 5.0 * sig_p) near_edge = true;
      if (near_edge) continue;
      const double r = nv[i] - cv[i];
      acc += r * r;
      ++kept;
    }
    REQUIRE(kept > 1500);  // 30 edges each mask a 10 us half-window
    const double sd_noise = std::sqrt(acc / static_cast<double>(kept));
    CHECK(sd_noise == doctest::Approx(0.02 * sd_clean).epsilon(0.10));
  }
}

TEST_CASE("subsampling keeps every stride-th sample from the start") {
  const auto p = ConverterParams::benchmark();
  const auto w = simulate(p, 0.5e-6, 3000);
  const auto s = subsample(w, 30);
  REQUIRE(s.size() == 100);
  CHECK(s.dt == doctest::Approx(15e-6).epsilon(1e-12));
  CHECK(s.t0 == w.t0);
  for (std::size_t k = 0; k < 100; ++k) {
    CHECK(s.iL[k] == w.iL[30 * k]);
    CHECK(s.Vo[k] == w.Vo[30 * k]);
  }

  const auto id = subsample(w, 1);
  CHECK(id.size() == w.size());
  CHECK(id.iL == w.iL);

  Waveform ten;
  ten.dt = 1.0;
  ten.t0 = 1.0;
  ten.iL.assign(10, 1.0);
  ten.Vo.assign(10, 2.0);
  CHECK(subsample(ten, 4).size() == 3);

  CHECK_THROWS_AS(subsample(Waveform{}, 2), std::invalid_argument);
  CHECK_THROWS_AS(subsample(ten, 0), std::invalid_argument);
}

TEST_CASE("waveform csv round-trips bit-exactly") {
  const auto p = ConverterParams::benchmark();
  EmiConfig cfg;
  cfg.seed = 11;
  const auto w = add_emi(simulate(p, 0.5e-6, 3000), cfg, p);
  const auto path =
      (std::filesystem::temp_directory_path() / "snnid_wave_rt.csv").string();
  snnid::write_waveform_csv(path, w);
  const auto r = snnid::read_waveform_csv(path);
  REQUIRE(r.size() == w.size());
  CHECK(r.t0 == w.t0);
  CHECK(r.dt == doctest::Approx(w.dt).epsilon(1e-12));
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(r.iL[i] == w.iL[i]);
    CHECK(r.Vo[i] == w.Vo[i]);
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(snnid::read_waveform_csv("/nonexistent/nowhere.csv"),
                  snnid::ConfigError);
}

TEST_CASE("parameter invariants are enforced") {
  auto p = ConverterParams::benchmark();
  p.d = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ConverterParams::benchmark();
  p.L = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ConverterParams::benchmark();
  p.Rs = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_NOTHROW(ConverterParams::benchmark().validate());
}
