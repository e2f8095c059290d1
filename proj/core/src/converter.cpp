#include "snnid/converter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "snnid/errors.hpp"
#include "snnid/rng.hpp"

namespace snnid {

namespace {

double channel_std(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(x.size()));
}

std::size_t step_count(double span, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integration dt must be > 0");
  if (!(span > 0.0))
    throw std::invalid_argument("integration span must be > 0");
  // Tolerates spans that are an integer multiple of dt up to rounding.
  return static_cast<std::size_t>(std::floor(span / dt + 1e-9));
}

}  // namespace

void ConverterParams::validate() const {
  if (!(L > 0.0) || !(C > 0.0) || !(R > 0.0) || !(fs > 0.0))
    throw std::invalid_argument("L, C, R, fs must all be > 0");
  if (!(Rs >= 0.0)) throw std::invalid_argument("Rs must be >= 0");
  if (!(d > 0.0) || !(d < 1.0)) throw std::invalid_argument("d must be in (0,1)");
  if (!(Vg > 0.0)) throw std::invalid_argument("Vg must be > 0");
}

Waveform TensorWaveform::values() const {
  Waveform w;
  w.dt = dt;
  w.t0 = t0;
  w.iL.reserve(iL.size());
  w.Vo.reserve(Vo.size());
  for (const auto& t : iL) w.iL.push_back(t.value());
  for (const auto& t : Vo) w.Vo.push_back(t.value());
  return w;
}

std::array<double, 2> buck_rhs(const std::array<double, 2>& state,
                               const ConverterParams& p) {
  const double iL = state[0], Vo = state[1];
  return {(p.d * p.Vg - Vo - p.Rs * iL) / p.L, (iL - Vo / p.R) / p.C};
}

TensorWaveform rk4_integrate(const TensorParams& p,
                             std::pair<double, double> t_span, double dt,
                             std::array<double, 2> init) {
  if (!p.L.defined() || !p.C.defined() || !p.Rs.defined() ||
      !p.L.is_scalar() || !p.C.is_scalar() || !p.Rs.is_scalar())
    throw std::invalid_argument("rk4_integrate: L, C, Rs must be scalar tensors");
  const std::size_t n = step_count(t_span.second - t_span.first, dt);

  // One reciprocal per call; every step then multiplies.
  const ad::Tensor invL = ad::reciprocal(p.L);
  const ad::Tensor invC = ad::reciprocal(p.C);
  const ad::Tensor dvg = ad::Tensor::scalar(p.d * p.Vg);
  const double invR = 1.0 / p.R;

  auto rhs = [&](const ad::Tensor& iL, const ad::Tensor& Vo) {
    ad::Tensor diL = ad::mul(ad::sub(ad::sub(dvg, Vo), ad::mul(p.Rs, iL)), invL);
    ad::Tensor dVo = ad::mul(ad::sub(iL, ad::scalar_mul(Vo, invR)), invC);
    return std::pair{diL, dVo};
  };

  ad::Tensor iL = ad::Tensor::scalar(init[0]);
  ad::Tensor Vo = ad::Tensor::scalar(init[1]);
  TensorWaveform out;
  out.dt = dt;
  out.t0 = t_span.first + dt;
  out.iL.reserve(n);
  out.Vo.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    try {
      const auto [k1i, k1v] = rhs(iL, Vo);
      const auto [k2i, k2v] = rhs(iL + (dt / 2) * k1i, Vo + (dt / 2) * k1v);
      const auto [k3i, k3v] = rhs(iL + (dt / 2) * k2i, Vo + (dt / 2) * k2v);
      const auto [k4i, k4v] = rhs(iL + dt * k3i, Vo + dt * k3v);
      iL = iL + (dt / 6) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
      Vo = Vo + (dt / 6) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    } catch (const NumericError&) {
      throw NumericError("non-finite state at integration step " +
                         std::to_string(k));
    }
    out.iL.push_back(iL);
    out.Vo.push_back(Vo);
  }
  return out;
}

Waveform simulate(const ConverterParams& p, double dt, std::size_t n_steps) {
  p.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
  if (n_steps == 0) throw std::invalid_argument("simulate: n_steps must be > 0");
  Waveform w;
  w.dt = dt;
  w.t0 = dt;
  w.iL.reserve(n_steps);
  w.Vo.reserve(n_steps);
  std::array<double, 2> x{0.0, 0.0};
  for (std::size_t k = 0; k < n_steps; ++k) {
    const auto k1 = buck_rhs(x, p);
    const auto k2 = buck_rhs({x[0] + dt / 2 * k1[0], x[1] + dt / 2 * k1[1]}, p);
    const auto k3 = buck_rhs({x[0] + dt / 2 * k2[0], x[1] + dt / 2 * k2[1]}, p);
    const auto k4 = buck_rhs({x[0] + dt * k3[0], x[1] + dt * k3[1]}, p);
    x[0] += dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    x[1] += dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]))
      throw NumericError("non-finite state at integration step " +
                         std::to_string(k));
    w.iL.push_back(x[0]);
    w.Vo.push_back(x[1]);
  }
  return w;
}

std::vector<double> switching_edges(const ConverterParams& p, double t_first,
                                    double t_last) {
  const double T = 1.0 / p.fs;
  const double eps = 1e-12;
  std::vector<double> edges;
  const auto k_lo = static_cast<long>(std::floor(t_first / T)) - 1;
  const auto k_hi = static_cast<long>(std::ceil(t_last / T)) + 1;
  for (long k = k_lo; k <= k_hi; ++k) {
    for (double te : {k * T, (k + p.d) * T}) {
      if (te >= t_first - eps && te <= t_last + eps) edges.push_back(te);
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

Waveform add_emi(const Waveform& w, const EmiConfig& cfg,
                 const ConverterParams& p) {
  if (w.size() == 0) throw std::invalid_argument("add_emi: empty waveform");
  if (!(cfg.background_sigma_frac >= 0.0) || !(cfg.pulse_amp_frac >= 0.0))
    throw std::invalid_argument("add_emi: noise fractions must be >= 0");
  if (!(cfg.pulse_width > 0.0))
    throw std::invalid_argument("add_emi: pulse_width must be > 0");
  const double span = w.dt * static_cast<double>(w.size() - 1);
  if (span + w.dt < 1.0 / p.fs)
    throw std::invalid_argument(
        "add_emi: waveform shorter than one switching period");

  const double sig_p = cfg.pulse_width / 2.0;
  const auto edges = switching_edges(p, w.time(0), w.time(w.size() - 1));
  Rng rng(cfg.seed);
  Waveform out = w;

  // Draw order is part of the contract (see header): channels iL then Vo;
  // per channel all background normals, then one sign per edge ascending.
  for (std::vector<double>* ch : {&out.iL, &out.Vo}) {
    const double sd = channel_std(*ch);
    const double bg = cfg.background_sigma_frac * sd;
    for (double& v : *ch) {
      const double z = rng.normal();
      if (bg != 0.0) v += bg * z;
    }
    const double amp = cfg.pulse_amp_frac * sd;
    for (double te : edges) {
      const double a = rng.sign() * amp;
      if (a == 0.0) continue;
      for (std::size_t i = 0; i < ch->size(); ++i) {
        const double u = w.time(i) - te;
        (*ch)[i] += a * std::exp(-u * u / (2.0 * sig_p * sig_p));
      }
    }
  }
  return out;
}

Waveform subsample(const Waveform& w, std::size_t stride) {
  if (stride < 1) throw std::invalid_argument("subsample: stride must be >= 1");
  if (w.size() == 0) throw std::invalid_argument("subsample: empty waveform");
  Waveform out;
  out.dt = w.dt * static_cast<double>(stride);
  out.t0 = w.t0;
  for (std::size_t i = 0; i < w.size(); i += stride) {
    out.iL.push_back(w.iL[i]);
    out.Vo.push_back(w.Vo[i]);
  }
  return out;
}

void write_waveform_csv(const std::string& path, const Waveform& w) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "t,iL,Vo\n";
  char line[160];
  for (std::size_t k = 0; k < w.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", w.time(k), w.iL[k],
                  w.Vo[k]);
    out << line;
  }
  if (!out) throw ConfigError("write failed: " + path);
}

Waveform read_waveform_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "t,iL,Vo")
    throw ConfigError("bad waveform csv header in " + path);
  std::vector<double> t;
  Waveform w;
  while (std::getline(in, line)) {
    if (line.empty()) continue;  // trailing newline
    double tv, iv, vv;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &tv, &iv, &vv) != 3)
      throw ConfigError("bad waveform csv row in " + path + ": " + line);
    t.push_back(tv);
    w.iL.push_back(iv);
    w.Vo.push_back(vv);
  }
  if (t.size() < 2)
    throw ConfigError("waveform csv needs at least two samples: " + path);
  w.t0 = t.front();
  w.dt = t[1] - t[0];
  return w;
}

}  // namespace snnid
