#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snnid/autodiff.hpp"

namespace snnid {

// Averaged buck-converter model
//   diL/dt = (d*Vg - Vo - Rs*iL) / L
//   dVo/dt = (iL - Vo/R) / C
struct ConverterParams {
  double L = 138e-6;  // inductance, H
  double C = 10e-6;   // capacitance, F
  double Rs = 0.1;    // lumped series resistance, ohm
  double Vg = 20.0;   // input voltage, V
  double d = 0.5;     // duty ratio
  double R = 10.0;    // load resistance, ohm
  double fs = 10e3;   // switching frequency, Hz

  // The 10 kHz / 20 V benchmark condition used throughout.
  static ConverterParams benchmark() { return ConverterParams{}; }

  void validate() const;  // throws std::invalid_argument
};

// Uniformly sampled (iL, Vo) pair. The time of sample k is t0 + dt*k; a
// zero initial condition at t0 - dt is implied, not stored.
struct Waveform {
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<double> iL;
  std::vector<double> Vo;

  std::size_t size() const { return iL.size(); }
  double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
};

// Switching-synchronous interference: background Gaussian noise plus
// Gaussian-envelope pulses at every switching edge.
struct EmiConfig {
  double background_sigma_frac = 0.02;  // of per-channel signal std
  double pulse_width = 4e-6;            // envelope width ~ 2 sigma_p, s
  double pulse_amp_frac = 0.25;         // peak, of per-channel signal std
  std::uint64_t seed = 0;
};

// Same unknowns as ConverterParams but with the identified triple carried
// as scalar tensors so trajectories stay differentiable w.r.t. them. The
// drive constants stay plain.
struct TensorParams {
  ad::Tensor L;
  ad::Tensor C;
  ad::Tensor Rs;
  double Vg = 20.0;
  double d = 0.5;
  double R = 10.0;
};

// Trajectory whose samples are scalar tensors on the active tape.
struct TensorWaveform {
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<ad::Tensor> iL;
  std::vector<ad::Tensor> Vo;

  std::size_t size() const { return iL.size(); }
  Waveform values() const;  // detached copy
};

// Right-hand side of the averaged model at one state.
std::array<double, 2> buck_rhs(const std::array<double, 2>& state,
                               const ConverterParams& p);

// Classic fixed-step RK4 over [t_span.first, t_span.second]. Stores
// floor(span/dt) samples at t = t_span.first + dt*k, k = 1..n; the initial
// condition is not stored. Differentiable w.r.t. p.L/p.C/p.Rs when those
// are recorded on the active tape. A non-finite state raises NumericError
// naming the step index.
TensorWaveform rk4_integrate(const TensorParams& p,
                             std::pair<double, double> t_span, double dt,
                             std::array<double, 2> init);

// Ground-truth convenience wrapper: plain-double RK4 from zero state over
// [0, dt*n_steps] with the same stepping and storage convention.
Waveform simulate(const ConverterParams& p, double dt, std::size_t n_steps);

// Switching-edge times (turn-on k/fs, turn-off (k+d)/fs) that fall inside
// the closed interval [t_first, t_last], ascending.
std::vector<double> switching_edges(const ConverterParams& p, double t_first,
                                    double t_last);

// Adds background noise and edge pulses. Deterministic given cfg.seed.
// Draw order, for reproducing streams elsewhere: channels in order iL then
// Vo; per channel, one normal per sample in index order, then one sign per
// switching edge in ascending time order.
Waveform add_emi(const Waveform& w, const EmiConfig& cfg,
                 const ConverterParams& p);

// Keeps samples at indices 0, stride, 2*stride, ...
Waveform subsample(const Waveform& w, std::size_t stride);

// CSV with header t,iL,Vo and 17-significant-digit floats.
void write_waveform_csv(const std::string& path, const Waveform& w);
Waveform read_waveform_csv(const std::string& path);

}  // namespace snnid
