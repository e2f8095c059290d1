#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snnid/converter.hpp"
#include "snnid/estimators.hpp"

namespace snnid {

// Linear component drift sampled at n_snapshots points; snapshot 1 is the
// start triple, snapshot n_snapshots the end triple.
struct DegradationSchedule {
  std::size_t n_snapshots = 50;
  double L_start = 138e-6, L_end = 120e-6;
  double C_start = 10e-6, C_end = 7e-6;
  double Rs_start = 0.1, Rs_end = 0.3;

  void validate() const;
  ConverterParams at(std::size_t snapshot) const;  // 1-based
};

// Cycle-to-cycle truth for the event-driven runs; only Rs moves.
struct Scenario {
  enum class Kind { healthy, abrupt, gradual };
  Kind kind = Kind::abrupt;
  std::size_t cycles = 40;
  std::size_t fault_cycle = 21;  // first degraded cycle (abrupt)
  double rs_healthy = 0.1;
  double rs_fault = 0.3;

  void validate() const;
  double true_rs(std::size_t cycle) const;  // 1-based
};

struct MonitorRow {
  std::size_t cycle = 0;
  double true_L = 0, true_C = 0, true_Rs = 0;
  double snn_L = 0, snn_C = 0, snn_Rs = 0;
  double ff_L = 0, ff_C = 0, ff_Rs = 0;
  double spike_rate = 0;  // mean firing fraction over the window
  bool persistent = false;
};

struct MonitorLog {
  std::vector<MonitorRow> rows;
};

// Mean |est - true| / true per parameter, index order L, C, Rs.
struct DegradationSummary {
  std::array<double, 3> snn_rel_err{};
  std::array<double, 3> ff_rel_err{};
};

// Evaluates both estimators on one fresh noisy 1.5 ms transient per
// schedule snapshot (EMI sub-seed stream_seed(seed, snapshot); estimator
// state never carries over).
MonitorLog run_degradation(const SnnEstimator& snn, const FfEstimator& ff,
                           const DegradationSchedule& sched,
                           std::uint64_t seed, const EmiConfig& emi = {});

DegradationSummary degradation_summary(const MonitorLog& log);

// Cycle loop over a scenario: per cycle one noisy transient, both
// estimates, and the mean spike rate. With persistent == true the SNN
// carries its recurrent state across cycles; otherwise each cycle starts
// from zeros (bitwise identical to independent fresh evaluations).
MonitorLog run_event_driven(const SnnEstimator& snn, const FfEstimator& ff,
                            const Scenario& scenario, std::uint64_t seed,
                            bool persistent, const EmiConfig& emi = {});

enum class Model { snn, ff };

// Mean |Rs_est - Rs_true| over cycles lo..hi (1-based, inclusive).
double rs_mae(const MonitorLog& log, std::size_t lo, std::size_t hi,
              Model model);

std::vector<double> spike_rates(const MonitorLog& log);

// First cycle whose rate exceeds the previous cycle's by at least
// threshold_pp percentage points; rates[0] is cycle 1.
std::optional<std::size_t> detect_fault(const std::vector<double>& rates,
                                        double threshold_pp = 2.0);

void write_monitor_csv(const std::string& path, const MonitorLog& log);
MonitorLog read_monitor_csv(const std::string& path);

}  // namespace snnid
