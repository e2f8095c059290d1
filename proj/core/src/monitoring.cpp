#include "snnid/monitoring.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "snnid/efficiency.hpp"
#include "snnid/errors.hpp"
#include "snnid/rng.hpp"

namespace snnid {

namespace {

// Measurement convention shared with training: 0.5 us grid, 1.5 ms span,
// 100-point estimator window.
constexpr double kMeasDt = 0.5e-6;
constexpr std::size_t kMeasSteps = 3000;
constexpr std::size_t kWindow = 100;

Waveform noisy_window(const ConverterParams& p, std::uint64_t emi_seed,
                      const EmiConfig& base) {
  Waveform clean = simulate(p, kMeasDt, kMeasSteps);
  EmiConfig cfg = base;
  cfg.seed = emi_seed;
  Waveform noisy = add_emi(clean, cfg, p);
  return subsample(noisy, kMeasSteps / kWindow);
}

MonitorRow eval_row(const SnnEstimator& snn, const FfEstimator& ff,
                    const ConverterParams& truth, const Waveform& window,
                    SnnState* state) {
  MonitorRow row;
  row.true_L = truth.L;
  row.true_C = truth.C;
  row.true_Rs = truth.Rs;

  SnnOutput out = snn_forward(snn, normalize_input(window), state);
  row.snn_L = out.params.L.value();
  row.snn_C = out.params.C.value();
  row.snn_Rs = out.params.Rs.value();
  row.spike_rate = 1.0 - sparsity(out.record);
  if (state) *state = out.final_state;

  ParamEstimate fp = ff_forward(ff, window);
  row.ff_L = fp.L.value();
  row.ff_C = fp.C.value();
  row.ff_Rs = fp.Rs.value();
  return row;
}

}  // namespace

void DegradationSchedule::validate() const {
  if (n_snapshots < 2)
    throw ConfigError("degradation schedule needs at least 2 snapshots");
  for (double v : {L_start, L_end, C_start, C_end, Rs_start, Rs_end})
    if (!(v > 0.0)) throw ConfigError("schedule endpoints must be positive");
}

ConverterParams DegradationSchedule::at(std::size_t snapshot) const {
  validate();
  if (snapshot < 1 || snapshot > n_snapshots)
    throw std::invalid_argument("snapshot out of range");
  double frac = static_cast<double>(snapshot - 1) /
                static_cast<double>(n_snapshots - 1);
  ConverterParams p = ConverterParams::benchmark();
  p.L = L_start + (L_end - L_start) * frac;
  p.C = C_start + (C_end - C_start) * frac;
  p.Rs = Rs_start + (Rs_end - Rs_start) * frac;
  return p;
}

void Scenario::validate() const {
  if (cycles < 2) throw ConfigError("scenario needs at least 2 cycles");
  if (kind == Kind::abrupt && (fault_cycle < 1 || fault_cycle > cycles))
    throw ConfigError("fault_cycle must lie within the cycle range");
  if (!(rs_healthy > 0.0) || !(rs_fault > 0.0))
    throw ConfigError("scenario resistances must be positive");
}

double Scenario::true_rs(std::size_t cycle) const {
  validate();
  if (cycle < 1 || cycle > cycles)
    throw std::invalid_argument("cycle out of range");
  switch (kind) {
    case Kind::healthy:
      return rs_healthy;
    case Kind::abrupt:
      return cycle < fault_cycle ? rs_healthy : rs_fault;
    case Kind::gradual:
      return rs_healthy + (rs_fault - rs_healthy) *
                              static_cast<double>(cycle - 1) /
                              static_cast<double>(cycles - 1);
  }
  throw std::logic_error("unreachable");
}

MonitorLog run_degradation(const SnnEstimator& snn, const FfEstimator& ff,
                           const DegradationSchedule& sched,
                           std::uint64_t seed, const EmiConfig& emi) {
  sched.validate();
  MonitorLog log;
  log.rows.reserve(sched.n_snapshots);
  for (std::size_t i = 1; i <= sched.n_snapshots; ++i) {
    ConverterParams truth = sched.at(i);
    Waveform window = noisy_window(truth, Rng::stream_seed(seed, i), emi);
    MonitorRow row = eval_row(snn, ff, truth, window, nullptr);
    row.cycle = i;
    row.persistent = false;
    log.rows.push_back(row);
  }
  return log;
}

DegradationSummary degradation_summary(const MonitorLog& log) {
  if (log.rows.empty()) throw std::invalid_argument("empty monitor log");
  DegradationSummary s;
  for (const auto& r : log.rows) {
    s.snn_rel_err[0] += std::abs(r.snn_L - r.true_L) / r.true_L;
    s.snn_rel_err[1] += std::abs(r.snn_C - r.true_C) / r.true_C;
    s.snn_rel_err[2] += std::abs(r.snn_Rs - r.true_Rs) / r.true_Rs;
    s.ff_rel_err[0] += std::abs(r.ff_L - r.true_L) / r.true_L;
    s.ff_rel_err[1] += std::abs(r.ff_C - r.true_C) / r.true_C;
    s.ff_rel_err[2] += std::abs(r.ff_Rs - r.true_Rs) / r.true_Rs;
  }
  double inv = 1.0 / static_cast<double>(log.rows.size());
  for (auto& v : s.snn_rel_err) v *= inv;
  for (auto& v : s.ff_rel_err) v *= inv;
  return s;
}

MonitorLog run_event_driven(const SnnEstimator& snn, const FfEstimator& ff,
                            const Scenario& scenario, std::uint64_t seed,
                            bool persistent, const EmiConfig& emi) {
  scenario.validate();
  MonitorLog log;
  log.rows.reserve(scenario.cycles);
  SnnState state;
  for (std::size_t c = 1; c <= scenario.cycles; ++c) {
    ConverterParams truth = ConverterParams::benchmark();
    truth.Rs = scenario.true_rs(c);
    Waveform window = noisy_window(truth, Rng::stream_seed(seed, c), emi);
    MonitorRow row =
        eval_row(snn, ff, truth, window, persistent ? &state : nullptr);
    row.cycle = c;
    row.persistent = persistent;
    log.rows.push_back(row);
  }
  return log;
}

double rs_mae(const MonitorLog& log, std::size_t lo, std::size_t hi,
              Model model) {
  if (lo < 1 || hi < lo || hi > log.rows.size())
    throw std::invalid_argument("rs_mae window out of range");
  double acc = 0.0;
  for (std::size_t c = lo; c <= hi; ++c) {
    const auto& r = log.rows[c - 1];
    double est = model == Model::snn ? r.snn_Rs : r.ff_Rs;
    acc += std::abs(est - r.true_Rs);
  }
  return acc / static_cast<double>(hi - lo + 1);
}

std::vector<double> spike_rates(const MonitorLog& log) {
  std::vector<double> out;
  out.reserve(log.rows.size());
  for (const auto& r : log.rows) out.push_back(r.spike_rate);
  return out;
}

std::optional<std::size_t> detect_fault(const std::vector<double>& rates,
                                        double threshold_pp) {
  double thr = threshold_pp / 100.0;
  for (std::size_t i = 1; i < rates.size(); ++i)
    if (rates[i] - rates[i - 1] >= thr) return i + 1;
  return std::nullopt;
}

void write_monitor_csv(const std::string& path, const MonitorLog& log) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << "cycle,true_L,true_C,true_Rs,snn_L,snn_C,snn_Rs,ff_L,ff_C,ff_Rs,"
       "spike_rate,persistent\n";
  char buf[512];
  for (const auto& r : log.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%d\n",
                  r.cycle, r.true_L, r.true_C, r.true_Rs, r.snn_L, r.snn_C,
                  r.snn_Rs, r.ff_L, r.ff_C, r.ff_Rs, r.spike_rate,
                  r.persistent ? 1 : 0);
    f << buf;
  }
  if (!f) throw ConfigError("write failed: " + path);
}

MonitorLog read_monitor_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) ||
      line !=
          "cycle,true_L,true_C,true_Rs,snn_L,snn_C,snn_Rs,ff_L,ff_C,ff_Rs,"
          "spike_rate,persistent")
    throw ConfigError("bad monitor CSV header in " + path);
  MonitorLog log;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    MonitorRow r;
    unsigned long long cycle = 0;
    int persistent = 0;
    int got = std::sscanf(
        line.c_str(),
        "%llu,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d", &cycle, &r.true_L,
        &r.true_C, &r.true_Rs, &r.snn_L, &r.snn_C, &r.snn_Rs, &r.ff_L,
        &r.ff_C, &r.ff_Rs, &r.spike_rate, &persistent);
    if (got != 12) throw ConfigError("bad monitor CSV row in " + path);
    r.cycle = static_cast<std::size_t>(cycle);
    r.persistent = persistent != 0;
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace snnid
