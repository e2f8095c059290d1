#include "commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include "snnid/converter.hpp"
#include "snnid/efficiency.hpp"
#include "snnid/errors.hpp"
#include "snnid/estimators.hpp"
#include "snnid/monitoring.hpp"
#include "snnid/rng.hpp"
#include "snnid/training.hpp"

namespace snnid::cli {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

ConverterParams circuit_from(const Config& cfg) {
  ConverterParams p;
  p.L = cfg.get_double("L");
  p.C = cfg.get_double("C");
  p.Rs = cfg.get_double("Rs");
  p.Vg = cfg.get_double("Vg");
  p.d = cfg.get_double("d");
  p.R = cfg.get_double("R");
  p.fs = cfg.get_double("fs");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad circuit configuration: ") + e.what());
  }
  return p;
}

EmiConfig emi_from(const Config& cfg, std::uint64_t seed) {
  EmiConfig emi;
  emi.background_sigma_frac = cfg.get_double("noise_background_frac");
  emi.pulse_width = cfg.get_double("noise_pulse_width");
  emi.pulse_amp_frac = cfg.get_double("noise_pulse_amp_frac");
  emi.seed = seed;
  return emi;
}

// The measurement either comes from a CSV (key `data`) or is generated
// from the configured circuit at the configured grid, with EMI unless
// no_noise is set.
Waveform load_or_generate(const Config& cfg) {
  std::string data = cfg.get_string("data");
  if (!data.empty()) return read_waveform_csv(data);
  ConverterParams p = circuit_from(cfg);
  Waveform clean = simulate(p, cfg.get_double("meas_dt"),
                            cfg.get_size("meas_steps"));
  if (cfg.get_bool("no_noise")) return clean;
  return add_emi(clean, emi_from(cfg, cfg.get_uint("seed")), p);
}

// 100-point estimator window by integer-stride subsampling.
Waveform window_of(const Waveform& meas) {
  if (meas.size() < 100 || meas.size() % 100 != 0)
    throw ConfigError(
        "measurement length must be a positive multiple of 100, got " +
        std::to_string(meas.size()));
  return subsample(meas, meas.size() / 100);
}

void print_table1(const ConverterParams& truth, double L, double C,
                  double Rs) {
  auto rel = [](double est, double t) {
    return 100.0 * std::abs(est - t) / t;
  };
  std::printf("  %-10s %12s %12s %9s\n", "parameter", "true", "estimated",
              "error");
  std::printf("  %-10s %12.4f %12.4f %8.1f%%\n", "L (uH)", truth.L * 1e6,
              L * 1e6, rel(L, truth.L));
  std::printf("  %-10s %12.4f %12.4f %8.1f%%\n", "C (uF)", truth.C * 1e6,
              C * 1e6, rel(C, truth.C));
  std::printf("  %-10s %12.4f %12.4f %8.1f%%\n", "Rs (ohm)", truth.Rs, Rs,
              rel(Rs, truth.Rs));
}

std::unique_ptr<Estimator> load_checkpoint(const std::string& path,
                                           const std::string& expect_kind,
                                           const std::string& advice) {
  if (path.empty())
    throw ConfigError("missing checkpoint path; " + advice);
  if (!fs::exists(path))
    throw ConfigError("checkpoint not found: " + path + "; " + advice);
  std::unique_ptr<Estimator> est = load_estimator(path);
  if (!expect_kind.empty() && est->kind() != expect_kind)
    throw ConfigError("checkpoint " + path + " holds a '" + est->kind() +
                      "' model where '" + expect_kind + "' is required");
  return est;
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.get_size("epochs");
  tc.lr = cfg.get_double("lr");
  tc.lr_bias_mult = cfg.get_double("lr_bias_mult");
  tc.clip_norm = cfg.get_double("clip_norm");
  // The dense baseline trains unclipped; an explicit key still wins.
  if (cfg.get_string("mode") == "ff" && !cfg.explicitly_set("clip_norm"))
    tc.clip_norm = 0.0;
  tc.seed = cfg.get_uint("seed");
  tc.solver_dt = cfg.get_double("solver_dt");
  tc.sim_span = cfg.get_double("sim_span");
  return tc;
}

ParamRanges ranges_from(const Config& cfg) {
  ParamRanges r;
  r.L_range = {cfg.get_double("L_min"), cfg.get_double("L_max")};
  r.C_range = {cfg.get_double("C_min"), cfg.get_double("C_max")};
  r.Rs_range = {cfg.get_double("Rs_min"), cfg.get_double("Rs_max")};
  for (auto [lo, hi] : {r.L_range, r.C_range, r.Rs_range})
    if (!(lo > 0.0) || !(hi > lo))
      throw ConfigError("parameter ranges need 0 < min < max");
  return r;
}

// Deterministic parallel variant of make_dataset: truths come from the
// same master stream, per-item work is independent, so the result is
// identical for any job count.
std::vector<DatasetItem> build_dataset(const ParamRanges& ranges,
                                       std::size_t n, std::uint64_t seed,
                                       double meas_dt, std::size_t meas_steps,
                                       std::size_t jobs) {
  if (jobs <= 1) return make_dataset(ranges, n, seed, meas_dt, meas_steps);
  std::vector<DatasetItem> items(n);
  Rng master(seed);
  for (auto& item : items) item.truth = sample_params(ranges, master);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      Waveform clean = simulate(items[i].truth, meas_dt, meas_steps);
      EmiConfig emi;
      emi.seed = Rng::stream_seed(seed, i + 1);
      items[i].noisy = add_emi(clean, emi, items[i].truth);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return items;
}

void write_raster_csv(const std::string& path, const SpikeRecord& rec) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << "layer,neuron,timestep\n";
  for (std::size_t l = 0; l < rec.layers(); ++l) {
    std::size_t h = rec.layer_sizes[l];
    for (std::size_t k = 0; k < rec.n_steps; ++k)
      for (std::size_t n = 0; n < h; ++n)
        if (rec.bits[l][k * h + n])
          f << (l + 1) << "," << n << "," << k << "\n";
  }
  if (!f) throw ConfigError("write failed: " + path);
}

}  // namespace

KeyTable circuit_keys() {
  return {
      {"L", "138e-6", "inductance, H"},
      {"C", "10e-6", "output capacitance, F"},
      {"Rs", "0.1", "lumped series resistance, ohm"},
      {"Vg", "20", "input voltage, V"},
      {"d", "0.5", "duty ratio"},
      {"R", "10", "load resistance, ohm"},
      {"fs", "10000", "switching frequency, Hz"},
  };
}

KeyTable measurement_keys() {
  return {
      {"meas_dt", "0.5e-6", "measurement sample period, s"},
      {"meas_steps", "3000", "measurement sample count"},
  };
}

KeyTable noise_keys() {
  return {
      {"noise_background_frac", "0.02",
       "background noise std as a fraction of channel std"},
      {"noise_pulse_width", "4e-6", "switching-edge pulse width, s"},
      {"noise_pulse_amp_frac", "0.25",
       "edge pulse peak as a fraction of channel std"},
      {"no_noise", "false", "skip interference entirely"},
  };
}

KeyTable train_keys() {
  return {
      {"mode", "snn", "estimator kind: snn | ff"},
      {"variant", "single", "training protocol: single | multi"},
      {"epochs", "3000", "training epochs"},
      {"lr", "5e-5", "base learning rate (multi protocol uses 1e-4)"},
      {"lr_bias_mult", "3", "learning-rate multiplier for output biases"},
      {"clip_norm", "0.3",
       "global gradient-norm limit; <= 0 disables (ff default: disabled)"},
      {"solver_dt", "5e-6", "solver step, s (300 points over sim_span)"},
      {"sim_span", "1.5e-3", "simulated horizon, s"},
      {"hidden", "128", "spiking hidden width"},
      {"data", "", "measurement CSV; empty generates the benchmark"},
      {"resume", "", "checkpoint to continue from (weights only)"},
      {"dataset_size", "200", "multi protocol: training waveform count"},
      {"dataset_seed", "42", "multi protocol: dataset master seed"},
      {"jobs", "1", "threads for dataset generation"},
  };
}

KeyTable range_keys() {
  return {
      {"L_min", "80e-6", "sampling range low, H"},
      {"L_max", "200e-6", "sampling range high, H"},
      {"C_min", "5e-6", "sampling range low, F"},
      {"C_max", "15e-6", "sampling range high, F"},
      {"Rs_min", "0.02", "sampling range low, ohm"},
      {"Rs_max", "0.5", "sampling range high, ohm"},
  };
}

KeyTable schedule_keys() {
  return {
      {"snapshots", "50", "degradation snapshot count"},
      {"L_start", "138e-6", "inductance at snapshot 1, H"},
      {"L_end", "120e-6", "inductance at the last snapshot, H"},
      {"C_start", "10e-6", "capacitance at snapshot 1, F"},
      {"C_end", "7e-6", "capacitance at the last snapshot, F"},
      {"Rs_start", "0.1", "series resistance at snapshot 1, ohm"},
      {"Rs_end", "0.3", "series resistance at the last snapshot, ohm"},
  };
}

KeyTable scenario_keys() {
  return {
      {"scenario", "abrupt", "cycle truth: healthy | abrupt | gradual"},
      {"cycles", "40", "monitoring cycles"},
      {"fault_cycle", "21", "first degraded cycle (abrupt scenario)"},
      {"persistent", "true", "carry SNN membrane state across cycles"},
      {"threshold_pp", "2",
       "spike-rate jump that flags a fault, percentage points"},
      {"rs_healthy", "0.1", "healthy series resistance, ohm"},
      {"rs_fault", "0.3", "degraded series resistance, ohm"},
  };
}

namespace {

KeyTable concat(std::initializer_list<KeyTable> parts) {
  KeyTable out;
  for (const auto& part : parts)
    out.insert(out.end(), part.begin(), part.end());
  return out;
}

const KeyTable kSeedKey = {{"seed", "1", "master random seed"}};
const KeyTable kDataKey = {
    {"data", "", "measurement CSV; empty generates the benchmark"}};
const KeyTable kCheckpointKey = {{"checkpoint", "", "estimator checkpoint"}};

}  // namespace

KeyTable simulate_table() {
  return concat({circuit_keys(), measurement_keys(), noise_keys(), kSeedKey});
}

KeyTable train_table() {
  return concat({train_keys(), range_keys(), circuit_keys(),
                 measurement_keys(), noise_keys(), kSeedKey});
}

KeyTable eval_table() {
  return concat({kCheckpointKey, kDataKey, circuit_keys(), measurement_keys(),
                 noise_keys(), kSeedKey});
}

KeyTable efficiency_table() {
  return concat({kCheckpointKey,
                 KeyTable{{"snapshot_rate", "1",
                           "inferences per second for always-on power"}},
                 kDataKey, circuit_keys(), measurement_keys(), noise_keys(),
                 kSeedKey});
}

KeyTable degrade_table() {
  return concat({KeyTable{{"snn", "", "trained spiking checkpoint"},
                          {"ff", "", "trained dense checkpoint"}},
                 schedule_keys(), noise_keys(), kSeedKey});
}

KeyTable monitor_table() {
  return concat({KeyTable{{"snn", "", "trained spiking checkpoint"},
                          {"ff", "", "trained dense checkpoint"}},
                 scenario_keys(), noise_keys(), kSeedKey});
}

KeyTable report_table() {
  return {{"dir", "", "directory holding run outputs; empty uses --out"}};
}

int cmd_simulate(const Config& cfg, const std::string& out) {
  ConverterParams p = circuit_from(cfg);
  Waveform clean = simulate(p, cfg.get_double("meas_dt"),
                            cfg.get_size("meas_steps"));
  Waveform noisy = cfg.get_bool("no_noise")
                       ? clean
                       : add_emi(clean, emi_from(cfg, cfg.get_uint("seed")),
                                 p);
  Waveform window = window_of(noisy);

  write_waveform_csv(join(out, "clean.csv"), clean);
  write_waveform_csv(join(out, "noisy.csv"), noisy);
  write_waveform_csv(join(out, "window.csv"), window);
  std::printf("wrote %zu-sample clean/noisy transients and a %zu-point "
              "window to %s\n",
              clean.size(), window.size(), out.c_str());
  return 0;
}

int cmd_train(const Config& cfg, const std::string& out) {
  std::string mode = cfg.get_string("mode");
  if (mode != "snn" && mode != "ff")
    throw ConfigError("mode must be snn or ff, got '" + mode + "'");
  std::string variant = cfg.get_string("variant");
  if (variant != "single" && variant != "multi")
    throw ConfigError("variant must be single or multi, got '" + variant +
                      "'");

  TrainConfig tc = train_config_from(cfg);
  std::uint64_t seed = cfg.get_uint("seed");

  std::unique_ptr<Estimator> est;
  std::string resume = cfg.get_string("resume");
  if (!resume.empty()) {
    est = load_checkpoint(resume, mode,
                          "pass a checkpoint whose kind matches --mode");
  } else if (mode == "snn") {
    est = std::make_unique<SnnEstimatorHandle>(
        SnnEstimator::init(seed, cfg.get_size("hidden")));
  } else {
    est = std::make_unique<FfEstimatorHandle>(FfEstimator::init(seed));
  }

  TrainResult res;
  if (variant == "single") {
    Waveform meas = load_or_generate(cfg);
    KnownDrive drive = KnownDrive::from(circuit_from(cfg));
    res = train_single(*est, meas, drive, tc);
  } else {
    std::size_t n = cfg.get_size("dataset_size");
    if (n == 0)
      throw ConfigError(
          "multi training needs a dataset; set dataset_size >= 1");
    std::vector<DatasetItem> data =
        build_dataset(ranges_from(cfg), n, cfg.get_uint("dataset_seed"),
                      cfg.get_double("meas_dt"), cfg.get_size("meas_steps"),
                      std::max<std::size_t>(1, cfg.get_size("jobs")));
    res = train_multi(*est, data, tc);
  }

  write_history_csv(join(out, "history.csv"), res.history);
  apply_checkpoint(*est, res.best);
  est->save(join(out, "checkpoint.json"));

  std::printf("%s %s training: best epoch %zu, loss %.6g\n", mode.c_str(),
              variant.c_str(), res.best.epoch, res.best.loss);

  // Final quality readout against the configured benchmark truth.
  ConverterParams truth = circuit_from(cfg);
  ParamEstimate pe = est->estimate(window_of(load_or_generate(cfg)));
  print_table1(truth, pe.L.value(), pe.C.value(), pe.Rs.value());
  return 0;
}

int cmd_eval(const Config& cfg, const std::string& out) {
  std::unique_ptr<Estimator> est =
      load_checkpoint(cfg.get_string("checkpoint"), "",
                      "pass checkpoint=<path> (train writes one)");
  Waveform meas = load_or_generate(cfg);
  ParamEstimate pe = est->estimate(window_of(meas));
  ConverterParams truth = circuit_from(cfg);

  std::printf("%s checkpoint on a %zu-sample measurement\n",
              est->kind().c_str(), meas.size());
  print_table1(truth, pe.L.value(), pe.C.value(), pe.Rs.value());

  std::string path = join(out, "eval.csv");
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << "param,true,estimated,rel_err\n";
  char buf[160];
  auto row = [&](const char* name, double t, double e) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", name, t, e,
                  std::abs(e - t) / t);
    f << buf;
  };
  row("L", truth.L, pe.L.value());
  row("C", truth.C, pe.C.value());
  row("Rs", truth.Rs, pe.Rs.value());
  if (!f) throw ConfigError("write failed: " + path);
  return 0;
}

int cmd_efficiency(const Config& cfg, const std::string& out) {
  std::unique_ptr<Estimator> est = load_checkpoint(
      cfg.get_string("checkpoint"), "snn",
      "spike metrics need a spiking checkpoint (train with mode=snn)");
  auto* handle = dynamic_cast<SnnEstimatorHandle*>(est.get());
  if (!handle) throw ConfigError("checkpoint is not a spiking model");
  const SnnEstimator& model = handle->model();

  Waveform window = window_of(load_or_generate(cfg));
  SnnOutput fwd = snn_forward(model, normalize_input(window));

  std::size_t H = model.H;
  std::uint64_t macs = count_macs({200, 128, 128, 128, 3});
  std::uint64_t sops = count_sops(fwd.record, {H, H, 3});
  std::uint64_t input_proj =
      static_cast<std::uint64_t>(fwd.record.n_steps) * 2 * H;
  EnergyReport rep = energy_report(macs, sops, EnergyCatalog{},
                                   cfg.get_double("snapshot_rate"));

  write_efficiency_csv(join(out, "efficiency.csv"), fwd.record, rep,
                       input_proj);
  write_rate_series_csv(join(out, "rates.csv"), rate_profiles(fwd.record));
  write_raster_csv(join(out, "raster.csv"), fwd.record);

  RateProfiles rp = rate_profiles(fwd.record);
  std::printf("sparsity %.4f | layer rates", sparsity(fwd.record));
  for (double r : rp.mean) std::printf(" %.4f", r);
  std::printf("\ndense %llu MAC = %.4g uJ | spiking %llu SOP = %.4g uJ",
              static_cast<unsigned long long>(macs), rep.ff_energy * 1e6,
              static_cast<unsigned long long>(sops), rep.snn_energy * 1e6);
  if (rep.ratio) std::printf(" | ratio %.1fx", *rep.ratio);
  std::printf("\nalways-on at %.3g /s: %.4g uW\n", rep.snapshot_rate,
              rep.always_on_power * 1e6);
  return 0;
}

namespace {

constexpr const char* kNeedTrained =
    "train both estimators first (snnid train --variant multi --mode snn|ff) "
    "and pass their checkpoints";

std::pair<SnnEstimator, FfEstimator> load_pair(const Config& cfg) {
  std::unique_ptr<Estimator> snn =
      load_checkpoint(cfg.get_string("snn"), "snn", kNeedTrained);
  std::unique_ptr<Estimator> ff =
      load_checkpoint(cfg.get_string("ff"), "ff", kNeedTrained);
  auto* sh = dynamic_cast<SnnEstimatorHandle*>(snn.get());
  auto* fh = dynamic_cast<FfEstimatorHandle*>(ff.get());
  if (!sh || !fh) throw ConfigError("checkpoint kinds do not match");
  return {sh->model(), fh->model()};
}

EmiConfig base_emi(const Config& cfg) {
  EmiConfig emi = emi_from(cfg, 0);  // per-cycle sub-seed applied later
  if (cfg.get_bool("no_noise")) {
    emi.background_sigma_frac = 0.0;
    emi.pulse_amp_frac = 0.0;
  }
  return emi;
}

}  // namespace

int cmd_degrade(const Config& cfg, const std::string& out) {
  auto [snn, ff] = load_pair(cfg);
  DegradationSchedule sched;
  sched.n_snapshots = cfg.get_size("snapshots");
  sched.L_start = cfg.get_double("L_start");
  sched.L_end = cfg.get_double("L_end");
  sched.C_start = cfg.get_double("C_start");
  sched.C_end = cfg.get_double("C_end");
  sched.Rs_start = cfg.get_double("Rs_start");
  sched.Rs_end = cfg.get_double("Rs_end");

  MonitorLog log =
      run_degradation(snn, ff, sched, cfg.get_uint("seed"), base_emi(cfg));
  write_monitor_csv(join(out, "degradation.csv"), log);

  DegradationSummary s = degradation_summary(log);
  std::printf("mean estimation error over %zu drift snapshots (%%)\n",
              log.rows.size());
  std::printf("  %-10s %8s %8s\n", "param", "SNN", "FF");
  const char* names[3] = {"L", "C", "Rs"};
  for (int i = 0; i < 3; ++i)
    std::printf("  %-10s %8.1f %8.1f\n", names[i], 100.0 * s.snn_rel_err[i],
                100.0 * s.ff_rel_err[i]);
  return 0;
}

int cmd_monitor(const Config& cfg, const std::string& out) {
  auto [snn, ff] = load_pair(cfg);
  Scenario sc;
  std::string kind = cfg.get_string("scenario");
  if (kind == "healthy")
    sc.kind = Scenario::Kind::healthy;
  else if (kind == "abrupt")
    sc.kind = Scenario::Kind::abrupt;
  else if (kind == "gradual")
    sc.kind = Scenario::Kind::gradual;
  else
    throw ConfigError("scenario must be healthy, abrupt, or gradual, got '" +
                      kind + "'");
  sc.cycles = cfg.get_size("cycles");
  sc.fault_cycle = cfg.get_size("fault_cycle");
  sc.rs_healthy = cfg.get_double("rs_healthy");
  sc.rs_fault = cfg.get_double("rs_fault");

  bool persistent = cfg.get_bool("persistent");
  MonitorLog log = run_event_driven(snn, ff, sc, cfg.get_uint("seed"),
                                    persistent, base_emi(cfg));
  write_monitor_csv(join(out, "monitor.csv"), log);

  std::vector<double> rates = spike_rates(log);
  double thr = cfg.get_double("threshold_pp");
  std::optional<std::size_t> hit = detect_fault(rates, thr);

  std::printf("%s scenario, %zu cycles, persistence %s\n", kind.c_str(),
              sc.cycles, persistent ? "on" : "off");
  if (hit) {
    double jump = rates[*hit - 1] - rates[*hit - 2];
    std::printf("fault detected at cycle %zu (spike rate %.1f%% -> %.1f%%, "
                "jump %.1f pp, threshold %.1f pp)\n",
                *hit, 100.0 * rates[*hit - 2], 100.0 * rates[*hit - 1],
                100.0 * jump, thr);
  } else {
    std::printf("no fault detected (threshold %.1f pp)\n", thr);
  }

  if (sc.kind == Scenario::Kind::abrupt && sc.fault_cycle > 1) {
    std::printf("  %-22s %10s %10s\n", "Rs MAE (ohm)", "SNN", "FF");
    std::printf("  %-22s %10.4f %10.4f\n", "pre-fault",
                rs_mae(log, 1, sc.fault_cycle - 1, Model::snn),
                rs_mae(log, 1, sc.fault_cycle - 1, Model::ff));
    std::printf("  %-22s %10.4f %10.4f\n", "post-fault",
                rs_mae(log, sc.fault_cycle, sc.cycles, Model::snn),
                rs_mae(log, sc.fault_cycle, sc.cycles, Model::ff));
  } else {
    std::printf("  %-22s %10s %10s\n", "Rs MAE (ohm)", "SNN", "FF");
    std::printf("  %-22s %10.4f %10.4f\n", "all cycles",
                rs_mae(log, 1, sc.cycles, Model::snn),
                rs_mae(log, 1, sc.cycles, Model::ff));
  }
  return 0;
}

int cmd_report(const Config& cfg, const std::string& out) {
  std::string dir = cfg.get_string("dir");
  if (dir.empty()) dir = out;

  bool found = false;
  std::string report_path = join(out, "report.csv");
  std::ofstream rep(report_path);
  if (!rep) throw ConfigError("cannot open for writing: " + report_path);
  rep << "section,metric,value\n";

  if (fs::exists(join(dir, "history.csv"))) {
    std::ifstream f(join(dir, "history.csv"));
    std::string line;
    std::getline(f, line);  // header
    std::size_t epochs = 0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    while (std::getline(f, line)) {
      unsigned long long e = 0;
      double loss = 0;
      if (std::sscanf(line.c_str(), "%llu,%lf", &e, &loss) == 2) {
        ++epochs;
        if (std::isfinite(loss) && loss < best) {
          best = loss;
          best_epoch = static_cast<std::size_t>(e);
        }
      }
    }
    found = true;
    std::printf("training: %zu epochs, best loss %.6g at epoch %zu\n", epochs,
                best, best_epoch);
    rep << "training,epochs," << epochs << "\n";
    rep << "training,best_loss," << best << "\n";
    rep << "training,best_epoch," << best_epoch << "\n";
  }

  if (fs::exists(join(dir, "efficiency.csv"))) {
    std::ifstream f(join(dir, "efficiency.csv"));
    std::string line;
    std::getline(f, line);
    std::printf("efficiency:\n");
    while (std::getline(f, line)) {
      char metric[64], unit[32], source[32];
      double value;
      if (std::sscanf(line.c_str(), "%63[^,],%lf,%31[^,],%31s", metric,
                      &value, unit, source) == 4) {
        std::printf("  %-20s %14.6g %s\n", metric, value, unit);
        rep << "efficiency," << metric << "," << value << "\n";
      }
    }
    found = true;
  }

  for (const char* name : {"degradation.csv", "monitor.csv"}) {
    if (!fs::exists(join(dir, name))) continue;
    MonitorLog log = read_monitor_csv(join(dir, name));
    if (log.rows.empty()) continue;
    found = true;
    std::string section =
        name[0] == 'd' ? "degradation" : "monitoring";
    double snn = rs_mae(log, 1, log.rows.size(), Model::snn);
    double ff = rs_mae(log, 1, log.rows.size(), Model::ff);
    std::printf("%s: %zu cycles, Rs MAE snn %.4f ff %.4f", section.c_str(),
                log.rows.size(), snn, ff);
    rep << section << ",cycles," << log.rows.size() << "\n";
    rep << section << ",rs_mae_snn," << snn << "\n";
    rep << section << ",rs_mae_ff," << ff << "\n";
    auto hit = detect_fault(spike_rates(log));
    if (hit) {
      std::printf(", rate jump at cycle %zu", *hit);
      rep << section << ",detected_cycle," << *hit << "\n";
    }
    std::printf("\n");
  }

  if (!found)
    throw ConfigError("nothing to report in " + dir +
                      " (expected history.csv, efficiency.csv, "
                      "degradation.csv, or monitor.csv)");
  return 0;
}

}  // namespace snnid::cli
