#include "snnid/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "snnid/errors.hpp"
#include "snnid/rng.hpp"

namespace snnid {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::size_t solver_steps(const TrainConfig& cfg) {
  return static_cast<std::size_t>(
      std::floor(cfg.sim_span / cfg.solver_dt + 1e-9));
}

double population_var(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return var / static_cast<double>(xs.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw ConfigError("lr must be positive and finite");
  if (!(lr_bias_mult > 0.0)) throw ConfigError("lr_bias_mult must be positive");
  if (!(solver_dt > 0.0) || !(sim_span > solver_dt))
    throw ConfigError("need 0 < solver_dt < sim_span");
  if (solver_steps(*this) == 0)
    throw ConfigError("sim_span/solver_dt yields no solver samples");
}

Adam::Adam(std::vector<Group> groups, double beta1, double beta2, double eps)
    : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  slots_.resize(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    slots_[g].resize(groups_[g].leaves.size());
    for (std::size_t i = 0; i < groups_[g].leaves.size(); ++i) {
      std::size_t n = groups_[g].leaves[i].values().size();
      slots_[g][i].m.assign(n, 0.0);
      slots_[g][i].v.assign(n, 0.0);
    }
  }
}

double Adam::step(double lr, double clip_norm) {
  // Single global norm across every group so the clip bound is exact over
  // the applied update's gradient.
  std::vector<std::vector<std::vector<double>>> grads(groups_.size());
  double sq = 0.0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    grads[g].reserve(groups_[g].leaves.size());
    for (auto& leaf : groups_[g].leaves) {
      grads[g].push_back(leaf.grad());
      for (double x : grads[g].back()) sq += x * x;
    }
  }
  double norm = std::sqrt(sq);
  double scale = 1.0;
  if (clip_norm > 0.0 && norm > clip_norm) scale = clip_norm / norm;

  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  for (std::size_t g = 0; g < groups_.size(); ++g) {
    double rate = lr * groups_[g].lr_mult;
    for (std::size_t i = 0; i < groups_[g].leaves.size(); ++i) {
      auto& slot = slots_[g][i];
      const auto& grad = grads[g][i];
      std::vector<double> delta(grad.size());
      for (std::size_t j = 0; j < grad.size(); ++j) {
        double gj = grad[j] * scale;
        slot.m[j] = beta1_ * slot.m[j] + (1.0 - beta1_) * gj;
        slot.v[j] = beta2_ * slot.v[j] + (1.0 - beta2_) * gj * gj;
        double mhat = slot.m[j] / bc1;
        double vhat = slot.v[j] / bc2;
        delta[j] = -rate * mhat / (std::sqrt(vhat) + eps_);
      }
      groups_[g].leaves[i].add_to_values(delta);
    }
  }
  return norm * scale;
}

double cosine_lr(double base, std::size_t epoch, std::size_t total) {
  if (total == 0) throw std::invalid_argument("cosine_lr: total == 0");
  double frac =
      static_cast<double>(std::min(epoch, total)) / static_cast<double>(total);
  return 0.5 * base * (1.0 + std::cos(M_PI * frac));
}

Waveform align_to_grid(const Waveform& meas, double dt, double t0,
                       std::size_t n) {
  if (meas.size() == 0) throw ConfigError("align_to_grid: empty measurement");
  Waveform out;
  out.dt = dt;
  out.t0 = t0;
  out.iL.reserve(n);
  out.Vo.reserve(n);
  double tol = meas.dt * 1e-6;
  for (std::size_t k = 0; k < n; ++k) {
    double t = t0 + dt * static_cast<double>(k);
    double jr = (t - meas.t0) / meas.dt;
    long long j = std::llround(jr);
    if (j < 0 || j >= static_cast<long long>(meas.size()) ||
        std::abs(meas.time(static_cast<std::size_t>(j)) - t) > tol) {
      throw ConfigError("align_to_grid: no measurement sample at t = " +
                        std::to_string(t));
    }
    out.iL.push_back(meas.iL[static_cast<std::size_t>(j)]);
    out.Vo.push_back(meas.Vo[static_cast<std::size_t>(j)]);
  }
  return out;
}

ad::Tensor reconstruction_loss(const TensorWaveform& pred,
                               const Waveform& meas) {
  std::size_t n = pred.size();
  if (n == 0 || n != meas.size())
    throw std::invalid_argument("reconstruction_loss: size mismatch");
  double tol = 1e-9 * std::max(1.0, std::abs(meas.dt));
  if (std::abs(pred.dt - meas.dt) > tol || std::abs(pred.t0 - meas.t0) > tol)
    throw std::invalid_argument("reconstruction_loss: grids differ");

  double var_i = population_var(meas.iL);
  double var_v = population_var(meas.Vo);
  if (var_i < 1e-24 || var_v < 1e-24)
    throw std::invalid_argument(
        "reconstruction_loss: measurement channel has (near-)zero variance");

  ad::Tensor acc_i = ad::Tensor::scalar(0.0);
  ad::Tensor acc_v = ad::Tensor::scalar(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    acc_i = ad::add(acc_i,
                    ad::square(ad::sub(pred.iL[k],
                                       ad::Tensor::scalar(meas.iL[k]))));
    acc_v = ad::add(acc_v,
                    ad::square(ad::sub(pred.Vo[k],
                                       ad::Tensor::scalar(meas.Vo[k]))));
  }
  double inv_n = 1.0 / static_cast<double>(n);
  return ad::add(ad::scalar_mul(acc_i, inv_n / var_i),
                 ad::scalar_mul(acc_v, inv_n / var_v));
}

namespace {

struct PreparedItem {
  Waveform input;   // 100-point estimator window
  Waveform target;  // restriction to the solver grid
};

PreparedItem prepare_item(const Waveform& meas, const TrainConfig& cfg) {
  if (meas.size() < 100 || meas.size() % 100 != 0)
    throw ConfigError("measurement length must be a positive multiple of 100, got " +
                      std::to_string(meas.size()));
  PreparedItem item;
  item.input = subsample(meas, meas.size() / 100);
  item.target =
      align_to_grid(meas, cfg.solver_dt, cfg.solver_dt, solver_steps(cfg));
  return item;
}

std::vector<std::vector<double>> snapshot_leaves(Estimator& est) {
  std::vector<std::vector<double>> out;
  for (auto& t : est.weight_leaves()) out.push_back(t.values());
  for (auto& t : est.bias_leaves()) out.push_back(t.values());
  return out;
}

void zero_all(Estimator& est) {
  for (auto& t : est.weight_leaves()) t.zero_grad();
  for (auto& t : est.bias_leaves()) t.zero_grad();
}

struct StepOutcome {
  bool ok = false;
  double loss = kNan;
  double L = kNan, C = kNan, Rs = kNan;
};

// One forward/backward on one item. Leaves gradients populated on
// success; a non-finite forward leaves them zeroed.
StepOutcome run_item(Estimator& est, const PreparedItem& item,
                     const KnownDrive& known, const TrainConfig& cfg) {
  StepOutcome out;
  ad::Tape tape;
  try {
    ad::Tape::Scope scope(tape);
    ParamEstimate p = est.estimate(item.input);
    out.L = p.L.value();
    out.C = p.C.value();
    out.Rs = p.Rs.value();
    TensorParams tp{p.L, p.C, p.Rs, known.Vg, known.d, known.R};
    TensorWaveform traj =
        rk4_integrate(tp, {0.0, cfg.sim_span}, cfg.solver_dt, {0.0, 0.0});
    ad::Tensor loss = reconstruction_loss(traj, item.target);
    out.loss = loss.value();
    if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
    tape.backward(loss);
    out.ok = true;
  } catch (const NumericError&) {
    zero_all(est);
    out.ok = false;
    out.loss = kNan;
  }
  return out;
}

TrainResult train_loop(Estimator& est, const std::vector<PreparedItem>& items,
                       const KnownDrive& known, const TrainConfig& cfg) {
  cfg.validate();
  if (items.empty()) throw ConfigError("training needs at least one item");

  Adam opt({{est.weight_leaves(), 1.0},
            {est.bias_leaves(), cfg.lr_bias_mult}});

  TrainResult res;
  res.history.reserve(cfg.epochs);
  res.best.loss = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    double lr_e = cosine_lr(cfg.lr, e, cfg.epochs);
    // Snapshot at epoch start: for a single item these are exactly the
    // weights the recorded loss was evaluated with.
    std::vector<std::vector<double>> start = snapshot_leaves(est);
    double loss_sum = 0.0, l_sum = 0.0, c_sum = 0.0, rs_sum = 0.0;
    std::size_t ok_count = 0;
    for (const auto& item : items) {
      zero_all(est);
      StepOutcome so = run_item(est, item, known, cfg);
      if (!so.ok) continue;  // skipped update, epoch mean over the rest
      opt.step(lr_e, cfg.clip_norm);
      loss_sum += so.loss;
      l_sum += so.L;
      c_sum += so.C;
      rs_sum += so.Rs;
      ++ok_count;
    }
    HistoryRow row;
    row.epoch = e;
    row.lr = lr_e;
    if (ok_count > 0) {
      double inv = 1.0 / static_cast<double>(ok_count);
      row.loss = loss_sum * inv;
      row.L = l_sum * inv;
      row.C = c_sum * inv;
      row.Rs = rs_sum * inv;
      if (!have_best || row.loss < res.best.loss) {
        have_best = true;
        res.best.epoch = e;
        res.best.loss = row.loss;
        res.best.L = row.L;
        res.best.C = row.C;
        res.best.Rs = row.Rs;
        res.best.weights = std::move(start);
      }
    } else {
      row.loss = kNan;
      row.L = kNan;
      row.C = kNan;
      row.Rs = kNan;
    }
    res.history.push_back(row);
  }
  zero_all(est);
  if (!have_best)
    throw NumericError("training never produced a finite epoch loss");
  return res;
}

}  // namespace

TrainResult train_single(Estimator& est, const Waveform& meas,
                         const KnownDrive& known, const TrainConfig& cfg) {
  std::vector<PreparedItem> items{prepare_item(meas, cfg)};
  return train_loop(est, items, known, cfg);
}

TrainResult train_multi(Estimator& est, const std::vector<DatasetItem>& data,
                        const TrainConfig& cfg) {
  std::vector<PreparedItem> items;
  items.reserve(data.size());
  KnownDrive known;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i == 0) {
      known = KnownDrive::from(data[i].truth);
    } else {
      KnownDrive k = KnownDrive::from(data[i].truth);
      if (k.Vg != known.Vg || k.d != known.d || k.R != known.R ||
          k.fs != known.fs)
        throw ConfigError("dataset items must share one drive configuration");
    }
    items.push_back(prepare_item(data[i].noisy, cfg));
  }
  return train_loop(est, items, known, cfg);
}

void apply_checkpoint(Estimator& est, const Checkpoint& ckpt) {
  std::vector<ad::Tensor> leaves = est.weight_leaves();
  for (auto& t : est.bias_leaves()) leaves.push_back(t);
  if (leaves.size() != ckpt.weights.size())
    throw ConfigError("checkpoint leaf count mismatch");
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].values().size() != ckpt.weights[i].size())
      throw ConfigError("checkpoint leaf shape mismatch");
    leaves[i].set_values(ckpt.weights[i]);
  }
}

ConverterParams sample_params(const ParamRanges& ranges, Rng& rng) {
  ConverterParams p = ConverterParams::benchmark();
  p.L = rng.uniform(ranges.L_range[0], ranges.L_range[1]);
  p.C = rng.uniform(ranges.C_range[0], ranges.C_range[1]);
  p.Rs = rng.uniform(ranges.Rs_range[0], ranges.Rs_range[1]);
  return p;
}

std::vector<DatasetItem> make_dataset(const ParamRanges& ranges, std::size_t n,
                                      std::uint64_t seed, double meas_dt,
                                      std::size_t meas_steps) {
  std::vector<DatasetItem> out;
  out.reserve(n);
  Rng master(seed);
  for (std::size_t i = 0; i < n; ++i) {
    DatasetItem item;
    item.truth = sample_params(ranges, master);
    Waveform clean = simulate(item.truth, meas_dt, meas_steps);
    EmiConfig emi;
    emi.seed = Rng::stream_seed(seed, i + 1);
    item.noisy = add_emi(clean, emi, item.truth);
    out.push_back(std::move(item));
  }
  return out;
}

void write_history_csv(const std::string& path,
                       const std::vector<HistoryRow>& rows) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << "epoch,loss,L,C,Rs,lr\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.loss, r.L, r.C, r.Rs, r.lr);
    f << buf;
  }
  if (!f) throw ConfigError("write failed: " + path);
}

}  // namespace snnid
