#include "snnid/efficiency.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "snnid/errors.hpp"

namespace snnid {

namespace {

std::size_t total_neurons(const SpikeRecord& rec) {
  std::size_t total = 0;
  for (std::size_t h : rec.layer_sizes) total += h;
  return total;
}

void require_nonempty(const SpikeRecord& rec) {
  if (rec.n_steps == 0 || rec.layers() == 0 || total_neurons(rec) == 0)
    throw std::invalid_argument("empty spike record");
}

}  // namespace

double sparsity(const SpikeRecord& rec) {
  require_nonempty(rec);
  std::size_t spikes = 0;
  for (std::size_t l = 0; l < rec.layers(); ++l) spikes += rec.layer_total(l);
  double slots =
      static_cast<double>(rec.n_steps) * static_cast<double>(total_neurons(rec));
  return 1.0 - static_cast<double>(spikes) / slots;
}

std::uint64_t count_macs(const std::vector<std::size_t>& layer_dims) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("count_macs needs at least two layer widths");
  std::uint64_t macs = 0;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i)
    macs += static_cast<std::uint64_t>(layer_dims[i]) *
            static_cast<std::uint64_t>(layer_dims[i + 1]);
  return macs;
}

std::uint64_t count_sops(const SpikeRecord& rec,
                         const std::vector<std::size_t>& fanouts) {
  require_nonempty(rec);
  if (fanouts.size() != rec.layers())
    throw std::invalid_argument("one fanout per recorded layer required");
  std::uint64_t sops = 0;
  for (std::size_t l = 0; l < rec.layers(); ++l)
    sops += static_cast<std::uint64_t>(rec.layer_total(l)) *
            static_cast<std::uint64_t>(fanouts[l]);
  return sops;
}

RateProfiles rate_profiles(const SpikeRecord& rec) {
  require_nonempty(rec);
  RateProfiles rp;
  rp.mean.resize(rec.layers());
  rp.series.resize(rec.layers());
  for (std::size_t l = 0; l < rec.layers(); ++l) {
    rp.series[l].resize(rec.n_steps);
    double h = static_cast<double>(rec.layer_sizes[l]);
    for (std::size_t k = 0; k < rec.n_steps; ++k)
      rp.series[l][k] = static_cast<double>(rec.count(l, k)) / h;
    rp.mean[l] =
        static_cast<double>(rec.layer_total(l)) /
        (h * static_cast<double>(rec.n_steps));
  }
  return rp;
}

EnergyReport energy_report(std::uint64_t macs, std::uint64_t sops,
                           const EnergyCatalog& cat, double snapshot_rate) {
  if (!(snapshot_rate > 0.0))
    throw std::invalid_argument("snapshot_rate must be positive");
  EnergyReport rep;
  rep.macs = macs;
  rep.sops = sops;
  rep.ff_energy = static_cast<double>(macs) * cat.mac_energy;
  rep.snn_energy = static_cast<double>(sops) * cat.sop_energy;
  if (sops > 0) rep.ratio = rep.ff_energy / rep.snn_energy;
  rep.snapshot_rate = snapshot_rate;
  rep.always_on_power = rep.snn_energy * snapshot_rate;
  return rep;
}

namespace {

void put_row(std::ofstream& f, const char* metric, double value,
             const char* unit, const char* source) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%.17g,%s,%s\n", metric, value, unit,
                source);
  f << buf;
}

}  // namespace

void write_efficiency_csv(const std::string& path, const SpikeRecord& rec,
                          const EnergyReport& rep,
                          std::uint64_t input_proj_ops) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << "metric,value,unit,source\n";
  put_row(f, "sparsity", sparsity(rec), "fraction", "measured");
  RateProfiles rp = rate_profiles(rec);
  for (std::size_t l = 0; l < rp.mean.size(); ++l) {
    std::string name = "layer" + std::to_string(l + 1) + "_rate";
    put_row(f, name.c_str(), rp.mean[l], "fraction", "measured");
  }
  put_row(f, "ff_macs", static_cast<double>(rep.macs), "op", "architecture");
  put_row(f, "snn_sops", static_cast<double>(rep.sops), "op", "measured");
  // The layer-1 analog drive is clocked dense arithmetic, not spike
  // traffic; it is listed apart and folded into an inclusive total.
  put_row(f, "input_proj_ops", static_cast<double>(input_proj_ops), "op",
          "architecture");
  put_row(f, "snn_ops_incl_input",
          static_cast<double>(rep.sops + input_proj_ops), "op", "derived");
  put_row(f, "ff_energy", rep.ff_energy * 1e6, "uJ", "estimated");
  put_row(f, "snn_energy", rep.snn_energy * 1e6, "uJ", "estimated");
  if (rep.ratio)
    put_row(f, "energy_ratio", *rep.ratio, "x", "estimated");
  put_row(f, "snapshot_rate", rep.snapshot_rate, "1/s", "configured");
  put_row(f, "always_on_power", rep.always_on_power * 1e6, "uW", "estimated");
  if (!f) throw ConfigError("write failed: " + path);
}

void write_rate_series_csv(const std::string& path, const RateProfiles& rp) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << "step";
  for (std::size_t l = 0; l < rp.series.size(); ++l)
    f << ",layer" << (l + 1) << "_rate";
  f << "\n";
  std::size_t steps = rp.series.empty() ? 0 : rp.series[0].size();
  char buf[64];
  for (std::size_t k = 0; k < steps; ++k) {
    f << k;
    for (const auto& s : rp.series) {
      std::snprintf(buf, sizeof(buf), ",%.17g", s[k]);
      f << buf;
    }
    f << "\n";
  }
  if (!f) throw ConfigError("write failed: " + path);
}

}  // namespace snnid
