#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snnid/estimators.hpp"

namespace snnid {

// Published per-operation energy figures for the two deployment targets:
// a dense multiply-accumulate on the embedded reference platform vs one
// event-driven synaptic accumulate on neuromorphic hardware.
struct EnergyCatalog {
  double mac_energy = 15e-9;    // J per MAC
  double sop_energy = 9.9e-12;  // J per synaptic op
};

// Fraction of neuron-timestep slots that stayed silent across the whole
// record: 1 - total spikes / (n_steps * total neurons).
double sparsity(const SpikeRecord& rec);

// Dense multiply-accumulates of a feedforward pass through consecutive
// layer widths: sum of adjacent products.
std::uint64_t count_macs(const std::vector<std::size_t>& layer_dims);

// Event-driven synaptic operations: each spike in layer l triggers
// fanout[l] accumulations downstream. fanouts.size() must equal
// rec.layers().
std::uint64_t count_sops(const SpikeRecord& rec,
                         const std::vector<std::size_t>& fanouts);

struct RateProfiles {
  std::vector<double> mean;                  // per layer
  std::vector<std::vector<double>> series;   // [layer][timestep]
};

RateProfiles rate_profiles(const SpikeRecord& rec);

struct EnergyReport {
  std::uint64_t macs = 0;
  std::uint64_t sops = 0;
  double ff_energy = 0.0;          // J per inference
  double snn_energy = 0.0;         // J per inference
  std::optional<double> ratio;     // ff/snn, absent when sops == 0
  double snapshot_rate = 1.0;      // inferences per second
  double always_on_power = 0.0;    // W at snapshot_rate
};

EnergyReport energy_report(std::uint64_t macs, std::uint64_t sops,
                           const EnergyCatalog& cat,
                           double snapshot_rate = 1.0);

// metric,value,unit,source rows covering sparsity, per-layer rates, op
// counts (the analog input projection listed separately, plus the
// spike-op total with and without it), and the energy estimates.
void write_efficiency_csv(const std::string& path, const SpikeRecord& rec,
                          const EnergyReport& rep,
                          std::uint64_t input_proj_ops);

// Per-timestep firing-rate series, one column per layer.
void write_rate_series_csv(const std::string& path, const RateProfiles& rp);

}  // namespace snnid
