#pragma once

#include <string>

#include "config.hpp"

namespace snnid::cli {

// Shared key groups; each subcommand's table is composed from these so
// defaults exist in exactly one place.
KeyTable circuit_keys();
KeyTable measurement_keys();
KeyTable noise_keys();
KeyTable train_keys();
KeyTable range_keys();
KeyTable schedule_keys();
KeyTable scenario_keys();

KeyTable simulate_table();
KeyTable train_table();
KeyTable eval_table();
KeyTable efficiency_table();
KeyTable degrade_table();
KeyTable monitor_table();
KeyTable report_table();

int cmd_simulate(const Config& cfg, const std::string& out);
int cmd_train(const Config& cfg, const std::string& out);
int cmd_eval(const Config& cfg, const std::string& out);
int cmd_efficiency(const Config& cfg, const std::string& out);
int cmd_degrade(const Config& cfg, const std::string& out);
int cmd_monitor(const Config& cfg, const std::string& out);
int cmd_report(const Config& cfg, const std::string& out);

}  // namespace snnid::cli
