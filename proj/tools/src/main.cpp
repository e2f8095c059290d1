#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "snnid/errors.hpp"
#include "version.hpp"

namespace {

using snnid::cli::Config;
using snnid::cli::KeyTable;

struct Subcommand {
  const char* name;
  const char* help;
  KeyTable table;
  std::function<int(const Config&, const std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Subcommand> subs = {
      {"simulate",
       "integrate the converter and emit clean/noisy/window CSVs",
       snnid::cli::simulate_table(), snnid::cli::cmd_simulate},
      {"train", "fit an estimator to one or many transients",
       snnid::cli::train_table(), snnid::cli::cmd_train},
      {"eval", "run a checkpoint on a measurement and report errors",
       snnid::cli::eval_table(), snnid::cli::cmd_eval},
      {"efficiency", "spike counts, operation tallies, energy estimates",
       snnid::cli::efficiency_table(), snnid::cli::cmd_efficiency},
      {"degrade", "track parameter drift across degradation snapshots",
       snnid::cli::degrade_table(), snnid::cli::cmd_degrade},
      {"monitor", "cycle-by-cycle health monitoring with fault detection",
       snnid::cli::monitor_table(), snnid::cli::cmd_monitor},
      {"report", "summarize the CSVs an earlier run produced",
       snnid::cli::report_table(), snnid::cli::cmd_report},
  };

  CLI::App app{"spiking-estimator toolkit for converter identification"};
  app.set_version_flag("--version", std::string("snnid ") +
                                        snnid::cli::kVersion);
  app.require_subcommand(1);

  // Per-subcommand staged option storage; std::map keeps references
  // stable while CLI11 holds them.
  std::map<std::string, std::map<std::string, std::string>> staged;
  std::map<std::string, std::string> config_files;
  std::map<std::string, std::string> out_flags;
  std::map<std::string, CLI::App*> apps;

  for (auto& sub : subs) {
    CLI::App* s = app.add_subcommand(sub.name, sub.help);
    s->add_option("--config", config_files[sub.name],
                  "key = value file, # comments");
    s->add_option("--out", out_flags[sub.name],
                  "output directory (else $SNNID_OUT, else .)");
    for (const auto& key : sub.table) {
      std::string help = key.help;
      if (!key.def.empty()) help += " [" + key.def + "]";
      s->add_option("--" + key.name, staged[sub.name][key.name], help);
    }
    apps[sub.name] = s;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (auto& sub : subs) {
    if (!apps[sub.name]->parsed()) continue;
    try {
      Config cfg(sub.table);
      if (apps[sub.name]->count("--config"))
        cfg.load_file(config_files[sub.name]);
      for (const auto& [key, value] : staged[sub.name])
        if (apps[sub.name]->count("--" + key)) cfg.set_override(key, value);

      std::string out = snnid::cli::output_root(out_flags[sub.name]);
      std::filesystem::create_directories(out);
      snnid::cli::write_manifest(out, sub.name, cfg);
      return sub.run(cfg, out);
    } catch (const snnid::ConfigError& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return 2;
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return 2;
    } catch (const snnid::NumericError& e) {
      std::fprintf(stderr, "numerical failure: %s\n", e.what());
      return 3;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 3;
    }
  }
  return 2;  // unreachable with require_subcommand(1)
}
