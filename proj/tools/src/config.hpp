#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace snnid::cli {

struct KeySpec {
  std::string name;
  std::string def;  // default value, textual
  std::string help;
};

using KeyTable = std::vector<KeySpec>;

// Layered key-value configuration: built-in defaults, then an optional
// `key = value` file, then command-line overrides. Every key must appear
// in the table; lookups are typed and validate their text.
class Config {
 public:
  explicit Config(KeyTable table);

  // Parses a config file: `key = value` lines, `#` comments, blank lines.
  // Unknown keys are collected and reported together.
  void load_file(const std::string& path);
  void set_override(const std::string& key, std::string value);

  bool known(const std::string& key) const;
  // True when a file or flag supplied the key (not just the default).
  bool explicitly_set(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const KeyTable& table() const { return table_; }
  // Fully resolved view in table order; what the manifest records.
  std::vector<std::pair<std::string, std::string>> resolved() const;

 private:
  const KeySpec& find(const std::string& key) const;

  KeyTable table_;
  std::map<std::string, std::string> file_;
  std::map<std::string, std::string> flags_;
};

// Output root resolution: --out flag if set, else the SNNID_OUT
// environment variable, else the current directory.
std::string output_root(const std::string& flag_value);

// Serializes the resolved run setup to <outdir>/manifest.txt before any
// computation: subcommand, toolkit version, and output directory as
// comments, then every resolved `key = value` pair, so the manifest can
// be fed back through --config to reproduce the run. Deterministic.
void write_manifest(const std::string& outdir, const std::string& subcommand,
                    const Config& cfg);

}  // namespace snnid::cli
