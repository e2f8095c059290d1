#include "config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "snnid/errors.hpp"
#include "version.hpp"

namespace snnid::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config::Config(KeyTable table) : table_(std::move(table)) {}

const KeySpec& Config::find(const std::string& key) const {
  for (const auto& spec : table_)
    if (spec.name == key) return spec;
  throw ConfigError("unknown config key: " + key);
}

bool Config::known(const std::string& key) const {
  return std::any_of(table_.begin(), table_.end(),
                     [&](const KeySpec& s) { return s.name == key; });
}

bool Config::explicitly_set(const std::string& key) const {
  find(key);
  return flags_.count(key) > 0 || file_.count(key) > 0;
}

void Config::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::vector<std::string> unknown;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected `key = value`, got: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    if (!known(key)) {
      unknown.push_back(key);
      continue;
    }
    file_[key] = value;
  }
  if (!unknown.empty()) {
    std::ostringstream msg;
    msg << path << ": unknown config key";
    if (unknown.size() > 1) msg << "s";
    msg << ":";
    for (const auto& k : unknown) msg << " " << k;
    msg << "; valid keys:";
    for (const auto& spec : table_) msg << " " << spec.name;
    throw ConfigError(msg.str());
  }
}

void Config::set_override(const std::string& key, std::string value) {
  find(key);
  flags_[key] = std::move(value);
}

std::string Config::get_string(const std::string& key) const {
  auto it = flags_.find(key);
  if (it != flags_.end()) return it->second;
  it = file_.find(key);
  if (it != file_.end()) return it->second;
  return find(key).def;
}

double Config::get_double(const std::string& key) const {
  std::string text = get_string(key);
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + text +
                      "' as a number");
  }
}

std::uint64_t Config::get_uint(const std::string& key) const {
  std::string text = get_string(key);
  try {
    if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
    std::size_t used = 0;
    unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + text +
                      "' as a non-negative integer");
  }
}

std::size_t Config::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_uint(key));
}

bool Config::get_bool(const std::string& key) const {
  std::string text = get_string(key);
  std::string low;
  for (char c : text) low.push_back(static_cast<char>(std::tolower(c)));
  if (low == "true" || low == "1" || low == "yes" || low == "on") return true;
  if (low == "false" || low == "0" || low == "no" || low == "off")
    return false;
  throw ConfigError("key '" + key + "': cannot parse '" + text +
                    "' as a boolean");
}

std::vector<std::pair<std::string, std::string>> Config::resolved() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(table_.size());
  for (const auto& spec : table_)
    out.emplace_back(spec.name, get_string(spec.name));
  return out;
}

std::string output_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SNNID_OUT"); env && *env) return env;
  return ".";
}

void write_manifest(const std::string& outdir, const std::string& subcommand,
                    const Config& cfg) {
  std::string path = outdir + "/manifest.txt";
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  // Metadata rides in comments so the manifest itself is a valid
  // --config file: feeding it back reproduces the exact run.
  f << "# subcommand: " << subcommand << "\n";
  f << "# version: snnid " << kVersion << "\n";
  f << "# output_dir: " << outdir << "\n";
  for (const auto& [key, value] : cfg.resolved())
    f << key << " = " << value << "\n";
  if (!f) throw ConfigError("write failed: " + path);
}

}  // namespace snnid::cli
