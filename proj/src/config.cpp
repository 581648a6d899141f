#include "config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "errors.hpp"

namespace ptc::config {

namespace {

struct KeyBinding {
  std::function<void(LoadedConfig&, double)> set;
  std::function<double(const LoadedConfig&)> get;
};

// Central key table; both the parser and the programmatic setters/getters go
// through it so the accepted schema cannot drift.
const std::map<std::string, KeyBinding, std::less<>>& key_table() {
  static const auto* table = [] {
    auto* t = new std::map<std::string, KeyBinding, std::less<>>;
    auto add = [&](const std::string& key, auto setter, auto getter) {
      (*t)[key] = KeyBinding{setter, getter};
    };
#define PTC_KEY(name, expr)                                        \
  add(name, [](LoadedConfig& c, double v) { expr = v; },           \
      [](const LoadedConfig& c) -> double { return expr; })

    PTC_KEY("geometry.separation_cm", c.scenario.geometry.separation_cm);
    PTC_KEY("geometry.active_radius_cm", c.scenario.geometry.active_radius_cm);
    PTC_KEY("source.activity_per_s", c.scenario.source.activity_per_s);
    PTC_KEY("source.position_cm", c.scenario.source.position_cm);
    PTC_KEY("source.position_spread_cm",
            c.scenario.source.position_spread_cm);
    PTC_KEY("source.pickoff_fraction", c.scenario.source.pickoff_fraction);

    PTC_KEY("start_mcp.pore_diameter_um", c.scenario.start_mcp.pore_diameter_um);
    PTC_KEY("start_mcp.bias_angle_deg", c.scenario.start_mcp.bias_angle_deg);
    PTC_KEY("start_mcp.stack_thickness_um",
            c.scenario.start_mcp.stack_thickness_um);
    PTC_KEY("start_mcp.collision_step_um",
            c.scenario.start_mcp.collision_step_um);
    PTC_KEY("start_mcp.secondary_yield", c.scenario.start_mcp.secondary_yield);
    PTC_KEY("start_mcp.anode_capacitance_pf",
            c.scenario.start_mcp.anode_capacitance_pf);
    PTC_KEY("start_mcp.efficiency", c.scenario.start_mcp.efficiency);

    PTC_KEY("stop_mcp.pore_diameter_um", c.scenario.stop_mcp.pore_diameter_um);
    PTC_KEY("stop_mcp.bias_angle_deg", c.scenario.stop_mcp.bias_angle_deg);
    PTC_KEY("stop_mcp.stack_thickness_um",
            c.scenario.stop_mcp.stack_thickness_um);
    PTC_KEY("stop_mcp.collision_step_um",
            c.scenario.stop_mcp.collision_step_um);
    PTC_KEY("stop_mcp.secondary_yield", c.scenario.stop_mcp.secondary_yield);
    PTC_KEY("stop_mcp.anode_capacitance_pf",
            c.scenario.stop_mcp.anode_capacitance_pf);
    PTC_KEY("stop_mcp.efficiency", c.scenario.stop_mcp.efficiency);

    PTC_KEY("start_elec.jitter_sigma_ps", c.scenario.start_elec.jitter_sigma_ps);
    PTC_KEY("start_elec.walk_coefficient_ps",
            c.scenario.start_elec.walk_coefficient_ps);
    PTC_KEY("start_elec.threshold_lower_mv",
            c.scenario.start_elec.threshold_lower_mv);
    PTC_KEY("start_elec.overrange_upper_mv",
            c.scenario.start_elec.overrange_upper_mv);
    PTC_KEY("start_elec.transit_full_scale_ps",
            c.scenario.start_elec.transit_full_scale_ps);
    PTC_KEY("start_elec.transit_sigma_ps",
            c.scenario.start_elec.transit_sigma_ps);
    PTC_KEY("start_elec.tau_fixed_ps", c.scenario.start_elec.tau_fixed_ps);

    PTC_KEY("stop_elec.jitter_sigma_ps", c.scenario.stop_elec.jitter_sigma_ps);
    PTC_KEY("stop_elec.walk_coefficient_ps",
            c.scenario.stop_elec.walk_coefficient_ps);
    PTC_KEY("stop_elec.threshold_lower_mv",
            c.scenario.stop_elec.threshold_lower_mv);
    PTC_KEY("stop_elec.overrange_upper_mv",
            c.scenario.stop_elec.overrange_upper_mv);
    PTC_KEY("stop_elec.transit_full_scale_ps",
            c.scenario.stop_elec.transit_full_scale_ps);
    PTC_KEY("stop_elec.transit_sigma_ps",
            c.scenario.stop_elec.transit_sigma_ps);
    PTC_KEY("stop_elec.tau_fixed_ps", c.scenario.stop_elec.tau_fixed_ps);

    PTC_KEY("emission.qm_fwhm_ps", c.scenario.emission.qm_fwhm_ps);
    PTC_KEY("emission.positron_delay_mean_ps",
            c.scenario.emission.positron_delay_mean_ps);

    PTC_KEY("run.pta_tick_ps", c.scenario.pta_tick_ps);
    PTC_KEY("run.external_delay_ps", c.scenario.external_delay_ps);
    PTC_KEY("experiment.jitter_term_ps", c.terms.jitter_term_ps);
    PTC_KEY("experiment.source_term_ps", c.terms.source_term_ps);
#undef PTC_KEY

    // Integer-valued keys get dedicated bindings so huge seeds survive.
    (*t)["run.n_decays"] = KeyBinding{
        [](LoadedConfig& c, double v) {
          c.scenario.n_decays = static_cast<std::uint64_t>(v);
        },
        [](const LoadedConfig& c) {
          return static_cast<double>(c.scenario.n_decays);
        }};
    (*t)["run.master_seed"] = KeyBinding{
        [](LoadedConfig& c, double v) {
          c.scenario.master_seed = static_cast<std::uint64_t>(v);
        },
        [](const LoadedConfig& c) {
          return static_cast<double>(c.scenario.master_seed);
        }};
    return t;
  }();
  return *table;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

void apply_key(LoadedConfig& cfg, std::string_view key, std::string_view value,
               std::size_t line_no) {
  const auto where = line_no ? " at line " + std::to_string(line_no) : "";
  const auto it = key_table().find(key);
  if (it == key_table().end())
    throw ConfigError("unknown config key '" + std::string(key) + "'" + where);

  if (key == "run.n_decays" || key == "run.master_seed") {
    std::uint64_t v = 0;
    auto [ptr, ec] =
        std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
      throw ConfigError("invalid integer for '" + std::string(key) + "'" +
                        where + ": '" + std::string(value) + "'");
    if (key == "run.n_decays")
      cfg.scenario.n_decays = v;
    else
      cfg.scenario.master_seed = v;
    return;
  }

  double v = 0.0;
  auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ConfigError("invalid number for '" + std::string(key) + "'" + where +
                      ": '" + std::string(value) + "'");
  it->second.set(cfg, v);
}

}  // namespace

LoadedConfig parse_config(std::string_view text) {
  LoadedConfig cfg;
  cfg.source_text = std::string(text);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("expected 'key = value' at line " +
                        std::to_string(line_no) + ": '" + std::string(line) +
                        "'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("expected 'key = value' at line " +
                        std::to_string(line_no));
    apply_key(cfg, key, value, line_no);
  }
  return cfg;
}

LoadedConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void set_key(LoadedConfig& cfg, std::string_view key, std::string_view value) {
  apply_key(cfg, key, value, 0);
  cfg.source_text += "\n" + std::string(key) + " = " + std::string(value);
}

double get_key(const LoadedConfig& cfg, std::string_view key) {
  const auto it = key_table().find(key);
  if (it == key_table().end())
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second.get(cfg);
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  keys.reserve(key_table().size());
  for (const auto& [k, v] : key_table()) keys.push_back(k);
  return keys;
}

std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ptc::config
