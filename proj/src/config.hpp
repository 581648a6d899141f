#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "simulate.hpp"

namespace ptc::config {

// Flat key-value scenario files: one "section.key = value" per line, '#'
// starts a comment, units spelled out in the key names. Unknown keys are
// errors. Values override the built-in defaults; validation happens
// separately so callers can report every violated invariant at once.

// Fixed, externally determined terms of the width extrapolation; bundled
// with the scenario file for convenience.
struct ExtrapolationTerms {
  double jitter_term_ps = 38.0;
  double source_term_ps = 47.0;
};

struct LoadedConfig {
  sim::ScenarioConfig scenario;
  ExtrapolationTerms terms;
  // The bytes the digest is computed over: file contents plus one appended
  // line per programmatic override, in application order.
  std::string source_text;
};

LoadedConfig parse_config(std::string_view text);
LoadedConfig load_config_file(const std::string& path);

// Applies one "section.key" override; records it in source_text.
void set_key(LoadedConfig& cfg, std::string_view key, std::string_view value);

// Reads one key back (numeric keys only).
double get_key(const LoadedConfig& cfg, std::string_view key);

// All recognized keys, for documentation and error messages.
std::vector<std::string> known_keys();

// FNV-1a 64-bit over the source bytes, presented as "fnv1a64:<hex>".
// Stable across platforms for identical bytes.
std::string digest(std::string_view bytes);

}  // namespace ptc::config
