#pragma once

#include <map>
#include <string>
#include <vector>

#include "fragsim/scenarios.hpp"

namespace fragsim {

struct Diagnostic {
  std::string path;     // dotted config path, e.g. "engine.kind"
  std::string message;
  int line = -1;        // 1-based line in the source document when known
  std::string format() const;
};

struct ValidationResult {
  bool ok = true;
  std::vector<Diagnostic> diagnostics;
};

// Approximate line of every key in a JSON document, keyed by dotted path.
std::map<std::string, int> json_key_lines(const std::string& text);

ValidationResult validate_config_text(const std::string& text);

// Parses and validates; throws SimError with the first diagnostic on failure.
RunConfig parse_config_text(const std::string& text);

// Dotted-path override; the path must already exist in the document.
void apply_override(std::string& config_text, const std::string& dotted_path,
                    const std::string& value);

std::string dump_config(const RunConfig& cfg, int indent = 2);

// Built-in run configurations ("paper-table3" is the 8-datacenter preset).
RunConfig builtin_config(const std::string& name);
std::vector<std::string> builtin_config_names();

// The reference matrix, the workload presets and a complete default config;
// itself a valid config document.
std::string dump_presets();

}  // namespace fragsim
