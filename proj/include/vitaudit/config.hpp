#pragma once

// Run configuration: a small TOML-style file with top-level run keys and
// two backend sections, plus command-line overrides.
//
//   seed = 7
//   concurrency = 8
//   challenge_fraction = 0.8333333333
//   weights = "reason-centric"        # or "0.6,0.2,0.2"
//   axes = "logic,knowledge,vision"
//   bins = 8
//   taxonomy = "data/taxonomy.json"
//   mock_script = "tests/fixtures/mock_script.json"
//
//   [backend.text]                    # decomposition and injection
//   endpoint = "http://localhost:8000/v1/chat/completions"
//   model = "Qwen3-235B-A22B"
//   timeout_ms = 120000
//   max_retries = 3
//   max_in_flight = 4
//   backoff_ms = 500
//   api_key_env = "VITAUDIT_API_KEY"
//
//   [backend.vision]                  # assessment; must set vision = true
//   ...
//
// Relative paths are resolved against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "vitaudit/backend.hpp"
#include "vitaudit/scores.hpp"

namespace vitaudit {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& message)
      : std::runtime_error(where.empty() ? message : where + ": " + message) {}
};

/// Parsed value of one key.
using ConfigValue = std::variant<std::string, std::int64_t, double, bool>;

/// Flat view of a config file: keys are "section.key" ("key" at top level).
class ConfigTable {
 public:
  /// Supports [section] headers (dotted names allowed), key = value lines,
  /// # comments, basic double-quoted strings with \" \\ \n \t escapes,
  /// single-quoted literal strings, integers, floats and booleans.
  static ConfigTable parse(std::string_view text, const std::string& origin = "config");
  static ConfigTable load(const std::filesystem::path& path);

  const std::map<std::string, ConfigValue>& values() const { return values_; }
  const ConfigValue* find(const std::string& key) const;

 private:
  std::map<std::string, ConfigValue> values_;
};

struct RunConfig {
  BackendProfile text_backend;
  BackendProfile vision_backend;
  std::uint64_t seed = 0;
  int concurrency = 4;
  double challenge_fraction = 5.0 / 6.0;
  WeightScheme weights;
  AxisSet axes;
  int bins = 8;
  std::optional<std::filesystem::path> taxonomy;
  std::optional<std::filesystem::path> mock_script;

  RunConfig();

  /// Applies every key in `t`; unknown keys and type mismatches throw
  /// ConfigError. Relative paths are taken against `base_dir`.
  void apply(const ConfigTable& t, const std::filesystem::path& base_dir = {});

  static RunConfig load(const std::filesystem::path& path);

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

}  // namespace vitaudit
