#pragma once

/**
 * @file
 * @brief JSON configuration files. Every field is optional except
 * schema_version; unknown keys are rejected with their full path.
 *
 * Sections: quadrotor, weights.dq, weights.baseline, ocp, solver, trajectory,
 * disturbances, experiment. Weight matrices are given either as a diagonal
 * (flat list) or as a full nested list.
 */

#include "dqnmpc/harness.hpp"

#include <stdexcept>
#include <string>

namespace dqnmpc {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& msg)
      : std::runtime_error(key.empty() ? msg : key + ": " + msg), key_(std::move(key)) {}
  /// Dotted path of the offending key (may be empty for document-level errors).
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Parses a JSON document; throws ConfigError on syntax, type, unknown-key or validation errors.
ExperimentConfig parse_config(const std::string& text);
/// Reads and parses a file; an unreadable file is a ConfigError with an empty key.
ExperimentConfig load_config(const std::string& path);
/// Full configuration with every field spelled out (round-trips through parse_config).
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace dqnmpc
