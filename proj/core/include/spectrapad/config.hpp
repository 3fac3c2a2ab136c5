#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "spectrapad/protocol.hpp"
#include "spectrapad/separability.hpp"
#include "spectrapad/spectral_data.hpp"

namespace spectrapad {

/// Flat `section.key = value` file; '#' starts a comment. Every key is
/// typed and unknown keys are rejected.
struct GlobalConfig {
  std::uint64_t seed = 7;
  std::filesystem::path output_dir = "runs/default";
  std::optional<std::filesystem::path> manifest;  // absent: synthetic dataset
  std::filesystem::path dataset_root;             // defaults to the manifest's directory
  SynthConfig synth;
  ProtocolConfig protocol;
  FbAggregation fb_aggregation = FbAggregation::kSum;

  /// Relative paths resolve against `base_dir`.
  static GlobalConfig parse(const std::string& text, const std::filesystem::path& base_dir = ".");
  static GlobalConfig load(const std::filesystem::path& path);

  /// Sets one key from its textual value (same rules as the file).
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir = ".");

  /// Canonical text form: every key, sorted, one per line.
  std::string snapshot() const;

  /// Hash of the keys that change what a checkpoint contains (seed, dataset,
  /// model, train, loss, dropout, qc). eval.*, analysis.* and output_dir are
  /// excluded so evaluation flags never invalidate a checkpoint.
  std::uint64_t hash() const;

  void validate() const;
};

std::string hex64(std::uint64_t v);

}  // namespace spectrapad
