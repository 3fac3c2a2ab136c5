#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spectrapad/config.hpp"
#include "spectrapad/dataset.hpp"

namespace spectrapad {

/// Command-line options shared by every subcommand. Flags override the
/// config file; `overrides` holds extra `key=value` settings.
struct CommandOptions {
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> bands;
  std::optional<std::string> threshold_mode;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> checkpoint;  // eval
  std::optional<std::filesystem::path> run_dir;     // analyze
  std::optional<int> epochs;
  bool force = false;
  std::vector<std::string> overrides;
};

/// Loads the config file and applies flags in a fixed order: overrides,
/// seed, epochs, then the command-specific --bands/--threshold-mode.
GlobalConfig resolve_config(const CommandOptions& opts, const std::string& command);

/// Synthetic datasets are regenerated from (synth.*, seed); manifests are
/// read from disk.
Dataset load_dataset(const GlobalConfig& cfg);

void cmd_synth(const CommandOptions& opts, std::ostream& log);
void cmd_train(const CommandOptions& opts, std::ostream& log);
void cmd_eval(const CommandOptions& opts, std::ostream& log);
void cmd_ablate(const CommandOptions& opts, std::ostream& log);
void cmd_analyze(const CommandOptions& opts, std::ostream& log);

/// Dispatches by name and maps errors to exit codes (0, 2, 3 or 4).
int run_command(const std::string& command, const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace spectrapad
