#include <CLI11.hpp>
#include <iostream>

#include "spectrapad/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multispectral iris presentation attack detection"};
  app.require_subcommand(1);

  spectrapad::CommandOptions opts;
  std::uint64_t seed = 0;
  std::string bands, mode, out, checkpoint, run_dir;
  int epochs = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "configuration file")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--bands", bands, "band list, e.g. 800,850");
    sub->add_option("--threshold-mode", mode, "decision threshold")->check(CLI::IsMember({"fixed", "dev"}));
    sub->add_option("--out", out, "output directory");
    sub->add_option("--set", opts.overrides, "extra key=value setting (repeatable)");
  };

  auto* synth = app.add_subcommand("synth", "write the synthetic dataset and its manifest");
  auto* train = app.add_subcommand("train", "train on one artefact and evaluate on the rest");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto* ablate = app.add_subcommand("ablate", "full model plus one run per removed component");
  auto* analyze = app.add_subcommand("analyze", "feature separability vs error correlation");
  for (auto* sub : {synth, train, eval, ablate, analyze}) add_common(sub);
  for (auto* sub : {train, ablate}) sub->add_option("--epochs", epochs, "training epochs (overrides the config)");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default <output_dir>/checkpoint.bin)");
  eval->add_flag("--force", opts.force, "skip the config/dataset hash check");
  analyze->add_option("--run", run_dir, "finished run directory (default output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--bands")) opts.bands = bands;
  if (sub->count("--threshold-mode")) opts.threshold_mode = mode;
  if (sub->count("--out")) opts.out = out;
  if (sub->get_option_no_throw("--epochs") && sub->count("--epochs")) opts.epochs = epochs;
  if (sub->get_option_no_throw("--checkpoint") && sub->count("--checkpoint")) opts.checkpoint = checkpoint;
  if (sub->get_option_no_throw("--run") && sub->count("--run")) opts.run_dir = run_dir;

  return spectrapad::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
