// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spop/cli/commands.hpp"

int main(int argc, char** argv) {
  namespace cli = spop::cli;
  CLI::App app{"Spectral-power matrix optimizers and weight-spectrum diagnostics"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string config_path;
  std::string run_out;
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("-o,--output-dir", run_out, "Override the configured output directory");

  auto* analyze = app.add_subcommand("analyze", "Spectral reports for MAT1 weight files");
  std::vector<std::string> files;
  std::string analyze_out;
  std::string analyze_summary;
  std::size_t top = 0;
  analyze->add_option("files", files, "MAT1 files");
  analyze->add_option("-o,--output", analyze_out, "Write the JSONL here instead of stdout");
  analyze->add_option("--summary", analyze_summary, "Write the mean-alpha summary JSON here");
  analyze->add_option("--top", top, "Keep only the N largest ESD values per record");

  auto* oracle = app.add_subcommand("oracle", "Check the Schatten-q steepest step by sampling");
  cli::OracleOptions oopts;
  oracle->add_option("--q", oopts.q, "Schatten exponent > 1 or 'inf'")->capture_default_str();
  oracle->add_option("--delta", oopts.delta, "Trust-region radius")->capture_default_str();
  oracle->add_option("--rows", oopts.rows)->capture_default_str();
  oracle->add_option("--cols", oopts.cols)->capture_default_str();
  oracle->add_option("--samples", oopts.samples)->capture_default_str();
  oracle->add_option("--seed", oopts.seed)->capture_default_str();

  auto* flops = app.add_subcommand("flops", "Leading-order FLOPs of one update");
  std::string kind;
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  double p = 0.125;
  int t = 15;
  flops->add_option("kind", kind, "muon or htmuon_ns")->required();
  flops->add_option("m", m)->required();
  flops->add_option("n", n)->required();
  flops->add_option("--p", p, "Power exponent")->capture_default_str();
  flops->add_option("--ns-steps", t, "Newton-Schulz steps per root round")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitUsage;
  }

  if (*run) {
    std::optional<std::filesystem::path> dir;
    if (!run_out.empty()) dir = run_out;
    return cli::cmd_run(config_path, dir, std::cout, std::cerr);
  }
  if (*analyze) {
    cli::AnalyzeOptions a;
    if (!analyze_out.empty()) a.output = analyze_out;
    if (!analyze_summary.empty()) a.summary = analyze_summary;
    if (top > 0) a.esd_limit = top;
    std::vector<std::filesystem::path> paths(files.begin(), files.end());
    return cli::cmd_analyze(paths, a, std::cout, std::cerr);
  }
  if (*oracle) return cli::cmd_oracle(oopts, std::cout, std::cerr);
  return cli::cmd_flops(kind, m, n, p, t, std::cout, std::cerr);
}
