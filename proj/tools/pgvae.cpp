// pgvae: run, sweep and report model-based design experiments.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "pgvae/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Property-guided VAE model-based design experiments"};
  app.require_subcommand(1);
  app.footer(std::string("Output directory default: $") + pgvae::kOutputDirEnv +
             "/<name>, else results/<name>.\nExit codes: 0 ok, 1 runtime failure, 2 invalid input.");

  std::string run_cfg, run_out;
  auto* run = app.add_subcommand("run", "Run every scheme x seed at the config's cell");
  run->add_option("config", run_cfg, "Experiment config (YAML)")->required();
  run->add_option("-o,--out", run_out, "Output directory");

  std::string sweep_cfg, sweep_out;
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run the config's full grid");
  sweep->add_option("config", sweep_cfg, "Experiment config (YAML) with a grid table")->required();
  sweep->add_option("-o,--out", sweep_out, "Output directory");
  sweep->add_option("-j,--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  std::vector<std::string> inputs;
  std::string report_out, svg_dir;
  auto* report = app.add_subcommand("report", "Aggregate results.csv files");
  report->add_option("results", inputs, "results.csv files");
  report->add_option("-o,--out", report_out, "Aggregate CSV path (default: next to the first input)");
  report->add_option("--svg", svg_dir, "Write SVG plots into this directory");

  pgvae::GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all losses");
  gradcheck->add_option("--corrupt", gc.corrupt, "Perturb the analytic gradient of one loss (self-test)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pgvae::kExitUsage;
  }

  if (*run) return pgvae::cmd_run(run_cfg, run_out, std::cerr);
  if (*sweep) return pgvae::cmd_sweep(sweep_cfg, sweep_out, jobs, std::cerr);
  if (*report) return pgvae::cmd_report(inputs, report_out, svg_dir, std::cout, std::cerr);
  if (*gradcheck) return pgvae::cmd_gradcheck(gc, std::cout);
  return pgvae::kExitUsage;
}
