#pragma once

// Subcommand bodies for the pgvae executable. Each returns the process exit
// code: 0 success, 1 runtime failure, 2 invalid input.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "pgvae/config.hpp"
#include "pgvae/experiment.hpp"
#include "pgvae/gradcheck_suite.hpp"
#include "pgvae/report.hpp"

namespace pgvae {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace cmd_detail {

struct Task {
  std::size_t cell;
  std::string scheme;
  std::uint64_t seed;
};

inline std::string describe(const Cell& c) {
  std::string s = "rho=" + format_number(c.rho);
  if (c.delta_mu) s += " delta_mu=" + format_number(*c.delta_mu);
  if (c.sigma1) s += " sigma1=" + format_number(*c.sigma1);
  if (c.sampling_interval) s += " si=" + format_pair(c.sampling_interval->start, c.sampling_interval->end);
  if (c.high) s += " hr=" + format_pair(c.high->lo, c.high->hi);
  s += " n_s=" + std::to_string(c.samples_per_iter);
  return s;
}

/// Runs cells x schemes x seeds, appending rows as each task finishes.
inline int execute(const ExperimentConfig& cfg, const std::vector<Cell>& cells, const std::string& out_dir,
                   std::size_t jobs, std::ostream& log) {
  std::vector<Problem> problems;
  try {
    if (cfg.dataset.kind == DatasetSpec::Kind::Gmm) {
      for (const auto& c : cells) problems.push_back(prepare_problem(cfg, c));
    } else {
      problems.push_back(prepare_problem(cfg, cells.front()));
    }
    std::filesystem::create_directories(out_dir);
    std::ofstream(std::filesystem::path(out_dir) / "config.yaml") << serialize_config(cfg);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (const auto& s : cfg.schemes) {
      for (auto seed : cfg.seeds) tasks.push_back({i, s, seed});
    }
  }
  try {
    CsvWriter results((std::filesystem::path(out_dir) / "results.csv").string(), kResultsHeader);
    CsvWriter latent((std::filesystem::path(out_dir) / "latent.csv").string(), kLatentHeader);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex log_mu;
    std::string first_error;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size() || failed) return;
        const auto& t = tasks[i];
        const Cell& cell = cells[t.cell];
        const Problem& p = problems.size() == 1 ? problems.front() : problems[t.cell];
        try {
          const CellRun run = run_cell(cfg, p, cell, t.scheme, t.seed);
          const CellKey key = cell_key(cfg.name, cell, t.scheme, t.seed);
          std::vector<std::string> lines;
          for (const auto& r : result_rows(key, run.result.metrics)) lines.push_back(r.csv());
          results.append(lines);
          latent.append(latent_lines(key, run.result.metrics.final_latent, run.trainset.y));
          std::lock_guard<std::mutex> lock(log_mu);
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.4f", run.result.metrics.final_cum_max());
          log << "[" << (i + 1) << "/" << tasks.size() << "] " << t.scheme << " seed=" << t.seed << " "
              << describe(cell) << " cum_max=" << buf;
          if (run.result.cbas_fallbacks > 0) log << " (cbas fallback x" << run.result.cbas_fallbacks << ")";
          log << "\n";
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(log_mu);
          if (!failed.exchange(true)) {
            first_error = t.scheme + " seed=" + std::to_string(t.seed) + " " + describe(cell) + ": " + e.what();
          }
          return;
        }
      }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
    if (n_threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    if (failed) {
      log << "error: " << first_error << "\n";
      return kExitFailure;
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  log << "wrote " << (std::filesystem::path(out_dir) / "results.csv").string() << "\n";
  return kExitOk;
}

inline int load(const std::string& path, ExperimentConfig& cfg, std::ostream& log) {
  try {
    cfg = load_config(path);
    validate_config(cfg);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace cmd_detail

/// All (scheme x seed) runs at the config's own cell.
inline int cmd_run(const std::string& config_path, const std::string& out_override, std::ostream& log) {
  ExperimentConfig cfg;
  if (int rc = cmd_detail::load(config_path, cfg, log)) return rc;
  return cmd_detail::execute(cfg, {base_cell(cfg)}, resolve_output_dir(cfg, out_override), 1, log);
}

/// Every grid cell x scheme x seed, up to `jobs` tasks at a time.
inline int cmd_sweep(const std::string& config_path, const std::string& out_override, std::size_t jobs,
                     std::ostream& log) {
  ExperimentConfig cfg;
  if (int rc = cmd_detail::load(config_path, cfg, log)) return rc;
  if (cfg.grid.empty()) {
    log << "error: config declares no grid axes\n";
    return kExitUsage;
  }
  if (jobs == 0) {
    log << "error: --jobs must be >= 1\n";
    return kExitUsage;
  }
  return cmd_detail::execute(cfg, expand_grid(cfg), resolve_output_dir(cfg, out_override), jobs, log);
}

/// Aggregates results files into `out_path` and optional SVG plots.
inline int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path, const std::string& svg_dir,
                      std::ostream& out, std::ostream& log) {
  if (inputs.empty()) {
    log << "error: no results files given\n";
    return kExitUsage;
  }
  std::vector<CellAggregate> aggs;
  try {
    std::vector<ResultRow> rows;
    for (const auto& p : inputs) {
      auto r = read_results_csv(p);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    if (rows.empty()) throw SchemaError("results files contain no rows");
    aggs = aggregate_cells(runs_from_rows(rows));
  } catch (const SchemaError& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const std::string target =
        out_path.empty() ? (std::filesystem::path(inputs.front()).parent_path() / "aggregate.csv").string() : out_path;
    CsvWriter w(target, kAggregateHeader);
    w.append(aggregate_lines(aggs));
    for (const auto& a : aggs) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-8s rho %-8s n=%zu  cum_max %.4f", a.key.scheme.c_str(), a.key.rho.c_str(),
                    a.metrics.runs, a.metrics.mean_max);
      out << a.key.dataset << " " << buf;
      if (a.has_ci) {
        std::snprintf(buf, sizeof buf, " +- %.4f", a.metrics.max_ci_half_width);
        out << buf;
      }
      std::snprintf(buf, sizeof buf, "  base %.4f", a.metrics.mean_base_max);
      out << buf;
      if (!a.key.hr.empty()) out << "  hr " << a.key.hr;
      if (!a.key.si.empty()) out << "  si " << a.key.si;
      if (!a.key.delta_mu.empty()) out << "  delta_mu " << a.key.delta_mu;
      if (!a.key.sigma1.empty()) out << "  sigma1 " << a.key.sigma1;
      out << "  n_s " << a.key.n_s << "\n";
    }
    log << "wrote " << target << "\n";
    if (!svg_dir.empty()) {
      std::filesystem::create_directories(svg_dir);
      for (const auto& [name, body] : report_plots(aggs)) {
        const auto p = std::filesystem::path(svg_dir) / name;
        std::ofstream f(p);
        f << body;
        if (!f) throw Error("cannot write " + p.string());
        log << "wrote " << p.string() << "\n";
      }
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

/// Finite-difference check of every registered loss; 1 if any fails.
inline int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  std::vector<LossCheck> checks;
  try {
    checks = run_gradcheck_suite(opt);
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  bool ok = true;
  for (const auto& c : checks) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-26s max_rel_err %.3e  worst %s (analytic %.6e, numeric %.6e)  %s",
                  c.name.c_str(), c.result.max_relative_error, c.worst_param.c_str(), c.result.worst_analytic,
                  c.result.worst_numeric, c.passed ? "PASS" : "FAIL");
    out << buf << "\n";
    ok = ok && c.passed;
  }
  if (!ok) {
    out << "gradcheck failed:";
    for (const auto& c : checks) {
      if (!c.passed) out << " " << c.name;
    }
    out << "\n";
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace pgvae
