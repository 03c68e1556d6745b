#pragma once

// Experiment cells: one (dataset parameters, scheme, seed) combination per
// run_mbo call, plus the flat results.csv / latent.csv row formats.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pgvae/config.hpp"
#include "pgvae/datagen.hpp"
#include "pgvae/generative.hpp"
#include "pgvae/mbo.hpp"
#include "pgvae/oracles.hpp"

namespace pgvae {

/// Dataset-side coordinates of a grid cell. Fields that do not apply to the
/// dataset kind are left unset.
struct Cell {
  double rho = 0.2;
  std::optional<double> delta_mu;
  std::optional<double> sigma1;
  std::optional<SamplingInterval> sampling_interval;
  std::optional<RangeSpec> high;
  std::size_t samples_per_iter = 200;

  friend bool operator==(const Cell&, const Cell&) = default;
};

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_pair(double a, double b) { return format_number(a) + ":" + format_number(b); }

/// The cell described by the config's own (non-grid) values.
inline Cell base_cell(const ExperimentConfig& c) {
  Cell cell;
  cell.rho = c.dataset.rho;
  cell.samples_per_iter = c.mbo.samples_per_iter;
  if (c.dataset.kind == DatasetSpec::Kind::Gmm) {
    cell.delta_mu = c.dataset.gmm.mu2 - c.dataset.gmm.mu1;
    cell.sigma1 = c.dataset.gmm.sigma1;
    cell.sampling_interval = c.dataset.sampling_interval;
  } else {
    cell.high = c.dataset.high;
  }
  return cell;
}

/// Cartesian product of the grid axes; empty axes keep the base value.
/// Order: rho, delta_mu, sigma1, sampling_interval, high_range, samples_per_iter
/// (last axis varies fastest).
inline std::vector<Cell> expand_grid(const ExperimentConfig& c) {
  std::vector<Cell> cells{base_cell(c)};
  auto expand = [&cells](const auto& values, auto assign) {
    if (values.empty()) return;
    std::vector<Cell> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        Cell n = cell;
        assign(n, v);
        next.push_back(n);
      }
    }
    cells = std::move(next);
  };
  expand(c.grid.rho, [](Cell& n, double v) { n.rho = v; });
  expand(c.grid.delta_mu, [](Cell& n, double v) { n.delta_mu = v; });
  expand(c.grid.sigma1, [](Cell& n, double v) { n.sigma1 = v; });
  expand(c.grid.sampling_interval, [](Cell& n, const SamplingInterval& v) { n.sampling_interval = v; });
  expand(c.grid.high_range, [](Cell& n, const RangeSpec& v) { n.high = v; });
  expand(c.grid.samples_per_iter, [](Cell& n, std::size_t v) { n.samples_per_iter = v; });
  return cells;
}

/// Oracle, optional trainset pool, and model layout for a cell.
struct Problem {
  Oracle oracle;
  std::optional<Dataset> pool;
  VaeArchitecture arch;
};

inline GmmOracle cell_gmm(const ExperimentConfig& c, const Cell& cell) {
  GmmOracle o = c.dataset.gmm;
  if (cell.delta_mu) o.mu2 = o.mu1 + *cell.delta_mu;
  if (cell.sigma1) o.sigma1 = *cell.sigma1;
  o.validate();
  return o;
}

inline VaeArchitecture architecture_for(const ModelSpec& m, const Dataset& sample) {
  VaeArchitecture a;
  a.encoder_hidden = m.encoder_hidden;
  a.decoder_hidden = m.decoder_hidden;
  a.latent_dim = m.latent_dim;
  a.slope = m.slope;
  if (const auto* seqs = std::get_if<std::vector<Sequence>>(&sample.designs)) {
    if (seqs->empty()) throw InvalidArgument("dataset has no rows");
    const std::size_t positions = seqs->front().size();
    a.decoder_kind = CategoricalSequence{positions, sample.alphabet.size()};
    a.input_dim = positions * sample.alphabet.size();
  } else {
    const std::size_t dim = std::get<Matrix>(sample.designs).cols();
    a.decoder_kind = GaussianContinuous{dim, m.obs_stddev};
    a.input_dim = dim;
  }
  return a;
}

/// Full semi-synthetic table: planted or loaded sequences, tagged.
inline Dataset semi_synthetic_dataset(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  Rng ds(d.dataset_seed);
  Dataset base;
  if (d.source == "csv") {
    base = load_dataset_csv(resolve_path(c, d.path), CsvSchema::Sequence, d.alphabet);
    if (d.normalize) base.y = normalize_properties(base.y);
  } else {
    Rng planted = ds.derive("planted");
    base = make_planted_sequence_dataset(d.planted_length, d.planted_alphabet, d.planted_sharpness, planted);
  }
  TagSpec tags;
  tags.length = d.tag_length;
  if (d.h_tag.empty()) {
    Rng tag_rng = ds.derive("h_tag");
    tags.h_tag = random_tag(d.tag_length, base.alphabet.size(), tag_rng);
  } else {
    tags.h_tag = sequence_from_string(d.h_tag, base.alphabet);
  }
  Rng l_tags = ds.derive("l_tags");
  return semi_synthetic_transform(base, d.threshold, tags, l_tags);
}

inline Problem prepare_problem(const ExperimentConfig& c, const Cell& cell) {
  const auto& d = c.dataset;
  switch (d.kind) {
    case DatasetSpec::Kind::Gmm: {
      const GmmOracle o = cell_gmm(c, cell);
      Dataset probe{c.name, Matrix(1, 1), {0.0}};
      return Problem{o, std::nullopt, architecture_for(c.model, probe)};
    }
    case DatasetSpec::Kind::Csv: {
      Dataset pool = load_dataset_csv(resolve_path(c, d.path), d.schema, d.alphabet);
      if (d.normalize) pool.y = normalize_properties(pool.y);
      pool.name = c.name;
      LookupOracle o = make_lookup_oracle(pool);
      VaeArchitecture arch = architecture_for(c.model, pool);
      return Problem{std::move(o), std::move(pool), arch};
    }
    case DatasetSpec::Kind::SemiSynthetic: {
      Dataset pool = semi_synthetic_dataset(c);
      pool.name = c.name;
      LookupOracle o = make_lookup_oracle(pool);
      VaeArchitecture arch = architecture_for(c.model, pool);
      return Problem{std::move(o), std::move(pool), arch};
    }
    case DatasetSpec::Kind::ReferenceField: {
      Dataset pool = load_dataset_csv(resolve_path(c, d.path), CsvSchema::Continuous);
      pool.name = c.name;
      ReferenceFieldOracle o;
      o.target = load_grid_csv(resolve_path(c, d.reference_grid));
      o.weights = d.weight_grid.empty() ? Matrix(o.target.rows(), o.target.cols(), 1.0)
                                        : load_grid_csv(resolve_path(c, d.weight_grid));
      o.floor = d.floor;
      o.validate();
      pool.y = score(Oracle{o}, pool.designs);
      VaeArchitecture arch = architecture_for(c.model, pool);
      return Problem{std::move(o), std::move(pool), arch};
    }
  }
  throw InvalidArgument("unknown dataset kind");
}

inline Dataset make_trainset(const ExperimentConfig& c, const Problem& p, const Cell& cell, Rng& rng) {
  if (c.dataset.kind == DatasetSpec::Kind::Gmm) {
    Dataset t = sample_gmm_trainset(std::get<GmmOracle>(p.oracle), c.dataset.n, cell.rho,
                                    cell.sampling_interval.value_or(c.dataset.sampling_interval), rng);
    t.name = c.name;
    return t;
  }
  ImbalanceSpec spec{c.dataset.low, cell.high.value_or(c.dataset.high), cell.rho, c.dataset.n_low};
  return build_imbalanced_subset(*p.pool, spec, rng);
}

struct CellRun {
  Dataset trainset;
  MboResult result;
};

/// One seed of one scheme in one cell. The trainset depends only on the seed
/// and the cell, so every scheme sees the same trainset for a given seed.
inline CellRun run_cell(const ExperimentConfig& c, const Problem& p, const Cell& cell, const std::string& scheme,
                        std::uint64_t seed) {
  Rng root(seed);
  Rng data_rng = root.derive("data");
  Dataset train = make_trainset(c, p, cell, data_rng);
  Rng init_rng = root.derive("init");
  VaeModel model = make_vae(p.arch, init_rng);
  MboConfig m = c.mbo;
  m.samples_per_iter = cell.samples_per_iter;
  m.scheme = make_scheme(scheme, c.scheme_params);
  Rng mbo_rng = root.derive("mbo");
  MboResult res = run_mbo(std::move(model), p.oracle, train, m, mbo_rng);
  return CellRun{std::move(train), std::move(res)};
}

// ---------------------------------------------------------------------------
// Result rows

inline constexpr const char* kResultsHeader = "dataset,scheme,rho,hr,si,delta_mu,sigma1,n_s,seed,metric,iteration,value";
inline constexpr const char* kLatentHeader =
    "dataset,scheme,rho,hr,si,delta_mu,sigma1,n_s,seed,sample_id,pc1,pc2,neg_norm_sq,y";

/// Identifier columns shared by results.csv and latent.csv.
struct CellKey {
  std::string dataset, scheme, rho, hr, si, delta_mu, sigma1, n_s, seed;

  std::string csv() const {
    return dataset + "," + scheme + "," + rho + "," + hr + "," + si + "," + delta_mu + "," + sigma1 + "," + n_s + "," +
           seed;
  }
  auto operator<=>(const CellKey&) const = default;
};

inline CellKey cell_key(const std::string& dataset, const Cell& cell, const std::string& scheme, std::uint64_t seed) {
  CellKey k;
  k.dataset = dataset;
  k.scheme = scheme;
  k.rho = format_number(cell.rho);
  if (cell.high) k.hr = format_pair(cell.high->lo, cell.high->hi);
  if (cell.sampling_interval) k.si = format_pair(cell.sampling_interval->start, cell.sampling_interval->end);
  if (cell.delta_mu) k.delta_mu = format_number(*cell.delta_mu);
  if (cell.sigma1) k.sigma1 = format_number(*cell.sigma1);
  k.n_s = std::to_string(cell.samples_per_iter);
  k.seed = std::to_string(seed);
  return k;
}

struct ResultRow {
  CellKey key;
  std::string metric;
  std::size_t iteration = 0;
  double value = 0.0;

  std::string csv() const { return key.csv() + "," + metric + "," + std::to_string(iteration) + "," + format_value(value); }
};

/// Per-iteration max/p75/p95/cum_*/n_eff rows, then base_* and latent_* rows.
/// Latent rows are at iteration 0 (after the initial fit) and T (final).
inline std::vector<ResultRow> result_rows(const CellKey& key, const RunMetrics& m) {
  std::vector<ResultRow> rows;
  auto add = [&](const char* metric, std::size_t it, double v) { rows.push_back({key, metric, it, v}); };
  for (const auto& it : m.iterations) {
    add("max", it.iteration, it.max);
    add("p75", it.iteration, it.p75);
    add("p95", it.iteration, it.p95);
    add("cum_max", it.iteration, it.cum_max);
    add("cum_p75", it.iteration, it.cum_p75);
    add("cum_p95", it.iteration, it.cum_p95);
    add("n_eff", it.iteration, it.n_eff);
  }
  add("base_max", 0, m.base_max);
  add("base_p75", 0, m.base_p75);
  add("base_p95", 0, m.base_p95);
  auto latent = [&](std::size_t it, const LatentStructureReport& r) {
    add("latent_spearman", it, r.spearman);
    add("latent_slope", it, r.slope);
    add("latent_intercept", it, r.intercept);
    add("latent_residual_rms", it, r.residual_rms);
  };
  latent(0, m.initial_latent);
  latent(m.iterations.empty() ? 0 : m.iterations.back().iteration, m.final_latent);
  return rows;
}

/// One latent.csv line per trainset row, from the final latent report.
inline std::vector<std::string> latent_lines(const CellKey& key, const LatentStructureReport& r,
                                             std::span<const double> y) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < y.size(); ++i) {
    lines.push_back(key.csv() + "," + std::to_string(i) + "," + format_value(r.projection(i, 0)) + "," +
                    format_value(r.projection(i, 1)) + "," + format_value(r.neg_norm_sq[i]) + "," + format_value(y[i]));
  }
  return lines;
}

/// Serialized, flushed appends to a CSV file that starts with a header.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const char* header) : out_(path, std::ios::trunc) {
    if (!out_) throw Error("cannot open " + path + " for writing");
    out_ << header << '\n';
    out_.flush();
  }

  void append(const std::vector<std::string>& lines) {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& l : lines) out_ << l << '\n';
    out_.flush();
    if (!out_) throw Error("write failed");
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace pgvae
