#pragma once

// Declarative experiment configuration (YAML).
//
//   name: gmm
//   output_dir: results/gmm            # optional, see resolve_output_dir
//   dataset:
//     kind: gmm                        # gmm | csv | semi_synthetic | reference_field
//     rho: 0.2
//     gmm: {mu1: 0, sigma1: 0.25, w1: 1, mu2: 15, sigma2: 1, w2: 2.5}
//     n: 100
//     sampling_interval: [0.5, 1.0]
//   model:
//     preset: gmm                      # gmm | protein | pinn | custom
//   mbo: {samples_per_iter: 200, iterations: 20, ...}
//   schemes: [pgvae, rwr, fw-rwr, cbas]
//   seeds: [0, 1, 2]
//   grid:                              # sweep only; every axis optional
//     rho: [0.05, 0.1, 0.2, 0.5]
//     delta_mu: [5, 15, 25, 35, 45]
//
// The full key list, with defaults, is in docs/config.md.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pgvae/datagen.hpp"
#include "pgvae/error.hpp"
#include "pgvae/generative.hpp"
#include "pgvae/mbo.hpp"

namespace pgvae {

struct DatasetSpec {
  enum class Kind { Gmm, Csv, SemiSynthetic, ReferenceField };
  Kind kind = Kind::Gmm;
  double rho = 0.2;

  // gmm
  GmmOracle gmm;
  std::size_t n = 100;
  SamplingInterval sampling_interval;

  // csv, semi_synthetic (source: csv), reference_field
  std::string path;
  CsvSchema schema = CsvSchema::Sequence;
  std::string alphabet = kProteinAlphabet;
  bool normalize = true;

  // imbalanced subset for table-backed datasets
  RangeSpec low{RangeSpec::Kind::Percentile, 0.0, 10.0};
  RangeSpec high{RangeSpec::Kind::Percentile, 30.0, 40.0};
  std::size_t n_low = 100;

  // semi_synthetic
  std::string source = "planted";  // planted | csv
  std::size_t planted_length = 4;
  std::size_t planted_alphabet = 20;
  double planted_sharpness = 4.0;
  Threshold threshold{Threshold::Kind::Percentile, 30.0};
  std::size_t tag_length = 6;
  std::string h_tag;  // empty: drawn from dataset_seed
  std::uint64_t dataset_seed = 0;

  // reference_field
  std::string reference_grid;
  std::string weight_grid;
  double floor = 1e-12;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct ModelSpec {
  std::string preset = "gmm";
  std::size_t latent_dim = 2;
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::vector<std::size_t> decoder_hidden{64, 64};
  double slope = 0.01;
  double obs_stddev = 1.0;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Layer presets: protein latent 20 (64 hidden), pinn latent 10 (64 hidden),
/// gmm latent 2 (64, 64 hidden).
inline ModelSpec model_preset(const std::string& name) {
  ModelSpec m;
  m.preset = name;
  if (name == "gmm" || name == "custom") return m;
  if (name == "protein") {
    m.latent_dim = 20;
    m.encoder_hidden = {64};
    m.decoder_hidden = {64};
    return m;
  }
  if (name == "pinn") {
    m.latent_dim = 10;
    m.encoder_hidden = {64};
    m.decoder_hidden = {64};
    return m;
  }
  throw InvalidArgument("unknown model preset '" + name + "'");
}

struct SchemeParams {
  double rwr_gamma = 10.0;
  double cbas_quantile = 90.0;
  std::size_t cbas_mc_samples = 20;

  friend bool operator==(const SchemeParams&, const SchemeParams&) = default;
};

struct GridSpec {
  std::vector<double> rho;
  std::vector<double> delta_mu;
  std::vector<double> sigma1;
  std::vector<SamplingInterval> sampling_interval;
  std::vector<std::size_t> samples_per_iter;
  std::vector<RangeSpec> high_range;

  bool empty() const {
    return rho.empty() && delta_mu.empty() && sigma1.empty() && sampling_interval.empty() &&
           samples_per_iter.empty() && high_range.empty();
  }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir;
  DatasetSpec dataset;
  ModelSpec model;
  MboConfig mbo;  // scheme is set per cell
  SchemeParams scheme_params;
  std::vector<std::string> schemes{"pgvae"};
  std::vector<std::uint64_t> seeds{0};
  GridSpec grid;
  /// Directory the config was loaded from; relative paths resolve against it.
  std::string base_dir;

  bool operator==(const ExperimentConfig& o) const {
    return name == o.name && output_dir == o.output_dir && dataset == o.dataset && model == o.model &&
           mbo.samples_per_iter == o.mbo.samples_per_iter && mbo.iterations == o.mbo.iterations &&
           mbo.initial_epochs == o.mbo.initial_epochs && mbo.epochs_per_iter == o.mbo.epochs_per_iter &&
           mbo.batch_size == o.mbo.batch_size && mbo.warm_start == o.mbo.warm_start &&
           mbo.learning_rate == o.mbo.learning_rate && mbo.hyper == o.mbo.hyper &&
           mbo.y_threshold == o.mbo.y_threshold && scheme_params == o.scheme_params && schemes == o.schemes &&
           seeds == o.seeds && grid == o.grid;
  }
};

inline WeightScheme make_scheme(const std::string& name, const SchemeParams& p) {
  if (name == "pgvae") return PgvaeScheme{};
  if (name == "rwr") return RwrScheme{p.rwr_gamma};
  if (name == "fw-rwr") return FwRwrScheme{p.rwr_gamma};
  if (name == "cbas") return CbasScheme{p.cbas_quantile, p.cbas_mc_samples};
  throw InvalidArgument("unknown scheme '" + name + "' (expected pgvae, rwr, fw-rwr or cbas)");
}

namespace config_detail {

inline const char* kind_name(DatasetSpec::Kind k) {
  switch (k) {
    case DatasetSpec::Kind::Gmm: return "gmm";
    case DatasetSpec::Kind::Csv: return "csv";
    case DatasetSpec::Kind::SemiSynthetic: return "semi_synthetic";
    default: return "reference_field";
  }
}

inline DatasetSpec::Kind parse_kind(const std::string& s) {
  if (s == "gmm") return DatasetSpec::Kind::Gmm;
  if (s == "csv") return DatasetSpec::Kind::Csv;
  if (s == "semi_synthetic") return DatasetSpec::Kind::SemiSynthetic;
  if (s == "reference_field") return DatasetSpec::Kind::ReferenceField;
  throw InvalidArgument("dataset.kind: unknown kind '" + s + "'");
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (const auto v = node[key]) {
    try {
      out = v.as<T>();
    } catch (const YAML::Exception& e) {
      throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
    }
  }
}

inline void read_pair(const YAML::Node& node, const char* key, double& a, double& b) {
  if (const auto v = node[key]) {
    if (!v.IsSequence() || v.size() != 2) throw InvalidArgument(std::string("config key '") + key + "' must be [a, b]");
    a = v[0].as<double>();
    b = v[1].as<double>();
  }
}

inline RangeSpec parse_range(const YAML::Node& node, const char* what) {
  RangeSpec r;
  if (!node.IsMap()) throw InvalidArgument(std::string(what) + " must be a table with kind and range");
  std::string kind = "percentile";
  read(node, "kind", kind);
  if (kind == "percentile") {
    r.kind = RangeSpec::Kind::Percentile;
  } else if (kind == "absolute") {
    r.kind = RangeSpec::Kind::Absolute;
  } else {
    throw InvalidArgument(std::string(what) + ".kind must be percentile or absolute");
  }
  read_pair(node, "range", r.lo, r.hi);
  return r;
}

inline void emit_range(YAML::Emitter& e, const RangeSpec& r) {
  e << YAML::Flow << YAML::BeginMap << YAML::Key << "kind"
    << YAML::Value << (r.kind == RangeSpec::Kind::Percentile ? "percentile" : "absolute") << YAML::Key << "range"
    << YAML::Value << YAML::Flow << YAML::BeginSeq << r.lo << r.hi << YAML::EndSeq << YAML::EndMap;
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const YAML::Node& root, const std::string& base_dir = "") {
  using namespace config_detail;
  if (!root.IsMap()) throw InvalidArgument("config: top level must be a table");
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    read(root, "name", c.name);
    read(root, "output_dir", c.output_dir);

    const YAML::Node ds = root["dataset"];
    if (!ds || !ds.IsMap()) throw InvalidArgument("config: missing dataset table");
    auto& d = c.dataset;
    std::string kind;
    read(ds, "kind", kind);
    if (kind.empty()) throw InvalidArgument("dataset.kind is required");
    d.kind = parse_kind(kind);
    read(ds, "rho", d.rho);
    if (const auto g = ds["gmm"]) {
      read(g, "mu1", d.gmm.mu1);
      read(g, "sigma1", d.gmm.sigma1);
      read(g, "w1", d.gmm.w1);
      read(g, "mu2", d.gmm.mu2);
      read(g, "sigma2", d.gmm.sigma2);
      read(g, "w2", d.gmm.w2);
    }
    read(ds, "n", d.n);
    read_pair(ds, "sampling_interval", d.sampling_interval.start, d.sampling_interval.end);
    read(ds, "path", d.path);
    std::string schema = d.schema == CsvSchema::Sequence ? "sequence" : "continuous";
    read(ds, "schema", schema);
    if (schema != "sequence" && schema != "continuous") throw InvalidArgument("dataset.schema must be sequence or continuous");
    d.schema = schema == "sequence" ? CsvSchema::Sequence : CsvSchema::Continuous;
    read(ds, "alphabet", d.alphabet);
    read(ds, "normalize", d.normalize);
    if (const auto imb = ds["imbalance"]) {
      if (const auto lo = imb["low"]) d.low = parse_range(lo, "dataset.imbalance.low");
      if (const auto hi = imb["high"]) d.high = parse_range(hi, "dataset.imbalance.high");
      read(imb, "n_low", d.n_low);
    }
    read(ds, "source", d.source);
    if (const auto p = ds["planted"]) {
      read(p, "length", d.planted_length);
      read(p, "alphabet", d.planted_alphabet);
      read(p, "sharpness", d.planted_sharpness);
    }
    if (const auto th = ds["threshold"]) {
      std::string tk = "percentile";
      read(th, "kind", tk);
      if (tk != "percentile" && tk != "absolute") throw InvalidArgument("dataset.threshold.kind must be percentile or absolute");
      d.threshold.kind = tk == "percentile" ? Threshold::Kind::Percentile : Threshold::Kind::Absolute;
      read(th, "value", d.threshold.value);
    }
    if (const auto tag = ds["tag"]) {
      read(tag, "length", d.tag_length);
      read(tag, "h_tag", d.h_tag);
    }
    read(ds, "dataset_seed", d.dataset_seed);
    read(ds, "reference_grid", d.reference_grid);
    read(ds, "weight_grid", d.weight_grid);
    read(ds, "floor", d.floor);

    std::string preset = "gmm";
    const YAML::Node mo = root["model"];
    if (mo) read(mo, "preset", preset);
    c.model = model_preset(preset);
    if (mo) {
      read(mo, "latent_dim", c.model.latent_dim);
      read(mo, "encoder_hidden", c.model.encoder_hidden);
      read(mo, "decoder_hidden", c.model.decoder_hidden);
      read(mo, "slope", c.model.slope);
      read(mo, "obs_stddev", c.model.obs_stddev);
    }

    if (const auto m = root["mbo"]) {
      read(m, "samples_per_iter", c.mbo.samples_per_iter);
      read(m, "iterations", c.mbo.iterations);
      read(m, "initial_epochs", c.mbo.initial_epochs);
      read(m, "epochs_per_iter", c.mbo.epochs_per_iter);
      read(m, "batch_size", c.mbo.batch_size);
      read(m, "warm_start", c.mbo.warm_start);
      read(m, "learning_rate", c.mbo.learning_rate);
      read(m, "tau", c.mbo.hyper.tau);
      read(m, "lambda_r", c.mbo.hyper.lambda_r);
      if (const auto yt = m["y_threshold"]; yt && !yt.IsNull()) c.mbo.y_threshold = yt.as<double>();
      read(m, "rwr_gamma", c.scheme_params.rwr_gamma);
      read(m, "cbas_quantile", c.scheme_params.cbas_quantile);
      read(m, "cbas_mc_samples", c.scheme_params.cbas_mc_samples);
    }
    read(root, "schemes", c.schemes);
    if (const auto s = root["seeds"]) {
      if (s.IsMap()) {
        std::uint64_t count = 1, start = 0;
        read(s, "count", count);
        read(s, "start", start);
        c.seeds.clear();
        for (std::uint64_t i = 0; i < count; ++i) c.seeds.push_back(start + i);
      } else {
        c.seeds = s.as<std::vector<std::uint64_t>>();
      }
    }
    if (const auto g = root["grid"]) {
      read(g, "rho", c.grid.rho);
      read(g, "delta_mu", c.grid.delta_mu);
      read(g, "sigma1", c.grid.sigma1);
      read(g, "samples_per_iter", c.grid.samples_per_iter);
      if (const auto si = g["sampling_interval"]) {
        for (const auto& e : si) {
          if (!e.IsSequence() || e.size() != 2) throw InvalidArgument("grid.sampling_interval entries must be [start, end]");
          c.grid.sampling_interval.push_back({e[0].as<double>(), e[1].as<double>()});
        }
      }
      if (const auto hr = g["high_range"]) {
        for (const auto& e : hr) c.grid.high_range.push_back(parse_range(e, "grid.high_range entry"));
      }
    }
  } catch (const YAML::Exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw InvalidArgument("cannot read config " + path + ": " + e.what());
  }
  const auto parent = std::filesystem::path(path).parent_path();
  return parse_config(root, parent.string());
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

/// Emits every field explicitly, so parse(serialize(c)) == c.
inline std::string serialize_config(const ExperimentConfig& c) {
  using namespace config_detail;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  const auto& d = c.dataset;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << c.name;
  e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;

  e << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << kind_name(d.kind);
  e << YAML::Key << "rho" << YAML::Value << d.rho;
  e << YAML::Key << "gmm" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "mu1" << YAML::Value
    << d.gmm.mu1 << YAML::Key << "sigma1" << YAML::Value << d.gmm.sigma1 << YAML::Key << "w1" << YAML::Value
    << d.gmm.w1 << YAML::Key << "mu2" << YAML::Value << d.gmm.mu2 << YAML::Key << "sigma2" << YAML::Value
    << d.gmm.sigma2 << YAML::Key << "w2" << YAML::Value << d.gmm.w2 << YAML::EndMap;
  e << YAML::Key << "n" << YAML::Value << d.n;
  e << YAML::Key << "sampling_interval" << YAML::Value << YAML::Flow << YAML::BeginSeq << d.sampling_interval.start
    << d.sampling_interval.end << YAML::EndSeq;
  e << YAML::Key << "path" << YAML::Value << d.path;
  e << YAML::Key << "schema" << YAML::Value << (d.schema == CsvSchema::Sequence ? "sequence" : "continuous");
  e << YAML::Key << "alphabet" << YAML::Value << d.alphabet;
  e << YAML::Key << "normalize" << YAML::Value << d.normalize;
  e << YAML::Key << "imbalance" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "low" << YAML::Value;
  emit_range(e, d.low);
  e << YAML::Key << "high" << YAML::Value;
  emit_range(e, d.high);
  e << YAML::Key << "n_low" << YAML::Value << d.n_low << YAML::EndMap;
  e << YAML::Key << "source" << YAML::Value << d.source;
  e << YAML::Key << "planted" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "length" << YAML::Value
    << d.planted_length << YAML::Key << "alphabet" << YAML::Value << d.planted_alphabet << YAML::Key << "sharpness"
    << YAML::Value << d.planted_sharpness << YAML::EndMap;
  e << YAML::Key << "threshold" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "kind" << YAML::Value
    << (d.threshold.kind == Threshold::Kind::Percentile ? "percentile" : "absolute") << YAML::Key << "value"
    << YAML::Value << d.threshold.value << YAML::EndMap;
  e << YAML::Key << "tag" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "length" << YAML::Value
    << d.tag_length << YAML::Key << "h_tag" << YAML::Value << d.h_tag << YAML::EndMap;
  e << YAML::Key << "dataset_seed" << YAML::Value << d.dataset_seed;
  e << YAML::Key << "reference_grid" << YAML::Value << d.reference_grid;
  e << YAML::Key << "weight_grid" << YAML::Value << d.weight_grid;
  e << YAML::Key << "floor" << YAML::Value << d.floor;
  e << YAML::EndMap;

  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "preset" << YAML::Value << c.model.preset;
  e << YAML::Key << "latent_dim" << YAML::Value << c.model.latent_dim;
  e << YAML::Key << "encoder_hidden" << YAML::Value << YAML::Flow << c.model.encoder_hidden;
  e << YAML::Key << "decoder_hidden" << YAML::Value << YAML::Flow << c.model.decoder_hidden;
  e << YAML::Key << "slope" << YAML::Value << c.model.slope;
  e << YAML::Key << "obs_stddev" << YAML::Value << c.model.obs_stddev;
  e << YAML::EndMap;

  e << YAML::Key << "mbo" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "samples_per_iter" << YAML::Value << c.mbo.samples_per_iter;
  e << YAML::Key << "iterations" << YAML::Value << c.mbo.iterations;
  e << YAML::Key << "initial_epochs" << YAML::Value << c.mbo.initial_epochs;
  e << YAML::Key << "epochs_per_iter" << YAML::Value << c.mbo.epochs_per_iter;
  e << YAML::Key << "batch_size" << YAML::Value << c.mbo.batch_size;
  e << YAML::Key << "warm_start" << YAML::Value << c.mbo.warm_start;
  e << YAML::Key << "learning_rate" << YAML::Value << c.mbo.learning_rate;
  e << YAML::Key << "tau" << YAML::Value << c.mbo.hyper.tau;
  e << YAML::Key << "lambda_r" << YAML::Value << c.mbo.hyper.lambda_r;
  e << YAML::Key << "y_threshold" << YAML::Value;
  if (std::isinf(c.mbo.y_threshold) && c.mbo.y_threshold < 0) {
    e << YAML::Null;
  } else {
    e << c.mbo.y_threshold;
  }
  e << YAML::Key << "rwr_gamma" << YAML::Value << c.scheme_params.rwr_gamma;
  e << YAML::Key << "cbas_quantile" << YAML::Value << c.scheme_params.cbas_quantile;
  e << YAML::Key << "cbas_mc_samples" << YAML::Value << c.scheme_params.cbas_mc_samples;
  e << YAML::EndMap;

  e << YAML::Key << "schemes" << YAML::Value << YAML::Flow << c.schemes;
  e << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;

  e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "rho" << YAML::Value << YAML::Flow << c.grid.rho;
  e << YAML::Key << "delta_mu" << YAML::Value << YAML::Flow << c.grid.delta_mu;
  e << YAML::Key << "sigma1" << YAML::Value << YAML::Flow << c.grid.sigma1;
  e << YAML::Key << "samples_per_iter" << YAML::Value << YAML::Flow << c.grid.samples_per_iter;
  e << YAML::Key << "sampling_interval" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& si : c.grid.sampling_interval) e << YAML::Flow << YAML::BeginSeq << si.start << si.end << YAML::EndSeq;
  e << YAML::EndSeq;
  e << YAML::Key << "high_range" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : c.grid.high_range) emit_range(e, r);
  e << YAML::EndSeq;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

/// Path relative to the config file's directory unless already absolute.
inline std::string resolve_path(const ExperimentConfig& c, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  if (path.is_absolute() || c.base_dir.empty()) return p;
  return (std::filesystem::path(c.base_dir) / path).string();
}

inline constexpr const char* kOutputDirEnv = "PGVAE_OUTPUT_DIR";

/// CLI override, else config output_dir, else $PGVAE_OUTPUT_DIR/<name>, else results/<name>.
inline std::string resolve_output_dir(const ExperimentConfig& c, const std::string& cli_override = "") {
  if (!cli_override.empty()) return cli_override;
  if (!c.output_dir.empty()) return resolve_path(c, c.output_dir);
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    return (std::filesystem::path(env) / c.name).string();
  }
  return (std::filesystem::path("results") / c.name).string();
}

/// Checks everything that can be checked without running: value ranges,
/// scheme names, referenced files, and architecture consistency.
inline void validate_config(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  if (c.schemes.empty()) throw InvalidArgument("config: schemes list is empty");
  for (const auto& s : c.schemes) pgvae::validate(make_scheme(s, c.scheme_params));
  if (c.seeds.empty()) throw InvalidArgument("config: seeds list is empty");
  if (!(d.rho > 0.0)) throw InvalidArgument("dataset.rho must be > 0");
  for (double r : c.grid.rho) {
    if (!(r > 0.0)) throw InvalidArgument("grid.rho entries must be > 0");
  }
  MboConfig m = c.mbo;
  m.validate();
  for (std::size_t k : c.grid.samples_per_iter) {
    if (k < 2) throw InvalidArgument("grid.samples_per_iter entries must be >= 2");
  }
  if (c.model.latent_dim == 0) throw InvalidArgument("model.latent_dim must be >= 1");
  if (!(c.model.slope > 0.0 && c.model.slope < 1.0)) throw InvalidArgument("model.slope must lie in (0, 1)");
  if (!(c.model.obs_stddev > 0.0)) throw InvalidArgument("model.obs_stddev must be > 0");
  auto require_file = [&](const std::string& key, const std::string& p) {
    if (p.empty()) throw InvalidArgument("dataset." + key + " is required for kind " + config_detail::kind_name(d.kind));
    if (!std::filesystem::exists(resolve_path(c, p))) {
      throw InvalidArgument("dataset." + key + ": file not found: " + resolve_path(c, p));
    }
  };
  switch (d.kind) {
    case DatasetSpec::Kind::Gmm:
      d.gmm.validate();
      d.sampling_interval.validate();
      for (const auto& si : c.grid.sampling_interval) si.validate();
      for (double s : c.grid.sigma1) {
        if (!(s > 0.0)) throw InvalidArgument("grid.sigma1 entries must be > 0");
      }
      if (d.n == 0) throw InvalidArgument("dataset.n must be >= 1");
      break;
    case DatasetSpec::Kind::Csv:
      require_file("path", d.path);
      break;
    case DatasetSpec::Kind::SemiSynthetic:
      if (d.source == "csv") {
        require_file("path", d.path);
      } else if (d.source != "planted") {
        throw InvalidArgument("dataset.source must be planted or csv");
      }
      if (!d.h_tag.empty() && d.h_tag.size() != d.tag_length) {
        throw InvalidArgument("dataset.tag.h_tag length differs from tag.length");
      }
      break;
    case DatasetSpec::Kind::ReferenceField:
      require_file("path", d.path);
      require_file("reference_grid", d.reference_grid);
      if (!d.weight_grid.empty()) require_file("weight_grid", d.weight_grid);
      break;
  }
  if (d.kind != DatasetSpec::Kind::Gmm) {
    d.low.validate();
    d.high.validate();
    for (const auto& r : c.grid.high_range) r.validate();
    if (d.n_low == 0) throw InvalidArgument("dataset.imbalance.n_low must be >= 1");
    if (!c.grid.delta_mu.empty() || !c.grid.sigma1.empty() || !c.grid.sampling_interval.empty()) {
      throw InvalidArgument("grid: delta_mu, sigma1 and sampling_interval apply only to gmm datasets");
    }
  }
}

}  // namespace pgvae
