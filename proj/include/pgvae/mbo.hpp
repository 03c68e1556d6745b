#pragma once

// Iterative model-based optimization: sample K designs from the search model,
// score them with the oracle, weight them per scheme, refit by weighted
// maximum likelihood. Also: weighting schemes, effective sample size, run
// metrics, cross-seed aggregation and latent-space diagnostics.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pgvae/adam.hpp"
#include "pgvae/datagen.hpp"
#include "pgvae/design.hpp"
#include "pgvae/error.hpp"
#include "pgvae/generative.hpp"
#include "pgvae/oracles.hpp"
#include "pgvae/rng.hpp"
#include "pgvae/stats.hpp"

namespace pgvae {

// ---------------------------------------------------------------------------
// Weighting schemes

/// Uniform weights; the relationship loss carries the property signal.
struct PgvaeScheme {
  friend bool operator==(const PgvaeScheme&, const PgvaeScheme&) = default;
};

/// Reward-weighted regression: w ~ exp(gamma (y - max y)).
struct RwrScheme {
  double gamma = 10.0;
  friend bool operator==(const RwrScheme&, const RwrScheme&) = default;
};

/// RWR that also weights the initial fit on the trainset.
struct FwRwrScheme {
  double gamma = 10.0;
  friend bool operator==(const FwRwrScheme&, const FwRwrScheme&) = default;
};

/// Conditioning by adaptive sampling with an unbiased oracle: density ratio
/// against the initial model times an indicator above a rising quantile.
struct CbasScheme {
  double quantile = 90.0;
  std::size_t mc_samples = 20;
  friend bool operator==(const CbasScheme&, const CbasScheme&) = default;
};

using WeightScheme = std::variant<PgvaeScheme, RwrScheme, FwRwrScheme, CbasScheme>;

inline std::string scheme_name(const WeightScheme& s) {
  switch (s.index()) {
    case 0: return "pgvae";
    case 1: return "rwr";
    case 2: return "fw-rwr";
    default: return "cbas";
  }
}

inline void validate(const WeightScheme& s) {
  if (const auto* r = std::get_if<RwrScheme>(&s); r && !(r->gamma > 0.0)) throw InvalidArgument("RWR: gamma must be > 0");
  if (const auto* r = std::get_if<FwRwrScheme>(&s); r && !(r->gamma > 0.0)) {
    throw InvalidArgument("fw-RWR: gamma must be > 0");
  }
  if (const auto* c = std::get_if<CbasScheme>(&s)) {
    if (!(c->quantile > 0.0 && c->quantile < 100.0)) throw InvalidArgument("CbAS: quantile must lie in (0, 100)");
    if (c->mc_samples == 0) throw InvalidArgument("CbAS: mc_samples must be >= 1");
  }
}

/// w_i = exp(gamma (y_i - max y)) / sum_j exp(gamma (y_j - max y)).
inline std::vector<double> rwr_weights(std::span<const double> y, double gamma) {
  if (y.empty()) throw InvalidArgument("rwr_weights: empty input");
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericError("rwr_weights: non-finite property");
  }
  const double mx = *std::max_element(y.begin(), y.end());
  std::vector<double> w(y.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    w[i] = std::exp(gamma * (y[i] - mx));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Kish effective sample size 1 / sum w^2 for normalized weights.
inline double effective_sample_size(std::span<const double> w) {
  if (w.empty()) throw InvalidArgument("effective_sample_size: empty weights");
  double sum = 0.0, sq = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("effective_sample_size: weights must be finite and >= 0");
    sum += v;
    sq += v * v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("effective_sample_size: weights must sum to 1");
  return 1.0 / sq;
}

struct CbasWeights {
  std::vector<double> weights;
  double threshold = 0.0;
  bool fell_back = false;
};

/// Threshold q = max(floor, previous, Q-th percentile of y); weights are
/// proportional to exp(log_p_baseline - log_p_current) on designs with
/// y >= q and zero elsewhere. If no design clears q, the best design gets
/// weight 1 and `fell_back` is set.
inline CbasWeights cbas_weights_from_log_densities(std::span<const double> y, std::span<const double> log_p_baseline,
                                                   std::span<const double> log_p_current, double quantile,
                                                   double threshold_floor, double previous_threshold) {
  if (y.empty()) throw InvalidArgument("cbas_weights: empty batch");
  if (log_p_baseline.size() != y.size() || log_p_current.size() != y.size()) {
    throw ShapeError("cbas_weights: density vectors differ in length from y");
  }
  CbasWeights out;
  out.threshold = std::max({threshold_floor, previous_threshold, percentile(y, quantile)});
  out.weights.assign(y.size(), 0.0);
  double max_log_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= out.threshold) max_log_ratio = std::max(max_log_ratio, log_p_baseline[i] - log_p_current[i]);
  }
  if (!std::isfinite(max_log_ratio)) {
    out.fell_back = true;
    const auto best = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    out.weights[best] = 1.0;
    return out;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= out.threshold) {
      out.weights[i] = std::exp(log_p_baseline[i] - log_p_current[i] - max_log_ratio);
      sum += out.weights[i];
    }
  }
  for (double& w : out.weights) w /= sum;
  return out;
}

/// CbAS weights with densities estimated from each model's decoder by
/// log_marginal_likelihood over `mc_samples` shared draws z ~ N(0, I).
inline CbasWeights cbas_weights(std::span<const double> y, const Matrix& x_input, const VaeModel& current,
                                const VaeModel& baseline, double quantile, double threshold_floor,
                                double previous_threshold, std::size_t mc_samples, Rng& rng) {
  const Matrix z = standard_normal(mc_samples, current.latent_dim, rng);
  const auto lp_base = log_marginal_likelihood(baseline, x_input, z);
  const auto lp_curr = log_marginal_likelihood(current, x_input, z);
  return cbas_weights_from_log_densities(y, lp_base, lp_curr, quantile, threshold_floor, previous_threshold);
}

// ---------------------------------------------------------------------------
// Latent diagnostics

struct LatentStructureReport {
  /// Top-2 principal-component coordinates of the centered latent means.
  Matrix projection;
  bool pca_degenerate = false;
  /// -||mu_i||^2 per sample.
  std::vector<double> neg_norm_sq;
  double spearman = 0.0;
  /// Least-squares fit of ||mu||^2 / 2 = intercept - slope * y.
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
};

namespace detail {

/// Leading eigenpair of a symmetric PSD matrix by power iteration.
inline std::pair<double, std::vector<double>> power_iteration(const Matrix& c, double tol, std::size_t max_iter) {
  const std::size_t d = c.rows();
  std::vector<double> v(d), next(d);
  for (std::size_t k = 0; k < d; ++k) v[k] = 1.0 + 0.1 * static_cast<double>(k);
  double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= nv;
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += c(i, j) * v[j];
      next[i] = s;
    }
    const double n = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
    if (n == 0.0) return {0.0, v};
    double diff = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      next[i] /= n;
      diff = std::max(diff, std::abs(next[i] - v[i]));
    }
    v.swap(next);
    if (diff < tol) break;
  }
  double lambda = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) lambda += v[i] * c(i, j) * v[j];
  }
  return {lambda, v};
}

}  // namespace detail

/// Diagnostics for latent means `means` (n x d) against properties y.
inline LatentStructureReport latent_structure_from_means(const Matrix& means, std::span<const double> y) {
  const std::size_t n = means.rows();
  const std::size_t d = means.cols();
  if (n == 0) throw InvalidArgument("latent_structure_report: empty dataset");
  if (y.size() != n) throw ShapeError("latent_structure_report: property length differs from latent rows");
  LatentStructureReport rep;
  rep.projection = Matrix(n, 2);

  std::vector<double> center(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k) center[k] += means(r, k) / static_cast<double>(n);
  }
  Matrix centered(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k) centered(r, k) = means(r, k) - center[k];
  }
  Matrix cov = matmul_tn(centered, centered);
  double trace = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < d; ++k) trace += cov(k, k);
  for (double v : means.values()) scale += v * v;
  if (n < 2 || !(trace > 1e-20 * scale) || !(trace > 1e-300)) {
    rep.pca_degenerate = true;
  } else {
    for (std::size_t comp = 0; comp < std::min<std::size_t>(2, d); ++comp) {
      auto [lambda, v] = detail::power_iteration(cov, 1e-9, 10000);
      if (!(lambda > 1e-12 * trace)) {
        if (comp == 0) rep.pca_degenerate = true;
        break;
      }
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += centered(r, k) * v[k];
        rep.projection(r, comp) = s;
      }
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) cov(i, j) -= lambda * v[i] * v[j];
      }
    }
  }

  rep.neg_norm_sq = latent_log_prior(means);
  for (double& v : rep.neg_norm_sq) v *= 2.0;
  std::vector<double> half_sq(n);
  for (std::size_t i = 0; i < n; ++i) half_sq[i] = -0.5 * rep.neg_norm_sq[i];

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (n < 2) {
    rep.spearman = rep.slope = rep.intercept = rep.residual_rms = nan;
    return rep;
  }
  rep.spearman = spearman(rep.neg_norm_sq, y);
  const double my = mean(y);
  const double ma = mean(half_sq);
  double syy = 0.0, say = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    syy += (y[i] - my) * (y[i] - my);
    say += (half_sq[i] - ma) * (y[i] - my);
  }
  if (syy == 0.0) {
    rep.slope = nan;
    rep.intercept = ma;
  } else {
    rep.slope = -say / syy;
    rep.intercept = ma + rep.slope * my;
  }
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = rep.intercept - (std::isnan(rep.slope) ? 0.0 : rep.slope) * y[i];
    rss += (half_sq[i] - fit) * (half_sq[i] - fit);
  }
  rep.residual_rms = std::sqrt(rss / static_cast<double>(n));
  return rep;
}

inline LatentStructureReport latent_structure_report(const VaeModel& model, const Dataset& data) {
  const Matrix x = model_input(data.designs, data.alphabet.size());
  return latent_structure_from_means(encode(model, x).mean, data.y);
}

// ---------------------------------------------------------------------------
// MBO loop

struct MboConfig {
  std::size_t samples_per_iter = 200;  // K
  std::size_t iterations = 20;         // T
  std::size_t initial_epochs = 200;
  std::size_t epochs_per_iter = 50;
  std::size_t batch_size = 32;
  bool warm_start = true;
  double learning_rate = 1e-3;
  WeightScheme scheme = PgvaeScheme{};
  PgvaeHyper hyper;
  /// y_m of the objective set S = {y > y_m}; CbAS thresholds never drop below it.
  double y_threshold = -std::numeric_limits<double>::infinity();

  void validate() const {
    if (samples_per_iter < 2) throw InvalidArgument("MboConfig: K must be >= 2");
    if (iterations < 1) throw InvalidArgument("MboConfig: T must be >= 1");
    if (batch_size < 2) throw InvalidArgument("MboConfig: batch_size must be >= 2");
    if (!(learning_rate >= 0.0)) throw InvalidArgument("MboConfig: learning rate must be >= 0");
    hyper.validate();
    pgvae::validate(scheme);
  }

  /// Relationship settings used for fits under this scheme; baselines are
  /// vanilla VAEs.
  PgvaeHyper fit_hyper() const {
    PgvaeHyper h = hyper;
    if (!std::holds_alternative<PgvaeScheme>(scheme)) h.lambda_r = 0.0;
    return h;
  }
};

struct ScoredBatch {
  Designs designs;
  std::vector<double> y;
  std::vector<double> w;

  void validate() const {
    if (design_count(designs) != y.size() || w.size() != y.size()) {
      throw InvalidArgument("ScoredBatch: designs, scores and weights differ in length");
    }
    double s = 0.0;
    for (double v : w) {
      if (!(v >= 0.0)) throw InvalidArgument("ScoredBatch: negative weight");
      s += v;
    }
    if (std::abs(s - 1.0) >= 1e-9) throw InvalidArgument("ScoredBatch: weights must sum to 1");
  }
};

struct IterationMetrics {
  std::size_t iteration = 0;
  double max = 0.0;
  double p75 = 0.0;
  double p95 = 0.0;
  double cum_max = 0.0;
  double cum_p75 = 0.0;
  double cum_p95 = 0.0;
  double n_eff = 0.0;
};

struct RunMetrics {
  std::vector<IterationMetrics> iterations;
  /// Trainset property percentiles ("Base" series).
  double base_max = 0.0;
  double base_p75 = 0.0;
  double base_p95 = 0.0;
  /// Latent diagnostics on the trainset after the initial fit and at the end.
  LatentStructureReport initial_latent;
  LatentStructureReport final_latent;

  double final_cum_max() const { return iterations.empty() ? 0.0 : iterations.back().cum_max; }
};

struct MboResult {
  RunMetrics metrics;
  VaeModel model;
  std::vector<ScoredBatch> log;
  std::vector<double> cbas_thresholds;
  std::size_t cbas_fallbacks = 0;
};

namespace detail {

inline void fit(VaeModel& model, const Matrix& x, std::span<const double> y, std::span<const double> w,
                const PgvaeHyper& hyper, const MboConfig& cfg, std::size_t epochs, Rng rng) {
  AdamState adam(AdamConfig{cfg.learning_rate});
  for (std::size_t e = 0; e < epochs; ++e) train_epoch(model, x, y, w, hyper, adam, rng, cfg.batch_size);
}

inline void reinitialize(VaeModel& model, Rng rng) {
  model.encoder = init_mlp(model.encoder_spec, rng);
  model.decoder = init_mlp(model.decoder_spec, rng);
}

}  // namespace detail

/// Runs the MBO loop from an initialized model.
///
/// Step 0 fits the trainset (uniform weights, except fw-RWR which applies
/// its weights there too). Each of the T iterations then samples K designs,
/// scores and weights them, and records metrics; every iteration except the
/// last refits the model on its weighted batch, so T fits happen in total.
/// Union metrics cover generated samples only, not the trainset.
inline MboResult run_mbo(VaeModel model, const Oracle& oracle, const Dataset& trainset, const MboConfig& cfg,
                         Rng& rng) {
  cfg.validate();
  model.validate();
  trainset.validate();
  if (trainset.size() == 0) throw InvalidArgument("run_mbo: empty trainset");
  const std::size_t alphabet = trainset.alphabet.size();
  const PgvaeHyper hyper = cfg.fit_hyper();

  MboResult res;
  res.metrics.base_max = *std::max_element(trainset.y.begin(), trainset.y.end());
  res.metrics.base_p75 = percentile(trainset.y, 75.0);
  res.metrics.base_p95 = percentile(trainset.y, 95.0);

  {
    const Matrix x0 = model_input(trainset.designs, alphabet);
    const std::size_t n0 = trainset.size();
    std::vector<double> w0;
    if (const auto* fw = std::get_if<FwRwrScheme>(&cfg.scheme)) {
      w0 = rwr_weights(trainset.y, fw->gamma);
    } else {
      w0.assign(n0, 1.0 / static_cast<double>(n0));
    }
    detail::fit(model, x0, trainset.y, w0, hyper, cfg, cfg.initial_epochs, rng.derive("fit", 0));
  }
  res.metrics.initial_latent = latent_structure_report(model, trainset);

  const VaeModel baseline = model;
  double cbas_threshold = -std::numeric_limits<double>::infinity();
  std::vector<double> union_y;
  const std::size_t k = cfg.samples_per_iter;

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    Rng sample_rng = rng.derive("sample", t);
    auto sampled = sample_designs(model, k, sample_rng);
    ScoredBatch batch{std::move(sampled.designs), {}, {}};
    batch.y = score(oracle, batch.designs);
    for (double v : batch.y) {
      if (!std::isfinite(v)) throw NumericError("run_mbo: oracle returned a non-finite score at iteration " + std::to_string(t));
    }
    const Matrix x = model_input(batch.designs, alphabet);

    if (std::holds_alternative<PgvaeScheme>(cfg.scheme)) {
      batch.w.assign(k, 1.0 / static_cast<double>(k));
    } else if (const auto* r = std::get_if<RwrScheme>(&cfg.scheme)) {
      batch.w = rwr_weights(batch.y, r->gamma);
    } else if (const auto* f = std::get_if<FwRwrScheme>(&cfg.scheme)) {
      batch.w = rwr_weights(batch.y, f->gamma);
    } else {
      const auto& c = std::get<CbasScheme>(cfg.scheme);
      Rng mc_rng = rng.derive("cbas", t);
      auto cw = cbas_weights(batch.y, x, model, baseline, c.quantile, cfg.y_threshold, cbas_threshold, c.mc_samples,
                             mc_rng);
      cbas_threshold = cw.threshold;
      res.cbas_thresholds.push_back(cw.threshold);
      if (cw.fell_back) ++res.cbas_fallbacks;
      batch.w = std::move(cw.weights);
    }
    double wsum = std::accumulate(batch.w.begin(), batch.w.end(), 0.0);
    if (!(wsum > 0.0)) throw NumericError("run_mbo: all weights are zero at iteration " + std::to_string(t));

    IterationMetrics m;
    m.iteration = t;
    m.max = *std::max_element(batch.y.begin(), batch.y.end());
    m.p75 = percentile(batch.y, 75.0);
    m.p95 = percentile(batch.y, 95.0);
    union_y.insert(union_y.end(), batch.y.begin(), batch.y.end());
    m.cum_max = *std::max_element(union_y.begin(), union_y.end());
    m.cum_p75 = percentile(union_y, 75.0);
    m.cum_p95 = percentile(union_y, 95.0);
    m.n_eff = effective_sample_size(batch.w);
    res.metrics.iterations.push_back(m);

    if (t < cfg.iterations) {
      if (!cfg.warm_start) detail::reinitialize(model, rng.derive("reinit", t));
      detail::fit(model, x, batch.y, batch.w, hyper, cfg, cfg.epochs_per_iter, rng.derive("fit", t));
    }
    res.log.push_back(std::move(batch));
  }
  res.metrics.final_latent = latent_structure_report(model, trainset);
  res.model = std::move(model);
  return res;
}

// ---------------------------------------------------------------------------
// Aggregation over seeds

struct AggregateMetrics {
  std::size_t runs = 0;
  /// Field-wise means over runs, per iteration.
  std::vector<IterationMetrics> mean_iterations;
  double mean_max = 0.0;
  /// Student-t 95% half-width of the final cumulative max.
  double max_ci_half_width = 0.0;
  double mean_base_max = 0.0;
  double mean_base_p75 = 0.0;
  double mean_base_p95 = 0.0;
};

/// t_{0.975, n-1} * sd / sqrt(n) for n >= 2 values.
inline double t_confidence_half_width(std::span<const double> v) {
  if (v.size() < 2) throw InvalidArgument("confidence interval needs at least 2 values");
  const double sd = std::sqrt(sample_variance(v));
  const boost::math::students_t dist(static_cast<double>(v.size() - 1));
  const double t = boost::math::quantile(dist, 0.975);
  return t * sd / std::sqrt(static_cast<double>(v.size()));
}

inline AggregateMetrics aggregate_runs(std::span<const RunMetrics> runs) {
  if (runs.size() < 2) throw InvalidArgument("aggregate_runs: need at least 2 seeds");
  const std::size_t t_len = runs.front().iterations.size();
  for (const auto& r : runs) {
    if (r.iterations.size() != t_len) throw InvalidArgument("aggregate_runs: runs have different iteration counts");
  }
  AggregateMetrics agg;
  agg.runs = runs.size();
  const double n = static_cast<double>(runs.size());
  agg.mean_iterations.resize(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    auto& m = agg.mean_iterations[t];
    m.iteration = runs.front().iterations[t].iteration;
    for (const auto& r : runs) {
      const auto& it = r.iterations[t];
      m.max += it.max / n;
      m.p75 += it.p75 / n;
      m.p95 += it.p95 / n;
      m.cum_max += it.cum_max / n;
      m.cum_p75 += it.cum_p75 / n;
      m.cum_p95 += it.cum_p95 / n;
      m.n_eff += it.n_eff / n;
    }
  }
  std::vector<double> finals;
  for (const auto& r : runs) {
    finals.push_back(r.final_cum_max());
    agg.mean_base_max += r.base_max / n;
    agg.mean_base_p75 += r.base_p75 / n;
    agg.mean_base_p95 += r.base_p95 / n;
  }
  agg.mean_max = mean(finals);
  agg.max_ci_half_width = t_confidence_half_width(finals);
  return agg;
}

}  // namespace pgvae
