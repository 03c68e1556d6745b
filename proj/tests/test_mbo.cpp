#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pgvae/datagen.hpp"
#include "pgvae/mbo.hpp"
#include "pgvae/stats.hpp"

using namespace pgvae;

namespace {

std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::vector<double> w(k);
  double s = 0.0;
  for (double& v : w) {
    v = -std::log(1.0 - rng.uniform());
    // sparse corners as well as the interior
    if (rng.uniform() < 0.2) v = 0.0;
    s += v;
  }
  if (s == 0.0) {
    w[0] = 1.0;
    s = 1.0;
  }
  for (double& v : w) v /= s;
  return w;
}

struct SmallProblem {
  Dataset trainset;
  VaeModel model;
};

SmallProblem small_problem(std::uint64_t seed) {
  Rng root(seed);
  Rng data = root.derive("data"), init = root.derive("init");
  auto d = sample_gmm_trainset(GmmOracle{}, 40, 0.2, SamplingInterval{}, data);
  VaeArchitecture a;
  a.input_dim = 1;
  a.encoder_hidden = {16};
  a.decoder_hidden = {16};
  a.decoder_kind = GaussianContinuous{1, 1.0};
  return {std::move(d), make_vae(a, init)};
}

MboConfig small_config(WeightScheme scheme) {
  MboConfig c;
  c.samples_per_iter = 30;
  c.iterations = 3;
  c.initial_epochs = 10;
  c.epochs_per_iter = 3;
  c.batch_size = 16;
  c.scheme = scheme;
  return c;
}

}  // namespace

TEST(Rwr, HandComputed) {
  const auto w = rwr_weights(std::vector<double>{0.0, 1.0}, std::log(9.0));
  EXPECT_NEAR(w[0], 0.1, 1e-15);
  EXPECT_NEAR(w[1], 0.9, 1e-15);
}

TEST(Rwr, UniformCases) {
  for (double v : rwr_weights(std::vector<double>(5, 3.0), 10.0)) EXPECT_DOUBLE_EQ(v, 0.2);
  for (double v : rwr_weights(std::vector<double>{0.0, 1.0, 5.0, -2.0}, 1e-12)) EXPECT_NEAR(v, 0.25, 1e-11);
}

TEST(Rwr, ShiftInvarianceAndHugeValues) {
  const std::vector<double> y{0.1, 0.7, 0.3};
  std::vector<double> shifted(y);
  for (double& v : shifted) v += 1e4;
  const auto a = rwr_weights(y, 10.0), b = rwr_weights(shifted, 10.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  const auto big = rwr_weights(std::vector<double>{1e3, 0.0}, 10.0);
  EXPECT_EQ(big[0], 1.0);
  EXPECT_THROW(rwr_weights(std::vector<double>{NAN}, 1.0), NumericError);
}

TEST(Rwr, StrictlyMonotone) {
  Rng rng(1);
  std::vector<double> y(50);
  for (double& v : y) v = rng.uniform();
  const auto w = rwr_weights(y, 10.0);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[i] > y[j]) EXPECT_GT(w[i], w[j]);
    }
  }
}

TEST(EffectiveSampleSize, ExactCases) {
  EXPECT_NEAR(effective_sample_size(std::vector<double>(100, 0.01)), 100.0, 1e-12);
  std::vector<double> one_hot(37, 0.0);
  one_hot[5] = 1.0;
  EXPECT_NEAR(effective_sample_size(one_hot), 1.0, 1e-12);
  EXPECT_NEAR(effective_sample_size(std::vector<double>{0.5, 0.5, 0.0}), 2.0, 1e-12);
}

TEST(EffectiveSampleSize, Errors) {
  EXPECT_THROW(effective_sample_size(std::vector<double>{0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(effective_sample_size(std::vector<double>{1.5, -0.5}), InvalidArgument);
  EXPECT_THROW(effective_sample_size(std::vector<double>{}), InvalidArgument);
}

TEST(EffectiveSampleSize, BoundsFuzz) {
  Rng rng(2);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(200);
    const auto w = random_simplex(k, rng);
    const double n = effective_sample_size(w);
    ASSERT_GE(n, 1.0 - 1e-12);
    ASSERT_LE(n, static_cast<double>(k) + 1e-9);
  }
}

TEST(Stats, Percentiles) {
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{1, 2, 3}, 50), 2.0);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{1, 2, 3, 4}, 75), 3.25);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{5, 1, 9}, 0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{5, 1, 9}, 100), 9.0);
  EXPECT_THROW(percentile(std::vector<double>{}, 50), InvalidArgument);
}

TEST(Stats, SpearmanWithTies) {
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0);
  EXPECT_EQ(average_ranks(std::vector<double>{5, 1, 5, 2}), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Cbas, QuantileSelectsTopTwo) {
  std::vector<double> y(10);
  std::iota(y.begin(), y.end(), 0.0);
  const std::vector<double> lp(10, -3.0);
  const auto c = cbas_weights_from_log_densities(y, lp, lp, 80.0, -INFINITY, -INFINITY);
  int nonzero = 0;
  for (double w : c.weights) nonzero += w > 0.0 ? 1 : 0;
  EXPECT_EQ(nonzero, 2);
  EXPECT_DOUBLE_EQ(c.weights[8], 0.5);
  EXPECT_DOUBLE_EQ(c.weights[9], 0.5);
  EXPECT_FALSE(c.fell_back);
}

TEST(Cbas, DensityRatioHandComputed) {
  const std::vector<double> y{1.0, 1.0};
  const std::vector<double> base{std::log(0.2), std::log(0.1)}, curr{std::log(0.1), std::log(0.1)};
  const auto c = cbas_weights_from_log_densities(y, base, curr, 50.0, -INFINITY, -INFINITY);
  EXPECT_NEAR(c.weights[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.weights[1], 1.0 / 3.0, 1e-12);
}

TEST(Cbas, BaselineEqualsCurrentGivesIndicator) {
  Rng rng(3);
  auto p = small_problem(3);
  const auto s = sample_designs(p.model, 40, rng);
  const auto y = score(GmmOracle{}, s.designs);
  const auto c = cbas_weights(y, std::get<Matrix>(s.designs), p.model, p.model, 75.0, -INFINITY, -INFINITY, 20, rng);
  const double q = percentile(y, 75.0);
  std::size_t above = 0;
  for (double v : y) above += v >= q ? 1 : 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_DOUBLE_EQ(c.weights[i], y[i] >= q ? 1.0 / static_cast<double>(above) : 0.0);
  }
}

TEST(Cbas, ThresholdMonotoneAndFallback) {
  const std::vector<double> lp(4, 0.0);
  const auto c1 = cbas_weights_from_log_densities(std::vector<double>{1, 2, 3, 4}, lp, lp, 50.0, -INFINITY, -INFINITY);
  EXPECT_DOUBLE_EQ(c1.threshold, 2.5);
  // a batch whose own median is lower keeps the previous threshold
  const auto c2 = cbas_weights_from_log_densities(std::vector<double>{0, 1, 2.5, 3}, lp, lp, 50.0, -INFINITY, c1.threshold);
  EXPECT_DOUBLE_EQ(c2.threshold, 2.5);
  EXPECT_EQ(c2.weights, (std::vector<double>{0, 0, 0.5, 0.5}));
  const auto c3 = cbas_weights_from_log_densities(std::vector<double>{0, 0.1, 0.2, 0.3}, lp, lp, 50.0, -INFINITY, 10.0);
  EXPECT_TRUE(c3.fell_back);
  EXPECT_EQ(c3.weights, (std::vector<double>{0, 0, 0, 1}));
  const auto c4 = cbas_weights_from_log_densities(std::vector<double>{0, 0.1, 0.2, 0.3}, lp, lp, 50.0, 0.25, -INFINITY);
  EXPECT_EQ(c4.threshold, 0.25);
  EXPECT_FALSE(c4.fell_back);
}

TEST(Cbas, WeightsSumToOne) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.uniform_index(50);
    std::vector<double> y(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform();
      a[i] = rng.normal() * 50.0;
      b[i] = rng.normal() * 50.0;
    }
    const auto c = cbas_weights_from_log_densities(y, a, b, rng.uniform(1.0, 99.0), -INFINITY, -INFINITY);
    EXPECT_NEAR(std::accumulate(c.weights.begin(), c.weights.end(), 0.0), 1.0, 1e-9);
    for (double w : c.weights) EXPECT_GE(w, 0.0);
  }
}

TEST(Schemes, Validation) {
  EXPECT_THROW(validate(WeightScheme{RwrScheme{0.0}}), InvalidArgument);
  EXPECT_THROW(validate(WeightScheme{FwRwrScheme{-1.0}}), InvalidArgument);
  EXPECT_THROW(validate(WeightScheme{CbasScheme{100.0, 20}}), InvalidArgument);
  EXPECT_THROW(validate(WeightScheme{CbasScheme{90.0, 0}}), InvalidArgument);
  EXPECT_EQ(scheme_name(FwRwrScheme{}), "fw-rwr");
}

TEST(Aggregate, TwoSeedTable) {
  RunMetrics a, b;
  a.iterations = {{1, 1, 0, 0, 1, 0, 0, 10}};
  b.iterations = {{1, 3, 0, 0, 3, 0, 0, 20}};
  const std::vector<RunMetrics> runs{a, b};
  const auto agg = aggregate_runs(runs);
  EXPECT_DOUBLE_EQ(agg.mean_max, 2.0);
  EXPECT_NEAR(agg.max_ci_half_width, 12.706, 1e-3);
  EXPECT_DOUBLE_EQ(agg.mean_iterations[0].n_eff, 15.0);
}

TEST(Aggregate, IdenticalRunsZeroWidth) {
  RunMetrics a;
  a.iterations = {{1, 2, 1, 1, 2, 1, 1, 5}, {2, 2.5, 1, 1, 2.5, 1, 1, 5}};
  const std::vector<RunMetrics> runs(10, a);
  const auto agg = aggregate_runs(runs);
  EXPECT_EQ(agg.max_ci_half_width, 0.0);
  EXPECT_DOUBLE_EQ(agg.mean_max, 2.5);
  EXPECT_THROW(aggregate_runs(std::span<const RunMetrics>(runs.data(), 1)), InvalidArgument);
}

TEST(Aggregate, MonotoneMeansFromMonotoneRuns) {
  Rng rng(5);
  std::vector<RunMetrics> runs(7);
  for (auto& r : runs) {
    double c = 0.0;
    for (std::size_t t = 1; t <= 20; ++t) {
      c = std::max(c, rng.uniform() * 3.0);
      r.iterations.push_back({t, 0, 0, 0, c, 0, 0, 1});
    }
  }
  const auto agg = aggregate_runs(runs);
  for (std::size_t t = 1; t < 20; ++t) EXPECT_GE(agg.mean_iterations[t].cum_max, agg.mean_iterations[t - 1].cum_max);
}

TEST(LatentReport, ContourLatents) {
  Rng rng(6);
  const double tau = 5.0, c = 4.0;
  const std::size_t n = 200;
  Matrix means(n, 3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform(0.0, 0.8);
    const double r = std::sqrt(2.0 * (c - tau * y[i]));
    std::vector<double> dir{rng.normal(), rng.normal(), rng.normal()};
    const double nd = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    for (int k = 0; k < 3; ++k) means(i, k) = r * dir[k] / nd;
  }
  const auto rep = latent_structure_from_means(means, y);
  EXPECT_NEAR(rep.spearman, 1.0, 1e-12);
  EXPECT_NEAR(rep.slope, tau, 1e-9);
  EXPECT_NEAR(rep.intercept, c, 1e-9);
  EXPECT_LT(rep.residual_rms, 1e-9);
  EXPECT_FALSE(rep.pca_degenerate);
}

TEST(LatentReport, IndependentLatentsNearZero) {
  Rng rng(7);
  const std::size_t n = 1000;
  Matrix means(n, 2);
  std::vector<double> y(n);
  for (double& v : means.values()) v = rng.normal();
  for (double& v : y) v = rng.uniform();
  const auto rep = latent_structure_from_means(means, y);
  EXPECT_LT(std::abs(rep.spearman), 0.1);
  EXPECT_GE(rep.spearman, -1.0);
  EXPECT_LE(rep.spearman, 1.0);
}

TEST(LatentReport, PcaIsometryOnPlanarData) {
  Rng rng(8);
  const std::size_t n = 60;
  Matrix means(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    means(i, 0) = rng.normal() * 3.0;
    means(i, 1) = rng.normal();
  }
  const auto rep = latent_structure_from_means(means, std::vector<double>(n, 0.5));
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d0 = std::hypot(means(i, 0) - means(j, 0), means(i, 1) - means(j, 1));
      const double d1 = std::hypot(rep.projection(i, 0) - rep.projection(j, 0), rep.projection(i, 1) - rep.projection(j, 1));
      worst = std::max(worst, std::abs(d0 - d1));
    }
  }
  EXPECT_LT(worst, 1e-8);
  EXPECT_TRUE(std::isnan(rep.slope));
}

TEST(LatentReport, CollapsedLatentsFlagged) {
  const auto rep = latent_structure_from_means(Matrix(10, 2, 0.3), std::vector<double>(10, 1.0));
  EXPECT_TRUE(rep.pca_degenerate);
  EXPECT_THROW(latent_structure_from_means(Matrix(0, 2), std::vector<double>{}), InvalidArgument);
}

TEST(RunMbo, SingleIterationIsOneFitAndOneRound) {
  auto p = small_problem(9);
  MboConfig cfg = small_config(PgvaeScheme{});
  cfg.iterations = 1;
  cfg.hyper.lambda_r = 0.0;
  Rng rng(10);
  const auto res = run_mbo(p.model, GmmOracle{}, p.trainset, cfg, rng);
  ASSERT_EQ(res.metrics.iterations.size(), 1u);
  ASSERT_EQ(res.log.size(), 1u);

  VaeModel manual = p.model;
  const auto& x = std::get<Matrix>(p.trainset.designs);
  const std::vector<double> w(p.trainset.size(), 1.0 / p.trainset.size());
  detail::fit(manual, x, p.trainset.y, w, cfg.fit_hyper(), cfg, cfg.initial_epochs, rng.derive("fit", 0));
  EXPECT_EQ(res.model.encoder, manual.encoder);
  EXPECT_EQ(res.model.decoder, manual.decoder);
  Rng srng = rng.derive("sample", 1);
  const auto s = sample_designs(manual, cfg.samples_per_iter, srng);
  EXPECT_EQ(std::get<Matrix>(res.log[0].designs), std::get<Matrix>(s.designs));
}

TEST(RunMbo, DeterministicAndMonotone) {
  for (WeightScheme scheme : {WeightScheme{PgvaeScheme{}}, WeightScheme{RwrScheme{}}, WeightScheme{FwRwrScheme{}},
                              WeightScheme{CbasScheme{}}}) {
    auto p = small_problem(11);
    const auto cfg = small_config(scheme);
    Rng r1(12), r2(12);
    const auto a = run_mbo(p.model, GmmOracle{}, p.trainset, cfg, r1);
    const auto b = run_mbo(p.model, GmmOracle{}, p.trainset, cfg, r2);
    ASSERT_EQ(a.metrics.iterations.size(), cfg.iterations);
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
      const auto &x = a.metrics.iterations[t], &y = b.metrics.iterations[t];
      EXPECT_EQ(x.cum_max, y.cum_max);
      EXPECT_EQ(x.p75, y.p75);
      EXPECT_EQ(x.n_eff, y.n_eff);
      EXPECT_EQ(x.iteration, t + 1);
      if (t > 0) EXPECT_GE(x.cum_max, a.metrics.iterations[t - 1].cum_max);
      EXPECT_GE(x.cum_max, x.max);
      EXPECT_GE(x.n_eff, 1.0);
      EXPECT_LE(x.n_eff, static_cast<double>(cfg.samples_per_iter) + 1e-9);
    }
    EXPECT_EQ(a.model.decoder, b.model.decoder);
    for (const auto& batch : a.log) EXPECT_NO_THROW(batch.validate());
    if (std::holds_alternative<CbasScheme>(scheme)) {
      for (std::size_t t = 1; t < a.cbas_thresholds.size(); ++t) EXPECT_GE(a.cbas_thresholds[t], a.cbas_thresholds[t - 1]);
    }
  }
}

TEST(RunMbo, PgvaeKeepsFullEffectiveSampleSize) {
  auto p = small_problem(13);
  const auto cfg = small_config(PgvaeScheme{});
  Rng rng(14);
  const auto res = run_mbo(p.model, GmmOracle{}, p.trainset, cfg, rng);
  for (const auto& m : res.metrics.iterations) EXPECT_NEAR(m.n_eff, static_cast<double>(cfg.samples_per_iter), 1e-9);
}

TEST(RunMbo, BaseStatisticsFromTrainset) {
  auto p = small_problem(15);
  auto cfg = small_config(RwrScheme{});
  cfg.iterations = 1;
  Rng rng(16);
  const auto res = run_mbo(p.model, GmmOracle{}, p.trainset, cfg, rng);
  EXPECT_EQ(res.metrics.base_max, *std::max_element(p.trainset.y.begin(), p.trainset.y.end()));
  EXPECT_EQ(res.metrics.base_p75, percentile(p.trainset.y, 75));
}

TEST(RunMbo, ArgmaxInvariantUnderOracleScale) {
  // y -> 4y with tau -> tau / 4 and lambda_r -> lambda_r / 16 leaves the objective unchanged
  auto p = small_problem(17);
  GmmOracle scaled;
  scaled.w1 *= 4.0;
  scaled.w2 *= 4.0;
  auto cfg = small_config(PgvaeScheme{});
  Rng r1(18), r2(18);
  const auto a = run_mbo(p.model, GmmOracle{}, p.trainset, cfg, r1);
  auto t2 = p.trainset;
  for (double& v : t2.y) v *= 4.0;
  cfg.hyper.tau /= 4.0;
  cfg.hyper.lambda_r /= 16.0;
  const auto b = run_mbo(p.model, scaled, t2, cfg, r2);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const auto& ya = a.log[t].y;
    const auto& yb = b.log[t].y;
    EXPECT_EQ(std::max_element(ya.begin(), ya.end()) - ya.begin(), std::max_element(yb.begin(), yb.end()) - yb.begin());
    EXPECT_NEAR(b.metrics.iterations[t].cum_max, 4.0 * a.metrics.iterations[t].cum_max,
                1e-6 * b.metrics.iterations[t].cum_max);
  }
}

TEST(RunMbo, ConfigValidation) {
  auto p = small_problem(19);
  Rng rng(20);
  auto cfg = small_config(PgvaeScheme{});
  cfg.samples_per_iter = 1;
  EXPECT_THROW(run_mbo(p.model, GmmOracle{}, p.trainset, cfg, rng), InvalidArgument);
  cfg = small_config(PgvaeScheme{});
  cfg.iterations = 0;
  EXPECT_THROW(run_mbo(p.model, GmmOracle{}, p.trainset, cfg, rng), InvalidArgument);
}
