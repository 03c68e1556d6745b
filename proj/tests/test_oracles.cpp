#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pgvae/oracles.hpp"
#include "pgvae/rng.hpp"

using namespace pgvae;

TEST(Gmm, ClosedFormValues) {
  const GmmOracle o;
  EXPECT_NEAR(gmm_eval(o, 15.0), 2.5, 1e-15);
  EXPECT_NEAR(gmm_eval(o, 0.0), 1.0, 1e-15);
  EXPECT_LT(gmm_eval(o, 7.5), 1e-10);
  EXPECT_GT(gmm_eval(o, 7.5), 0.0);
}

TEST(Gmm, Validation) {
  EXPECT_THROW((GmmOracle{0, 0.0, 1, 15, 1, 2.5}.validate()), InvalidArgument);
  EXPECT_THROW((GmmOracle{0, 0.25, 1, 15, 1, -1}.validate()), InvalidArgument);
}

TEST(Gmm, DerivativeMatchesFiniteDifference) {
  const GmmOracle o;
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-2.0, 18.0), h = 1e-6;
    const double fd = (gmm_eval(o, x + h) - gmm_eval(o, x - h)) / (2 * h);
    EXPECT_NEAR(gmm_derivative(o, x), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Gmm, ModeSymmetry) {
  const GmmOracle o;  // delta mu = 15 = 60 sigma1
  for (double d = 0.0; d <= 5.0; d += 0.05) {
    const double cross = o.w1 * std::exp(-0.5 * std::pow((o.mu2 - d - o.mu1) / o.sigma1, 2));
    EXPECT_LE(std::abs(gmm_eval(o, o.mu2 + d) - gmm_eval(o, o.mu2 - d)), cross + 1e-14);
  }
}

TEST(GmmOptimum, ReferenceOracle) {
  const auto opt = gmm_global_optimum(GmmOracle{});
  EXPECT_NEAR(opt.y, 2.5, 1e-12);
  EXPECT_LT(std::abs(opt.x - 15.0), 1e-3);
}

TEST(GmmOptimum, HeavySecondMode) {
  GmmOracle o;
  o.w2 = 10.0;
  EXPECT_NEAR(gmm_global_optimum(o).y, 10.0, 1e-12);
}

TEST(GmmOptimum, SymmetricModes) {
  GmmOracle o{-5.0, 1.0, 2.0, 5.0, 1.0, 2.0};
  const auto opt = gmm_global_optimum(o);
  EXPECT_NEAR(opt.y, gmm_eval(o, 5.0), 1e-9);
  EXPECT_NEAR(std::abs(opt.x), 5.0, 1e-3);
}

TEST(GmmOptimum, DominatesRandomPoints) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    GmmOracle o{0.0, rng.uniform(0.1, 2.0), rng.uniform(0.5, 2.0), rng.uniform(3.0, 40.0), rng.uniform(0.1, 2.0),
                rng.uniform(0.5, 12.0)};
    const auto opt = gmm_global_optimum(o);
    for (int i = 0; i < 10000; ++i) {
      const double x = rng.uniform(-10.0, 50.0);
      ASSERT_GE(opt.y, gmm_eval(o, x)) << "x = " << x;
    }
  }
}

TEST(Lookup, TableReadBack) {
  LookupOracle o("ACGT");
  o.insert("ACG", 0.73);
  EXPECT_EQ(lookup_eval(o, Sequence{0, 1, 2}), 0.73);
  EXPECT_EQ(lookup_eval(o, Sequence{0, 1, 3}), 0.0);
  EXPECT_EQ(lookup_eval(o, Sequence{0, 1, 9}), 0.0);
  EXPECT_EQ(lookup_eval(o, Sequence{0, 1, 2}), lookup_eval(o, Sequence{0, 1, 2}));
}

TEST(Lookup, EmptyTable) {
  const LookupOracle o;
  EXPECT_EQ(lookup_eval(o, Sequence{1, 2, 3}), 0.0);
  EXPECT_EQ(lookup_eval(o, std::vector<double>{0.5}), 0.0);
}

TEST(Lookup, ContinuousKeysQuantized) {
  LookupOracle o;
  o.insert(LookupOracle::key(std::vector<double>{0.1234564, -2.0}), 0.5);
  EXPECT_EQ(lookup_eval(o, std::vector<double>{0.1234561, -2.0000002}), 0.5);
  EXPECT_EQ(lookup_eval(o, std::vector<double>{0.123458, -2.0}), 0.0);
  EXPECT_EQ(LookupOracle::key(std::vector<double>{-0.0}), LookupOracle::key(std::vector<double>{0.0}));
  EXPECT_EQ(LookupOracle::key(std::vector<double>{-1e-9}), "0.000000");
}

TEST(Lookup, RejectsBadEntries) {
  LookupOracle o;
  EXPECT_THROW(o.insert("A", 1.5), InvalidArgument);
  EXPECT_THROW(o.insert("A", -0.1), InvalidArgument);
  o.insert("A", 0.2);
  EXPECT_THROW(o.insert("A", 0.3), InvalidArgument);
}

TEST(ReferenceField, ExactMatchHitsFloor) {
  const Matrix t{{1.0, 2.0}, {3.0, 4.0}};
  const auto o = make_reference_field(t);
  EXPECT_NEAR(reference_field_eval(o, t), -std::log(1e-12), 1e-9);
  EXPECT_NEAR(reference_field_eval(o, t), 27.63, 5e-3);
}

TEST(ReferenceField, UnitErrorGivesZero) {
  const Matrix t{{1.0, 2.0}, {3.0, 4.0}};
  const auto o = make_reference_field(t);
  EXPECT_NEAR(reference_field_eval(o, Matrix{{2.0, 1.0}, {4.0, 3.0}}), 0.0, 1e-11);
}

TEST(ReferenceField, HalfErrorHandComputed) {
  const auto o = make_reference_field(Matrix(2, 2));
  EXPECT_NEAR(reference_field_eval(o, Matrix{{0.0, 0.0}, {1.0, 1.0}}), std::log(2.0), 1e-11);
  EXPECT_NEAR(std::log(2.0), 0.6931, 1e-4);
}

TEST(ReferenceField, Weighted) {
  ReferenceFieldOracle o{Matrix(1, 2), Matrix{{3.0, 1.0}}, 1e-12};
  o.validate();
  // (3 * 1 + 1 * 0) / 4
  EXPECT_NEAR(reference_field_eval(o, Matrix{{1.0, 0.0}}), -std::log(0.75 + 1e-12), 1e-12);
}

TEST(ReferenceField, Errors) {
  const auto o = make_reference_field(Matrix(2, 2));
  EXPECT_THROW(reference_field_eval(o, Matrix(2, 3)), ShapeError);
  EXPECT_THROW(reference_field_eval(o, std::vector<double>(3)), ShapeError);
  ReferenceFieldOracle bad{Matrix(2, 2), Matrix(2, 2), 1e-12};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.weights = Matrix(1, 4, 1.0);
  EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(ReferenceField, MonotoneInNestedPerturbations) {
  Rng rng(3);
  Matrix t(6, 6);
  for (double& v : t.values()) v = rng.normal();
  const auto o = make_reference_field(t);
  Matrix dir(6, 6);
  for (double& v : dir.values()) v = rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (double s = 0.0; s <= 3.0; s += 0.1) {
    Matrix u = t;
    for (std::size_t i = 0; i < u.size(); ++i) u.values()[i] += s * dir.values()[i];
    const double y = reference_field_eval(o, u);
    EXPECT_LT(y, prev);
    prev = y;
  }
}

TEST(Score, DispatchesOnOracleAndDesigns) {
  const Oracle gmm = GmmOracle{};
  const auto y = score(gmm, Designs{Matrix{{0.0}, {15.0}}});
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  EXPECT_NEAR(y[1], 2.5, 1e-15);
  EXPECT_THROW(score(gmm, Designs{Matrix(1, 2)}), ShapeError);
  EXPECT_THROW(score(gmm, Designs{std::vector<Sequence>{{0}}}), InvalidArgument);

  LookupOracle l("AB");
  l.insert("AB", 0.9);
  const auto ys = score(Oracle{l}, Designs{std::vector<Sequence>{{0, 1}, {1, 0}}});
  EXPECT_EQ(ys[0], 0.9);
  EXPECT_EQ(ys[1], 0.0);
}

TEST(GridCsv, LoadsAndRejects) {
  const auto dir = std::filesystem::path(::testing::TempDir());
  const auto good = dir / "grid_good.csv", bad = dir / "grid_bad.csv", ragged = dir / "grid_ragged.csv";
  std::ofstream(good) << "1,2,3\n4,5,6\n";
  std::ofstream(bad) << "1,2\n3,x\n";
  std::ofstream(ragged) << "1,2\n3\n";
  const auto m = load_grid_csv(good.string());
  EXPECT_EQ(m, (Matrix{{1, 2, 3}, {4, 5, 6}}));
  try {
    load_grid_csv(bad.string());
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_grid_csv(ragged.string()), InvalidArgument);
  EXPECT_THROW(load_grid_csv((dir / "missing.csv").string()), InvalidArgument);
}
