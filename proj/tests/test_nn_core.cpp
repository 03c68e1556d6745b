#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "pgvae/adam.hpp"
#include "pgvae/gradcheck.hpp"
#include "pgvae/matrix.hpp"
#include "pgvae/mlp.hpp"
#include "pgvae/rng.hpp"

using namespace pgvae;

namespace {

MlpParams identity_layer(std::size_t n) {
  MlpSpec spec{{n, n}, 0.01};
  MlpParams p = zero_mlp(spec);
  for (std::size_t i = 0; i < n; ++i) p.layers[0].weight(i, i) = 1.0;
  return p;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedStreamsDiffer) {
  Rng root(5);
  Rng a = root.derive("data"), b = root.derive("init"), c = root.derive("data", 1), d = root.derive("data", 2);
  std::set<std::uint64_t> firsts{a.next_u64(), b.next_u64(), c.next_u64(), d.next_u64()};
  EXPECT_EQ(firsts.size(), 4u);
  Rng again = root.derive("data");
  Rng a2 = root.derive("data");
  EXPECT_EQ(again.next_u64(), a2.next_u64());
}

TEST(Rng, UniformRangeAndMoments) {
  Rng r(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // standard error of the mean is sqrt(1/12 / n)
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, NormalMoments) {
  Rng r(2);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Rng, UniformIndexBoundsAndCoverage) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto k = r.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(4);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Matrix, ShapeAndAccess) {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Matrix, ProductsMatchNaive) {
  Rng r(9);
  Matrix a(3, 4), b(4, 2), c(3, 2);
  for (double& v : a.values()) v = r.normal();
  for (double& v : b.values()) v = r.normal();
  for (double& v : c.values()) v = r.normal();
  const Matrix ab = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(ab(i, j), s, 1e-12);
    }
  }
  const Matrix atc = matmul_tn(a, c);  // 4x2
  const Matrix cbt = matmul_nt(c, b);  // 3x4
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(k, i) * c(k, j);
      EXPECT_NEAR(atc(i, j), s, 1e-12);
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 2; ++k) s += c(i, k) * b(j, k);
      EXPECT_NEAR(cbt(i, j), s, 1e-12);
    }
  }
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Mlp, SpecValidation) {
  EXPECT_THROW((MlpSpec{{3}, 0.01}.validate()), InvalidArgument);
  EXPECT_THROW((MlpSpec{{3, 0, 2}, 0.01}.validate()), InvalidArgument);
  EXPECT_THROW((MlpSpec{{3, 2}, 1.5}.validate()), InvalidArgument);
  EXPECT_NO_THROW((MlpSpec{{3, 2}, 0.2}.validate()));
}

TEST(Mlp, IdentityLayer) {
  MlpSpec spec{{2, 2}, 0.01};
  const auto f = mlp_forward(identity_layer(2), spec, Matrix{{1.0, 2.0}});
  EXPECT_EQ(f.output(0, 0), 1.0);
  EXPECT_EQ(f.output(0, 1), 2.0);
}

TEST(Mlp, LeakyReluOnNegativeHidden) {
  MlpSpec spec{{1, 1, 1}, 0.01};
  MlpParams p = zero_mlp(spec);
  p.layers[0].weight(0, 0) = 1.0;
  p.layers[1].weight(0, 0) = 1.0;
  const auto f = mlp_forward(p, spec, Matrix{{-1.0}});
  EXPECT_DOUBLE_EQ(f.output(0, 0), -0.01);
  EXPECT_DOUBLE_EQ(f.cache.pre_activations[0](0, 0), -1.0);
}

TEST(Mlp, GoldenForward) {
  MlpSpec spec{{3, 4, 2}, 0.01};
  Rng rng(42);
  const auto p = init_mlp(spec, rng);
  const auto f = mlp_forward(p, spec, Matrix{{0.5, -1.0, 2.0}});
  EXPECT_NEAR(f.output(0, 0), 0.28425399926666584, 1e-12);
  EXPECT_NEAR(f.output(0, 1), -0.33161691160258172, 1e-12);
}

TEST(Mlp, ShapeErrorNamesLayer) {
  MlpSpec spec{{3, 4, 2}, 0.01};
  Rng rng(1);
  auto p = init_mlp(spec, rng);
  try {
    mlp_forward(p, spec, Matrix(1, 2));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
  p.layers[1].weight = Matrix(3, 2);
  try {
    mlp_forward(p, spec, Matrix(1, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(Mlp, GlorotInitBounds) {
  MlpSpec spec{{10, 30, 5}, 0.01};
  Rng rng(3);
  const auto p = init_mlp(spec, rng);
  const double b0 = std::sqrt(6.0 / 40.0), b1 = std::sqrt(6.0 / 35.0);
  for (double w : p.layers[0].weight.values()) EXPECT_LE(std::abs(w), b0);
  for (double w : p.layers[1].weight.values()) EXPECT_LE(std::abs(w), b1);
  for (double b : p.layers[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(MlpBackward, LinearLayerOuterProduct) {
  MlpSpec spec{{3, 2}, 0.01};
  Rng rng(5);
  const auto p = init_mlp(spec, rng);
  const Matrix x{{1.0, -2.0, 0.5}};
  const auto f = mlp_forward(p, spec, x);
  const Matrix up{{0.3, -0.7}};
  const auto b = mlp_backward(p, spec, f.cache, up);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(b.param_grads.layers[0].weight(i, j), x(0, i) * up(0, j));
  }
  EXPECT_DOUBLE_EQ(b.param_grads.layers[0].bias[1], -0.7);
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGrads) {
  MlpSpec spec{{3, 5, 2}, 0.01};
  Rng rng(6);
  const auto p = init_mlp(spec, rng);
  const auto f = mlp_forward(p, spec, Matrix{{1, 2, 3}, {-1, 0, 4}});
  const auto b = mlp_backward(p, spec, f.cache, Matrix(2, 2));
  for (const auto& l : b.param_grads.layers) {
    for (double v : l.weight.values()) EXPECT_EQ(v, 0.0);
    for (double v : l.bias) EXPECT_EQ(v, 0.0);
  }
  for (double v : b.input_grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(MlpBackward, UpstreamShapeMismatch) {
  MlpSpec spec{{3, 2}, 0.01};
  Rng rng(6);
  const auto p = init_mlp(spec, rng);
  const auto f = mlp_forward(p, spec, Matrix(2, 3, 1.0));
  EXPECT_THROW(mlp_backward(p, spec, f.cache, Matrix(2, 3)), ShapeError);
}

TEST(MlpBackward, FiniteDifferenceOracle) {
  MlpSpec spec{{3, 6, 5, 2}, 0.05};
  Rng rng(8);
  MlpParams p = init_mlp(spec, rng);
  Matrix x(4, 3), target(4, 2);
  for (double& v : x.values()) v = rng.normal();
  for (double& v : target.values()) v = rng.normal();
  // loss = 0.5 * sum (out - target)^2, also checks the input gradient
  auto loss_fn = [&](std::span<const double> flat, std::vector<double>* grad) {
    MlpParams q = p;
    std::vector<ParamBlock> blocks;
    append_blocks(q, "net", blocks);
    unflatten(flat, blocks);
    const auto f = mlp_forward(q, spec, x);
    Matrix up(4, 2);
    double l = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) {
      up.values()[i] = f.output.values()[i] - target.values()[i];
      l += 0.5 * up.values()[i] * up.values()[i];
    }
    if (grad) {
      const auto b = mlp_backward(q, spec, f.cache, up);
      std::vector<ConstParamBlock> gb;
      append_blocks(b.param_grads, "net", gb);
      *grad = flatten(gb);
    }
    return l;
  };
  std::vector<ConstParamBlock> blocks;
  append_blocks(std::as_const(p), "net", blocks);
  const auto res = finite_diff_gradcheck(loss_fn, flatten(blocks), 1e-5);
  EXPECT_LT(res.max_relative_error, 1e-4);

  auto input_loss = [&](std::span<const double> flat, std::vector<double>* grad) {
    Matrix xi(4, 3, std::vector<double>(flat.begin(), flat.end()));
    const auto f = mlp_forward(p, spec, xi);
    Matrix up(4, 2);
    double l = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) {
      up.values()[i] = f.output.values()[i] - target.values()[i];
      l += 0.5 * up.values()[i] * up.values()[i];
    }
    if (grad) {
      const auto b = mlp_backward(p, spec, f.cache, up);
      grad->assign(b.input_grad.values().begin(), b.input_grad.values().end());
    }
    return l;
  };
  const auto xin = std::vector<double>(x.values().begin(), x.values().end());
  EXPECT_LT(finite_diff_gradcheck(input_loss, xin, 1e-5).max_relative_error, 1e-4);
}

TEST(MlpBackward, Deterministic) {
  MlpSpec spec{{3, 8, 2}, 0.01};
  Rng r1(11), r2(11);
  const auto p1 = init_mlp(spec, r1), p2 = init_mlp(spec, r2);
  EXPECT_EQ(p1, p2);
  const Matrix x{{0.1, 0.2, 0.3}, {1, -1, 0}};
  const auto f1 = mlp_forward(p1, spec, x), f2 = mlp_forward(p2, spec, x);
  EXPECT_EQ(f1.output, f2.output);
  const auto b1 = mlp_backward(p1, spec, f1.cache, f1.output);
  const auto b2 = mlp_backward(p2, spec, f2.cache, f2.output);
  EXPECT_EQ(b1.param_grads, b2.param_grads);
}

TEST(Adam, FirstStepIsMinusLrSign) {
  std::vector<double> p{0.0}, g{2.0};
  std::vector<ParamBlock> pb{{"p", p}};
  std::vector<ConstParamBlock> gb{{"p", g}};
  AdamState s(AdamConfig{0.001});
  adam_step(pb, gb, s);
  EXPECT_NEAR(p[0], -0.001, 1e-10);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p{0.5, -0.25}, g{0.0, 0.0};
  std::vector<ParamBlock> pb{{"p", p}};
  std::vector<ConstParamBlock> gb{{"p", g}};
  AdamState s(AdamConfig{0.001});
  adam_step(pb, gb, s);
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], -0.25);
}

TEST(Adam, TwoStepsHandRecurrence) {
  // constant g = 2: m1 = 0.2, v1 = 0.004; m2 = 0.38, v2 = 0.007996
  // m_hat = 0.38 / 0.19 = 2, v_hat = 0.007996 / 0.001999 = 4, step = lr * 2 / (2 + eps)
  std::vector<double> p{1.0}, g{2.0};
  std::vector<ParamBlock> pb{{"p", p}};
  std::vector<ConstParamBlock> gb{{"p", g}};
  AdamState s(AdamConfig{0.01});
  adam_step(pb, gb, s);
  adam_step(pb, gb, s);
  const double step = 0.01 * 2.0 / (2.0 + 1e-8);
  EXPECT_NEAR(p[0], 1.0 - 2.0 * step, 1e-14);
  EXPECT_NEAR(s.first_moment[0][0], 0.38, 1e-15);
  EXPECT_NEAR(s.second_moment[0][0], 0.007996, 1e-15);
}

TEST(Adam, NonFiniteGradientNamesBlock) {
  std::vector<double> p{1.0}, q{1.0}, g{0.0}, h{std::nan("")};
  std::vector<ParamBlock> pb{{"first", p}, {"second", q}};
  std::vector<ConstParamBlock> gb{{"first", g}, {"second", h}};
  AdamState s;
  try {
    adam_step(pb, gb, s);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos);
  }
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(s.step, 0u);
}

TEST(Adam, UpdateMagnitudeBoundedByLr) {
  Rng r(12);
  std::vector<double> p(50, 0.0), g(50);
  std::vector<ParamBlock> pb{{"p", p}};
  AdamState s(AdamConfig{0.001});
  for (int step = 0; step < 200; ++step) {
    for (double& v : g) v = r.normal() * 10.0;
    std::vector<ConstParamBlock> gb{{"p", g}};
    const std::vector<double> before = p;
    adam_step(pb, gb, s);
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_TRUE(std::isfinite(p[i]));
      // |m_hat| / sqrt(v_hat) <= (1 - b1) / sqrt(1 - b2) in the worst case
      ASSERT_LE(std::abs(p[i] - before[i]), 0.001 * (1.0 - 0.9) / std::sqrt(1.0 - 0.999) + 1e-12);
    }
  }
}

TEST(Gradcheck, QuadraticIsExact) {
  auto loss = [](std::span<const double> p, std::vector<double>* g) {
    double l = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      l += 0.5 * p[i] * p[i];
      if (g) (*g)[i] = p[i];
    }
    return l;
  };
  EXPECT_LT(finite_diff_gradcheck(loss, {0.3, -1.2, 2.5, 7.0}, 1e-5).max_relative_error, 1e-8);
}

TEST(Gradcheck, IndependentParameter) {
  auto loss = [](std::span<const double> p, std::vector<double>* g) {
    if (g) {
      (*g)[0] = 2.0 * p[0];
      (*g)[1] = 0.0;
    }
    return p[0] * p[0];
  };
  std::vector<double> analytic(2);
  std::vector<double> params{0.7, 3.0};
  loss(params, &analytic);
  EXPECT_EQ(analytic[1], 0.0);
  const double fd = (loss(std::vector<double>{0.7, 3.0 + 1e-5}, nullptr) - loss(std::vector<double>{0.7, 3.0 - 1e-5}, nullptr)) / 2e-5;
  EXPECT_LT(std::abs(fd), 1e-6);
  EXPECT_LT(finite_diff_gradcheck(loss, params, 1e-5).max_relative_error, 1e-8);
}

TEST(Gradcheck, DetectsWrongGradient) {
  auto loss = [](std::span<const double> p, std::vector<double>* g) {
    if (g) (*g)[0] = 3.0 * p[0] * p[0] * 1.01;
    return p[0] * p[0] * p[0];
  };
  const auto r = finite_diff_gradcheck(loss, {1.5}, 1e-5);
  EXPECT_GT(r.max_relative_error, 1e-3);
  EXPECT_EQ(r.worst_index, 0u);
}

TEST(Gradcheck, NonFiniteLossThrows) {
  auto loss = [](std::span<const double> p, std::vector<double>*) { return std::log(p[0]); };
  EXPECT_THROW(finite_diff_gradcheck(loss, {-1.0}, 1e-5), NumericError);
  EXPECT_THROW(finite_diff_gradcheck(loss, {1.0}, 0.0), InvalidArgument);
}

TEST(Gradcheck, FlattenRoundTrip) {
  MlpSpec spec{{2, 3, 1}, 0.01};
  Rng r(1);
  MlpParams p = init_mlp(spec, r);
  std::vector<ConstParamBlock> cb;
  append_blocks(std::as_const(p), "n", cb);
  auto flat = flatten(cb);
  for (double& v : flat) v += 1.0;
  MlpParams q = p;
  std::vector<ParamBlock> qb;
  append_blocks(q, "n", qb);
  unflatten(flat, qb);
  EXPECT_DOUBLE_EQ(q.layers[0].weight(0, 0), p.layers[0].weight(0, 0) + 1.0);
  EXPECT_THROW(unflatten(std::vector<double>(3), qb), ShapeError);
}
