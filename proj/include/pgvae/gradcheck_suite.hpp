#pragma once

// Registered finite-difference checks over the VAE losses.

#include <functional>
#include <string>
#include <vector>

#include "pgvae/datagen.hpp"
#include "pgvae/generative.hpp"
#include "pgvae/gradcheck.hpp"

namespace pgvae {

struct LossCheck {
  std::string name;
  GradcheckResult result;
  std::string worst_param;
  bool passed = false;
};

struct GradcheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::size_t batch = 4;
  std::uint64_t seed = 11;
  /// Test hook: scales the analytic gradient of the named loss by 1.01.
  std::string corrupt;
};

inline std::vector<std::string> gradcheck_loss_names() {
  return {"elbo/gaussian",       "elbo/categorical",  "relationship/gaussian",
          "relationship/categorical", "combined/gaussian", "combined/categorical"};
}

namespace gradcheck_detail {

struct Fixture {
  VaeModel model;
  Matrix x;
  std::vector<double> y;
  std::vector<double> w;
  Matrix noise;
};

inline Fixture make_fixture(bool categorical, std::size_t batch, Rng& rng) {
  VaeArchitecture arch;
  arch.encoder_hidden = {6, 5};
  arch.decoder_hidden = {5, 6};
  arch.latent_dim = 2;
  if (categorical) {
    arch.decoder_kind = CategoricalSequence{3, 4};
    arch.input_dim = 12;
  } else {
    arch.decoder_kind = GaussianContinuous{3, 0.7};
    arch.input_dim = 3;
  }
  Fixture f{make_vae(arch, rng), Matrix(), {}, {}, standard_normal(batch, arch.latent_dim, rng)};
  if (categorical) {
    std::vector<Sequence> seqs;
    for (std::size_t i = 0; i < batch; ++i) seqs.push_back(random_tag(3, 4, rng));
    f.x = one_hot_encode(seqs, 4);
  } else {
    f.x = standard_normal(batch, 3, rng);
  }
  double ws = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    f.y.push_back(rng.uniform());
    f.w.push_back(rng.uniform(0.5, 1.5));
    ws += f.w.back();
  }
  for (double& v : f.w) v /= ws;
  return f;
}

inline std::string locate(const std::vector<ConstParamBlock>& blocks, std::size_t index) {
  for (const auto& b : blocks) {
    if (index < b.values.size()) return b.name + "[" + std::to_string(index) + "]";
    index -= b.values.size();
  }
  return "?";
}

}  // namespace gradcheck_detail

/// Runs every registered loss. ELBO checks use lambda_r = 0; the relationship
/// check differentiates the scaled relationship term alone (its analytic
/// gradient is the combined gradient minus the ELBO gradient at equal noise).
inline std::vector<LossCheck> run_gradcheck_suite(const GradcheckOptions& opt = {}) {
  using namespace gradcheck_detail;
  std::vector<LossCheck> out;
  const PgvaeHyper combined{2.0, 3.0};
  const PgvaeHyper elbo_only{2.0, 0.0};
  for (const auto& name : gradcheck_loss_names()) {
    const bool categorical = name.ends_with("categorical");
    const std::string term = name.substr(0, name.find('/'));
    Rng rng = Rng(opt.seed).derive(name);
    Fixture f = make_fixture(categorical, opt.batch, rng);
    VaeModel work = f.model;
    const double scale = name == opt.corrupt ? 1.01 : 1.0;
    auto loss_fn = [&](std::span<const double> params, std::vector<double>* grad) {
      auto blocks = work.blocks();
      unflatten(params, blocks);
      double value = 0.0;
      std::vector<double> g;
      if (term == "relationship") {
        const double c = combined.lambda_r / (combined.tau * combined.tau);
        value = c * relationship_loss(encode(work, f.x), f.y, combined.tau);
        if (grad) {
          const auto full = pgvae_objective(work, f.x, f.y, f.w, combined, f.noise);
          const auto elbo = pgvae_objective(work, f.x, f.y, f.w, elbo_only, f.noise);
          g = flatten(full.grads.blocks());
          const auto ge = flatten(elbo.grads.blocks());
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= ge[i];
        }
      } else {
        const auto r = pgvae_objective(work, f.x, f.y, f.w, term == "elbo" ? elbo_only : combined, f.noise);
        value = r.loss.total;
        if (grad) g = flatten(r.grads.blocks());
      }
      if (grad) {
        for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] = scale * g[i];
      }
      return value;
    };
    const VaeModel& ref = f.model;
    const auto params = flatten(ref.blocks());
    LossCheck c;
    c.name = name;
    c.result = finite_diff_gradcheck(loss_fn, params, opt.eps);
    c.worst_param = locate(ref.blocks(), c.result.worst_index);
    c.passed = c.result.max_relative_error < opt.tolerance;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pgvae
