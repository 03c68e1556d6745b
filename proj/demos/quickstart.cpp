// Minimal library use: optimize a bimodal GMM oracle from an imbalanced
// trainset with the property-guided VAE.

#include <cstdio>

#include "pgvae/datagen.hpp"
#include "pgvae/mbo.hpp"

int main() {
  using namespace pgvae;
  const GmmOracle oracle{0.0, 0.25, 1.0, 15.0, 1.0, 2.5};
  Rng root(7);

  Rng data_rng = root.derive("data");
  const Dataset train = sample_gmm_trainset(oracle, 100, 0.1, SamplingInterval{}, data_rng);

  Rng init_rng = root.derive("init");
  VaeModel model = make_vae(VaeArchitecture{}, init_rng);

  MboConfig cfg;
  cfg.iterations = 10;
  cfg.epochs_per_iter = 20;
  cfg.hyper.lambda_r = 25.0;
  Rng mbo_rng = root.derive("mbo");
  const MboResult res = run_mbo(std::move(model), oracle, train, cfg, mbo_rng);

  std::printf("trainset max %.3f  (optimum %.3f)\n", res.metrics.base_max, gmm_global_optimum(oracle).y);
  std::printf("latent spearman after first fit %.3f, slope %.2f\n", res.metrics.initial_latent.spearman,
              res.metrics.initial_latent.slope);
  for (const auto& it : res.metrics.iterations) {
    std::printf("iter %2zu  max %.3f  cum_max %.3f  n_eff %.0f\n", it.iteration, it.max, it.cum_max, it.n_eff);
  }
  return 0;
}
