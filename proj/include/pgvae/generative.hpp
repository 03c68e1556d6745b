#pragma once

// VAE search model: Gaussian-encoder VAE with either a Gaussian (continuous)
// or a per-position categorical (sequence) decoder, the ELBO pieces, and the
// property-guided relationship loss that ties latent log-prior differences to
// property differences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pgvae/adam.hpp"
#include "pgvae/design.hpp"
#include "pgvae/error.hpp"
#include "pgvae/matrix.hpp"
#include "pgvae/mlp.hpp"
#include "pgvae/rng.hpp"

namespace pgvae {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct GaussianContinuous {
  std::size_t out_dim = 1;
  double obs_stddev = 1.0;
  friend bool operator==(const GaussianContinuous&, const GaussianContinuous&) = default;
};

struct CategoricalSequence {
  std::size_t positions = 1;
  std::size_t alphabet = 2;
  friend bool operator==(const CategoricalSequence&, const CategoricalSequence&) = default;
};

using DecoderKind = std::variant<GaussianContinuous, CategoricalSequence>;

inline std::size_t decoder_output_dim(const DecoderKind& kind) {
  if (const auto* g = std::get_if<GaussianContinuous>(&kind)) return g->out_dim;
  const auto& c = std::get<CategoricalSequence>(kind);
  return c.positions * c.alphabet;
}

inline void validate(const DecoderKind& kind) {
  if (const auto* g = std::get_if<GaussianContinuous>(&kind)) {
    if (g->out_dim == 0) throw InvalidArgument("GaussianContinuous: out_dim must be >= 1");
    if (!(g->obs_stddev > 0.0)) throw InvalidArgument("GaussianContinuous: stddev must be > 0");
  } else {
    const auto& c = std::get<CategoricalSequence>(kind);
    if (c.positions < 1) throw InvalidArgument("CategoricalSequence: positions must be >= 1");
    if (c.alphabet < 2) throw InvalidArgument("CategoricalSequence: alphabet must be >= 2");
  }
}

struct VaeModel {
  MlpSpec encoder_spec;
  MlpParams encoder;
  MlpSpec decoder_spec;
  MlpParams decoder;
  std::size_t latent_dim = 0;
  DecoderKind decoder_kind;

  std::size_t input_dim() const { return encoder_spec.in_dim(); }

  void validate() const {
    encoder_spec.validate();
    decoder_spec.validate();
    pgvae::validate(decoder_kind);
    if (encoder_spec.out_dim() != 2 * latent_dim) {
      throw InvalidArgument("VaeModel: encoder output dim must be 2 * latent_dim");
    }
    if (decoder_spec.in_dim() != latent_dim) throw InvalidArgument("VaeModel: decoder input dim must be latent_dim");
    if (decoder_spec.out_dim() != decoder_output_dim(decoder_kind)) {
      throw InvalidArgument("VaeModel: decoder output dim does not match decoder kind");
    }
    check_params(encoder, encoder_spec);
    check_params(decoder, decoder_spec);
  }

  std::vector<ParamBlock> blocks() {
    std::vector<ParamBlock> out;
    append_blocks(encoder, "encoder", out);
    append_blocks(decoder, "decoder", out);
    return out;
  }
  std::vector<ConstParamBlock> blocks() const {
    std::vector<ConstParamBlock> out;
    append_blocks(encoder, "encoder", out);
    append_blocks(decoder, "decoder", out);
    return out;
  }

  friend bool operator==(const VaeModel&, const VaeModel&) = default;
};

struct VaeGradients {
  MlpParams encoder;
  MlpParams decoder;

  std::vector<ConstParamBlock> blocks() const {
    std::vector<ConstParamBlock> out;
    append_blocks(encoder, "encoder", out);
    append_blocks(decoder, "decoder", out);
    return out;
  }
};

/// Layer layout of a VAE, hidden widths excluding input/latent/output dims.
struct VaeArchitecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::vector<std::size_t> decoder_hidden{64, 64};
  std::size_t latent_dim = 2;
  double slope = 0.01;
  DecoderKind decoder_kind = GaussianContinuous{};

  friend bool operator==(const VaeArchitecture&, const VaeArchitecture&) = default;
};

inline std::pair<MlpSpec, MlpSpec> vae_specs(const VaeArchitecture& arch) {
  MlpSpec enc{{arch.input_dim}, arch.slope};
  enc.layer_dims.insert(enc.layer_dims.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
  enc.layer_dims.push_back(2 * arch.latent_dim);
  MlpSpec dec{{arch.latent_dim}, arch.slope};
  dec.layer_dims.insert(dec.layer_dims.end(), arch.decoder_hidden.begin(), arch.decoder_hidden.end());
  dec.layer_dims.push_back(decoder_output_dim(arch.decoder_kind));
  return {enc, dec};
}

inline VaeModel make_vae(const VaeArchitecture& arch, Rng& rng) {
  auto [enc, dec] = vae_specs(arch);
  VaeModel m{enc, init_mlp(enc, rng), dec, init_mlp(dec, rng), arch.latent_dim, arch.decoder_kind};
  m.validate();
  return m;
}

struct LatentBatch {
  Matrix mean;
  Matrix logvar;
};

namespace detail {

struct EncodedBatch {
  LatentBatch latent;
  Matrix raw_logvar;
  MlpCache cache;
};

inline EncodedBatch encode_with_cache(const VaeModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw ShapeError("encode: expected " + std::to_string(model.input_dim()) + " input columns, got " + x.shape_str());
  }
  auto fwd = mlp_forward(model.encoder, model.encoder_spec, x);
  const std::size_t d = model.latent_dim;
  EncodedBatch e{{Matrix(x.rows(), d), Matrix(x.rows(), d)}, Matrix(x.rows(), d), std::move(fwd.cache)};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto out = fwd.output.row(r);
    for (std::size_t k = 0; k < d; ++k) {
      e.latent.mean(r, k) = out[k];
      e.raw_logvar(r, k) = out[d + k];
      e.latent.logvar(r, k) = std::clamp(out[d + k], kLogVarMin, kLogVarMax);
    }
  }
  return e;
}

inline void log_softmax_block(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double l : logits) s += std::exp(l - mx);
  const double lse = mx + std::log(s);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

inline void check_one_hot(const Matrix& x, const CategoricalSequence& cat) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t p = 0; p < cat.positions; ++p) {
      int ones = 0;
      for (std::size_t a = 0; a < cat.alphabet; ++a) {
        const double v = row[p * cat.alphabet + a];
        if (v == 1.0) {
          ++ones;
        } else if (v != 0.0) {
          ones = -1;
          break;
        }
      }
      if (ones != 1) {
        throw InvalidArgument("reconstruction_loss: row " + std::to_string(r) + " position " + std::to_string(p) +
                              " is not one-hot");
      }
    }
  }
}

/// Per-sample negative log-likelihood and its gradient w.r.t. decoder output.
inline std::vector<double> recon_and_grad(const DecoderKind& kind, const Matrix& x, const Matrix& decoded,
                                          Matrix* grad) {
  if (x.rows() != decoded.rows() || x.cols() != decoded.cols()) {
    throw ShapeError("reconstruction_loss: x " + x.shape_str() + " vs decoded " + decoded.shape_str());
  }
  std::vector<double> loss(x.rows(), 0.0);
  if (grad) *grad = Matrix(x.rows(), x.cols());
  if (const auto* g = std::get_if<GaussianContinuous>(&kind)) {
    const double inv_var = 1.0 / (g->obs_stddev * g->obs_stddev);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = decoded(r, c) - x(r, c);
        s += diff * diff;
        if (grad) (*grad)(r, c) = diff * inv_var;
      }
      loss[r] = 0.5 * s * inv_var;
    }
    return loss;
  }
  const auto& cat = std::get<CategoricalSequence>(kind);
  check_one_hot(x, cat);
  std::vector<double> logp(cat.alphabet);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    const auto dr = decoded.row(r);
    for (std::size_t p = 0; p < cat.positions; ++p) {
      const std::size_t off = p * cat.alphabet;
      log_softmax_block(dr.subspan(off, cat.alphabet), logp);
      for (std::size_t a = 0; a < cat.alphabet; ++a) {
        loss[r] -= xr[off + a] * logp[a];
        if (grad) (*grad)(r, off + a) = std::exp(logp[a]) - xr[off + a];
      }
    }
  }
  return loss;
}

}  // namespace detail

/// Encoder means and clamped log-variances.
inline LatentBatch encode(const VaeModel& model, const Matrix& x) {
  return detail::encode_with_cache(model, x).latent;
}

/// z = mean + exp(logvar / 2) * noise for a given standard-normal noise matrix.
inline Matrix reparameterize(const LatentBatch& lat, const Matrix& noise) {
  if (noise.rows() != lat.mean.rows() || noise.cols() != lat.mean.cols()) {
    throw ShapeError("reparameterize: noise " + noise.shape_str() + " vs latent " + lat.mean.shape_str());
  }
  Matrix z(lat.mean.rows(), lat.mean.cols());
  const auto mu = lat.mean.values();
  const auto lv = lat.logvar.values();
  const auto eps = noise.values();
  auto zv = z.values();
  for (std::size_t i = 0; i < zv.size(); ++i) zv[i] = mu[i] + std::exp(0.5 * lv[i]) * eps[i];
  return z;
}

inline Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

inline Matrix reparameterize(const LatentBatch& lat, Rng& rng) {
  return reparameterize(lat, standard_normal(lat.mean.rows(), lat.mean.cols(), rng));
}

/// KL(N(mean, exp(logvar)) || N(0, I)) per sample.
inline std::vector<double> kl_diag_gaussian(const LatentBatch& lat) {
  std::vector<double> kl(lat.mean.rows(), 0.0);
  for (std::size_t r = 0; r < lat.mean.rows(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < lat.mean.cols(); ++k) {
      const double mu = lat.mean(r, k);
      const double lv = lat.logvar(r, k);
      s += mu * mu + std::exp(lv) - 1.0 - lv;
    }
    kl[r] = 0.5 * s;
  }
  return kl;
}

/// Decoder output (means or logits) for latent codes.
inline Matrix decode(const VaeModel& model, const Matrix& z) {
  return mlp_forward(model.decoder, model.decoder_spec, z).output;
}

/// Per-sample negative log-likelihood of x given z.
///
/// Gaussian: 0.5 * ||x - decode(z)||^2 / stddev^2 (the log-normalizer is
/// omitted). Categorical: summed per-position cross-entropy; x must be
/// one-hot.
inline std::vector<double> reconstruction_loss(const VaeModel& model, const Matrix& x, const Matrix& z) {
  return detail::recon_and_grad(model.decoder_kind, x, decode(model, z), nullptr);
}

/// Latent log-prior score s_i = -||mean_i||^2 / 2.
inline std::vector<double> latent_log_prior(const Matrix& mean) {
  std::vector<double> s(mean.rows(), 0.0);
  for (std::size_t r = 0; r < mean.rows(); ++r) {
    double n2 = 0.0;
    for (double v : mean.row(r)) n2 += v * v;
    s[r] = -0.5 * n2;
  }
  return s;
}

/// Mean over unordered pairs (i, j) of ((s_i - s_j) - tau (y_i - y_j))^2.
inline double relationship_loss(const LatentBatch& lat, std::span<const double> y, double tau) {
  const std::size_t n = lat.mean.rows();
  if (n < 2) throw InvalidArgument("relationship_loss: batch must contain at least 2 samples");
  if (y.size() != n) throw ShapeError("relationship_loss: property vector length differs from batch");
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericError("relationship_loss: non-finite property value");
  }
  const auto s = latent_log_prior(lat.mean);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = (s[i] - s[j]) - tau * (y[i] - y[j]);
      sum += r * r;
    }
  }
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

struct PgvaeHyper {
  double tau = 5.0;
  double lambda_r = 1.0;

  void validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("PgvaeHyper: tau must be > 0");
    if (!(lambda_r >= 0.0)) throw InvalidArgument("PgvaeHyper: lambda_r must be >= 0");
  }
  friend bool operator==(const PgvaeHyper&, const PgvaeHyper&) = default;
};

/// All terms are in the minimized sign convention:
/// total = reconstruction + kl + (lambda_r / tau^2) * relationship.
struct LossBreakdown {
  double reconstruction = 0.0;
  double kl = 0.0;
  double relationship = 0.0;
  double total = 0.0;
};

struct ObjectiveResult {
  LossBreakdown loss;
  VaeGradients grads;
};

inline void validate_weights(std::span<const double> w, std::size_t n) {
  if (w.size() != n) throw ShapeError("weights length differs from batch");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("weights must be finite and >= 0");
    sum += v;
  }
  if (!(sum > 0.0)) throw InvalidArgument("weights are all zero");
}

/// Weighted negative ELBO plus the scaled relationship loss, with gradients,
/// for a fixed reparameterization noise matrix (batch x latent_dim).
inline ObjectiveResult pgvae_objective(const VaeModel& model, const Matrix& x, std::span<const double> y,
                                       std::span<const double> weights, const PgvaeHyper& hyper,
                                       const Matrix& noise) {
  hyper.validate();
  const std::size_t n = x.rows();
  const std::size_t d = model.latent_dim;
  if (y.size() != n) throw ShapeError("pgvae_objective: property vector length differs from batch");
  validate_weights(weights, n);
  if (hyper.lambda_r > 0.0 && n < 2) throw InvalidArgument("pgvae_objective: relationship loss needs batch >= 2");

  auto enc = detail::encode_with_cache(model, x);
  const Matrix z = reparameterize(enc.latent, noise);
  auto dec = mlp_forward(model.decoder, model.decoder_spec, z);
  Matrix recon_grad;
  const auto recon = detail::recon_and_grad(model.decoder_kind, x, dec.output, &recon_grad);
  const auto kl = kl_diag_gaussian(enc.latent);

  ObjectiveResult res;
  for (std::size_t i = 0; i < n; ++i) res.loss.reconstruction += weights[i] * recon[i];
  for (std::size_t i = 0; i < n; ++i) res.loss.kl += weights[i] * kl[i];
  res.loss.relationship = n >= 2 ? relationship_loss(enc.latent, y, hyper.tau) : 0.0;
  const double rel_scale = hyper.lambda_r / (hyper.tau * hyper.tau);
  res.loss.total = res.loss.reconstruction + res.loss.kl + rel_scale * res.loss.relationship;

  // decoder
  for (std::size_t r = 0; r < n; ++r) {
    for (double& g : recon_grad.row(r)) g *= weights[r];
  }
  auto dec_bwd = mlp_backward(model.decoder, model.decoder_spec, dec.cache, recon_grad);
  const Matrix& dz = dec_bwd.input_grad;

  // d relationship / d s_i = (2n / |P|) (q_i - mean q), q = s - tau y, s = -||mu||^2 / 2
  std::vector<double> drel_ds(n, 0.0);
  if (rel_scale > 0.0) {
    const auto s = latent_log_prior(enc.latent.mean);
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = s[i] - hyper.tau * y[i];
    const double qbar = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(n);
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) drel_ds[i] = rel_scale * 2.0 * static_cast<double>(n) / pairs * (q[i] - qbar);
  }

  Matrix enc_grad(n, 2 * d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k) {
      const double mu = enc.latent.mean(r, k);
      const double lv = enc.latent.logvar(r, k);
      const double sd = std::exp(0.5 * lv);
      enc_grad(r, k) = dz(r, k) + weights[r] * mu - drel_ds[r] * mu;
      const double raw = enc.raw_logvar(r, k);
      if (raw >= kLogVarMin && raw <= kLogVarMax) {
        enc_grad(r, d + k) = dz(r, k) * noise(r, k) * 0.5 * sd + weights[r] * 0.5 * (std::exp(lv) - 1.0);
      }
    }
  }
  auto enc_bwd = mlp_backward(model.encoder, model.encoder_spec, enc.cache, enc_grad);
  res.grads.encoder = std::move(enc_bwd.param_grads);
  res.grads.decoder = std::move(dec_bwd.param_grads);
  return res;
}

inline ObjectiveResult pgvae_objective(const VaeModel& model, const Matrix& x, std::span<const double> y,
                                       std::span<const double> weights, const PgvaeHyper& hyper, Rng& rng) {
  return pgvae_objective(model, x, y, weights, hyper, standard_normal(x.rows(), model.latent_dim, rng));
}

/// One shuffled pass over (x, y, weights) with an Adam step per minibatch.
///
/// Minibatch weights are rescaled by n / batch_rows, so uniform weights 1/n
/// give the minibatch mean and the minibatch ELBO term is an unbiased
/// estimate of the full weighted sum. A trailing minibatch of a single row is
/// merged into the previous one so relationship pairs always exist.
/// Minibatches whose weights are all zero carry no gradient and are skipped.
/// Returns the mean LossBreakdown over the minibatches that were used.
inline LossBreakdown train_epoch(VaeModel& model, const Matrix& x, std::span<const double> y,
                                 std::span<const double> weights, const PgvaeHyper& hyper, AdamState& adam, Rng& rng,
                                 std::size_t batch_size) {
  const std::size_t n = x.rows();
  if (y.size() != n || weights.size() != n) throw ShapeError("train_epoch: x, y, weights lengths differ");
  if (n == 0) throw InvalidArgument("train_epoch: empty dataset");
  if (batch_size == 0) throw InvalidArgument("train_epoch: batch_size must be >= 1");
  if (hyper.lambda_r > 0.0 && (batch_size < 2 || n < 2)) {
    throw InvalidArgument("train_epoch: relationship loss needs minibatches of at least 2 samples");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    batches.emplace_back(start, std::min(n, start + batch_size));
  }
  if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
    batches[batches.size() - 2].second = n;
    batches.pop_back();
  }

  LossBreakdown acc;
  std::size_t used = 0;
  const double scale_n = static_cast<double>(n);
  for (const auto& [b0, b1] : batches) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                 order.begin() + static_cast<std::ptrdiff_t>(b1));
    const double rows = static_cast<double>(idx.size());
    std::vector<double> yb, wb;
    double wsum = 0.0;
    for (std::size_t i : idx) {
      yb.push_back(y[i]);
      wb.push_back(weights[i] * scale_n / rows);
      wsum += weights[i];
    }
    const Matrix noise = standard_normal(idx.size(), model.latent_dim, rng);
    if (!(wsum > 0.0)) continue;
    const Matrix xb = gather_rows(x, idx);
    auto res = pgvae_objective(model, xb, yb, wb, hyper, noise);
    auto pblocks = model.blocks();
    auto gblocks = res.grads.blocks();
    adam_step(pblocks, gblocks, adam);
    acc.reconstruction += res.loss.reconstruction;
    acc.kl += res.loss.kl;
    acc.relationship += res.loss.relationship;
    acc.total += res.loss.total;
    ++used;
  }
  if (used > 0) {
    const double u = static_cast<double>(used);
    acc.reconstruction /= u;
    acc.kl /= u;
    acc.relationship /= u;
    acc.total /= u;
  }
  return acc;
}

struct SampledDesigns {
  Designs designs;
  Matrix z;
};

/// Draws z ~ N(0, I) and decodes. Gaussian decoders return the decoder mean,
/// plus N(0, stddev^2) observation noise when `observation_noise` is set;
/// categorical decoders sample one symbol per position from the softmax.
inline SampledDesigns sample_designs(const VaeModel& model, std::size_t n, Rng& rng, bool observation_noise = false) {
  if (n == 0) throw InvalidArgument("sample_designs: n must be >= 1");
  SampledDesigns out{Matrix(), standard_normal(n, model.latent_dim, rng)};
  Matrix decoded = decode(model, out.z);
  if (const auto* g = std::get_if<GaussianContinuous>(&model.decoder_kind)) {
    if (observation_noise) {
      for (double& v : decoded.values()) v += g->obs_stddev * rng.normal();
    }
    out.designs = std::move(decoded);
    return out;
  }
  const auto& cat = std::get<CategoricalSequence>(model.decoder_kind);
  std::vector<Sequence> seqs(n, Sequence(cat.positions, 0));
  std::vector<double> logp(cat.alphabet);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = decoded.row(r);
    for (std::size_t p = 0; p < cat.positions; ++p) {
      detail::log_softmax_block(row.subspan(p * cat.alphabet, cat.alphabet), logp);
      const double u = rng.uniform();
      double cum = 0.0;
      std::size_t pick = cat.alphabet - 1;
      for (std::size_t a = 0; a < cat.alphabet; ++a) {
        cum += std::exp(logp[a]);
        if (u < cum) {
          pick = a;
          break;
        }
      }
      seqs[r][p] = static_cast<std::uint8_t>(pick);
    }
  }
  out.designs = std::move(seqs);
  return out;
}

/// Monte Carlo estimate of log p(x) = log mean_m p(x | z_m) over the given
/// latent draws z_m ~ N(0, I). Gaussian decoders include the full
/// log-normalizer so estimates are comparable across models.
inline std::vector<double> log_marginal_likelihood(const VaeModel& model, const Matrix& x, const Matrix& z_samples) {
  if (z_samples.cols() != model.latent_dim) throw ShapeError("log_marginal_likelihood: latent width mismatch");
  const Matrix decoded = decode(model, z_samples);
  const std::size_t m = z_samples.rows();
  std::vector<double> out(x.rows());
  std::vector<double> ll(m);
  std::vector<double> logp;
  double norm = 0.0;
  if (const auto* g = std::get_if<GaussianContinuous>(&model.decoder_kind)) {
    norm = -0.5 * static_cast<double>(g->out_dim) * std::log(2.0 * std::numbers::pi * g->obs_stddev * g->obs_stddev);
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    for (std::size_t k = 0; k < m; ++k) {
      const auto dr = decoded.row(k);
      if (const auto* g = std::get_if<GaussianContinuous>(&model.decoder_kind)) {
        double s = 0.0;
        for (std::size_t c = 0; c < xr.size(); ++c) s += (xr[c] - dr[c]) * (xr[c] - dr[c]);
        ll[k] = norm - 0.5 * s / (g->obs_stddev * g->obs_stddev);
      } else {
        const auto& cat = std::get<CategoricalSequence>(model.decoder_kind);
        logp.resize(cat.alphabet);
        double s = 0.0;
        for (std::size_t p = 0; p < cat.positions; ++p) {
          const std::size_t off = p * cat.alphabet;
          detail::log_softmax_block(dr.subspan(off, cat.alphabet), logp);
          for (std::size_t a = 0; a < cat.alphabet; ++a) s += xr[off + a] * logp[a];
        }
        ll[k] = s;
      }
    }
    const double mx = *std::max_element(ll.begin(), ll.end());
    double acc = 0.0;
    for (double v : ll) acc += std::exp(v - mx);
    out[r] = mx + std::log(acc / static_cast<double>(m));
  }
  return out;
}

}  // namespace pgvae
