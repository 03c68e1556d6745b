#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgvae/error.hpp"
#include "pgvae/mlp.hpp"

namespace pgvae {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators, one vector per parameter block in block order.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

/// One bias-corrected Adam update of `params` in place.
///
/// The moment buffers are created lazily on the first call. Throws
/// NumericError naming the block if any gradient entry is not finite; in
/// that case nothing is modified.
inline void adam_step(std::span<const ParamBlock> params, std::span<const ConstParamBlock> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: param/grad block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != grads[b].values.size()) {
      throw ShapeError("adam_step: block " + params[b].name + " size mismatch");
    }
    for (double g : grads[b].values) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in block " + grads[b].name);
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: state was built for a different parameter layout");
  }

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b].values;
    const auto g = grads[b].values;
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    if (m.size() != p.size()) throw ShapeError("adam_step: state block " + params[b].name + " size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace pgvae
