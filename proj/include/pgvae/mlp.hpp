#pragma once

// Dense multilayer perceptrons with LeakyReLU hidden activations and a linear
// output layer, plus exact reverse-mode gradients.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pgvae/error.hpp"
#include "pgvae/matrix.hpp"
#include "pgvae/rng.hpp"

namespace pgvae {

struct MlpSpec {
  /// Input dim first, output dim last.
  std::vector<std::size_t> layer_dims;
  double slope = 0.01;

  std::size_t in_dim() const { return layer_dims.front(); }
  std::size_t out_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return layer_dims.size() - 1; }

  void validate() const {
    if (layer_dims.size() < 2) throw InvalidArgument("MlpSpec: need at least 2 layer dims");
    for (std::size_t d : layer_dims) {
      if (d == 0) throw InvalidArgument("MlpSpec: layer dims must be >= 1");
    }
    if (!(slope > 0.0 && slope < 1.0)) throw InvalidArgument("MlpSpec: LeakyReLU slope must lie in (0, 1)");
  }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// y = x * weight + bias, weight is (in x out).
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Named view of one contiguous parameter array.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

struct ConstParamBlock {
  std::string name;
  std::span<const double> values;
};

inline void append_blocks(MlpParams& p, const std::string& prefix, std::vector<ParamBlock>& out) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out.push_back({prefix + ".layer" + std::to_string(l) + ".weight", p.layers[l].weight.values()});
    out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", p.layers[l].bias});
  }
}

inline void append_blocks(const MlpParams& p, const std::string& prefix, std::vector<ConstParamBlock>& out) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out.push_back({prefix + ".layer" + std::to_string(l) + ".weight", p.layers[l].weight.values()});
    out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", p.layers[l].bias});
  }
}

/// Zero-valued parameters with the shapes implied by `spec`.
inline MlpParams zero_mlp(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    p.layers.push_back({Matrix(spec.layer_dims[l], spec.layer_dims[l + 1]),
                        std::vector<double>(spec.layer_dims[l + 1], 0.0)});
  }
  return p;
}

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline MlpParams init_mlp(const MlpSpec& spec, Rng& rng) {
  MlpParams p = zero_mlp(spec);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const double fan_in = static_cast<double>(spec.layer_dims[l]);
    const double fan_out = static_cast<double>(spec.layer_dims[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : p.layers[l].weight.values()) w = rng.uniform(-limit, limit);
  }
  return p;
}

struct MlpCache {
  /// Input to each layer (x for layer 0, activated hidden values afterwards).
  std::vector<Matrix> inputs;
  /// Pre-activation of each layer; the last entry equals the output.
  std::vector<Matrix> pre_activations;
};

struct MlpForward {
  Matrix output;
  MlpCache cache;
};

inline void check_params(const MlpParams& params, const MlpSpec& spec) {
  if (params.layers.size() != spec.num_layers()) {
    throw ShapeError("mlp: params have " + std::to_string(params.layers.size()) + " layers, spec has " +
                     std::to_string(spec.num_layers()));
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    if (layer.weight.rows() != spec.layer_dims[l] || layer.weight.cols() != spec.layer_dims[l + 1] ||
        layer.bias.size() != spec.layer_dims[l + 1]) {
      throw ShapeError("mlp: layer " + std::to_string(l) + " weight " + layer.weight.shape_str() +
                       " does not match spec");
    }
  }
}

inline MlpForward mlp_forward(const MlpParams& params, const MlpSpec& spec, const Matrix& x) {
  check_params(params, spec);
  if (x.cols() != spec.in_dim()) {
    throw ShapeError("mlp_forward: layer 0 expects " + std::to_string(spec.in_dim()) + " inputs, got " +
                     x.shape_str());
  }
  MlpForward fwd;
  const std::size_t n_layers = spec.num_layers();
  fwd.cache.inputs.reserve(n_layers);
  fwd.cache.pre_activations.reserve(n_layers);
  Matrix a = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = params.layers[l];
    Matrix pre = matmul(a, layer.weight);
    for (std::size_t r = 0; r < pre.rows(); ++r) {
      auto row = pre.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
    }
    fwd.cache.inputs.push_back(std::move(a));
    if (l + 1 < n_layers) {
      a = pre;
      for (double& v : a.values()) v = v > 0.0 ? v : spec.slope * v;
    }
    fwd.cache.pre_activations.push_back(std::move(pre));
  }
  fwd.output = fwd.cache.pre_activations.back();
  return fwd;
}

struct MlpBackward {
  MlpParams param_grads;
  Matrix input_grad;
};

inline MlpBackward mlp_backward(const MlpParams& params, const MlpSpec& spec, const MlpCache& cache,
                                const Matrix& upstream_grad) {
  check_params(params, spec);
  const std::size_t n_layers = spec.num_layers();
  if (cache.pre_activations.size() != n_layers || cache.inputs.size() != n_layers) {
    throw ShapeError("mlp_backward: cache does not match spec");
  }
  const Matrix& out = cache.pre_activations.back();
  if (upstream_grad.rows() != out.rows() || upstream_grad.cols() != out.cols()) {
    throw ShapeError("mlp_backward: upstream grad " + upstream_grad.shape_str() + " vs output " +
                     out.shape_str());
  }
  MlpBackward bwd;
  bwd.param_grads.layers.resize(n_layers);
  Matrix g = upstream_grad;
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) {
      const auto pre = cache.pre_activations[l].values();
      auto gv = g.values();
      for (std::size_t i = 0; i < gv.size(); ++i) {
        if (!(pre[i] > 0.0)) gv[i] *= spec.slope;
      }
    }
    auto& grad_layer = bwd.param_grads.layers[l];
    grad_layer.weight = matmul_tn(cache.inputs[l], g);
    grad_layer.bias.assign(g.cols(), 0.0);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto row = g.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) grad_layer.bias[c] += row[c];
    }
    g = matmul_nt(g, params.layers[l].weight);
  }
  bwd.input_grad = std::move(g);
  return bwd;
}

}  // namespace pgvae
