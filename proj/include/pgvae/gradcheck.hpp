#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pgvae/error.hpp"
#include "pgvae/mlp.hpp"

namespace pgvae {

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares an analytic gradient against central differences.
///
/// `loss_fn(params, grad)` returns the scalar loss at `params`; when `grad`
/// is non-null it also writes the analytic gradient there (same length as
/// `params`). Relative error per coordinate is
/// |analytic - fd| / max(|analytic|, |fd|, 1e-8).
template <typename LossFn>
GradcheckResult finite_diff_gradcheck(LossFn&& loss_fn, std::vector<double> params, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("finite_diff_gradcheck: eps must be > 0");
  std::vector<double> analytic(params.size(), 0.0);
  const double base = loss_fn(std::span<const double>(params), &analytic);
  if (!std::isfinite(base)) throw NumericError("finite_diff_gradcheck: non-finite loss");
  GradcheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + eps;
    const double plus = loss_fn(std::span<const double>(params), nullptr);
    params[i] = orig - eps;
    const double minus = loss_fn(std::span<const double>(params), nullptr);
    params[i] = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("finite_diff_gradcheck: non-finite loss at coordinate " + std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = i;
      result.worst_analytic = analytic[i];
      result.worst_numeric = numeric;
    }
  }
  return result;
}

inline std::vector<double> flatten(std::span<const ConstParamBlock> blocks) {
  std::vector<double> flat;
  for (const auto& b : blocks) flat.insert(flat.end(), b.values.begin(), b.values.end());
  return flat;
}

inline void unflatten(std::span<const double> flat, std::span<const ParamBlock> blocks) {
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    if (offset + b.values.size() > flat.size()) throw ShapeError("unflatten: flat vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), b.values.size(), b.values.begin());
    offset += b.values.size();
  }
  if (offset != flat.size()) throw ShapeError("unflatten: flat vector too long");
}

}  // namespace pgvae
