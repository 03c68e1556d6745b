#pragma once

// Property oracles: a bimodal Gaussian-bump scorer, an exact-match lookup
// table (property of designs present in a dataset, zero otherwise), and a
// negative-log weighted-MSE scorer against a reference field.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "pgvae/design.hpp"
#include "pgvae/error.hpp"
#include "pgvae/matrix.hpp"

namespace pgvae {

/// y(x) = w1 exp(-(x - mu1)^2 / (2 sigma1^2)) + w2 exp(-(x - mu2)^2 / (2 sigma2^2)).
/// Unnormalized bumps, so the global optimum is close to max(w1, w2) when
/// the modes are well separated.
struct GmmOracle {
  double mu1 = 0.0;
  double sigma1 = 0.25;
  double w1 = 1.0;
  double mu2 = 15.0;
  double sigma2 = 1.0;
  double w2 = 2.5;

  void validate() const {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw InvalidArgument("GmmOracle: sigmas must be > 0");
    if (!(w1 > 0.0) || !(w2 > 0.0)) throw InvalidArgument("GmmOracle: weights must be > 0");
  }
  friend bool operator==(const GmmOracle&, const GmmOracle&) = default;
};

inline double gmm_eval(const GmmOracle& o, double x) {
  const double a = (x - o.mu1) / o.sigma1;
  const double b = (x - o.mu2) / o.sigma2;
  return o.w1 * std::exp(-0.5 * a * a) + o.w2 * std::exp(-0.5 * b * b);
}

inline double gmm_derivative(const GmmOracle& o, double x) {
  const double a = (x - o.mu1) / o.sigma1;
  const double b = (x - o.mu2) / o.sigma2;
  return -o.w1 * a / o.sigma1 * std::exp(-0.5 * a * a) - o.w2 * b / o.sigma2 * std::exp(-0.5 * b * b);
}

struct Optimum {
  double x = 0.0;
  double y = 0.0;
};

/// Grid search over [min(mu) - 4 sigma, max(mu) + 4 sigma] at step
/// min(sigma1, sigma2) / 100, then 60 bisection steps on the sign of the
/// derivative around the best grid point.
inline Optimum gmm_global_optimum(const GmmOracle& o) {
  o.validate();
  const double lo = std::min(o.mu1 - 4.0 * o.sigma1, o.mu2 - 4.0 * o.sigma2);
  const double hi = std::max(o.mu1 + 4.0 * o.sigma1, o.mu2 + 4.0 * o.sigma2);
  const double step = std::min(o.sigma1, o.sigma2) / 100.0;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  Optimum best{lo, gmm_eval(o, lo)};
  for (std::size_t i = 1; i <= n; ++i) {
    const double x = std::min(hi, lo + static_cast<double>(i) * step);
    const double y = gmm_eval(o, x);
    if (y > best.y) best = {x, y};
  }
  double a = best.x - step;
  double b = best.x + step;
  if (gmm_derivative(o, a) > 0.0 && gmm_derivative(o, b) < 0.0) {
    for (int it = 0; it < 60; ++it) {
      const double m = 0.5 * (a + b);
      if (gmm_derivative(o, m) > 0.0) {
        a = m;
      } else {
        b = m;
      }
    }
    const double xm = 0.5 * (a + b);
    const double ym = gmm_eval(o, xm);
    if (ym >= best.y) best = {xm, ym};
  }
  return best;
}

/// Exact-match table from canonical design keys to properties in [0, 1].
///
/// Sequence keys are the symbol strings under `alphabet`; continuous designs
/// are keyed by their coordinates printed with 6 decimals.
class LookupOracle {
 public:
  LookupOracle() = default;
  explicit LookupOracle(std::string alphabet) : alphabet_(std::move(alphabet)) {}

  const std::string& alphabet() const { return alphabet_; }
  std::size_t size() const { return table_.size(); }

  static std::string key(std::span<const double> x) {
    std::string k;
    char buf[64];
    for (std::size_t i = 0; i < x.size(); ++i) {
      // 0.0 and -0.0 must share a key
      const double v = std::round(x[i] * 1e6) / 1e6;
      std::snprintf(buf, sizeof buf, "%s%.6f", i == 0 ? "" : ",", v == 0.0 ? 0.0 : v);
      k += buf;
    }
    return k;
  }

  std::string key(const Sequence& s) const { return sequence_to_string(s, alphabet_); }

  void insert(const std::string& key, double y) {
    if (!(y >= 0.0 && y <= 1.0)) throw InvalidArgument("LookupOracle: value for '" + key + "' outside [0, 1]");
    if (!table_.emplace(key, y).second) throw InvalidArgument("LookupOracle: duplicate key '" + key + "'");
  }

  double eval(const std::string& key) const {
    const auto it = table_.find(key);
    return it == table_.end() ? 0.0 : it->second;
  }

 private:
  std::string alphabet_ = kProteinAlphabet;
  std::unordered_map<std::string, double> table_;
};

inline double lookup_eval(const LookupOracle& o, const Sequence& s) {
  for (auto sym : s) {
    if (sym >= o.alphabet().size()) return 0.0;
  }
  return o.eval(o.key(s));
}

inline double lookup_eval(const LookupOracle& o, std::span<const double> x) { return o.eval(LookupOracle::key(x)); }

/// y(u) = -log(sum(w (u - target)^2) / sum(w) + floor).
struct ReferenceFieldOracle {
  Matrix target;
  Matrix weights;
  double floor = 1e-12;

  void validate() const {
    if (target.rows() != weights.rows() || target.cols() != weights.cols()) {
      throw ShapeError("ReferenceFieldOracle: weight grid " + weights.shape_str() + " vs target " + target.shape_str());
    }
    double s = 0.0;
    for (double w : weights.values()) {
      if (!(w >= 0.0)) throw InvalidArgument("ReferenceFieldOracle: weights must be >= 0");
      s += w;
    }
    if (!(s > 0.0)) throw InvalidArgument("ReferenceFieldOracle: weights sum to zero");
    if (!(floor > 0.0)) throw InvalidArgument("ReferenceFieldOracle: floor must be > 0");
  }
};

inline ReferenceFieldOracle make_reference_field(Matrix target, double floor = 1e-12) {
  Matrix w(target.rows(), target.cols(), 1.0);
  ReferenceFieldOracle o{std::move(target), std::move(w), floor};
  o.validate();
  return o;
}

inline double reference_field_eval(const ReferenceFieldOracle& o, std::span<const double> u) {
  if (u.size() != o.target.size()) {
    throw ShapeError("reference_field_eval: field has " + std::to_string(u.size()) + " values, reference grid is " +
                     o.target.shape_str());
  }
  double num = 0.0, den = 0.0;
  const auto t = o.target.values();
  const auto w = o.weights.values();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - t[i];
    num += w[i] * e * e;
    den += w[i];
  }
  return -std::log(num / den + o.floor);
}

inline double reference_field_eval(const ReferenceFieldOracle& o, const Matrix& u) {
  if (u.rows() != o.target.rows() || u.cols() != o.target.cols()) {
    throw ShapeError("reference_field_eval: field " + u.shape_str() + " vs reference " + o.target.shape_str());
  }
  return reference_field_eval(o, u.values());
}

using Oracle = std::variant<GmmOracle, LookupOracle, ReferenceFieldOracle>;

/// Scores every design in the batch.
inline std::vector<double> score(const Oracle& oracle, const Designs& designs) {
  std::vector<double> y(design_count(designs));
  if (const auto* m = std::get_if<Matrix>(&designs)) {
    for (std::size_t r = 0; r < m->rows(); ++r) {
      const auto x = m->row(r);
      if (const auto* g = std::get_if<GmmOracle>(&oracle)) {
        if (x.size() != 1) throw ShapeError("score: GMM oracle expects 1-D designs");
        y[r] = gmm_eval(*g, x[0]);
      } else if (const auto* l = std::get_if<LookupOracle>(&oracle)) {
        y[r] = lookup_eval(*l, x);
      } else {
        y[r] = reference_field_eval(std::get<ReferenceFieldOracle>(oracle), x);
      }
    }
    return y;
  }
  const auto* l = std::get_if<LookupOracle>(&oracle);
  if (!l) throw InvalidArgument("score: sequence designs need a lookup oracle");
  const auto& seqs = std::get<std::vector<Sequence>>(designs);
  for (std::size_t i = 0; i < seqs.size(); ++i) y[i] = lookup_eval(*l, seqs[i]);
  return y;
}

/// Reads a CSV grid of reals (rows x cols, no header).
inline Matrix load_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open grid file " + path);
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos) {
        throw InvalidArgument(path + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
      data.push_back(v);
      ++c;
    }
    if (rows == 0) {
      cols = c;
    } else if (c != cols) {
      throw InvalidArgument(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) + " columns");
    }
    ++rows;
  }
  if (rows == 0) throw InvalidArgument("grid file " + path + " is empty");
  return Matrix(rows, cols, std::move(data));
}

}  // namespace pgvae
