#pragma once

// Training-set construction: property normalization, imbalanced two-range
// subsets, GMM trainsets, sequence tagging for semi-synthetic datasets,
// one-hot encoding and CSV ingestion.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pgvae/design.hpp"
#include "pgvae/error.hpp"
#include "pgvae/matrix.hpp"
#include "pgvae/oracles.hpp"
#include "pgvae/rng.hpp"
#include "pgvae/stats.hpp"

namespace pgvae {

struct Dataset {
  std::string name;
  Designs designs;
  std::vector<double> y;
  /// Symbol alphabet, used only for sequence designs.
  std::string alphabet = kProteinAlphabet;

  std::size_t size() const { return y.size(); }
  bool sequences() const { return is_sequence(designs); }

  void validate() const {
    if (design_count(designs) != y.size()) throw InvalidArgument("Dataset: designs and properties differ in length");
    if (const auto* s = std::get_if<std::vector<Sequence>>(&designs)) {
      for (const auto& seq : *s) {
        if (seq.size() != s->front().size()) throw InvalidArgument("Dataset: sequence lengths differ");
      }
    }
  }
};

inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx) {
  Dataset out{d.name, select_designs(d.designs, idx), {}, d.alphabet};
  out.y.reserve(idx.size());
  for (std::size_t i : idx) out.y.push_back(d.y[i]);
  return out;
}

/// Affine map sending min -> 0 and max -> 1.
inline std::vector<double> normalize_properties(std::span<const double> y) {
  if (y.empty()) throw InvalidArgument("normalize_properties: empty input");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (!(*hi > *lo)) throw InvalidArgument("normalize_properties: properties are constant");
  const double a = *lo, span = *hi - *lo;
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - a) / span;
  return out;
}

/// round(x) with halves rounded up.
inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

/// Second-mode sampling interval (start, end) in units of sigma2, shifted by mu2.
struct SamplingInterval {
  double start = 0.5;
  double end = 1.0;

  void validate() const {
    if (!(start >= 0.0 && start < end)) throw InvalidArgument("SamplingInterval: need 0 <= start < end");
  }
  friend bool operator==(const SamplingInterval&, const SamplingInterval&) = default;
};

/// n points from N(mu1, 0.6^2) and round(rho n) points from
/// Unif(mu2 + start sigma2, mu2 + end sigma2), scored by the oracle.
inline Dataset sample_gmm_trainset(const GmmOracle& o, std::size_t n, double rho, const SamplingInterval& si, Rng& rng) {
  o.validate();
  si.validate();
  if (n == 0) throw InvalidArgument("sample_gmm_trainset: n must be >= 1");
  if (!(rho > 0.0)) throw InvalidArgument("sample_gmm_trainset: rho must be > 0");
  const std::size_t n_high = round_half_up(rho * static_cast<double>(n));
  if (n_high == 0) throw InvalidArgument("sample_gmm_trainset: rho * n rounds to 0 second-mode points");
  Matrix x(n + n_high, 1);
  for (std::size_t i = 0; i < n; ++i) x(i, 0) = rng.normal(o.mu1, 0.6);
  const double lo = o.mu2 + si.start * o.sigma2;
  const double hi = o.mu2 + si.end * o.sigma2;
  for (std::size_t i = 0; i < n_high; ++i) {
    double v = rng.uniform(lo, hi);
    while (v <= lo) v = rng.uniform(lo, hi);
    x(n + i, 0) = v;
  }
  Dataset d{"gmm", Matrix(), {}, ""};
  d.y.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) d.y[i] = gmm_eval(o, x(i, 0));
  d.designs = std::move(x);
  return d;
}

struct RangeSpec {
  enum class Kind { Percentile, Absolute };
  Kind kind = Kind::Percentile;
  double lo = 0.0;
  double hi = 100.0;

  void validate() const {
    if (!(lo < hi)) throw InvalidArgument("RangeSpec: need lo < hi");
    if (kind == Kind::Percentile && !(lo >= 0.0 && hi <= 100.0)) {
      throw InvalidArgument("RangeSpec: percentile bounds must lie in [0, 100]");
    }
  }
  friend bool operator==(const RangeSpec&, const RangeSpec&) = default;
};

/// Property interval selected by a range: values v with lo < v <= hi, except
/// that a percentile range starting at 0 also admits the minimum itself.
struct ResolvedRange {
  double lo;
  double hi;
  bool lo_inclusive;

  bool contains(double v) const { return (lo_inclusive ? v >= lo : v > lo) && v <= hi; }
};

inline ResolvedRange resolve_range(const RangeSpec& r, std::span<const double> y) {
  r.validate();
  if (r.kind == RangeSpec::Kind::Absolute) return {r.lo, r.hi, false};
  return {percentile(y, r.lo), percentile(y, r.hi), r.lo == 0.0};
}

struct ImbalanceSpec {
  RangeSpec low;
  RangeSpec high;
  double rho = 0.2;
  std::size_t n_low = 100;

  friend bool operator==(const ImbalanceSpec&, const ImbalanceSpec&) = default;
};

/// n_low rows from the low range plus round(rho n_low) rows from the high
/// range, each drawn uniformly without replacement. Low rows come first.
inline Dataset build_imbalanced_subset(const Dataset& d, const ImbalanceSpec& spec, Rng& rng) {
  d.validate();
  if (!(spec.rho > 0.0)) throw InvalidArgument("build_imbalanced_subset: rho must be > 0");
  const auto low = resolve_range(spec.low, d.y);
  const auto high = resolve_range(spec.high, d.y);
  std::vector<std::size_t> low_pool, high_pool;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (low.contains(d.y[i])) low_pool.push_back(i);
    if (high.contains(d.y[i])) high_pool.push_back(i);
  }
  const std::size_t n_high = round_half_up(spec.rho * static_cast<double>(spec.n_low));
  auto draw = [&](std::vector<std::size_t>& pool, std::size_t k, const char* which) {
    if (pool.empty()) throw InvalidArgument(std::string("build_imbalanced_subset: ") + which + " range pool is empty");
    if (k > pool.size()) {
      throw InvalidArgument(std::string("build_imbalanced_subset: ") + which + " range pool has " +
                            std::to_string(pool.size()) + " rows, need " + std::to_string(k));
    }
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
  };
  if (spec.n_low == 0) throw InvalidArgument("build_imbalanced_subset: n_low must be >= 1");
  draw(low_pool, spec.n_low, "low");
  draw(high_pool, std::max<std::size_t>(n_high, 1), "high");
  std::vector<std::size_t> idx = low_pool;
  idx.insert(idx.end(), high_pool.begin(), high_pool.end());
  return subset(d, idx);
}

struct Threshold {
  enum class Kind { Absolute, Percentile };
  Kind kind = Kind::Absolute;
  double value = 0.001;

  friend bool operator==(const Threshold&, const Threshold&) = default;
};

struct TagSpec {
  std::size_t length = 6;
  Sequence h_tag;

  void validate(std::size_t alphabet) const {
    if (h_tag.size() != length) throw InvalidArgument("TagSpec: h_tag length differs from tag length");
    for (auto s : h_tag) {
      if (s >= alphabet) throw InvalidArgument("TagSpec: h_tag symbol outside alphabet");
    }
  }
};

/// Random tag of the given length, uniform over the alphabet.
inline Sequence random_tag(std::size_t length, std::size_t alphabet, Rng& rng) {
  Sequence t(length);
  for (auto& s : t) s = static_cast<std::uint8_t>(rng.uniform_index(alphabet));
  return t;
}

/// Rows with property above the threshold (the H set) get `h_tag` appended;
/// the rest (the L set) get an independent uniform random tag each.
inline Dataset semi_synthetic_transform(const Dataset& d, const Threshold& threshold, const TagSpec& tags, Rng& rng) {
  d.validate();
  const auto* seqs = std::get_if<std::vector<Sequence>>(&d.designs);
  if (!seqs) throw InvalidArgument("semi_synthetic_transform: dataset must hold sequences");
  const std::size_t alphabet = d.alphabet.size();
  tags.validate(alphabet);
  const double cut = threshold.kind == Threshold::Kind::Absolute ? threshold.value : percentile(d.y, threshold.value);
  std::size_t n_high = 0;
  for (double v : d.y) n_high += v > cut ? 1 : 0;
  if (n_high == 0) throw InvalidArgument("semi_synthetic_transform: H set is empty");
  if (n_high == d.size()) throw InvalidArgument("semi_synthetic_transform: L set is empty");
  std::vector<Sequence> out;
  out.reserve(seqs->size());
  for (std::size_t i = 0; i < seqs->size(); ++i) {
    Sequence s = (*seqs)[i];
    const Sequence tag = d.y[i] > cut ? tags.h_tag : random_tag(tags.length, alphabet, rng);
    s.insert(s.end(), tag.begin(), tag.end());
    out.push_back(std::move(s));
  }
  return Dataset{d.name, std::move(out), d.y, d.alphabet};
}

/// Flattened one-hot rows: position p, symbol a -> column p * alphabet + a.
inline Matrix one_hot_encode(std::span<const Sequence> seqs, std::size_t alphabet) {
  if (seqs.empty()) return Matrix();
  const std::size_t len = seqs.front().size();
  Matrix m(seqs.size(), len * alphabet);
  for (std::size_t r = 0; r < seqs.size(); ++r) {
    if (seqs[r].size() != len) throw InvalidArgument("one_hot_encode: sequence lengths differ");
    for (std::size_t p = 0; p < len; ++p) {
      if (seqs[r][p] >= alphabet) {
        throw InvalidArgument("one_hot_encode: symbol " + std::to_string(seqs[r][p]) + " at row " + std::to_string(r) +
                              " outside alphabet of size " + std::to_string(alphabet));
      }
      m(r, p * alphabet + seqs[r][p]) = 1.0;
    }
  }
  return m;
}

/// Argmax per position block.
inline std::vector<Sequence> one_hot_decode(const Matrix& m, std::size_t alphabet) {
  if (alphabet == 0 || m.cols() % alphabet != 0) throw ShapeError("one_hot_decode: width not a multiple of alphabet");
  const std::size_t len = m.cols() / alphabet;
  std::vector<Sequence> out(m.rows(), Sequence(len));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t p = 0; p < len; ++p) {
      const auto block = row.subspan(p * alphabet, alphabet);
      out[r][p] = static_cast<std::uint8_t>(std::max_element(block.begin(), block.end()) - block.begin());
    }
  }
  return out;
}

/// Model input matrix: continuous designs as-is, sequences one-hot.
inline Matrix model_input(const Designs& designs, std::size_t alphabet) {
  if (const auto* m = std::get_if<Matrix>(&designs)) return *m;
  return one_hot_encode(std::get<std::vector<Sequence>>(designs), alphabet);
}

enum class CsvSchema { Sequence, Continuous };

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool parse_real(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(t, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == t.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads `sequence,property` or `x0,...,x{d-1},property` rows after a
/// mandatory header line.
inline Dataset load_dataset_csv(const std::string& path, CsvSchema schema,
                                const std::string& alphabet = kProteinAlphabet) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open dataset file " + path);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw InvalidArgument(path + ": missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || detail::trim(header.back()) != "property") {
    throw InvalidArgument(path + ":" + std::to_string(line_no) + ": header must end with 'property'");
  }
  if (schema == CsvSchema::Sequence && (header.size() != 2 || detail::trim(header[0]) != "sequence")) {
    throw InvalidArgument(path + ":" + std::to_string(line_no) + ": sequence header must be 'sequence,property'");
  }
  const std::size_t width = header.size() - 1;

  Dataset d;
  d.name = path;
  d.alphabet = alphabet;
  std::vector<Sequence> seqs;
  std::vector<double> values;
  while (next_line()) {
    const auto cells = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != header.size()) {
      throw InvalidArgument(where + "expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    }
    double prop = 0.0;
    if (!detail::parse_real(cells.back(), prop)) throw InvalidArgument(where + "property is not a number");
    if (schema == CsvSchema::Sequence) {
      const std::string text = detail::trim(cells[0]);
      Sequence s;
      try {
        s = sequence_from_string(text, alphabet);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument(where + e.what());
      }
      if (!seqs.empty() && s.size() != seqs.front().size()) {
        throw InvalidArgument(where + "sequence length " + std::to_string(s.size()) + " differs from " +
                              std::to_string(seqs.front().size()));
      }
      seqs.push_back(std::move(s));
    } else {
      for (std::size_t c = 0; c < width; ++c) {
        double v = 0.0;
        if (!detail::parse_real(cells[c], v)) throw InvalidArgument(where + "column " + std::to_string(c) + " is not a number");
        values.push_back(v);
      }
    }
    d.y.push_back(prop);
  }
  if (schema == CsvSchema::Sequence) {
    d.designs = std::move(seqs);
  } else {
    d.designs = Matrix(d.y.size(), width, std::move(values));
  }
  return d;
}

/// Lookup oracle over every row of a dataset with properties in [0, 1].
inline LookupOracle make_lookup_oracle(const Dataset& d) {
  d.validate();
  LookupOracle o(d.alphabet);
  if (const auto* seqs = std::get_if<std::vector<Sequence>>(&d.designs)) {
    for (std::size_t i = 0; i < seqs->size(); ++i) o.insert(o.key((*seqs)[i]), d.y[i]);
  } else {
    const auto& m = std::get<Matrix>(d.designs);
    for (std::size_t i = 0; i < m.rows(); ++i) o.insert(LookupOracle::key(m.row(i)), d.y[i]);
  }
  return o;
}

/// Every sequence of the given length over an alphabet of size A (A^length
/// rows) with a planted, site-additive property
///   raw(s) = (mean_p u[p][s_p])^sharpness,  u[p][a] ~ Unif(0, 1),
/// normalized to [0, 1]. The optimum is the per-site argmax sequence.
inline Dataset make_planted_sequence_dataset(std::size_t length, std::size_t alphabet, double sharpness, Rng& rng) {
  if (length == 0 || alphabet < 2) throw InvalidArgument("planted dataset: need length >= 1 and alphabet >= 2");
  if (alphabet > std::string(kProteinAlphabet).size()) throw InvalidArgument("planted dataset: alphabet too large");
  double total = 1.0;
  for (std::size_t p = 0; p < length; ++p) total *= static_cast<double>(alphabet);
  if (total > 2e6) throw InvalidArgument("planted dataset: too many sequences to enumerate");
  std::vector<std::vector<double>> site(length, std::vector<double>(alphabet));
  for (auto& row : site) {
    for (double& v : row) v = rng.uniform();
  }
  const auto n = static_cast<std::size_t>(total);
  std::vector<Sequence> seqs(n, Sequence(length));
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t code = i;
    double s = 0.0;
    for (std::size_t p = length; p-- > 0;) {
      seqs[i][p] = static_cast<std::uint8_t>(code % alphabet);
      code /= alphabet;
    }
    for (std::size_t p = 0; p < length; ++p) s += site[p][seqs[i][p]];
    raw[i] = std::pow(s / static_cast<double>(length), sharpness);
  }
  return Dataset{"planted", std::move(seqs), normalize_properties(raw), std::string(kProteinAlphabet).substr(0, alphabet)};
}

}  // namespace pgvae
