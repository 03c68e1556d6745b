#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pgvae/error.hpp"
#include "pgvae/matrix.hpp"

namespace pgvae {

/// Symbol indices into an alphabet.
using Sequence = std::vector<std::uint8_t>;

/// A homogeneous batch of designs: continuous rows or symbol sequences.
using Designs = std::variant<Matrix, std::vector<Sequence>>;

inline constexpr const char* kProteinAlphabet = "ACDEFGHIKLMNPQRSTVWY";

inline std::size_t design_count(const Designs& d) {
  return std::visit(
      [](const auto& v) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Matrix>) {
          return v.rows();
        } else {
          return v.size();
        }
      },
      d);
}

inline bool is_sequence(const Designs& d) { return std::holds_alternative<std::vector<Sequence>>(d); }

inline Designs select_designs(const Designs& d, const std::vector<std::size_t>& idx) {
  if (const auto* m = std::get_if<Matrix>(&d)) return gather_rows(*m, idx);
  const auto& seqs = std::get<std::vector<Sequence>>(d);
  std::vector<Sequence> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(seqs[i]);
  return out;
}

inline Designs concat_designs(const Designs& a, const Designs& b) {
  if (a.index() != b.index()) throw InvalidArgument("concat_designs: mixed design kinds");
  if (const auto* m = std::get_if<Matrix>(&a)) return vstack(*m, std::get<Matrix>(b));
  auto out = std::get<std::vector<Sequence>>(a);
  const auto& tail = std::get<std::vector<Sequence>>(b);
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

inline std::string sequence_to_string(const Sequence& s, const std::string& alphabet) {
  std::string out;
  out.reserve(s.size());
  for (auto sym : s) {
    if (sym >= alphabet.size()) throw InvalidArgument("sequence symbol " + std::to_string(sym) + " outside alphabet");
    out.push_back(alphabet[sym]);
  }
  return out;
}

inline Sequence sequence_from_string(const std::string& text, const std::string& alphabet) {
  Sequence s;
  s.reserve(text.size());
  for (char c : text) {
    const auto pos = alphabet.find(c);
    if (pos == std::string::npos) throw InvalidArgument(std::string("symbol '") + c + "' not in alphabet");
    s.push_back(static_cast<std::uint8_t>(pos));
  }
  return s;
}

}  // namespace pgvae
