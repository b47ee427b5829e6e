// Copyright 2026 The FuseNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pre-trained word vectors in the FastText ".vec" text format and lookup of
// token sequences into fixed-length, masked embedding matrices.
//
// Format: a header line "V d", then lines "word v1 ... vd". The reader
// tolerates the trailing space FastText itself writes; the writer emits
// single spaces and no trailing whitespace.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fusenet/errors.hpp"
#include "fusenet/numcore.hpp"
#include "fusenet/textprep.hpp"

namespace fusenet {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> words, Tensor2D matrix)
      : words_(std::move(words)), matrix_(std::move(matrix)) {
    if (words_.size() != matrix_.rows()) {
      throw ShapeError("EmbeddingTable: " + std::to_string(words_.size()) +
                       " words for matrix " + matrix_.shape());
    }
    if (matrix_.cols() < 1) throw ShapeError("EmbeddingTable: dim must be >= 1");
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], i).second) {
        throw ArgumentError("EmbeddingTable: duplicate word '" + words_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return words_.size(); }
  std::size_t dim() const noexcept { return matrix_.cols(); }
  bool empty() const noexcept { return words_.empty(); }

  const Tensor2D& matrix() const noexcept { return matrix_; }
  const std::vector<std::string>& words() const noexcept { return words_; }

  std::optional<std::size_t> index_of(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Row for `word`, or nullopt when out of vocabulary.
  std::optional<std::span<const double>> lookup(std::string_view word) const {
    const auto idx = index_of(word);
    if (!idx) return std::nullopt;
    return matrix_.row(*idx);
  }

 private:
  std::vector<std::string> words_;
  Tensor2D matrix_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) parts.push_back(line.substr(i, j - i));
    i = j;
  }
  return parts;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Reads at most `vocab_limit` word lines. Duplicate words keep their first
/// row. When `expected_dim` is set, a different declared dimension is an
/// error.
inline EmbeddingTable load_vec_file(const std::string& path,
                                    std::size_t vocab_limit = SIZE_MAX,
                                    std::optional<std::size_t> expected_dim = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embeddings file " + path);

  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("empty embeddings file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_spaces(line);
  std::size_t declared_v = 0, dim = 0;
  if (header.size() != 2 || !detail::parse_number(header[0], declared_v) ||
      !detail::parse_number(header[1], dim) || dim == 0) {
    throw ParseError("malformed header, expected \"V d\"", lineno);
  }
  if (expected_dim && *expected_dim != dim) {
    throw ShapeError("embeddings file declares d=" + std::to_string(dim) +
                     ", expected d=" + std::to_string(*expected_dim));
  }

  const std::size_t to_read = std::min(declared_v, vocab_limit);
  std::vector<std::string> words;
  std::vector<double> values;
  std::unordered_map<std::string, bool> seen;
  words.reserve(to_read);
  values.reserve(to_read * dim);

  for (std::size_t n = 0; n < to_read; ++n) {
    ++lineno;
    if (!std::getline(in, line)) {
      throw ParseError("file ends after " + std::to_string(n) + " of " +
                           std::to_string(declared_v) + " declared words",
                       lineno);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto parts = detail::split_spaces(line);
    if (parts.size() != dim + 1) {
      throw ParseError("expected word and " + std::to_string(dim) +
                           " components, got " +
                           std::to_string(parts.empty() ? 0 : parts.size() - 1),
                       lineno);
    }
    std::string word(parts[0]);
    if (!seen.emplace(word, true).second) continue;
    for (std::size_t k = 1; k <= dim; ++k) {
      double v = 0.0;
      if (!detail::parse_number(parts[k], v) || !std::isfinite(v)) {
        throw ParseError("bad component '" + std::string(parts[k]) + "'", lineno);
      }
      values.push_back(v);
    }
    words.push_back(std::move(word));
  }
  const std::size_t rows = words.size();
  return EmbeddingTable(std::move(words), Tensor2D(rows, dim, std::move(values)));
}

/// Writes shortest round-trip decimal representations, so reading the file
/// back reproduces every value exactly.
inline void write_vec_file(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embeddings file " + path);
  out << table.size() << ' ' << table.dim() << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.words()[i];
    for (double v : table.matrix().row(i)) out << ' ' << detail::format_double(v);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path);
}

/// T x d matrix with a mask; masked-out rows are padding and are all zero.
struct EmbeddedSequence {
  Tensor2D vectors;
  std::vector<std::uint8_t> mask;
  std::size_t oov_count = 0;

  std::size_t length() const noexcept { return vectors.rows(); }
  std::size_t real_count() const noexcept {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  }
};

/// Out-of-vocabulary tokens become zero rows that stay unmasked.
inline EmbeddedSequence embed_sequence(const EmbeddingTable& table,
                                       const TokenSequence& seq,
                                       std::size_t max_seq_len) {
  if (table.empty()) throw ArgumentError("embed_sequence: empty embedding table");
  if (seq.hashed) {
    throw ArgumentError("embed_sequence: hashed tokens cannot be embedded");
  }
  EmbeddedSequence out{Tensor2D(max_seq_len, table.dim()),
                       std::vector<std::uint8_t>(max_seq_len, 0), 0};
  const std::size_t n = std::min(seq.tokens.size(), max_seq_len);
  for (std::size_t t = 0; t < n; ++t) {
    out.mask[t] = 1;
    if (const auto row = table.lookup(seq.tokens[t])) {
      std::copy(row->begin(), row->end(), out.vectors.row(t).begin());
    } else {
      ++out.oov_count;
    }
  }
  return out;
}

}  // namespace fusenet
