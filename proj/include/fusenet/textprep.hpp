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

// Email text normalization and tokenization.
//
// normalize() rewrites text into a canonical lowercase form: dates, dollar
// amounts, email addresses and phone numbers are replaced by fixed phrases,
// and contractions are expanded from a versioned table (data/contractions.tsv;
// the same table is compiled in below). The rewrite is applied until it
// reaches a fixed point, so normalize(normalize(s)) == normalize(s).
//
// Recognized patterns:
//   dates    "Month D, YYYY" (full or three-letter month, optional comma and
//            ordinal suffix), "MM/DD/YYYY", "MM-DD-YYYY"
//   amounts  "$" followed by digits with optional thousands commas/decimals
//   emails   local@domain.tld
//   phones   10-digit North-American numbers, optional +1 prefix, with
//            "()", "-", "." or space separators

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fusenet/errors.hpp"

namespace fusenet {

inline constexpr std::string_view kDefaultContractionTable = R"TSV(# fusenet contraction table: pattern<TAB>replacement, matched case-insensitively on whole words
# version 1
i'd	i would
i'm	i am
i've	i have
i'll	i will
you're	you are
you've	you have
you'll	you will
you'd	you would
he's	he is
she's	she is
it's	it is
it'll	it will
we're	we are
we've	we have
we'll	we will
we'd	we would
they're	they are
they've	they have
they'll	they will
they'd	they would
that's	that is
that'll	that will
there's	there is
what's	what is
where's	where is
who's	who is
how's	how is
let's	let us
isn't	is not
aren't	are not
wasn't	was not
weren't	were not
hasn't	has not
haven't	have not
hadn't	had not
doesn't	does not
don't	do not
didn't	did not
won't	will not
wouldn't	would not
can't	cannot
couldn't	could not
shouldn't	should not
mustn't	must not
needn't	need not
)TSV";

struct ContractionTable {
  int version = 0;
  std::vector<std::pair<std::string, std::string>> entries;

  friend bool operator==(const ContractionTable&,
                         const ContractionTable&) = default;
};

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::string replace_all(std::string s, std::string_view from,
                               std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

inline bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
}

}  // namespace detail

/// Parses the tab-separated table format. Lines starting with '#' are
/// comments except "# version N", which sets the version.
inline ContractionTable parse_contraction_table(std::string_view text) {
  ContractionTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      int v = 0;
      if (std::sscanf(line.c_str(), "# version %d", &v) == 1) table.version = v;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError("expected pattern<TAB>replacement", lineno);
    }
    table.entries.emplace_back(detail::ascii_lower(line.substr(0, tab)),
                               line.substr(tab + 1));
  }
  if (table.version == 0) throw ParseError("missing '# version N' line", 0);
  return table;
}

inline ContractionTable load_contraction_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open contraction table " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_contraction_table(ss.str());
}

inline const ContractionTable& default_contraction_table() {
  static const ContractionTable table =
      parse_contraction_table(kDefaultContractionTable);
  return table;
}

/// Pattern set used both to redact and to verify redaction.
struct PiiPatterns {
  std::regex email{R"([a-z0-9._%+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)*\.[a-z]{2,})"};
  std::regex month_date{
      R"(\b(?:january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec)\.?\s+\d{1,2}(?:st|nd|rd|th)?,?\s+\d{4}\b)"};
  std::regex numeric_date{R"(\b\d{1,2}([/-])\d{1,2}\1\d{4}\b)"};
  std::regex amount{R"(\$\s?\d+(?:,\d{3})*(?:\.\d+)?)"};
  std::regex phone{
      R"((^|[^\d])(?:\+?1[\s.-]?)?(?:\(\d{3}\)\s?|\d{3}[\s.-]?)\d{3}[\s.-]?\d{4}(?!\d))"};
  // Replacements are padded with spaces; this closes the gap before punctuation.
  std::regex placeholder_gap{R"((this (?:email address|date|amount|phone number)) ([.,!?;:]))"};

  static const PiiPatterns& get() {
    static const PiiPatterns patterns;
    return patterns;
  }
};

class TextNormalizer {
 public:
  TextNormalizer() : TextNormalizer(default_contraction_table()) {}
  explicit TextNormalizer(const ContractionTable& table) {
    for (const auto& [from, to] : table.entries) contractions_.emplace(from, to);
  }

  std::string operator()(std::string_view raw) const {
    std::string s = detail::replace_all(std::string(raw), "\xE2\x80\x99", "'");
    s = detail::replace_all(std::move(s), "\xE2\x80\x98", "'");
    s = detail::collapse_whitespace(detail::ascii_lower(s));
    for (;;) {
      std::string next = pass(s);
      if (next == s) return s;
      s = std::move(next);
    }
  }

 private:
  std::string pass(const std::string& in) const {
    const auto& p = PiiPatterns::get();
    std::string s = std::regex_replace(in, p.email, " this email address ");
    s = std::regex_replace(s, p.month_date, " this date ");
    s = std::regex_replace(s, p.numeric_date, " this date ");
    s = std::regex_replace(s, p.amount, " this amount ");
    s = std::regex_replace(s, p.phone, "$1 this phone number ");
    s = expand_contractions(s);
    return std::regex_replace(detail::collapse_whitespace(s), p.placeholder_gap, "$1$2");
  }

  std::string expand_contractions(const std::string& s) const {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
      if (!detail::is_word_char(s[i])) {
        out.push_back(s[i++]);
        continue;
      }
      std::size_t j = i;
      while (j < s.size() && detail::is_word_char(s[j])) ++j;
      // Quotes wrapping a word are not part of it.
      std::size_t b = i, e = j;
      while (b < e && s[b] == '\'') ++b;
      while (e > b && s[e - 1] == '\'') --e;
      out.append(s, i, b - i);
      const auto it = contractions_.find(s.substr(b, e - b));
      if (it != contractions_.end()) {
        out += it->second;
      } else {
        out.append(s, b, e - b);
      }
      out.append(s, e, j - e);
      i = j;
    }
    return out;
  }

  std::unordered_map<std::string, std::string> contractions_;
};

inline std::string normalize(std::string_view raw) {
  static const TextNormalizer normalizer;
  return normalizer(raw);
}

/// True when any email-address or phone-number pattern matches.
inline bool contains_pii(const std::string& s) {
  const auto& p = PiiPatterns::get();
  return std::regex_search(s, p.email) || std::regex_search(s, p.phone);
}

struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t original_len = 0;
  /// Tokens were replaced by digests and cannot be embedded.
  bool hashed = false;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct TokenizeOptions {
  std::size_t max_seq_len = 100;
  bool hash_tokens = false;
};

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
inline std::string token_digest(std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline constexpr std::string_view kEdgePunctuation = ".,!?;:\"'()[]{}<>`";

inline TokenSequence tokenize(std::string_view normalized,
                              const TokenizeOptions& opts = {}) {
  if (opts.max_seq_len < 1) throw ArgumentError("tokenize: max_seq_len must be >= 1");
  TokenSequence seq;
  seq.hashed = opts.hash_tokens;
  std::size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() && detail::is_space(normalized[i])) ++i;
    std::size_t j = i;
    while (j < normalized.size() && !detail::is_space(normalized[j])) ++j;
    std::string_view word = normalized.substr(i, j - i);
    const auto b = word.find_first_not_of(kEdgePunctuation);
    if (b != std::string_view::npos) {
      const auto e = word.find_last_not_of(kEdgePunctuation);
      word = word.substr(b, e - b + 1);
      ++seq.original_len;
      if (seq.tokens.size() < opts.max_seq_len) {
        seq.tokens.emplace_back(opts.hash_tokens ? token_digest(word)
                                                 : std::string(word));
      }
    }
    i = j;
  }
  return seq;
}

inline TokenSequence tokenize(std::string_view normalized, std::size_t max_seq_len) {
  return tokenize(normalized, TokenizeOptions{max_seq_len, false});
}

}  // namespace fusenet
