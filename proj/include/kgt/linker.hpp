#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgt/graph.hpp"

namespace kgt {

inline bool is_term_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

// Dictionary-side and candidate-side normalization: ASCII lowercasing plus
// whitespace runs collapsed to single spaces, trimmed at both ends. Non-ASCII
// bytes pass through untouched.
inline std::string normalize_term(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (const char c : raw) {
    if (is_term_space(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(ascii_lower(c));
  }
  return out;
}

// Normalized surface form -> entity id. On duplicate normalized terms the
// first mapping wins and the collision is counted.
class TermDictionary {
 public:
  static TermDictionary build(const std::vector<std::pair<std::string, EntityId>>& entries) {
    TermDictionary dict;
    for (const auto& [raw, id] : entries) {
      if (id < 0) throw std::invalid_argument("TermDictionary: negative entity id");
      std::string key = normalize_term(raw);
      if (key.empty())
        throw std::invalid_argument("TermDictionary: term normalizes to empty: '" + raw + "'");
      const auto [it, inserted] = dict.terms_.emplace(std::move(key), id);
      if (!inserted) {
        ++dict.collisions_;
        continue;
      }
      dict.max_chars_ = std::max(dict.max_chars_, it->first.size());
    }
    return dict;
  }

  const EntityId* lookup(const std::string& normalized) const {
    const auto it = terms_.find(normalized);
    return it == terms_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  std::size_t max_term_chars() const { return max_chars_; }
  std::size_t collisions() const { return collisions_; }

 private:
  std::unordered_map<std::string, EntityId> terms_;
  std::size_t max_chars_ = 0;
  std::size_t collisions_ = 0;
};

// [start, end) byte offsets into the original text.
struct LinkedSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityId entity = 0;
  std::string surface;
};

// Forward maximum matching: scan left to right, at each position take the
// longest dictionary match starting there (candidates are normalized
// incrementally, bounded by the longest dictionary key, and never cross a
// newline). A match whose raw surface is at least min_len bytes is emitted
// and jumped over; anything shorter advances the cursor by one byte.
inline std::vector<LinkedSpan> fmm_link(std::string_view text, const TermDictionary& dict,
                                        std::size_t min_len = 5) {
  std::vector<LinkedSpan> spans;
  if (dict.empty() || text.empty()) return spans;
  const std::size_t n = text.size();
  std::string norm;
  norm.reserve(dict.max_term_chars() + 1);
  std::size_t i = 0;
  while (i < n) {
    if (is_term_space(text[i])) {
      ++i;
      continue;
    }
    norm.clear();
    std::size_t best_end = 0;
    const EntityId* best = nullptr;
    bool pending_space = false;
    for (std::size_t j = i; j < n;) {
      const char c = text[j];
      if (c == '\n') break;
      if (is_term_space(c)) {
        pending_space = true;
        ++j;
        continue;
      }
      const std::size_t needed = norm.size() + (pending_space ? 2 : 1);
      if (needed > dict.max_term_chars()) break;
      if (pending_space) {
        norm.push_back(' ');
        pending_space = false;
      }
      norm.push_back(ascii_lower(c));
      ++j;
      if (const EntityId* hit = dict.lookup(norm)) {
        best = hit;
        best_end = j;
      }
    }
    if (best != nullptr && best_end - i >= min_len) {
      spans.push_back(LinkedSpan{i, best_end, *best,
                                 std::string(text.substr(i, best_end - i))});
      i = best_end;
    } else {
      ++i;
    }
  }
  return spans;
}

}  // namespace kgt
