#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgt/graph.hpp"
#include "kgt/transe.hpp"

namespace kgt {

enum class EvalSetting { raw, filtered };

inline const char* eval_setting_name(EvalSetting s) {
  return s == EvalSetting::raw ? "raw" : "filtered";
}

inline EvalSetting eval_setting_from_name(std::string_view name) {
  if (name == "raw") return EvalSetting::raw;
  if (name == "filtered") return EvalSetting::filtered;
  throw std::invalid_argument("unknown eval setting: " + std::string(name));
}

// Per-direction ranks for one test triple. `*_rank` is the mean-tie rank
// 1 + |better| + |ties|/2; best/worst are the optimistic and pessimistic
// ranks under the same energies.
struct TripleRanks {
  double tail_rank = 0.0;
  double head_rank = 0.0;
  std::int32_t tail_best = 0, tail_worst = 0;
  std::int32_t head_best = 0, head_worst = 0;
};

struct RankingReport {
  EvalSetting setting = EvalSetting::raw;
  double mean_rank = 0.0;
  double mrr = 0.0;
  double hits1 = 0.0, hits3 = 0.0, hits10 = 0.0;
  std::vector<TripleRanks> per_triple;
};

namespace detail {

struct DirectionRank {
  double mean = 0.0;
  std::int32_t best = 0, worst = 0;
};

// Rank of the true entity by ascending energy among all candidate entities.
// Under `filtered`, candidates forming a known triple other than the test
// one are excluded. Ties split as mean ranks so constant energies land every
// candidate at (n_e + 1) / 2.
inline DirectionRank rank_entity(const EmbeddingTable& table, const KnowledgeGraph& g,
                                 const Triple& t, bool replace_tail, EvalSetting setting,
                                 Norm norm) {
  const std::int32_t n_e = g.entity_count();
  const std::int32_t rel_row = n_e + t.relation;
  const EntityId truth = replace_tail ? t.object : t.subject;
  const double e_true =
      transe_energy(table.row(t.subject), table.row(rel_row), table.row(t.object), norm);
  std::int64_t better = 0, ties = 0;
  for (EntityId c = 0; c < n_e; ++c) {
    if (c == truth) continue;
    Triple candidate = t;
    (replace_tail ? candidate.object : candidate.subject) = c;
    if (setting == EvalSetting::filtered && g.contains_triple(candidate)) continue;
    const double e = transe_energy(table.row(candidate.subject), table.row(rel_row),
                                   table.row(candidate.object), norm);
    if (e < e_true) {
      ++better;
    } else if (e == e_true) {
      ++ties;
    }
  }
  DirectionRank rank;
  rank.mean = 1.0 + static_cast<double>(better) + static_cast<double>(ties) * 0.5;
  rank.best = static_cast<std::int32_t>(better + 1);
  rank.worst = static_cast<std::int32_t>(better + ties + 1);
  return rank;
}

}  // namespace detail

// Link prediction over both directions (head and tail replacement), ranked by
// ascending translation energy. MR/MRR/Hits pool the 2 * |test| mean-tie
// ranks.
inline RankingReport link_prediction(const EmbeddingTable& table, const KnowledgeGraph& g,
                                     const std::vector<Triple>& test, EvalSetting setting,
                                     Norm norm = Norm::l1) {
  if (test.empty()) throw std::invalid_argument("link_prediction: empty test set");
  if (table.rows() != g.vocab_size())
    throw std::invalid_argument("link_prediction: table rows != graph vocabulary (" +
                                std::to_string(table.rows()) + " vs " +
                                std::to_string(g.vocab_size()) + ")");
  RankingReport report;
  report.setting = setting;
  report.per_triple.reserve(test.size());
  double sum_rank = 0.0, sum_rr = 0.0;
  std::int64_t hits1 = 0, hits3 = 0, hits10 = 0;
  for (const Triple& t : test) {
    g.check_triple_range(t);
    const detail::DirectionRank tail = detail::rank_entity(table, g, t, true, setting, norm);
    const detail::DirectionRank head = detail::rank_entity(table, g, t, false, setting, norm);
    TripleRanks ranks;
    ranks.tail_rank = tail.mean;
    ranks.head_rank = head.mean;
    ranks.tail_best = tail.best;
    ranks.tail_worst = tail.worst;
    ranks.head_best = head.best;
    ranks.head_worst = head.worst;
    report.per_triple.push_back(ranks);
    for (const double r : {tail.mean, head.mean}) {
      sum_rank += r;
      sum_rr += 1.0 / r;
      if (r <= 1.0) ++hits1;
      if (r <= 3.0) ++hits3;
      if (r <= 10.0) ++hits10;
    }
  }
  const double denom = 2.0 * static_cast<double>(test.size());
  report.mean_rank = sum_rank / denom;
  report.mrr = sum_rr / denom;
  report.hits1 = static_cast<double>(hits1) / denom;
  report.hits3 = static_cast<double>(hits3) / denom;
  report.hits10 = static_cast<double>(hits10) / denom;
  return report;
}

}  // namespace kgt
