#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgt/graph.hpp"
#include "kgt/rng.hpp"

namespace kgt {

enum class Norm { l1, l2 };

inline const char* norm_name(Norm n) { return n == Norm::l1 ? "l1" : "l2"; }

inline Norm norm_from_name(std::string_view name) {
  if (name == "l1") return Norm::l1;
  if (name == "l2") return Norm::l2;
  throw std::invalid_argument("unknown norm: " + std::string(name));
}

// ||s + r - o|| under the chosen norm. The component loop keeps the summation
// order fixed so equal-energy ties are bit-reproducible across callers.
inline double transe_energy(const Eigen::Ref<const Eigen::RowVectorXd>& s,
                            const Eigen::Ref<const Eigen::RowVectorXd>& r,
                            const Eigen::Ref<const Eigen::RowVectorXd>& o, Norm norm) {
  if (s.size() != r.size() || s.size() != o.size())
    throw std::invalid_argument("transe_energy: dimension mismatch");
  double acc = 0.0;
  if (norm == Norm::l1) {
    for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::abs(s[i] + r[i] - o[i]);
    return acc;
  }
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double d = s[i] + r[i] - o[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Row layout: entities in rows [0, n_e), relations in [n_e, n_e + n_r).
using EmbeddingTable = Eigen::MatrixXd;

// Uniform init in [-6/sqrt(d), +6/sqrt(d)]; relation rows are L2-normalized
// once, entities are left to the per-epoch renormalization of the trainer.
inline EmbeddingTable init_embeddings(std::int32_t entity_count, std::int32_t relation_count,
                                      int dim, std::uint64_t seed) {
  if (entity_count <= 0 || relation_count < 0 || dim <= 0)
    throw std::invalid_argument("init_embeddings: bad dimensions");
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  EmbeddingTable table(entity_count + relation_count, dim);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      table(i, j) = rng.uniform(-bound, bound);
  for (Eigen::Index i = entity_count; i < table.rows(); ++i) {
    const double n = table.row(i).norm();
    if (n > 0.0) table.row(i) /= n;
  }
  return table;
}

struct TransEConfig {
  int dim = 100;
  double margin = 1.0;
  double learning_rate = 0.01;
  int epochs = 1000;  // full benchmark runs use 10000
  int batch = 64;
  Norm norm = Norm::l1;
  std::uint64_t seed = 42;
};

struct TransEResult {
  EmbeddingTable table;
  std::vector<double> epoch_mean_loss;
  std::size_t skipped_negatives = 0;
};

namespace detail {

// Subgradient of the energy with respect to (s + r - o); sign(0) = 0 for the
// L1 case, direction vector (or zero) for L2.
inline Eigen::RowVectorXd energy_grad(const Eigen::RowVectorXd& diff, Norm norm) {
  if (norm == Norm::l1) {
    return diff.unaryExpr(
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  }
  const double n = diff.norm();
  if (n == 0.0) return Eigen::RowVectorXd::Zero(diff.size());
  return diff / n;
}

}  // namespace detail

// Margin-based trainer: per batch, each triple gets one uniformly corrupted
// negative (filtered against the graph, skipped after 1000 rejected draws),
// hinge subgradients are accumulated and applied as one mean SGD step, and
// entity rows are renormalized to unit L2 after every epoch.
inline TransEResult train_transe(const KnowledgeGraph& g, const TransEConfig& cfg) {
  if (g.triple_count() == 0) throw std::invalid_argument("train_transe: graph has no triples");
  if (cfg.dim <= 0 || cfg.margin <= 0.0 || cfg.learning_rate <= 0.0 || cfg.epochs < 0 ||
      cfg.batch <= 0)
    throw std::invalid_argument("train_transe: bad config");
  const std::int32_t n_e = g.entity_count();
  TransEResult result;
  result.table = init_embeddings(n_e, g.relation_count(), cfg.dim, cfg.seed);
  if (cfg.epochs == 0) return result;

  EmbeddingTable& table = result.table;
  Rng rng(splitmix64(cfg.seed));
  const std::vector<Triple>& triples = g.triples();
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  EmbeddingTable grad = EmbeddingTable::Zero(table.rows(), table.cols());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch));
      grad.setZero();
      std::size_t batch_count = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const Triple& t = triples[order[i]];
        const bool corrupt_head = rng.index(2) == 0;
        EntityId replacement = -1;
        for (int attempt = 0; attempt < 1000; ++attempt) {
          const EntityId candidate = static_cast<EntityId>(rng.index(static_cast<std::size_t>(n_e)));
          Triple corrupted = t;
          (corrupt_head ? corrupted.subject : corrupted.object) = candidate;
          if (!g.contains_triple(corrupted)) {
            replacement = candidate;
            break;
          }
        }
        if (replacement < 0) {
          ++result.skipped_negatives;
          continue;
        }
        const std::int32_t rel_row = n_e + t.relation;
        const EntityId neg_s = corrupt_head ? replacement : t.subject;
        const EntityId neg_o = corrupt_head ? t.object : replacement;
        const Eigen::RowVectorXd diff_pos =
            table.row(t.subject) + table.row(rel_row) - table.row(t.object);
        const Eigen::RowVectorXd diff_neg =
            table.row(neg_s) + table.row(rel_row) - table.row(neg_o);
        const double e_pos = transe_energy(table.row(t.subject), table.row(rel_row),
                                           table.row(t.object), cfg.norm);
        const double e_neg =
            transe_energy(table.row(neg_s), table.row(rel_row), table.row(neg_o), cfg.norm);
        const double violation = e_pos - e_neg + cfg.margin;
        ++batch_count;
        if (violation > 0.0) {
          epoch_loss += violation;
          const Eigen::RowVectorXd gp = detail::energy_grad(diff_pos, cfg.norm);
          const Eigen::RowVectorXd gn = detail::energy_grad(diff_neg, cfg.norm);
          grad.row(t.subject) += gp;
          grad.row(rel_row) += gp;
          grad.row(t.object) -= gp;
          grad.row(neg_s) -= gn;
          grad.row(rel_row) -= gn;
          grad.row(neg_o) += gn;
        }
      }
      epoch_count += batch_count;
      if (batch_count > 0)
        table -= (cfg.learning_rate / static_cast<double>(batch_count)) * grad;
    }
    for (EntityId e = 0; e < n_e; ++e) {
      const double n = table.row(e).norm();
      if (n > 0.0) table.row(e) /= n;
    }
    result.epoch_mean_loss.push_back(
        epoch_count > 0 ? epoch_loss / static_cast<double>(epoch_count) : 0.0);
  }
  return result;
}

}  // namespace kgt
