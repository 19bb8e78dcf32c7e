#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgt/graph.hpp"
#include "kgt/rng.hpp"

namespace kgt {

struct Subgraph {
  std::vector<Triple> triples;
};

using PositionMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3>;
using AdjacencyMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

// A converted training unit. node_ids hold vocabulary ids (relations offset
// by the entity count; every relation occurrence gets its own node while
// entities are deduplicated). positions[k] = (subject, relation, object)
// sequence positions of triple k. adjacency(i, j) = 1 iff the directed edge
// i -> j exists (subject -> relation occurrence -> object), so it carries
// exactly two ones per triple and a zero diagonal.
struct TrainingSample {
  std::vector<std::int32_t> node_ids;
  PositionMatrix positions;
  AdjacencyMatrix adjacency;

  std::int32_t node_count() const { return static_cast<std::int32_t>(node_ids.size()); }
  std::int32_t triple_count() const { return static_cast<std::int32_t>(positions.rows()); }
};

// Uniform ego sample around `center`: min(k_in, in-degree) incoming triples
// and min(k_out, out-degree) outgoing ones, drawn without replacement.
// Selected triples keep the adjacency-list order, incoming first.
inline Subgraph sample_ego(const KnowledgeGraph& g, EntityId center, int k_in, int k_out,
                           std::uint64_t seed) {
  g.check_entity(center);
  if (k_in < 0 || k_out < 0)
    throw std::invalid_argument("sample_ego: fan limits must be non-negative");
  if (k_in + k_out < 1)
    throw std::invalid_argument("sample_ego: k_in + k_out must be at least 1");
  const auto& in = g.in_edges(center);
  const auto& out = g.out_edges(center);
  const std::size_t take_in = std::min<std::size_t>(static_cast<std::size_t>(k_in), in.size());
  const std::size_t take_out = std::min<std::size_t>(static_cast<std::size_t>(k_out), out.size());
  if (take_in + take_out == 0)
    throw std::runtime_error("sample_ego: entity " + std::to_string(center) +
                             " has no incident triples to sample");
  Rng rng(seed);
  Subgraph sub;
  sub.triples.reserve(take_in + take_out);
  for (const std::size_t idx : rng.sample_indexes(in.size(), take_in))
    sub.triples.push_back(Triple{in[idx].first, in[idx].second, center});
  for (const std::size_t idx : rng.sample_indexes(out.size(), take_out))
    sub.triples.push_back(Triple{center, out[idx].first, out[idx].second});
  return sub;
}

namespace detail {

inline void check_subgraph_ids(const Subgraph& sub, std::int32_t entity_vocab_size) {
  if (sub.triples.empty())
    throw std::invalid_argument("convert: subgraph has no triples");
  if (entity_vocab_size <= 0)
    throw std::invalid_argument("convert: entity vocabulary size must be positive");
  for (const Triple& t : sub.triples) {
    if (t.subject < 0 || t.subject >= entity_vocab_size || t.object < 0 ||
        t.object >= entity_vocab_size || t.relation < 0)
      throw std::invalid_argument("convert: triple ids out of range");
  }
}

inline TrainingSample assemble_sample(const Subgraph& sub, std::int32_t entity_vocab_size,
                                      const std::unordered_map<EntityId, std::int32_t>& entity_pos,
                                      const std::vector<std::int32_t>& relation_pos,
                                      std::vector<std::int32_t> node_ids) {
  const std::int32_t t_count = static_cast<std::int32_t>(sub.triples.size());
  const std::int32_t n = static_cast<std::int32_t>(node_ids.size());
  TrainingSample sample;
  sample.node_ids = std::move(node_ids);
  sample.positions.resize(t_count, 3);
  sample.adjacency = AdjacencyMatrix::Zero(n, n);
  for (std::int32_t k = 0; k < t_count; ++k) {
    const Triple& t = sub.triples[static_cast<std::size_t>(k)];
    const std::int32_t ps = entity_pos.at(t.subject);
    const std::int32_t pr = relation_pos[static_cast<std::size_t>(k)];
    const std::int32_t po = entity_pos.at(t.object);
    sample.positions(k, 0) = ps;
    sample.positions(k, 1) = pr;
    sample.positions(k, 2) = po;
    sample.adjacency(ps, pr) = 1;
    sample.adjacency(pr, po) = 1;
  }
  (void)entity_vocab_size;
  return sample;
}

}  // namespace detail

// Canonical conversion: triples are visited in list order; the subject is
// appended if unseen, the relation occurrence is always appended, then the
// object if unseen.
inline TrainingSample convert(const Subgraph& sub, std::int32_t entity_vocab_size) {
  detail::check_subgraph_ids(sub, entity_vocab_size);
  std::unordered_map<EntityId, std::int32_t> entity_pos;
  std::vector<std::int32_t> relation_pos(sub.triples.size());
  std::vector<std::int32_t> node_ids;
  auto place_entity = [&](EntityId e) {
    auto it = entity_pos.find(e);
    if (it != entity_pos.end()) return;
    entity_pos.emplace(e, static_cast<std::int32_t>(node_ids.size()));
    node_ids.push_back(e);
  };
  for (std::size_t k = 0; k < sub.triples.size(); ++k) {
    const Triple& t = sub.triples[k];
    place_entity(t.subject);
    relation_pos[k] = static_cast<std::int32_t>(node_ids.size());
    node_ids.push_back(entity_vocab_size + t.relation);
    place_entity(t.object);
  }
  return detail::assemble_sample(sub, entity_vocab_size, entity_pos, relation_pos,
                                 std::move(node_ids));
}

// Explicit node placement for layout-compatibility checks: slots are either
// an entity id or the relation occurrence of triple k.
struct NodeSlot {
  enum class Kind { entity, relation_occurrence };
  Kind kind = Kind::entity;
  std::int32_t value = 0;

  static NodeSlot entity(EntityId e) { return {Kind::entity, e}; }
  static NodeSlot relation_of(std::int32_t triple_index) {
    return {Kind::relation_occurrence, triple_index};
  }
};

// Conversion with a caller-supplied node order. The layout must mention every
// distinct entity of the subgraph exactly once and every relation occurrence
// (triple index) exactly once.
inline TrainingSample convert_with_layout(const Subgraph& sub, std::int32_t entity_vocab_size,
                                          const std::vector<NodeSlot>& layout) {
  detail::check_subgraph_ids(sub, entity_vocab_size);
  const std::size_t t_count = sub.triples.size();
  std::unordered_map<EntityId, std::int32_t> entity_pos;
  std::vector<std::int32_t> relation_pos(t_count, -1);
  std::vector<std::int32_t> node_ids;
  node_ids.reserve(layout.size());
  for (const NodeSlot& slot : layout) {
    const std::int32_t pos = static_cast<std::int32_t>(node_ids.size());
    if (slot.kind == NodeSlot::Kind::entity) {
      if (!entity_pos.emplace(slot.value, pos).second)
        throw std::invalid_argument("convert_with_layout: entity listed twice");
      node_ids.push_back(slot.value);
    } else {
      if (slot.value < 0 || static_cast<std::size_t>(slot.value) >= t_count)
        throw std::invalid_argument("convert_with_layout: relation occurrence out of range");
      if (relation_pos[static_cast<std::size_t>(slot.value)] != -1)
        throw std::invalid_argument("convert_with_layout: relation occurrence listed twice");
      relation_pos[static_cast<std::size_t>(slot.value)] = pos;
      node_ids.push_back(entity_vocab_size +
                         sub.triples[static_cast<std::size_t>(slot.value)].relation);
    }
  }
  for (std::size_t k = 0; k < t_count; ++k) {
    if (relation_pos[k] == -1)
      throw std::invalid_argument("convert_with_layout: missing relation occurrence");
    if (entity_pos.find(sub.triples[k].subject) == entity_pos.end() ||
        entity_pos.find(sub.triples[k].object) == entity_pos.end())
      throw std::invalid_argument("convert_with_layout: missing entity");
  }
  std::size_t distinct_entities = 0;
  {
    std::unordered_map<EntityId, bool> seen;
    for (const Triple& t : sub.triples) {
      seen[t.subject] = true;
      seen[t.object] = true;
    }
    distinct_entities = seen.size();
  }
  if (layout.size() != distinct_entities + t_count)
    throw std::invalid_argument("convert_with_layout: layout size mismatch");
  return detail::assemble_sample(sub, entity_vocab_size, entity_pos, relation_pos,
                                 std::move(node_ids));
}

// Triple stored at row k of a converted sample.
inline Triple sample_triple(const TrainingSample& sample, std::int32_t entity_vocab_size,
                            std::int32_t row) {
  if (row < 0 || row >= sample.triple_count())
    throw std::out_of_range("sample_triple: row out of range");
  auto node_at = [&](std::int32_t pos) {
    if (pos < 0 || pos >= sample.node_count())
      throw std::out_of_range("sample_triple: position out of range");
    return sample.node_ids[static_cast<std::size_t>(pos)];
  };
  const std::int32_t s = node_at(sample.positions(row, 0));
  const std::int32_t r = node_at(sample.positions(row, 1));
  const std::int32_t o = node_at(sample.positions(row, 2));
  if (s < 0 || s >= entity_vocab_size || o < 0 || o >= entity_vocab_size ||
      r < entity_vocab_size)
    throw std::invalid_argument("sample_triple: sample ids inconsistent with vocabulary split");
  return Triple{s, r - entity_vocab_size, o};
}

struct Corruption {
  enum class Side { head, tail };
  Side side = Side::head;
  EntityId replacement = 0;
};

// Uniform negative for the triple at `triple_row`: the side is chosen once,
// then replacement entities are drawn until the corrupted triple is absent
// from g. Gives up after 1000 rejected draws.
inline Corruption corrupt(const TrainingSample& sample, const KnowledgeGraph& g,
                          std::int32_t triple_row, std::uint64_t seed) {
  const Triple t = sample_triple(sample, g.entity_count(), triple_row);
  g.check_triple_range(t);
  Rng rng(seed);
  const Corruption::Side side =
      rng.index(2) == 0 ? Corruption::Side::head : Corruption::Side::tail;
  const std::size_t n_e = static_cast<std::size_t>(g.entity_count());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const EntityId candidate = static_cast<EntityId>(rng.index(n_e));
    Triple corrupted = t;
    (side == Corruption::Side::head ? corrupted.subject : corrupted.object) = candidate;
    if (!g.contains_triple(corrupted)) return Corruption{side, candidate};
  }
  throw std::runtime_error("corrupt: no invalid replacement found after 1000 draws");
}

}  // namespace kgt
