#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace kgt {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(t.subject);
    h = h * 0x100000001b3ull ^ static_cast<std::uint32_t>(t.relation);
    h = h * 0x100000001b3ull ^ static_cast<std::uint32_t>(t.object);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return static_cast<std::size_t>(h);
  }
};

struct IngestReport;
IngestReport ingest_tsv(std::istream& in);

// Directed multi-relational graph over dense ids assigned in first-appearance
// order. Entities and relations live in separate id spaces. Immutable after
// construction; safe for concurrent readers.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  EntityId entity_count() const {
    return static_cast<EntityId>(entity_labels_.size());
  }
  RelationId relation_count() const {
    return static_cast<RelationId>(relation_labels_.size());
  }
  // Entities occupy vocabulary rows [0, n_e), relations [n_e, n_e + n_r).
  std::int32_t vocab_size() const { return entity_count() + relation_count(); }

  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t triple_count() const { return triples_.size(); }

  bool contains_triple(const Triple& t) const {
    check_triple_range(t);
    return membership_.count(t) > 0;
  }

  // (relation, object) pairs of triples with the given subject.
  const std::vector<std::pair<RelationId, EntityId>>& out_edges(EntityId e) const {
    check_entity(e);
    return out_index_[static_cast<std::size_t>(e)];
  }

  // (subject, relation) pairs of triples with the given object.
  const std::vector<std::pair<EntityId, RelationId>>& in_edges(EntityId e) const {
    check_entity(e);
    return in_index_[static_cast<std::size_t>(e)];
  }

  std::size_t out_degree(EntityId e) const { return out_edges(e).size(); }
  std::size_t in_degree(EntityId e) const { return in_edges(e).size(); }

  const std::string& entity_label(EntityId e) const {
    check_entity(e);
    return entity_labels_[static_cast<std::size_t>(e)];
  }
  const std::string& relation_label(RelationId r) const {
    check_relation(r);
    return relation_labels_[static_cast<std::size_t>(r)];
  }

  std::optional<EntityId> find_entity(std::string_view label) const {
    auto it = entity_ids_.find(std::string(label));
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<RelationId> find_relation(std::string_view label) const {
    auto it = relation_ids_.find(std::string(label));
    if (it == relation_ids_.end()) return std::nullopt;
    return it->second;
  }

  void check_entity(EntityId e) const {
    if (e < 0 || e >= entity_count())
      throw std::out_of_range("entity id out of range: " + std::to_string(e));
  }
  void check_relation(RelationId r) const {
    if (r < 0 || r >= relation_count())
      throw std::out_of_range("relation id out of range: " + std::to_string(r));
  }
  void check_triple_range(const Triple& t) const {
    check_entity(t.subject);
    check_relation(t.relation);
    check_entity(t.object);
  }

  // Builds from explicit label lists and id triples (the dump layout).
  // Unreferenced entities are allowed and simply have degree zero; duplicate
  // triples collapse silently.
  static KnowledgeGraph from_components(std::vector<std::string> entities,
                                        std::vector<std::string> relations,
                                        const std::vector<Triple>& triples) {
    KnowledgeGraph g;
    g.entity_labels_ = std::move(entities);
    g.relation_labels_ = std::move(relations);
    for (std::size_t i = 0; i < g.entity_labels_.size(); ++i) {
      const std::string& label = g.entity_labels_[i];
      if (label.empty())
        throw std::invalid_argument("from_components: empty entity label");
      if (!g.entity_ids_.emplace(label, static_cast<EntityId>(i)).second)
        throw std::invalid_argument("from_components: duplicate entity label: " + label);
    }
    for (std::size_t i = 0; i < g.relation_labels_.size(); ++i) {
      const std::string& label = g.relation_labels_[i];
      if (label.empty())
        throw std::invalid_argument("from_components: empty relation label");
      if (!g.relation_ids_.emplace(label, static_cast<RelationId>(i)).second)
        throw std::invalid_argument("from_components: duplicate relation label: " + label);
    }
    for (const Triple& t : triples) {
      g.check_triple_range(t);
      g.add_triple(t);
    }
    g.build_indexes();
    return g;
  }

 private:
  friend IngestReport ingest_tsv(std::istream& in);

  EntityId intern_entity(std::string_view label) {
    auto it = entity_ids_.find(std::string(label));
    if (it != entity_ids_.end()) return it->second;
    const EntityId id = entity_count();
    entity_labels_.emplace_back(label);
    entity_ids_.emplace(std::string(label), id);
    return id;
  }

  RelationId intern_relation(std::string_view label) {
    auto it = relation_ids_.find(std::string(label));
    if (it != relation_ids_.end()) return it->second;
    const RelationId id = relation_count();
    relation_labels_.emplace_back(label);
    relation_ids_.emplace(std::string(label), id);
    return id;
  }

  // Returns false when the triple was already present.
  bool add_triple(const Triple& t) {
    if (!membership_.insert(t).second) return false;
    triples_.push_back(t);
    return true;
  }

  void build_indexes() {
    out_index_.assign(entity_labels_.size(), {});
    in_index_.assign(entity_labels_.size(), {});
    for (const Triple& t : triples_) {
      out_index_[static_cast<std::size_t>(t.subject)].emplace_back(t.relation, t.object);
      in_index_[static_cast<std::size_t>(t.object)].emplace_back(t.subject, t.relation);
    }
  }

  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  std::vector<Triple> triples_;
  std::unordered_set<Triple, TripleHash> membership_;
  std::vector<std::vector<std::pair<RelationId, EntityId>>> out_index_;
  std::vector<std::vector<std::pair<EntityId, RelationId>>> in_index_;
};

struct IngestReport {
  KnowledgeGraph graph;
  std::size_t duplicates = 0;
  std::size_t line_count = 0;
};

// Reads `subject<TAB>relation<TAB>object` lines. Blank lines are skipped,
// trailing \r is tolerated, duplicate triples collapse (counted), and a line
// with the wrong field count aborts with its line number.
inline IngestReport ingest_tsv(std::istream& in) {
  IngestReport report;
  KnowledgeGraph& g = report.graph;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string_view, 3> field;
    std::size_t n_fields = 0;
    std::size_t start = 0;
    const std::string_view sv(line);
    for (;;) {
      const std::size_t tab = sv.find('\t', start);
      const std::string_view piece =
          tab == std::string_view::npos ? sv.substr(start) : sv.substr(start, tab - start);
      if (n_fields < 3) field[n_fields] = piece;
      ++n_fields;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (n_fields != 3)
      throw std::runtime_error("ingest: line " + std::to_string(line_no) +
                               ": expected 3 tab-separated fields, got " +
                               std::to_string(n_fields));
    for (const std::string_view f : field) {
      if (f.empty())
        throw std::runtime_error("ingest: line " + std::to_string(line_no) +
                                 ": empty field");
    }
    const Triple t{g.intern_entity(field[0]), g.intern_relation(field[1]),
                   g.intern_entity(field[2])};
    if (!g.add_triple(t)) ++report.duplicates;
  }
  report.line_count = line_no;
  g.build_indexes();
  return report;
}

struct DegreeStats {
  double avg_in = 0.0;
  double avg_out = 0.0;
  double median_degree = 0.0;
};

// Averages of per-entity in/out triple counts plus the median total degree.
inline DegreeStats degree_stats(const KnowledgeGraph& g) {
  const EntityId n_e = g.entity_count();
  if (n_e == 0) throw std::invalid_argument("degree_stats: graph has no entities");
  DegreeStats stats;
  stats.avg_in = static_cast<double>(g.triple_count()) / static_cast<double>(n_e);
  stats.avg_out = stats.avg_in;
  std::vector<std::size_t> degrees(static_cast<std::size_t>(n_e));
  for (EntityId e = 0; e < n_e; ++e)
    degrees[static_cast<std::size_t>(e)] = g.in_degree(e) + g.out_degree(e);
  std::sort(degrees.begin(), degrees.end());
  const std::size_t mid = degrees.size() / 2;
  if (degrees.size() % 2 == 1) {
    stats.median_degree = static_cast<double>(degrees[mid]);
  } else {
    stats.median_degree =
        0.5 * (static_cast<double>(degrees[mid - 1]) + static_cast<double>(degrees[mid]));
  }
  return stats;
}

}  // namespace kgt
