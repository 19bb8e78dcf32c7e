#pragma once

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgt/eval.hpp"
#include "kgt/graph.hpp"
#include "kgt/linker.hpp"
#include "kgt/sampler.hpp"

namespace kgt {

using Json = nlohmann::json;

inline Json graph_to_json(const KnowledgeGraph& g) {
  Json j;
  j["entities"] = Json::array();
  for (EntityId e = 0; e < g.entity_count(); ++e) j["entities"].push_back(g.entity_label(e));
  j["relations"] = Json::array();
  for (RelationId r = 0; r < g.relation_count(); ++r)
    j["relations"].push_back(g.relation_label(r));
  j["triples"] = Json::array();
  for (const Triple& t : g.triples())
    j["triples"].push_back(Json::array({t.subject, t.relation, t.object}));
  return j;
}

inline KnowledgeGraph graph_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("entities") || !j.contains("relations") ||
      !j.contains("triples"))
    throw std::runtime_error("graph json: expected entities/relations/triples object");
  std::vector<std::string> entities, relations;
  for (const Json& e : j.at("entities")) entities.push_back(e.get<std::string>());
  for (const Json& r : j.at("relations")) relations.push_back(r.get<std::string>());
  std::vector<Triple> triples;
  for (const Json& t : j.at("triples")) {
    if (!t.is_array() || t.size() != 3)
      throw std::runtime_error("graph json: each triple must be [s, r, o]");
    triples.push_back(Triple{t[0].get<EntityId>(), t[1].get<RelationId>(), t[2].get<EntityId>()});
  }
  return KnowledgeGraph::from_components(std::move(entities), std::move(relations), triples);
}

inline void save_graph_json(const std::string& path, const KnowledgeGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_graph_json: cannot open " + path);
  out << graph_to_json(g).dump(2) << '\n';
  if (!out) throw std::runtime_error("save_graph_json: write failed for " + path);
}

inline KnowledgeGraph load_graph_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_graph_json: cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw std::runtime_error("load_graph_json: " + path + ": " + e.what());
  }
  return graph_from_json(j);
}

// Accepts either an ingest-format .tsv or a graph dump .json, by extension.
inline KnowledgeGraph load_graph_any(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".tsv") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_graph: cannot open " + path);
    return std::move(ingest_tsv(in).graph);
  }
  return load_graph_json(path);
}

inline Json sample_to_json(const TrainingSample& sample) {
  Json j;
  j["nodes"] = sample.node_ids;
  j["positions"] = Json::array();
  for (Eigen::Index k = 0; k < sample.positions.rows(); ++k)
    j["positions"].push_back(
        Json::array({sample.positions(k, 0), sample.positions(k, 1), sample.positions(k, 2)}));
  j["adjacency"] = Json::array();
  for (Eigen::Index i = 0; i < sample.adjacency.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < sample.adjacency.cols(); ++c)
      row.push_back(sample.adjacency(i, c));
    j["adjacency"].push_back(row);
  }
  return j;
}

inline Json report_to_json(const RankingReport& report) {
  Json j;
  j["setting"] = eval_setting_name(report.setting);
  j["mr"] = report.mean_rank;
  j["mrr"] = report.mrr;
  j["hits"] = Json{{"1", report.hits1}, {"3", report.hits3}, {"10", report.hits10}};
  return j;
}

// One document's spans as a JSON-lines record.
inline Json spans_to_json(std::size_t line_number, const std::vector<LinkedSpan>& spans) {
  Json j;
  j["line"] = line_number;
  j["spans"] = Json::array();
  for (const LinkedSpan& s : spans)
    j["spans"].push_back(Json{{"start", s.start}, {"end", s.end}, {"entity", s.entity}});
  return j;
}

}  // namespace kgt
