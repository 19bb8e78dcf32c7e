#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "kgt/transe.hpp"

namespace kgt {

// Text format: a `N d` header line, then one `row_id<TAB>v1 v2 ... vd` line
// per row with 17 significant digits, which round-trips doubles exactly.
inline void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_embeddings: cannot open " + path);
  out << table.rows() << ' ' << table.cols() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", table(i, j));
      out << (j == 0 ? '\t' : ' ') << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_embeddings: write failed for " + path);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_embeddings: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_embeddings: missing header in " + path);
  Eigen::Index rows = 0, cols = 0;
  {
    std::istringstream header(line);
    if (!(header >> rows >> cols) || rows <= 0 || cols <= 0)
      throw std::runtime_error("load_embeddings: malformed header in " + path);
  }
  EmbeddingTable table(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("load_embeddings: truncated file " + path);
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("load_embeddings: row " + std::to_string(i) + ": missing tab");
    Eigen::Index row_id = -1;
    try {
      row_id = static_cast<Eigen::Index>(std::stoll(line.substr(0, tab)));
    } catch (const std::exception&) {
      throw std::runtime_error("load_embeddings: row " + std::to_string(i) + ": bad row id");
    }
    if (row_id != i)
      throw std::runtime_error("load_embeddings: row ids must be sequential, got " +
                               std::to_string(row_id) + " at line " + std::to_string(i + 2));
    std::istringstream values(line.substr(tab + 1));
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(values >> table(i, j)))
        throw std::runtime_error("load_embeddings: row " + std::to_string(i) +
                                 ": expected " + std::to_string(cols) + " values");
    }
    double extra;
    if (values >> extra)
      throw std::runtime_error("load_embeddings: row " + std::to_string(i) +
                               ": too many values");
  }
  return table;
}

}  // namespace kgt
