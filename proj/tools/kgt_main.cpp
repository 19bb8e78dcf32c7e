// kgt: batch front door for the graph toolkit. One subcommand per run;
// exit 0 on success, 1 on usage errors, 2 on data errors. Every run with a
// fixed seed is byte-reproducible in its primary output artifact, and every
// run that writes files also writes its resolved configuration next to them.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgt/checkpoint.hpp"
#include "kgt/embedding_io.hpp"
#include "kgt/eval.hpp"
#include "kgt/graph.hpp"
#include "kgt/json_io.hpp"
#include "kgt/kgformer.hpp"
#include "kgt/linker.hpp"
#include "kgt/sampler.hpp"
#include "kgt/transe.hpp"

namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

// Anything wrong with inputs, config files, or shapes: exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Registry tying each option to its config-file key. Flags win over config
// values; unknown config keys are rejected; the post-merge state can be
// dumped as the resolved configuration.
class KeySet {
 public:
  void add_int(CLI::Option* opt, std::string key, int& ref) {
    entries_.push_back({std::move(key), opt,
                        [&ref, opt](const Json& v) {
                          if (!v.is_number_integer())
                            throw DataError("config key '" + opt_key(opt) + "': expected integer");
                          ref = v.get<int>();
                        },
                        [&ref] { return Json(ref); }});
  }

  void add_double(CLI::Option* opt, std::string key, double& ref) {
    entries_.push_back({std::move(key), opt,
                        [&ref, opt](const Json& v) {
                          if (!v.is_number())
                            throw DataError("config key '" + opt_key(opt) + "': expected number");
                          ref = v.get<double>();
                        },
                        [&ref] { return Json(ref); }});
  }

  void add_seed(CLI::Option* opt, std::string key, std::uint64_t& ref) {
    entries_.push_back({std::move(key), opt,
                        [&ref, opt](const Json& v) {
                          if (!v.is_number_unsigned() &&
                              !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                            throw DataError("config key '" + opt_key(opt) +
                                            "': expected non-negative integer");
                          ref = v.get<std::uint64_t>();
                        },
                        [&ref] { return Json(ref); }});
  }

  void add_string(CLI::Option* opt, std::string key, std::string& ref) {
    entries_.push_back({std::move(key), opt,
                        [&ref, opt](const Json& v) {
                          if (!v.is_string())
                            throw DataError("config key '" + opt_key(opt) + "': expected string");
                          ref = v.get<std::string>();
                        },
                        [&ref] { return Json(ref); }});
  }

  // Applies config values for options not set on the command line.
  void merge(const Json& cfg) {
    if (!cfg.is_object()) throw DataError("config file: top level must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      const Entry* hit = nullptr;
      for (const Entry& e : entries_)
        if (e.key == key) hit = &e;
      if (hit == nullptr) throw DataError("config file: unknown key '" + key + "'");
      if (hit->opt->count() > 0) continue;
      hit->apply(value);
    }
  }

  Json resolved() const {
    Json j = Json::object();
    for (const Entry& e : entries_) j[e.key] = e.current();
    return j;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const Json&)> apply;
    std::function<Json()> current;
  };

  static std::string opt_key(const CLI::Option* opt) {
    std::string name = opt->get_name();
    if (name.rfind("--", 0) == 0) name = name.substr(2);
    for (char& c : name)
      if (c == '-') c = '_';
    return name;
  }

  std::vector<Entry> entries_;
};

Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw DataError("config file " + path + ": " + e.what());
  }
  return j;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << body;
  if (!out) throw DataError("write failed: " + path.string());
}

// Resolved config written next to the command's outputs for provenance.
void write_resolved(const fs::path& out_dir, const std::string& command, const KeySet& keys) {
  fs::create_directories(out_dir);
  write_text(out_dir / (command + ".config.json"), keys.resolved().dump(2) + "\n");
}

kgt::KnowledgeGraph load_graph(const std::string& path) {
  try {
    return kgt::load_graph_any(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

kgt::EntityId resolve_entity(const kgt::KnowledgeGraph& g, const std::string& center) {
  if (auto id = g.find_entity(center)) return *id;
  if (!center.empty() && center.find_first_not_of("0123456789") == std::string::npos) {
    const long v = std::stol(center);
    if (v < g.entity_count()) return static_cast<kgt::EntityId>(v);
  }
  throw DataError("unknown entity: " + center);
}

struct LabelledTriples {
  std::vector<kgt::Triple> triples;
};

// Label TSV resolved against an existing graph's vocabulary.
LabelledTriples load_test_triples(const std::string& path, const kgt::KnowledgeGraph& g) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open test triples: " + path);
  LabelledTriples out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 3)
      throw DataError("test triples line " + std::to_string(line_no) + ": expected 3 fields");
    const auto s = g.find_entity(fields[0]);
    const auto r = g.find_relation(fields[1]);
    const auto o = g.find_entity(fields[2]);
    if (!s || !r || !o)
      throw DataError("test triples line " + std::to_string(line_no) +
                      ": label not in graph vocabulary");
    out.triples.push_back(kgt::Triple{*s, *r, *o});
  }
  return out;
}

// ---------------------------------------------------------------- commands

struct IngestOpts {
  std::string input, out, config;
  KeySet keys;
};

void run_ingest(const IngestOpts& o) {
  std::ifstream in(o.input);
  if (!in) throw DataError("cannot open input: " + o.input);
  kgt::IngestReport report;
  try {
    report = kgt::ingest_tsv(in);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  const fs::path graph_path = out_dir / "graph.json";
  kgt::save_graph_json(graph_path.string(), report.graph);
  write_resolved(out_dir, "ingest", o.keys);
  Json summary{{"command", "ingest"},
               {"entities", report.graph.entity_count()},
               {"relations", report.graph.relation_count()},
               {"triples", report.graph.triple_count()},
               {"duplicates", report.duplicates},
               {"graph", graph_path.string()}};
  std::cout << summary.dump() << "\n";
}

struct StatsOpts {
  std::string input, out, config;
  KeySet keys;
};

void run_stats(const StatsOpts& o) {
  const kgt::KnowledgeGraph g = load_graph(o.input);
  kgt::DegreeStats stats;
  try {
    stats = kgt::degree_stats(g);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const Json j{{"avg_in", stats.avg_in},
               {"avg_out", stats.avg_out},
               {"median_degree", stats.median_degree}};
  if (!o.out.empty()) {
    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    write_text(out_dir / "stats.json", j.dump(2) + "\n");
    write_resolved(out_dir, "stats", o.keys);
  }
  std::cout << j.dump() << "\n";
}

struct SampleOpts {
  std::string input, center, out, config;
  int k_in = 2, k_out = 2;
  std::uint64_t seed = 42;
  KeySet keys;
};

void run_sample(const SampleOpts& o) {
  const kgt::KnowledgeGraph g = load_graph(o.input);
  const kgt::EntityId center = resolve_entity(g, o.center);
  kgt::TrainingSample sample;
  try {
    const kgt::Subgraph sub = kgt::sample_ego(g, center, o.k_in, o.k_out, o.seed);
    sample = kgt::convert(sub, g.entity_count());
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  const fs::path sample_path = out_dir / "sample.json";
  write_text(sample_path, kgt::sample_to_json(sample).dump(2) + "\n");
  write_resolved(out_dir, "sample", o.keys);
  Json summary{{"command", "sample"},
               {"center", center},
               {"nodes", sample.node_count()},
               {"triples", sample.triple_count()},
               {"sample", sample_path.string()}};
  std::cout << summary.dump() << "\n";
}

struct TrainTransEOpts {
  std::string input, out, config, norm = "l1";
  kgt::TransEConfig cfg;
  KeySet keys;
};

void run_train_transe(const TrainTransEOpts& o) {
  const kgt::KnowledgeGraph g = load_graph(o.input);
  kgt::TransEConfig cfg = o.cfg;
  cfg.norm = kgt::norm_from_name(o.norm);
  kgt::TransEResult result;
  try {
    result = kgt::train_transe(g, cfg);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  const fs::path emb_path = out_dir / "transe.emb";
  kgt::save_embeddings(emb_path.string(), result.table);
  write_resolved(out_dir, "train-transe", o.keys);
  Json summary{{"command", "train-transe"},
               {"epochs", cfg.epochs},
               {"skipped_negatives", result.skipped_negatives},
               {"embeddings", emb_path.string()}};
  summary["first_loss"] =
      result.epoch_mean_loss.empty() ? Json() : Json(result.epoch_mean_loss.front());
  summary["final_loss"] =
      result.epoch_mean_loss.empty() ? Json() : Json(result.epoch_mean_loss.back());
  std::cout << summary.dump() << "\n";
}

struct TrainKgfOpts {
  std::string input, init, out, config;
  std::string norm = "l1", negative = "substitute";
  int ff_dim = 0;  // 0 = 4 * dim
  kgt::KgfConfig cfg;
  KeySet keys;
};

void run_train_kgformer(const TrainKgfOpts& o) {
  const kgt::KnowledgeGraph g = load_graph(o.input);
  kgt::KgfConfig cfg = o.cfg;
  cfg.ff_dim = o.ff_dim == 0 ? 4 * cfg.dim : o.ff_dim;
  cfg.norm = kgt::norm_from_name(o.norm);
  cfg.negative = kgt::negative_mode_from_name(o.negative);
  std::optional<kgt::EmbeddingTable> init;
  if (!o.init.empty()) {
    try {
      init = kgt::load_embeddings(o.init);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  }
  kgt::KgfTrainResult result;
  try {
    result = kgt::train_kgformer(g, cfg, init ? &*init : nullptr);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  const fs::path ckpt_path = out_dir / "kgformer.ckpt";
  kgt::checkpoint_save(result.params, ckpt_path.string());
  std::string losses;
  for (const double l : result.epoch_mean_loss) losses += format_double(l) + "\n";
  write_text(out_dir / "kgformer.loss.txt", losses);
  write_resolved(out_dir, "train-kgformer", o.keys);
  Json summary{{"command", "train-kgformer"},
               {"epochs", cfg.epochs},
               {"skipped_negatives", result.skipped_negatives},
               {"checkpoint", ckpt_path.string()}};
  summary["first_loss"] =
      result.epoch_mean_loss.empty() ? Json() : Json(result.epoch_mean_loss.front());
  summary["final_loss"] =
      result.epoch_mean_loss.empty() ? Json() : Json(result.epoch_mean_loss.back());
  std::cout << summary.dump() << "\n";
}

struct ExportOpts {
  std::string checkpoint, input, out, config;
  std::string mode = "base";
  int k_samples = 1, k_in = 2, k_out = 2;
  std::uint64_t seed = 0;
  KeySet keys;
};

void run_export(const ExportOpts& o) {
  const kgt::KnowledgeGraph g = load_graph(o.input);
  kgt::ExportResult result;
  try {
    const kgt::ModelParams params = kgt::checkpoint_load(o.checkpoint);
    result = kgt::export_embeddings(params, g, kgt::export_mode_from_name(o.mode), o.k_samples,
                                    o.seed, o.k_in, o.k_out);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  const fs::path emb_path = out_dir / "export.emb";
  kgt::save_embeddings(emb_path.string(), result.table);
  write_resolved(out_dir, "export", o.keys);
  Json summary{{"command", "export"},
               {"mode", o.mode},
               {"rows", result.table.rows()},
               {"isolated_fallbacks", result.isolated_fallbacks},
               {"embeddings", emb_path.string()}};
  std::cout << summary.dump() << "\n";
}

struct EvalOpts {
  std::string input, embeddings, test, out, config;
  std::string setting = "filtered", norm = "l1";
  KeySet keys;
};

void run_eval(const EvalOpts& o) {
  const kgt::KnowledgeGraph g = load_graph(o.input);
  kgt::RankingReport report;
  try {
    const kgt::EmbeddingTable table = kgt::load_embeddings(o.embeddings);
    const std::vector<kgt::Triple> test =
        o.test.empty() ? g.triples() : load_test_triples(o.test, g).triples;
    report = kgt::link_prediction(table, g, test, kgt::eval_setting_from_name(o.setting),
                                  kgt::norm_from_name(o.norm));
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const Json j = kgt::report_to_json(report);
  if (!o.out.empty()) {
    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    write_text(out_dir / "report.json", j.dump(2) + "\n");
    write_resolved(out_dir, "eval", o.keys);
  }
  std::cout << j.dump() << "\n";
}

struct LinkOpts {
  std::string dict, text, out, config;
  int min_len = 5;
  KeySet keys;
};

kgt::TermDictionary load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dictionary: " + path);
  std::vector<std::pair<std::string, kgt::EntityId>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw DataError("dictionary line " + std::to_string(line_no) +
                      ": expected term<TAB>entity-id");
    const std::string term = line.substr(0, tab);
    const std::string id_text = line.substr(tab + 1);
    if (id_text.empty() || id_text.find_first_not_of("0123456789") != std::string::npos)
      throw DataError("dictionary line " + std::to_string(line_no) + ": bad entity id '" +
                      id_text + "'");
    entries.emplace_back(term, static_cast<kgt::EntityId>(std::stol(id_text)));
  }
  try {
    return kgt::TermDictionary::build(entries);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

void run_link(const LinkOpts& o) {
  if (o.min_len < 1) throw DataError("min_len must be >= 1");
  const kgt::TermDictionary dict = load_dictionary(o.dict);
  std::ifstream in(o.text);
  if (!in) throw DataError("cannot open text: " + o.text);
  std::string line, records;
  std::size_t line_no = 0, span_count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<kgt::LinkedSpan> spans =
        kgt::fmm_link(line, dict, static_cast<std::size_t>(o.min_len));
    span_count += spans.size();
    records += kgt::spans_to_json(line_no, spans).dump() + "\n";
  }
  if (!o.out.empty()) {
    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    write_text(out_dir / "links.jsonl", records);
    write_resolved(out_dir, "link", o.keys);
  }
  std::cout << records;
  Json summary{{"command", "link"}, {"lines", line_no}, {"spans", span_count}};
  std::cout << summary.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-graph toolkit: subgraph encoder, TransE baseline, "
               "link-prediction evaluation, dictionary entity linker"};
  app.require_subcommand(1);

  IngestOpts ingest;
  {
    CLI::App* c = app.add_subcommand("ingest", "read a triple TSV and write graph JSON");
    ingest.keys.add_string(c->add_option("--input", ingest.input, "triple TSV path")->required(),
                           "input", ingest.input);
    ingest.keys.add_string(c->add_option("--out", ingest.out, "output directory")->required(),
                           "out", ingest.out);
    c->add_option("--config", ingest.config, "JSON config file; flags win");
  }

  StatsOpts stats;
  {
    CLI::App* c = app.add_subcommand("stats", "degree statistics of a graph");
    stats.keys.add_string(c->add_option("--input", stats.input, "graph path (.tsv or .json)")
                              ->required(),
                          "input", stats.input);
    stats.keys.add_string(c->add_option("--out", stats.out, "optional output directory"), "out",
                          stats.out);
    c->add_option("--config", stats.config, "JSON config file; flags win");
  }

  SampleOpts sample;
  {
    CLI::App* c = app.add_subcommand("sample", "dump one converted ego sample as JSON");
    sample.keys.add_string(c->add_option("--input", sample.input, "graph path (.tsv or .json)")
                               ->required(),
                           "input", sample.input);
    sample.keys.add_string(c->add_option("--center", sample.center,
                                         "center entity label (or numeric id)")
                               ->required(),
                           "center", sample.center);
    sample.keys.add_int(c->add_option("--k-in", sample.k_in, "max incoming triples (default 2)"),
                        "k_in", sample.k_in);
    sample.keys.add_int(c->add_option("--k-out", sample.k_out, "max outgoing triples (default 2)"),
                        "k_out", sample.k_out);
    sample.keys.add_seed(c->add_option("--seed", sample.seed, "sampling seed (default 42)"),
                         "seed", sample.seed);
    sample.keys.add_string(c->add_option("--out", sample.out, "output directory")->required(),
                           "out", sample.out);
    c->add_option("--config", sample.config, "JSON config file; flags win");
  }

  TrainTransEOpts transe;
  {
    CLI::App* c = app.add_subcommand("train-transe", "train the translation baseline");
    transe.keys.add_string(c->add_option("--input", transe.input, "graph path (.tsv or .json)")
                               ->required(),
                           "input", transe.input);
    transe.keys.add_int(c->add_option("--dim", transe.cfg.dim, "embedding width (default 100)"),
                        "dim", transe.cfg.dim);
    transe.keys.add_double(c->add_option("--margin", transe.cfg.margin, "margin (default 1.0)"),
                           "margin", transe.cfg.margin);
    transe.keys.add_double(c->add_option("--learning-rate", transe.cfg.learning_rate,
                                         "SGD step size (default 0.01)"),
                           "learning_rate", transe.cfg.learning_rate);
    transe.keys.add_int(c->add_option("--epochs", transe.cfg.epochs, "epochs (default 1000)"),
                        "epochs", transe.cfg.epochs);
    transe.keys.add_int(c->add_option("--batch", transe.cfg.batch, "batch size (default 64)"),
                        "batch", transe.cfg.batch);
    transe.keys.add_string(c->add_option("--norm", transe.norm, "energy norm: l1 or l2")
                               ->check(CLI::IsMember({"l1", "l2"})),
                           "norm", transe.norm);
    transe.keys.add_seed(c->add_option("--seed", transe.cfg.seed, "training seed (default 42)"),
                         "seed", transe.cfg.seed);
    transe.keys.add_string(c->add_option("--out", transe.out, "output directory")->required(),
                           "out", transe.out);
    c->add_option("--config", transe.config, "JSON config file; flags win");
  }

  TrainKgfOpts kgf;
  {
    CLI::App* c = app.add_subcommand("train-kgformer", "train the subgraph encoder");
    kgf.keys.add_string(c->add_option("--input", kgf.input, "graph path (.tsv or .json)")
                            ->required(),
                        "input", kgf.input);
    kgf.keys.add_string(c->add_option("--init", kgf.init,
                                      "embedding file initializing the vocabulary table"),
                        "init", kgf.init);
    kgf.keys.add_int(c->add_option("--layers", kgf.cfg.layers, "encoder blocks (default 4)"),
                     "layers", kgf.cfg.layers);
    kgf.keys.add_int(c->add_option("--heads", kgf.cfg.heads, "attention heads (default 4)"),
                     "heads", kgf.cfg.heads);
    kgf.keys.add_int(c->add_option("--dim", kgf.cfg.dim, "embedding width (default 16)"), "dim",
                     kgf.cfg.dim);
    kgf.keys.add_int(c->add_option("--ff-dim", kgf.ff_dim,
                                   "feed-forward width (default 4 x dim)"),
                     "ff_dim", kgf.ff_dim);
    kgf.keys.add_double(c->add_option("--margin", kgf.cfg.margin, "margin (default 1.0)"),
                        "margin", kgf.cfg.margin);
    kgf.keys.add_double(c->add_option("--learning-rate", kgf.cfg.learning_rate,
                                      "SGD step size (default 0.1)"),
                        "learning_rate", kgf.cfg.learning_rate);
    kgf.keys.add_int(c->add_option("--epochs", kgf.cfg.epochs, "epochs (default 200)"), "epochs",
                     kgf.cfg.epochs);
    kgf.keys.add_int(c->add_option("--batch", kgf.cfg.batch,
                                   "ego samples per SGD step (default 128)"),
                     "batch", kgf.cfg.batch);
    kgf.keys.add_int(c->add_option("--k-in", kgf.cfg.k_in, "max incoming triples (default 2)"),
                     "k_in", kgf.cfg.k_in);
    kgf.keys.add_int(c->add_option("--k-out", kgf.cfg.k_out, "max outgoing triples (default 2)"),
                     "k_out", kgf.cfg.k_out);
    kgf.keys.add_string(c->add_option("--norm", kgf.norm, "energy norm: l1 or l2")
                            ->check(CLI::IsMember({"l1", "l2"})),
                        "norm", kgf.norm);
    kgf.keys.add_string(c->add_option("--negative", kgf.negative,
                                      "negative mode: substitute or reencode")
                            ->check(CLI::IsMember({"substitute", "reencode"})),
                        "negative", kgf.negative);
    kgf.keys.add_seed(c->add_option("--seed", kgf.cfg.seed, "training seed (default 42)"), "seed",
                      kgf.cfg.seed);
    kgf.keys.add_string(c->add_option("--out", kgf.out, "output directory")->required(), "out",
                        kgf.out);
    c->add_option("--config", kgf.config, "JSON config file; flags win");
  }

  ExportOpts exp;
  {
    CLI::App* c = app.add_subcommand("export", "export an embedding table from a checkpoint");
    exp.keys.add_string(c->add_option("--checkpoint", exp.checkpoint, "model checkpoint path")
                            ->required(),
                        "checkpoint", exp.checkpoint);
    exp.keys.add_string(c->add_option("--input", exp.input, "graph path (.tsv or .json)")
                            ->required(),
                        "input", exp.input);
    exp.keys.add_string(c->add_option("--mode", exp.mode, "base or encoded_mean")
                            ->check(CLI::IsMember({"base", "encoded_mean"})),
                        "mode", exp.mode);
    exp.keys.add_int(c->add_option("--k-samples", exp.k_samples,
                                   "ego samples per entity in encoded_mean (default 1)"),
                     "k_samples", exp.k_samples);
    exp.keys.add_int(c->add_option("--k-in", exp.k_in, "max incoming triples (default 2)"),
                     "k_in", exp.k_in);
    exp.keys.add_int(c->add_option("--k-out", exp.k_out, "max outgoing triples (default 2)"),
                     "k_out", exp.k_out);
    exp.keys.add_seed(c->add_option("--seed", exp.seed, "sampling seed (default 0)"), "seed",
                      exp.seed);
    exp.keys.add_string(c->add_option("--out", exp.out, "output directory")->required(), "out",
                        exp.out);
    c->add_option("--config", exp.config, "JSON config file; flags win");
  }

  EvalOpts eval;
  {
    CLI::App* c = app.add_subcommand("eval", "link-prediction metrics for an embedding table");
    eval.keys.add_string(c->add_option("--input", eval.input, "graph path (.tsv or .json)")
                             ->required(),
                         "input", eval.input);
    eval.keys.add_string(c->add_option("--embeddings", eval.embeddings, "embedding file path")
                             ->required(),
                         "embeddings", eval.embeddings);
    eval.keys.add_string(c->add_option("--test", eval.test,
                                       "label TSV of test triples (default: all graph triples)"),
                         "test", eval.test);
    eval.keys.add_string(c->add_option("--setting", eval.setting, "raw or filtered")
                             ->check(CLI::IsMember({"raw", "filtered"})),
                         "setting", eval.setting);
    eval.keys.add_string(c->add_option("--norm", eval.norm, "energy norm: l1 or l2")
                             ->check(CLI::IsMember({"l1", "l2"})),
                         "norm", eval.norm);
    eval.keys.add_string(c->add_option("--out", eval.out, "optional output directory"), "out",
                         eval.out);
    c->add_option("--config", eval.config, "JSON config file; flags win");
  }

  LinkOpts link;
  {
    CLI::App* c = app.add_subcommand("link", "dictionary entity linking, one document per line");
    link.keys.add_string(c->add_option("--dict", link.dict, "term<TAB>entity-id TSV path")
                             ->required(),
                         "dict", link.dict);
    link.keys.add_string(c->add_option("--text", link.text, "document file, one per line")
                             ->required(),
                         "text", link.text);
    link.keys.add_int(c->add_option("--min-len", link.min_len,
                                    "minimum span length in bytes (default 5)"),
                      "min_len", link.min_len);
    link.keys.add_string(c->add_option("--out", link.out, "optional output directory"), "out",
                         link.out);
    c->add_option("--config", link.config, "JSON config file; flags win");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand("ingest")) {
      if (!ingest.config.empty()) ingest.keys.merge(load_config_file(ingest.config));
      run_ingest(ingest);
    } else if (app.got_subcommand("stats")) {
      if (!stats.config.empty()) stats.keys.merge(load_config_file(stats.config));
      run_stats(stats);
    } else if (app.got_subcommand("sample")) {
      if (!sample.config.empty()) sample.keys.merge(load_config_file(sample.config));
      run_sample(sample);
    } else if (app.got_subcommand("train-transe")) {
      if (!transe.config.empty()) transe.keys.merge(load_config_file(transe.config));
      run_train_transe(transe);
    } else if (app.got_subcommand("train-kgformer")) {
      if (!kgf.config.empty()) kgf.keys.merge(load_config_file(kgf.config));
      run_train_kgformer(kgf);
    } else if (app.got_subcommand("export")) {
      if (!exp.config.empty()) exp.keys.merge(load_config_file(exp.config));
      run_export(exp);
    } else if (app.got_subcommand("eval")) {
      if (!eval.config.empty()) eval.keys.merge(load_config_file(eval.config));
      run_eval(eval);
    } else if (app.got_subcommand("link")) {
      if (!link.config.empty()) link.keys.merge(load_config_file(link.config));
      run_link(link);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
