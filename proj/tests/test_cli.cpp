// End-to-end tests for the kgt binary. The test runner passes the binary path
// as the last argument; everything runs through popen against temp dirs.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using Json = nlohmann::json;

static std::string g_cli;

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s [doctest args] <kgt binary>\n", argv[0]);
    return 1;
  }
  g_cli = argv[argc - 1];
  doctest::Context ctx(argc - 1, argv);
  return ctx.run();
}

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = "'" + g_cli + "' " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("kgt_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string cycle_tsv(int n) {
  std::string tsv;
  for (int i = 0; i < n; ++i)
    tsv += "n" + std::to_string(i) + "\tnext\tn" + std::to_string((i + 1) % n) + "\n";
  return tsv;
}

Json last_json_line(const std::string& out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  REQUIRE(!last.empty());
  return Json::parse(last);
}

std::vector<std::string> stdout_lines(const std::string& out) {
  std::istringstream in(out);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string q(const std::string& s) { return "'" + s + "'"; }

}  // namespace

TEST_CASE("help lists every command and every config key") {
  const RunResult top = run("--help");
  CHECK(top.code == 0);
  for (const char* cmd : {"ingest", "stats", "sample", "train-transe", "train-kgformer",
                          "export", "eval", "link"})
    CHECK(top.out.find(cmd) != std::string::npos);

  const std::vector<std::pair<std::string, std::vector<std::string>>> flags{
      {"ingest", {"--input", "--out", "--config"}},
      {"stats", {"--input", "--out", "--config"}},
      {"sample", {"--input", "--center", "--k-in", "--k-out", "--seed", "--out", "--config"}},
      {"train-transe",
       {"--input", "--dim", "--margin", "--learning-rate", "--epochs", "--batch", "--norm",
        "--seed", "--out", "--config"}},
      {"train-kgformer",
       {"--input", "--init", "--layers", "--heads", "--dim", "--ff-dim", "--margin",
        "--learning-rate", "--epochs", "--batch", "--k-in", "--k-out", "--norm", "--negative",
        "--seed", "--out", "--config"}},
      {"export",
       {"--checkpoint", "--input", "--mode", "--k-samples", "--k-in", "--k-out", "--seed",
        "--out", "--config"}},
      {"eval", {"--input", "--embeddings", "--test", "--setting", "--norm", "--out", "--config"}},
      {"link", {"--dict", "--text", "--min-len", "--out", "--config"}},
  };
  for (const auto& [cmd, expected] : flags) {
    const RunResult r = run(cmd + " --help");
    CHECK(r.code == 0);
    for (const std::string& flag : expected) {
      INFO(cmd << " help is missing " << flag);
      CHECK(r.out.find(flag) != std::string::npos);
    }
  }
}

TEST_CASE("usage problems exit 1") {
  CHECK(run("").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("stats --no-such-flag x").code == 1);
  CHECK(run("ingest --out somewhere").code == 1);  // missing required --input
  CHECK(run("train-transe --input x --out y --norm l3").code == 1);
  CHECK(run("train-transe --input x --out y --dim notanumber").code == 1);
  CHECK(run("eval --input x").code == 1);  // missing required --embeddings
}

TEST_CASE("data problems exit 2") {
  TempDir tmp;
  CHECK(run("stats --input " + q(tmp.file("missing.tsv"))).code == 2);

  write_file(tmp.file("bad.tsv"), "only_two\tfields\n");
  CHECK(run("stats --input " + q(tmp.file("bad.tsv"))).code == 2);

  write_file(tmp.file("g.tsv"), cycle_tsv(3));
  write_file(tmp.file("broken.json"), "{not json");
  CHECK(run("stats --input " + q(tmp.file("g.tsv")) + " --config " +
            q(tmp.file("broken.json")))
            .code == 2);

  write_file(tmp.file("unknown.json"), "{\"frobnicate\": 1}\n");
  CHECK(run("stats --input " + q(tmp.file("g.tsv")) + " --config " +
            q(tmp.file("unknown.json")))
            .code == 2);

  CHECK(run("sample --input " + q(tmp.file("g.tsv")) +
            " --center nowhere --out " + q(tmp.file("s")))
            .code == 2);

  write_file(tmp.file("short.emb"), "2 2\n0\t1 2\n1\t3 4\n");
  CHECK(run("eval --input " + q(tmp.file("g.tsv")) + " --embeddings " +
            q(tmp.file("short.emb")))
            .code == 2);  // 2 rows vs 4 vocabulary rows

  write_file(tmp.file("dict.tsv"), "term only\n");
  write_file(tmp.file("doc.txt"), "text\n");
  CHECK(run("link --dict " + q(tmp.file("dict.tsv")) + " --text " + q(tmp.file("doc.txt")))
            .code == 2);

  write_file(tmp.file("dict_ok.tsv"), "pneumonia\t3\n");
  CHECK(run("link --dict " + q(tmp.file("dict_ok.tsv")) + " --text " +
            q(tmp.file("doc.txt")) + " --min-len 0")
            .code == 2);
}

TEST_CASE("ingest writes graph json plus resolved config and reports counts") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(12) + "n0\tnext\tn1\n");  // one duplicate
  const std::string out = tmp.file("out");
  const RunResult r = run("ingest --input " + q(tmp.file("g.tsv")) + " --out " + q(out));
  REQUIRE(r.code == 0);
  const Json summary = last_json_line(r.out);
  CHECK(summary["command"] == "ingest");
  CHECK(summary["entities"] == 12);
  CHECK(summary["relations"] == 1);
  CHECK(summary["triples"] == 12);
  CHECK(summary["duplicates"] == 1);
  CHECK(fs::exists(out + "/graph.json"));
  const Json resolved = Json::parse(slurp(out + "/ingest.config.json"));
  CHECK(resolved["input"] == tmp.file("g.tsv"));
  CHECK(resolved["out"] == out);

  const RunResult stats = run("stats --input " + q(out + "/graph.json"));
  REQUIRE(stats.code == 0);
  const Json j = last_json_line(stats.out);
  CHECK(j["avg_in"] == 1.0);
  CHECK(j["avg_out"] == 1.0);
  CHECK(j["median_degree"] == 2.0);
}

TEST_CASE("stats reads tsv directly and honors --out") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(3));
  const std::string out = tmp.file("statsdir");
  const RunResult r = run("stats --input " + q(tmp.file("g.tsv")) + " --out " + q(out));
  REQUIRE(r.code == 0);
  const Json j = last_json_line(r.out);
  CHECK(j["avg_in"] == 1.0);
  CHECK(j["avg_out"] == 1.0);
  CHECK(j["median_degree"] == 2.0);
  CHECK(Json::parse(slurp(out + "/stats.json")) == j);
  CHECK(fs::exists(out + "/stats.config.json"));
}

TEST_CASE("sample accepts labels or numeric ids and writes the sample") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(8));
  const std::string out_a = tmp.file("a"), out_b = tmp.file("b");
  const RunResult by_label = run("sample --input " + q(tmp.file("g.tsv")) +
                                 " --center n3 --seed 5 --out " + q(out_a));
  REQUIRE(by_label.code == 0);
  const RunResult by_id = run("sample --input " + q(tmp.file("g.tsv")) +
                              " --center 3 --seed 5 --out " + q(out_b));
  REQUIRE(by_id.code == 0);
  CHECK(slurp(out_a + "/sample.json") == slurp(out_b + "/sample.json"));
  const Json sample = Json::parse(slurp(out_a + "/sample.json"));
  REQUIRE(sample.contains("nodes"));
  REQUIRE(sample.contains("positions"));
  REQUIRE(sample.contains("adjacency"));
  const Json summary = last_json_line(by_label.out);
  CHECK(summary["command"] == "sample");
  CHECK(summary["center"] == 3);
  CHECK(summary["nodes"] == sample["nodes"].size());
}

TEST_CASE("config values fill in, flags win, resolution is recorded") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(6));
  write_file(tmp.file("cfg.json"),
             "{\"dim\": 6, \"epochs\": 3, \"seed\": 7, \"batch\": 2}\n");
  const std::string out = tmp.file("run");
  const RunResult r = run("train-transe --input " + q(tmp.file("g.tsv")) + " --config " +
                          q(tmp.file("cfg.json")) + " --dim 4 --out " + q(out));
  REQUIRE(r.code == 0);
  const Json summary = last_json_line(r.out);
  CHECK(summary["command"] == "train-transe");
  CHECK(summary["epochs"] == 3);
  const Json resolved = Json::parse(slurp(out + "/train-transe.config.json"));
  CHECK(resolved["dim"] == 4);  // the flag beat the config value
  CHECK(resolved["epochs"] == 3);
  CHECK(resolved["seed"] == 7);
  CHECK(resolved["batch"] == 2);
  CHECK(resolved["norm"] == "l1");  // untouched default, still recorded

  std::ifstream emb(out + "/transe.emb");
  int rows = 0, dim = 0;
  emb >> rows >> dim;
  CHECK(rows == 7);  // 6 entities + 1 relation
  CHECK(dim == 4);
}

TEST_CASE("train then evaluate produces sane metrics") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(10));
  const std::string train_out = tmp.file("t");
  const RunResult train =
      run("train-transe --input " + q(tmp.file("g.tsv")) +
          " --dim 8 --epochs 30 --batch 5 --learning-rate 0.05 --seed 3 --out " + q(train_out));
  REQUIRE(train.code == 0);
  const Json tsum = last_json_line(train.out);
  CHECK(tsum["first_loss"].is_number());
  CHECK(tsum["final_loss"].is_number());
  CHECK(tsum["skipped_negatives"].is_number());

  const std::string eval_out = tmp.file("e");
  const RunResult ev = run("eval --input " + q(tmp.file("g.tsv")) + " --embeddings " +
                           q(train_out + "/transe.emb") + " --setting filtered --out " +
                           q(eval_out));
  REQUIRE(ev.code == 0);
  const Json report = last_json_line(ev.out);
  CHECK(report["setting"] == "filtered");
  CHECK(report["mr"].get<double>() >= 1.0);
  CHECK(report["mrr"].get<double>() > 0.0);
  CHECK(report["mrr"].get<double>() <= 1.0);
  CHECK(report["hits"]["10"].get<double>() >= 0.0);
  CHECK(report["hits"]["10"].get<double>() <= 1.0);
  CHECK(Json::parse(slurp(eval_out + "/report.json")) == report);
}

TEST_CASE("eval reads an explicit test-triple file and rejects unknown labels") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(6));
  const std::string train_out = tmp.file("t");
  REQUIRE(run("train-transe --input " + q(tmp.file("g.tsv")) +
              " --dim 4 --epochs 2 --batch 3 --out " + q(train_out))
              .code == 0);
  write_file(tmp.file("test.tsv"), "n0\tnext\tn1\nn2\tnext\tn3\n");
  const RunResult ok = run("eval --input " + q(tmp.file("g.tsv")) + " --embeddings " +
                           q(train_out + "/transe.emb") + " --test " + q(tmp.file("test.tsv")));
  CHECK(ok.code == 0);
  write_file(tmp.file("bad.tsv"), "n0\tnext\tbogus\n");
  CHECK(run("eval --input " + q(tmp.file("g.tsv")) + " --embeddings " +
            q(train_out + "/transe.emb") + " --test " + q(tmp.file("bad.tsv")))
            .code == 2);
}

TEST_CASE("encoder training, export, and evaluation chain together") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(6));
  const std::string kgf_out = tmp.file("k");
  const std::string common = "--layers 1 --heads 2 --dim 4 --ff-dim 8 --epochs 1 --batch 3 "
                             "--k-in 1 --k-out 1 --seed 11 ";
  const RunResult train = run("train-kgformer --input " + q(tmp.file("g.tsv")) + " " + common +
                              "--out " + q(kgf_out));
  REQUIRE(train.code == 0);
  const Json tsum = last_json_line(train.out);
  CHECK(tsum["command"] == "train-kgformer");
  CHECK(fs::exists(kgf_out + "/kgformer.ckpt"));
  const std::string loss_text = slurp(kgf_out + "/kgformer.loss.txt");
  CHECK(stdout_lines(loss_text).size() == 1);

  const std::string base_out = tmp.file("xb");
  const RunResult base = run("export --checkpoint " + q(kgf_out + "/kgformer.ckpt") +
                             " --input " + q(tmp.file("g.tsv")) + " --mode base --out " +
                             q(base_out));
  REQUIRE(base.code == 0);
  const Json bsum = last_json_line(base.out);
  CHECK(bsum["rows"] == 7);
  CHECK(bsum["isolated_fallbacks"] == 0);

  const std::string enc_out = tmp.file("xe");
  const RunResult enc = run("export --checkpoint " + q(kgf_out + "/kgformer.ckpt") +
                            " --input " + q(tmp.file("g.tsv")) +
                            " --mode encoded_mean --k-samples 2 --seed 4 --out " + q(enc_out));
  REQUIRE(enc.code == 0);
  CHECK(slurp(base_out + "/export.emb") != slurp(enc_out + "/export.emb"));

  const RunResult ev = run("eval --input " + q(tmp.file("g.tsv")) + " --embeddings " +
                           q(enc_out + "/export.emb") + " --setting raw");
  CHECK(ev.code == 0);
}

TEST_CASE("zero-epoch encoder training keeps the provided initialization") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(6));
  // 7 vocabulary rows (6 entities + 1 relation), width 4, values exact in f32.
  std::string emb = "7 4\n";
  for (int i = 0; i < 7; ++i) {
    emb += std::to_string(i);
    for (int j = 0; j < 4; ++j) emb += (j == 0 ? "\t" : " ") + std::to_string(i) + ".25";
    emb += "\n";
  }
  write_file(tmp.file("init.emb"), emb);
  const std::string kgf_out = tmp.file("k");
  REQUIRE(run("train-kgformer --input " + q(tmp.file("g.tsv")) + " --init " +
              q(tmp.file("init.emb")) +
              " --layers 1 --heads 2 --dim 4 --ff-dim 8 --epochs 0 --out " + q(kgf_out))
              .code == 0);
  const std::string exp_out = tmp.file("x");
  REQUIRE(run("export --checkpoint " + q(kgf_out + "/kgformer.ckpt") + " --input " +
              q(tmp.file("g.tsv")) + " --mode base --out " + q(exp_out))
              .code == 0);
  std::ifstream table(exp_out + "/export.emb");
  int rows = 0, dim = 0;
  table >> rows >> dim;
  REQUIRE(rows == 7);
  REQUIRE(dim == 4);
  for (int i = 0; i < 7; ++i) {
    int row_id = -1;
    table >> row_id;
    CHECK(row_id == i);
    for (int j = 0; j < 4; ++j) {
      double v = 0.0;
      table >> v;
      CHECK(v == static_cast<double>(i) + 0.25);  // exact at f32, quarters roundtrip
    }
  }

  // A shape mismatch in --init is a data error.
  write_file(tmp.file("narrow.emb"), "7 2\n0\t1 2\n1\t1 2\n2\t1 2\n3\t1 2\n4\t1 2\n5\t1 2\n6\t1 2\n");
  CHECK(run("train-kgformer --input " + q(tmp.file("g.tsv")) + " --init " +
            q(tmp.file("narrow.emb")) +
            " --layers 1 --heads 2 --dim 4 --ff-dim 8 --epochs 0 --out " + q(tmp.file("k2")))
            .code == 2);
}

TEST_CASE("link emits one json record per line plus a summary") {
  TempDir tmp;
  write_file(tmp.file("dict.tsv"), "Bacterial Pneumonia\t7\npneumonia\t3\n");
  write_file(tmp.file("docs.txt"),
             "bacterial pneumonia is worse than pneumonia\n"
             "no matches on this line\n"
             "PNEUMONIA again\n");
  const std::string out = tmp.file("links");
  const RunResult r = run("link --dict " + q(tmp.file("dict.tsv")) + " --text " +
                          q(tmp.file("docs.txt")) + " --out " + q(out));
  REQUIRE(r.code == 0);
  const std::vector<std::string> lines = stdout_lines(r.out);
  REQUIRE(lines.size() == 4);  // three records and one summary
  const Json rec1 = Json::parse(lines[0]);
  CHECK(rec1["line"] == 1);
  REQUIRE(rec1["spans"].size() == 2);
  CHECK(rec1["spans"][0]["start"] == 0);
  CHECK(rec1["spans"][0]["end"] == 19);
  CHECK(rec1["spans"][0]["entity"] == 7);
  CHECK(rec1["spans"][1]["start"] == 34);
  CHECK(rec1["spans"][1]["entity"] == 3);
  CHECK(Json::parse(lines[1])["spans"].empty());
  CHECK(Json::parse(lines[2])["spans"].size() == 1);
  const Json summary = Json::parse(lines[3]);
  CHECK(summary["command"] == "link");
  CHECK(summary["lines"] == 3);
  CHECK(summary["spans"] == 3);
  CHECK(slurp(out + "/links.jsonl") == lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n");
}

TEST_CASE("seeded runs are byte-reproducible") {
  TempDir tmp;
  write_file(tmp.file("g.tsv"), cycle_tsv(8));
  const std::string a = tmp.file("a"), b = tmp.file("b");
  const std::string transe_args = "train-transe --input " + q(tmp.file("g.tsv")) +
                                  " --dim 6 --epochs 4 --batch 4 --seed 99 --out ";
  const RunResult ra = run(transe_args + q(a));
  const RunResult rb = run(transe_args + q(b));
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(slurp(a + "/transe.emb") == slurp(b + "/transe.emb"));

  const std::string ka = tmp.file("ka"), kb = tmp.file("kb");
  const std::string kgf_args = "train-kgformer --input " + q(tmp.file("g.tsv")) +
                               " --layers 1 --heads 2 --dim 4 --ff-dim 8 --epochs 1 --batch 4 "
                               "--k-in 1 --k-out 1 --seed 123 --out ";
  const RunResult rka = run(kgf_args + q(ka));
  const RunResult rkb = run(kgf_args + q(kb));
  REQUIRE(rka.code == 0);
  REQUIRE(rkb.code == 0);
  CHECK(slurp(ka + "/kgformer.ckpt") == slurp(kb + "/kgformer.ckpt"));
  CHECK(slurp(ka + "/kgformer.loss.txt") == slurp(kb + "/kgformer.loss.txt"));
}
