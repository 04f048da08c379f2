#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hccf/cli.hpp"
#include "hccf/dataio.hpp"
#include "hccf/eval.hpp"
#include "hccf/model.hpp"
#include "hccf/trainer.hpp"

using namespace hccf;
namespace fs = std::filesystem;

namespace {

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"hccf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One small prepared dataset + trained checkpoint reused by the eval and
// analyze cases; built once per process run.
struct Workspace {
  fs::path data;
  fs::path run;

  Workspace() {
    data = fs::temp_directory_path() / "hccf_cli_ws_data";
    run = fs::temp_directory_path() / "hccf_cli_ws_run";
    fs::remove_all(data);
    fs::remove_all(run);
    REQUIRE(cli({"prepare", "--synthetic", "blocks:40,40,0.45,0.02,5", "--output",
                 data.string(), "--seed", "3"}) == 0);
    REQUIRE(cli({"train", "--data", data.string(), "--out", run.string(), "--embed-dim", "8",
                 "--hyperedges", "6", "--hyper-layers", "2", "--epochs", "4", "--batch-size",
                 "64", "--seed", "11"}) == 0);
  }
};

Workspace& workspace() {
  static Workspace ws;
  return ws;
}

}  // namespace

TEST_CASE("prepare splits a 10-interaction toy file 7/1/2") {
  fs::path dir = fresh_dir("hccf_cli_prep");
  fs::path input = dir / "toy.csv";
  {
    std::ofstream out(input);
    for (int i = 0; i < 10; ++i) out << "alice,item" << i << "\n";
  }
  fs::path out_dir = dir / "splits";
  CHECK(cli({"prepare", "--input", input.string(), "--output", out_dir.string(), "--seed",
             "7"}) == 0);
  CHECK(count_lines(read_file(out_dir / "train.tsv")) == 7);
  CHECK(count_lines(read_file(out_dir / "val.tsv")) == 1);
  CHECK(count_lines(read_file(out_dir / "test.tsv")) == 2);
  CHECK(read_file(out_dir / "manifest.json").find("\"seed\": 7") != std::string::npos);
}

TEST_CASE("prepare is byte-identical under the same seed") {
  fs::path d1 = fresh_dir("hccf_cli_rep1");
  fs::path d2 = fresh_dir("hccf_cli_rep2");
  for (const auto& d : {d1, d2}) {
    REQUIRE(cli({"prepare", "--synthetic", "blocks:30,30,0.4,0.02,9", "--output", d.string(),
                 "--seed", "4"}) == 0);
  }
  for (const char* f : {"train.tsv", "val.tsv", "test.tsv", "manifest.json"})
    CHECK(read_file(d1 / f) == read_file(d2 / f));
}

TEST_CASE("prepare applies the k-core filter iteratively") {
  fs::path dir = fresh_dir("hccf_cli_kcore");
  fs::path input = dir / "chain.tsv";
  {
    // chain u1-i1-u2-i2-u3 plus a 2x2 biclique that must survive
    std::ofstream out(input);
    out << "u1\ti1\nu2\ti1\nu2\ti2\nu3\ti2\n";
    out << "a\tx\na\ty\nb\tx\nb\ty\n";
  }
  fs::path out_dir = dir / "splits";
  CHECK(cli({"prepare", "--input", input.string(), "--output", out_dir.string(), "--min-degree",
             "2", "--seed", "1"}) == 0);
  // only the biclique's 4 interactions remain, all in train (n < 3 per user)
  CHECK(count_lines(read_file(out_dir / "train.tsv")) == 4);
  CHECK(count_lines(read_file(out_dir / "val.tsv")) == 0);
  CHECK(count_lines(read_file(out_dir / "test.tsv")) == 0);
}

TEST_CASE("train with --epochs 0 writes an initial checkpoint and exits 0") {
  fs::path out = fresh_dir("hccf_cli_e0");
  CHECK(cli({"train", "--data", workspace().data.string(), "--out", out.string(), "--epochs",
             "0", "--embed-dim", "4", "--hyperedges", "3"}) == 0);
  CHECK(fs::exists(out / "checkpoint/manifest.json"));
  CHECK(fs::exists(out / "checkpoint/params/user_embed.f32"));
  CHECK(read_file(out / "train_log.jsonl").empty());
}

TEST_CASE("ablation flags land in the config echo and the loss report") {
  fs::path out = fresh_dir("hccf_cli_flags");
  CHECK(cli({"train", "--data", workspace().data.string(), "--out", out.string(), "--no-hyper",
             "--no-ccl", "--epochs", "2", "--embed-dim", "4", "--hyperedges", "3"}) == 0);
  const std::string echo = read_file(out / "config.txt");
  CHECK(echo.find("hyper = false") != std::string::npos);
  CHECK(echo.find("ccl = false") != std::string::npos);
  const std::string log = read_file(out / "train_log.jsonl");
  CHECK(count_lines(log) == 2);
  // hypergraph contrastive terms are absent from every record
  std::istringstream lines(log);
  std::string line;
  while (std::getline(lines, line)) {
    CHECK(line.find("\"infonce_user\":0.0") != std::string::npos);
    CHECK(line.find("\"infonce_item\":0.0") != std::string::npos);
  }
}

TEST_CASE("config file keys are applied and overridden by the command line") {
  fs::path dir = fresh_dir("hccf_cli_cfg");
  fs::path cfg = dir / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "embed-dim = 4\n";
    out << "hyperedges = 3\n";
    out << "epochs = 1\n";
    out << "seed = 33\n";
  }
  fs::path out_dir = dir / "run";
  CHECK(cli({"train", "--data", workspace().data.string(), "--out", out_dir.string(), "--config",
             cfg.string(), "--epochs", "2"}) == 0);
  const std::string echo = read_file(out_dir / "config.txt");
  CHECK(echo.find("embed-dim = 4") != std::string::npos);
  CHECK(echo.find("seed = 33") != std::string::npos);
  CHECK(echo.find("epochs = 2") != std::string::npos);  // command line wins
}

TEST_CASE("unknown configuration keys are rejected with exit 2") {
  fs::path dir = fresh_dir("hccf_cli_badcfg");
  fs::path cfg = dir / "bad.cfg";
  {
    std::ofstream out(cfg);
    out << "embed-dims = 4\n";  // typo
  }
  CHECK(cli({"train", "--data", workspace().data.string(), "--out", (dir / "o").string(),
             "--config", cfg.string()}) == 2);
  CHECK(cli({"train", "--data", workspace().data.string(), "--out", (dir / "o").string(),
             "--not-a-flag"}) == 2);
}

TEST_CASE("eval writes rows for every cutoff and refuses train truth by default") {
  Workspace& ws = workspace();
  fs::path out = fresh_dir("hccf_cli_eval");
  CHECK(cli({"eval", "--checkpoint", (ws.run / "checkpoint").string(), "--data",
             ws.data.string(), "--out", out.string(), "--cutoffs", "20,40"}) == 0);
  const std::string text = read_file(out / "eval_report.txt");
  CHECK(text.find("recall@20 = ") != std::string::npos);
  CHECK(text.find("recall@40 = ") != std::string::npos);
  CHECK(text.find("ndcg@40 = ") != std::string::npos);
  const std::string csv = read_file(out / "eval_report.csv");
  CHECK(csv.find("recall@20,ndcg@20,recall@40,ndcg@40") != std::string::npos);

  CHECK(cli({"eval", "--checkpoint", (ws.run / "checkpoint").string(), "--data",
             ws.data.string(), "--out", out.string(), "--split", "train"}) == 2);
  CHECK(cli({"eval", "--checkpoint", (ws.run / "checkpoint").string(), "--data",
             ws.data.string(), "--out", out.string(), "--split", "train",
             "--include-train"}) == 0);
}

TEST_CASE("CLI eval equals the library computation exactly") {
  Workspace& ws = workspace();
  fs::path out = fresh_dir("hccf_cli_equiv");
  REQUIRE(cli({"eval", "--checkpoint", (ws.run / "checkpoint").string(), "--data",
               ws.data.string(), "--out", out.string(), "--cutoffs", "20"}) == 0);

  Checkpoint ckpt = load_checkpoint((ws.run / "checkpoint").string());
  ModelParams params = params_from_checkpoint(ckpt);
  ModelConfig mcfg = model_config_from_checkpoint(ckpt);
  InteractionDataset ds = load_split_dir(ws.data.string());
  auto adj = build_normalized_adjacency(ds);
  LayerStates states = forward(params, mcfg, adj.matrix, nullptr);
  auto top = rank_all(states.user.psi.value(), states.item.psi.value(),
                      ds.items_by_user(Split::Train), ds.items_by_user(Split::Test), 20);
  MetricSummary lib = summarize_metrics(top, ds.items_by_user(Split::Test), 20);

  // parse the CSV row back; %.17g round-trips doubles exactly
  std::istringstream csv(read_file(out / "eval_report.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  std::vector<std::string> cells;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() == 5);  // users, recall@20, ndcg@20, mad_user, mad_item
  CHECK(std::stoul(cells[0]) == lib.users_evaluated);
  CHECK(std::stod(cells[1]) == lib.recall);
  CHECK(std::stod(cells[2]) == lib.ndcg);
}

TEST_CASE("analyze mad on an identical-row dummy checkpoint reports 0") {
  Workspace& ws = workspace();
  InteractionDataset ds = load_split_dir(ws.data.string());

  ModelConfig cfg;
  cfg.embed_dim = 3;
  cfg.layers = 1;
  cfg.hyperedges = 2;
  cfg.hyper_layers = 1;
  ModelParams params = ModelParams::init(cfg, ds.num_users, ds.num_items, 1);
  // identical rows with an exactly-representable norm (0,3,4)
  for (std::size_t i = 0; i < params.user_embed.rows(); ++i) {
    params.user_embed.mutable_value().at(i, 0) = 0.0;
    params.user_embed.mutable_value().at(i, 1) = 3.0;
    params.user_embed.mutable_value().at(i, 2) = 4.0;
  }
  for (std::size_t i = 0; i < params.item_embed.rows(); ++i) {
    params.item_embed.mutable_value().at(i, 0) = 0.0;
    params.item_embed.mutable_value().at(i, 1) = 3.0;
    params.item_embed.mutable_value().at(i, 2) = 4.0;
  }
  Checkpoint ckpt = make_checkpoint(params, cfg, LossConfig{}, TrainConfig{}, 0, 0.0);
  fs::path ckpt_dir = fresh_dir("hccf_cli_dummy_ckpt");
  save_checkpoint(ckpt, ckpt_dir.string());

  fs::path out = fresh_dir("hccf_cli_mad");
  CHECK(cli({"analyze", "--mode", "mad", "--checkpoint", ckpt_dir.string(), "--data",
             ws.data.string(), "--out", out.string(), "--embeddings", "e0"}) == 0);
  const std::string csv = read_file(out / "mad.csv");
  CHECK(csv.find("user,e0,0\n") != std::string::npos);
  CHECK(csv.find("item,e0,0\n") != std::string::npos);
}

TEST_CASE("analyze gradcurve peaks near the analytic argmax") {
  fs::path out = fresh_dir("hccf_cli_curve");
  CHECK(cli({"analyze", "--mode", "gradcurve", "--tau", "1.0", "--grid-step", "0.001", "--out",
             out.string()}) == 0);
  std::istringstream csv(read_file(out / "gradcurve.csv"));
  std::string line;
  std::getline(csv, line);  // header
  double best_x = -2.0, best_v = -1.0;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    const double x = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  CHECK(std::abs(best_x - 0.618) < 0.002);
}

TEST_CASE("analyze sparsity emits one row per bucket") {
  Workspace& ws = workspace();
  fs::path out = fresh_dir("hccf_cli_sparsity");
  CHECK(cli({"analyze", "--mode", "sparsity", "--checkpoint", (ws.run / "checkpoint").string(),
             "--data", ws.data.string(), "--out", out.string(), "--buckets", "5,10,20"}) == 0);
  const std::string csv = read_file(out / "sparsity.csv");
  CHECK(count_lines(csv) == 5);  // header + 4 buckets
  CHECK(csv.find("20,inf,") != std::string::npos);
}

TEST_CASE("the installed binary behaves like the in-process entry point") {
  fs::path dir = fresh_dir("hccf_cli_bin");
  const std::string cmd = std::string(HCCF_CLI_BIN) + " prepare --synthetic blocks:20,20,0.4,0.05,2 --output " +
                          (dir / "d").string() + " --seed 2 > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  REQUIRE(cli({"prepare", "--synthetic", "blocks:20,20,0.4,0.05,2", "--output",
               (dir / "d2").string(), "--seed", "2"}) == 0);
  for (const char* f : {"train.tsv", "val.tsv", "test.tsv", "manifest.json"})
    CHECK(read_file(dir / "d" / f) == read_file(dir / "d2" / f));
}

TEST_CASE("missing data paths exit 3") {
  CHECK(cli({"train", "--data", "/nonexistent/data", "--out",
             fresh_dir("hccf_cli_x").string()}) == 3);
  CHECK(cli({"eval", "--checkpoint", "/nonexistent/ckpt", "--data", "/nonexistent/data"}) == 3);
}
