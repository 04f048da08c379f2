#include "hccf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hccf/dataio.hpp"
#include "hccf/errors.hpp"
#include "hccf/eval.hpp"
#include "hccf/log.hpp"
#include "hccf/model.hpp"
#include "hccf/objective.hpp"
#include "hccf/trainer.hpp"
#include "hccf/version.hpp"

namespace hccf {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(s)) {
    if (v < 0 || v != std::floor(v)) throw ConfigError("expected integer list, got " + s);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

// Expands `--config <file>` into synthetic tokens placed before the user's
// own flags, so explicit command-line options override file values under a
// take-last policy. The file is flat `key = value` text; '#' starts a
// comment. Boolean values map onto the --key / --no-key flag pair; unknown
// keys surface as ordinary unexpected-argument parse errors naming the key.
std::vector<std::string> expand_config_args(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.size() < 2 || args[1] != "train") return args;

  std::string config_path;
  std::vector<std::string> rest;
  rest.push_back(args[0]);
  rest.push_back(args[1]);
  for (std::size_t k = 2; k < args.size(); ++k) {
    if (args[k] == "--config") {
      if (k + 1 >= args.size()) throw ConfigError("--config expects a file path");
      config_path = args[++k];
    } else if (args[k].rfind("--config=", 0) == 0) {
      config_path = args[k].substr(9);
    } else {
      rest.push_back(args[k]);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file " + config_path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(config_path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(config_path + ":" + std::to_string(line_no) + ": expected key = value");
    if (key == "config")
      throw ConfigError(config_path + ": config files cannot nest");
    static const std::set<std::string> flag_keys = {
        "hyper", "hhm", "lowrank", "ccl", "tied-hyper-maps", "per-layer-structure",
        "rescale-dropout"};
    if (flag_keys.count(key)) {
      if (value == "true" || value == "1" || value == "yes" || value == "on")
        tokens.push_back("--" + key);
      else if (value == "false" || value == "0" || value == "no" || value == "off")
        tokens.push_back("--no-" + key);
      else
        throw ConfigError(config_path + ":" + std::to_string(line_no) + ": " + key +
                          " expects a boolean");
    } else {
      tokens.push_back("--" + key);
      tokens.push_back(value);
    }
  }

  std::vector<std::string> merged;
  merged.push_back(rest[0]);
  merged.push_back(rest[1]);
  merged.insert(merged.end(), tokens.begin(), tokens.end());
  merged.insert(merged.end(), rest.begin() + 2, rest.end());
  return merged;
}

// All knobs of a run in one bag; subcommands bind CLI11 options onto it.
struct RunOptions {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  std::string neg_scope = "all";

  void finalize() {
    if (neg_scope == "all") loss.negatives_scope = NegativeScope::AllNodes;
    else if (neg_scope == "batch") loss.negatives_scope = NegativeScope::Batch;
    else throw ConfigError("neg-scope must be 'all' or 'batch'");
    loss.contrastive_enabled = model.ccl;
  }
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--embed-dim", o.model.embed_dim, "embedding dimension d");
  cmd->add_option("--layers", o.model.layers, "graph propagation layers L");
  cmd->add_option("--hyperedges", o.model.hyperedges, "hyperedge count H");
  cmd->add_option("--hyper-layers", o.model.hyper_layers, "hyperedge mapping layers c");
  cmd->add_option("--dropout", o.model.dropout, "edge/structure dropout rate");
  cmd->add_flag("--hyper,!--no-hyper", o.model.hyper, "hypergraph branch");
  cmd->add_flag("--hhm,!--no-hhm", o.model.hhm, "hierarchical hyperedge mapping");
  cmd->add_flag("--lowrank,!--no-lowrank", o.model.lowrank, "low-rank structure matrices");
  cmd->add_flag("--ccl,!--no-ccl", o.model.ccl, "cross-view contrastive objective");
  cmd->add_flag("--tied-hyper-maps,!--no-tied-hyper-maps", o.model.tied_hyper_maps,
                "share one projection across mapping layers");
  cmd->add_flag("--per-layer-structure,!--no-per-layer-structure", o.model.per_layer_structure,
                "recompute structure matrices from each layer's embeddings");
  cmd->add_flag("--rescale-dropout,!--no-rescale-dropout", o.model.rescale_dropout,
                "scale kept entries by 1/(1-rate)");
  cmd->add_option("--init-bound-cap", o.model.init_bound_cap,
                  "upper bound on the Xavier init half-width (0 disables)");
  cmd->add_option("--lambda1", o.loss.lambda1, "contrastive weight");
  cmd->add_option("--lambda2", o.loss.lambda2, "weight decay coefficient");
  cmd->add_option("--tau", o.loss.tau, "InfoNCE temperature");
  cmd->add_option("--samples", o.loss.samples_per_anchor, "positives/negatives per anchor S");
  cmd->add_option("--neg-scope", o.neg_scope, "contrastive denominator: all | batch");
  cmd->add_option("--lr", o.train.lr, "learning rate");
  cmd->add_option("--lr-decay", o.train.lr_decay, "per-epoch lr decay factor");
  cmd->add_option("--epochs", o.train.epochs, "max training epochs");
  cmd->add_option("--batch-size", o.train.batch_size, "anchors per batch");
  cmd->add_option("--patience", o.train.patience, "early-stop patience (epochs)");
  cmd->add_option("--early-stop-cutoff", o.train.early_stop_cutoff,
                  "validation Recall@N cutoff");
  cmd->add_option("--seed", o.train.seed, "master seed");
}

std::string resolved_config_text(const RunOptions& o) {
  std::ostringstream out;
  out << "embed-dim = " << o.model.embed_dim << '\n';
  out << "layers = " << o.model.layers << '\n';
  out << "hyperedges = " << o.model.hyperedges << '\n';
  out << "hyper-layers = " << o.model.hyper_layers << '\n';
  out << "dropout = " << fmt_double(o.model.dropout) << '\n';
  out << "hyper = " << (o.model.hyper ? "true" : "false") << '\n';
  out << "hhm = " << (o.model.hhm ? "true" : "false") << '\n';
  out << "lowrank = " << (o.model.lowrank ? "true" : "false") << '\n';
  out << "ccl = " << (o.model.ccl ? "true" : "false") << '\n';
  out << "tied-hyper-maps = " << (o.model.tied_hyper_maps ? "true" : "false") << '\n';
  out << "per-layer-structure = " << (o.model.per_layer_structure ? "true" : "false") << '\n';
  out << "rescale-dropout = " << (o.model.rescale_dropout ? "true" : "false") << '\n';
  out << "init-bound-cap = " << fmt_double(o.model.init_bound_cap) << '\n';
  out << "lambda1 = " << fmt_double(o.loss.lambda1) << '\n';
  out << "lambda2 = " << fmt_double(o.loss.lambda2) << '\n';
  out << "tau = " << fmt_double(o.loss.tau) << '\n';
  out << "samples = " << o.loss.samples_per_anchor << '\n';
  out << "neg-scope = " << (o.loss.negatives_scope == NegativeScope::Batch ? "batch" : "all")
      << '\n';
  out << "lr = " << fmt_double(o.train.lr) << '\n';
  out << "lr-decay = " << fmt_double(o.train.lr_decay) << '\n';
  out << "epochs = " << o.train.epochs << '\n';
  out << "batch-size = " << o.train.batch_size << '\n';
  out << "patience = " << o.train.patience << '\n';
  out << "early-stop-cutoff = " << o.train.early_stop_cutoff << '\n';
  out << "seed = " << o.train.seed << '\n';
  return out.str();
}

// --- prepare ---------------------------------------------------------------

struct PrepareOptions {
  std::string input;
  std::string synthetic;
  std::string format = "auto";
  std::string output;
  std::string ratios = "0.7,0.1,0.2";
  std::uint64_t seed = 1;
  std::size_t min_degree = 0;
};

InteractionDataset generate_synthetic(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  if (colon == std::string::npos || spec.substr(0, colon) != "blocks")
    throw ConfigError("--synthetic expects blocks:U,V,p_in,p_out,seed");
  const auto vals = parse_double_list(spec.substr(colon + 1));
  if (vals.size() != 5) throw ConfigError("--synthetic expects blocks:U,V,p_in,p_out,seed");
  return synthetic_blocks(static_cast<std::size_t>(vals[0]), static_cast<std::size_t>(vals[1]),
                          vals[2], vals[3], static_cast<std::uint64_t>(vals[4]));
}

int cmd_prepare(const PrepareOptions& o) {
  if (o.input.empty() == o.synthetic.empty())
    throw ConfigError("prepare needs exactly one of --input or --synthetic");
  InteractionDataset ds;
  if (!o.synthetic.empty()) {
    ds = generate_synthetic(o.synthetic);
  } else {
    FileFormat fmt;
    if (o.format == "tsv") fmt = FileFormat::Tsv;
    else if (o.format == "csv") fmt = FileFormat::Csv;
    else if (o.format == "auto")
      fmt = o.input.size() >= 4 && o.input.substr(o.input.size() - 4) == ".csv"
                ? FileFormat::Csv
                : FileFormat::Tsv;
    else throw ConfigError("--format must be tsv, csv or auto");
    ds = load_interactions(o.input, fmt);
  }
  if (o.min_degree > 0) ds = kcore_filter(ds, o.min_degree);
  if (ds.interactions.empty()) throw DataError("prepare: no interactions left");

  const auto rv = parse_double_list(o.ratios);
  if (rv.size() != 3) throw ConfigError("--ratios expects three comma-separated values");
  std::array<double, 3> ratios{rv[0], rv[1], rv[2]};
  split(ds, ratios, o.seed);
  save_split_dir(ds, o.output, o.seed, ratios);
  log_info("prepare: wrote " + o.output + " (" + std::to_string(ds.num_users) + " users, " +
           std::to_string(ds.num_items) + " items, " + std::to_string(ds.interactions.size()) +
           " interactions)");
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainCmdOptions {
  std::string data;
  std::string out;
  RunOptions run;
};

int cmd_train(const TrainCmdOptions& o, const std::vector<std::string>& argv_echo) {
  InteractionDataset ds = load_split_dir(o.data);
  std::filesystem::create_directories(o.out);

  write_file(o.out + "/config.txt", resolved_config_text(o.run));
  json info;
  info["version"] = kVersion;
  info["command"] = argv_echo;
  info["seed"] = o.run.train.seed;
  info["data"] = o.data;
  write_file(o.out + "/run_info.json", info.dump(2) + "\n");

  FitResult result = fit(ds, o.run.model, o.run.loss, o.run.train);

  std::ostringstream log_lines;
  for (const EpochRecord& rec : result.log) log_lines << epoch_record_json(rec).dump() << '\n';
  write_file(o.out + "/train_log.jsonl", log_lines.str());

  std::ostringstream timings;
  timings << "epoch,seconds\n";
  for (std::size_t k = 0; k < result.epoch_seconds.size(); ++k)
    timings << k << ',' << fmt_double(result.epoch_seconds[k]) << '\n';
  write_file(o.out + "/timings.csv", timings.str());

  save_checkpoint(result.best, o.out + "/checkpoint");
  log_info("train: best val recall@" + std::to_string(o.run.train.early_stop_cutoff) + " = " +
           fmt_double(result.best_val_recall) + " at epoch " +
           std::to_string(result.best_epoch) + "; checkpoint in " + o.out + "/checkpoint");
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalCmdOptions {
  std::string checkpoint;
  std::string data;
  std::string out = ".";
  std::string cutoffs = "20,40";
  std::string split_name = "test";
  bool include_train = false;
  std::size_t mad_cap = 2000;
};

Split parse_split_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ConfigError("--split must be train, val or test");
}

struct LoadedModel {
  Checkpoint ckpt;
  ModelParams params;
  ModelConfig model_cfg;
  InteractionDataset ds;
  NormalizedAdjacency adj;
};

LoadedModel load_model_and_data(const std::string& checkpoint_dir, const std::string& data_dir) {
  LoadedModel lm;
  lm.ckpt = load_checkpoint(checkpoint_dir);
  lm.params = params_from_checkpoint(lm.ckpt);
  lm.model_cfg = model_config_from_checkpoint(lm.ckpt);
  lm.ds = load_split_dir(data_dir);
  if (lm.ds.num_users != lm.params.num_users || lm.ds.num_items != lm.params.num_items)
    throw IntegrityError("checkpoint shape (" + std::to_string(lm.params.num_users) + "x" +
                         std::to_string(lm.params.num_items) +
                         ") does not match dataset (" + std::to_string(lm.ds.num_users) + "x" +
                         std::to_string(lm.ds.num_items) + ")");
  lm.adj = build_normalized_adjacency(lm.ds);
  return lm;
}

int cmd_eval(const EvalCmdOptions& o) {
  const Split truth_split = parse_split_name(o.split_name);
  if (truth_split == Split::Train && !o.include_train)
    throw ConfigError("evaluating the train split as truth requires --include-train");

  LoadedModel lm = load_model_and_data(o.checkpoint, o.data);
  LayerStates states = forward(lm.params, lm.model_cfg, lm.adj.matrix, nullptr);
  const DenseMatrix& psi_u = states.user.psi.value();
  const DenseMatrix& psi_v = states.item.psi.value();

  const auto train_items = lm.ds.items_by_user(Split::Train);
  const auto truth_items = lm.ds.items_by_user(truth_split);
  const bool mask_train = !o.include_train;

  EvalReport report;
  report.cutoffs = parse_size_list(o.cutoffs);
  if (report.cutoffs.empty()) throw ConfigError("--cutoffs must list at least one cutoff");
  for (std::size_t n : report.cutoffs) {
    auto top = rank_all(psi_u, psi_v, train_items, truth_items, n, mask_train);
    report.per_cutoff.push_back(summarize_metrics(top, truth_items, n));
  }
  report.users_evaluated = report.per_cutoff.front().users_evaluated;

  const std::uint64_t seed = lm.ckpt.manifest.at("train").at("seed");
  Rng mad_rng_u(mix_seed(seed, hash_str("mad_user")));
  Rng mad_rng_i(mix_seed(seed, hash_str("mad_item")));
  report.mad_user = mad(psi_u, o.mad_cap, mad_rng_u);
  report.mad_item = mad(psi_v, o.mad_cap, mad_rng_i);

  std::filesystem::create_directories(o.out);
  write_file(o.out + "/eval_report.txt", report.to_text());
  write_file(o.out + "/eval_report.csv", report.to_csv());
  std::fputs(report.to_text().c_str(), stdout);
  return 0;
}

// --- analyze -----------------------------------------------------------------

struct AnalyzeCmdOptions {
  std::string checkpoint;
  std::string data;
  std::string mode;
  std::string out = ".";
  std::string embeddings = "psi";
  double tau = 1.0;
  double grid_step = 0.001;
  std::string buckets = "5,10,20,40,80";
  std::size_t cutoff = 20;
  std::size_t mad_cap = 2000;
};

// Picks the requested embedding matrix (psi, e0, or e<l>) for one side.
const DenseMatrix& select_embeddings(const LayerStates& states, const SideStates& side,
                                     const std::string& which) {
  if (which == "psi") return side.psi.value();
  if (which.size() >= 2 && which[0] == 'e') {
    const std::size_t l = static_cast<std::size_t>(std::stoul(which.substr(1)));
    if (l >= side.embeddings.size())
      throw ConfigError("--embeddings e" + std::to_string(l) + " exceeds layer count " +
                        std::to_string(states.layers));
    return side.embeddings[l].value();
  }
  throw ConfigError("--embeddings must be psi, e0, e1, ...");
}

int cmd_analyze(const AnalyzeCmdOptions& o) {
  std::filesystem::create_directories(o.out);
  if (o.mode == "gradcurve") {
    if (o.grid_step <= 0.0 || o.grid_step > 1.0)
      throw ConfigError("--grid-step must be in (0, 1]");
    std::vector<double> grid;
    for (double x = -1.0; x <= 1.0 + 1e-12; x += o.grid_step)
      grid.push_back(std::min(x, 1.0));
    GradCurve curve = grad_curve(o.tau, grid);
    std::ostringstream csv;
    csv << "x,norm\n";
    for (std::size_t k = 0; k < curve.x.size(); ++k)
      csv << fmt_double(curve.x[k]) << ',' << fmt_double(curve.norm[k]) << '\n';
    write_file(o.out + "/gradcurve.csv", csv.str());
    return 0;
  }

  LoadedModel lm = load_model_and_data(o.checkpoint, o.data);
  LayerStates states = forward(lm.params, lm.model_cfg, lm.adj.matrix, nullptr);

  if (o.mode == "mad") {
    const DenseMatrix& emb_u = select_embeddings(states, states.user, o.embeddings);
    const DenseMatrix& emb_i = select_embeddings(states, states.item, o.embeddings);
    const std::uint64_t seed = lm.ckpt.manifest.at("train").at("seed");
    Rng rng_u(mix_seed(seed, hash_str("mad_user")));
    Rng rng_i(mix_seed(seed, hash_str("mad_item")));
    std::ostringstream csv;
    csv << "side,embedding,mad\n";
    csv << "user," << o.embeddings << ',' << fmt_double(mad(emb_u, o.mad_cap, rng_u)) << '\n';
    csv << "item," << o.embeddings << ',' << fmt_double(mad(emb_i, o.mad_cap, rng_i)) << '\n';
    write_file(o.out + "/mad.csv", csv.str());
    return 0;
  }

  if (o.mode == "sparsity") {
    const auto train_items = lm.ds.items_by_user(Split::Train);
    const auto truth_items = lm.ds.items_by_user(Split::Test);
    auto top = rank_all(states.user.psi.value(), states.item.psi.value(), train_items,
                        truth_items, o.cutoff);
    std::vector<std::size_t> train_counts(lm.ds.num_users);
    for (std::size_t u = 0; u < lm.ds.num_users; ++u) train_counts[u] = train_items[u].size();
    auto buckets = sparsity_buckets(top, truth_items, train_counts, o.cutoff,
                                    parse_size_list(o.buckets));
    std::ostringstream csv;
    csv << "bucket_lo,bucket_hi,users,recall@" << o.cutoff << ",ndcg@" << o.cutoff << '\n';
    for (const BucketMetrics& b : buckets) {
      csv << b.lo << ',';
      if (b.hi == 0) csv << "inf";
      else csv << b.hi;
      csv << ',' << b.metrics.users_evaluated << ',' << fmt_double(b.metrics.recall) << ','
          << fmt_double(b.metrics.ndcg) << '\n';
    }
    write_file(o.out + "/sparsity.csv", csv.str());
    return 0;
  }

  throw ConfigError("--mode must be mad, gradcurve or sparsity");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Hypergraph contrastive collaborative filtering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  PrepareOptions prep;
  CLI::App* prepare = app.add_subcommand("prepare", "split interactions into train/val/test");
  prepare->add_option("--input", prep.input, "interactions file (user<sep>item per line)");
  prepare->add_option("--synthetic", prep.synthetic, "blocks:U,V,p_in,p_out,seed generator");
  prepare->add_option("--format", prep.format, "tsv | csv | auto (default: by extension)");
  prepare->add_option("--output", prep.output, "output directory")->required();
  prepare->add_option("--ratios", prep.ratios, "train,val,test ratios (default 0.7,0.1,0.2)");
  prepare->add_option("--seed", prep.seed, "split seed");
  prepare->add_option("--min-degree", prep.min_degree, "iterative k-core filter before split");

  TrainCmdOptions tr;
  CLI::App* train = app.add_subcommand("train", "fit the model on a prepared split");
  train->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  train->add_option("--data", tr.data, "prepared split directory")->required();
  train->add_option("--out", tr.out, "output directory")->required();
  std::string config_doc;
  train->add_option("--config", config_doc,
                    "flat key = value config file; command-line flags override");
  add_run_options(train, tr.run);

  EvalCmdOptions ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "all-rank metrics for a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--data", ev.data, "prepared split directory")->required();
  eval_cmd->add_option("--out", ev.out, "output directory (default .)");
  eval_cmd->add_option("--cutoffs", ev.cutoffs, "comma-separated cutoffs (default 20,40)");
  eval_cmd->add_option("--split", ev.split_name, "truth split: test | val | train");
  eval_cmd->add_flag("--include-train", ev.include_train,
                     "keep train items in the candidate set (required for --split train)");
  eval_cmd->add_option("--mad-cap", ev.mad_cap, "node cap for MAD sampling");

  AnalyzeCmdOptions an;
  CLI::App* analyze = app.add_subcommand("analyze", "diagnostics: mad | gradcurve | sparsity");
  analyze->add_option("--mode", an.mode, "mad | gradcurve | sparsity")->required();
  analyze->add_option("--checkpoint", an.checkpoint, "checkpoint directory");
  analyze->add_option("--data", an.data, "prepared split directory");
  analyze->add_option("--out", an.out, "output directory (default .)");
  analyze->add_option("--embeddings", an.embeddings, "mad source: psi | e0 | e1 | ...");
  analyze->add_option("--tau", an.tau, "temperature for gradcurve");
  analyze->add_option("--grid-step", an.grid_step, "x grid step for gradcurve");
  analyze->add_option("--buckets", an.buckets, "sparsity bucket edges");
  analyze->add_option("--cutoff", an.cutoff, "metric cutoff for sparsity mode");
  analyze->add_option("--mad-cap", an.mad_cap, "node cap for MAD sampling");

  std::vector<std::string> args;
  try {
    args = expand_config_args(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  std::vector<const char*> argv2;
  argv2.reserve(args.size());
  for (const std::string& a : args) argv2.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv2.size()), argv2.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prep);
    if (train->parsed()) {
      tr.run.finalize();
      std::vector<std::string> argv_echo(argv, argv + argc);
      return cmd_train(tr, argv_echo);
    }
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (analyze->parsed()) return cmd_analyze(an);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric abort: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    // parse/data/integrity/contract problems all stem from the inputs
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  }
}

}  // namespace hccf
