#include "hccf/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hccf/errors.hpp"
#include "hccf/eval.hpp"
#include "hccf/log.hpp"

namespace hccf {

namespace {

using json = nlohmann::ordered_json;

DenseMatrix round_to_f32(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (double& v : out.data) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::vector<float> to_f32(const DenseMatrix& m) {
  std::vector<float> out(m.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(m.data[i]);
  return out;
}

void byteswap_if_big_endian(std::vector<float>& v) {
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : v) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u = ((u & 0xff000000u) >> 24) | ((u & 0x00ff0000u) >> 8) | ((u & 0x0000ff00u) << 8) |
          ((u & 0x000000ffu) << 24);
      std::memcpy(&f, &u, 4);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (lr < 0.0) throw ConfigError("train config: lr must be >= 0");
  if (lr_decay <= 0.0 || lr_decay > 1.0) throw ConfigError("train config: decay must be in (0, 1]");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
}

LossReport train_epoch(ModelParams& params, AdamState& adam, const InteractionDataset& ds,
                       const NormalizedAdjacency& adj, const ModelConfig& model_cfg,
                       const LossConfig& loss_cfg, const TrainConfig& train_cfg, double lr,
                       Rng& rng) {
  auto batches = sample_epoch(ds, loss_cfg.samples_per_anchor, train_cfg.batch_size, rng);
  if (batches.empty()) throw ContractError("train_epoch: no batches (empty train split?)");
  auto trainable = params.trainable();
  LossReport mean;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    ForwardMasks masks = sample_masks(adj.matrix, model_cfg, rng);
    LayerStates states = forward(params, model_cfg, adj.matrix, &masks);
    auto [total, report] = total_loss(states, batches[b], params, loss_cfg);
    if (!std::isfinite(report.total)) {
      std::ostringstream diag;
      diag << "non-finite loss in batch " << b << " (margin=" << report.margin
           << ", infonce_user=" << report.infonce_user
           << ", infonce_item=" << report.infonce_item << ", reg=" << report.regularizer
           << "); first anchors:";
      for (std::size_t k = 0; k < std::min<std::size_t>(8, batches[b].anchors.size()); ++k)
        diag << ' ' << batches[b].anchors[k];
      throw NumericError(diag.str());
    }
    params.zero_grads();
    backward(total);
    adam_step(trainable, adam, lr);
    mean.margin += report.margin;
    mean.infonce_user += report.infonce_user;
    mean.infonce_item += report.infonce_item;
    mean.regularizer += report.regularizer;
    mean.total += report.total;
  }
  const double nb = static_cast<double>(batches.size());
  mean.margin /= nb;
  mean.infonce_user /= nb;
  mean.infonce_item /= nb;
  mean.regularizer /= nb;
  mean.total /= nb;
  return mean;
}

namespace {

double validation_recall(const ModelParams& params, const ModelConfig& cfg,
                         const NormalizedAdjacency& adj,
                         const std::vector<std::vector<std::size_t>>& train_items,
                         const std::vector<std::vector<std::size_t>>& val_items,
                         std::size_t cutoff, double* ndcg_out) {
  LayerStates states = forward(params, cfg, adj.matrix, nullptr);
  auto top = rank_all(states.user.psi.value(), states.item.psi.value(), train_items, val_items,
                      cutoff);
  MetricSummary s = summarize_metrics(top, val_items, cutoff);
  if (ndcg_out) *ndcg_out = s.ndcg;
  return s.recall;
}

}  // namespace

FitResult fit(const InteractionDataset& ds, const ModelConfig& model_cfg,
              const LossConfig& loss_cfg, const TrainConfig& train_cfg) {
  model_cfg.validate();
  loss_cfg.validate();
  train_cfg.validate();

  ModelParams params = ModelParams::init(model_cfg, ds.num_users, ds.num_items, train_cfg.seed);
  AdamState adam = AdamState::for_params(params.trainable());
  NormalizedAdjacency adj = build_normalized_adjacency(ds);
  const auto train_items = ds.items_by_user(Split::Train);
  const auto val_items = ds.items_by_user(Split::Val);

  bool has_val = false;
  for (const auto& v : val_items) has_val = has_val || !v.empty();
  if (!has_val && train_cfg.epochs > 0)
    log_warn("fit: validation split is empty; early stopping will never trigger improvements");

  FitResult result;
  result.best = make_checkpoint(params, model_cfg, loss_cfg, train_cfg, 0, 0.0);
  result.best_val_recall = -1.0;
  result.best_epoch = 0;

  Rng rng(mix_seed(train_cfg.seed, hash_str("train_loop")));
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = train_cfg.lr * std::pow(train_cfg.lr_decay, static_cast<double>(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.loss = train_epoch(params, adam, ds, adj, model_cfg, loss_cfg, train_cfg, lr, rng);
    rec.val_recall = validation_recall(params, model_cfg, adj, train_items, val_items,
                                       train_cfg.early_stop_cutoff, &rec.val_ndcg);
    rec.improved = rec.val_recall > result.best_val_recall;
    if (rec.improved) {
      result.best_val_recall = rec.val_recall;
      result.best_epoch = epoch;
      result.best =
          make_checkpoint(params, model_cfg, loss_cfg, train_cfg, epoch, rec.val_recall);
      stale = 0;
    } else {
      ++stale;
    }
    result.log.push_back(rec);
    const auto t1 = std::chrono::steady_clock::now();
    result.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    if (stale >= train_cfg.patience) break;
  }
  if (result.best_val_recall < 0.0) result.best_val_recall = 0.0;
  return result;
}

Checkpoint make_checkpoint(const ModelParams& params, const ModelConfig& model_cfg,
                           const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                           std::size_t epoch, double val_recall) {
  Checkpoint ckpt;
  ckpt.manifest["format"] = "hccf-checkpoint/1";
  ckpt.manifest["num_users"] = params.num_users;
  ckpt.manifest["num_items"] = params.num_items;
  ckpt.manifest["model"] = model_config_json(model_cfg);
  ckpt.manifest["loss"] = loss_config_json(loss_cfg);
  ckpt.manifest["train"] = train_config_json(train_cfg);
  ckpt.manifest["epoch"] = epoch;
  ckpt.manifest["metrics"] = {{"val_recall", val_recall}};
  json shapes = json::array();
  for (const auto& [name, tensor] : params.named()) {
    ckpt.tensors.emplace_back(name, round_to_f32(tensor.value()));
    shapes.push_back({{"name", name},
                      {"rows", tensor.value().rows},
                      {"cols", tensor.value().cols},
                      {"file", "params/" + name + ".f32"}});
  }
  ckpt.manifest["params"] = shapes;
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir) {
  std::filesystem::create_directories(dir + "/params");
  {
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw DataError("cannot write " + dir + "/manifest.json");
    out << ckpt.manifest.dump(2) << '\n';
  }
  for (const auto& [name, value] : ckpt.tensors) {
    std::vector<float> blob = to_f32(value);
    byteswap_if_big_endian(blob);
    std::ofstream out(dir + "/params/" + name + ".f32", std::ios::binary);
    if (!out) throw DataError("cannot write blob for " + name);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw DataError("cannot open " + dir + "/manifest.json");
  Checkpoint ckpt;
  try {
    in >> ckpt.manifest;
  } catch (const std::exception& e) {
    throw IntegrityError("bad checkpoint manifest: " + std::string(e.what()));
  }
  if (!ckpt.manifest.contains("params")) throw IntegrityError("manifest lists no params");
  for (const auto& entry : ckpt.manifest["params"]) {
    const std::string name = entry.at("name");
    const std::size_t rows = entry.at("rows");
    const std::size_t cols = entry.at("cols");
    const std::string path = dir + "/" + std::string(entry.at("file"));
    std::ifstream blob(path, std::ios::binary);
    if (!blob) throw IntegrityError("missing blob " + path);
    blob.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(blob.tellg());
    if (bytes != rows * cols * sizeof(float))
      throw IntegrityError("blob " + path + " has " + std::to_string(bytes) +
                           " bytes, manifest expects " +
                           std::to_string(rows * cols * sizeof(float)));
    blob.seekg(0);
    std::vector<float> data(rows * cols);
    blob.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!blob) throw IntegrityError("short read on blob " + path);
    byteswap_if_big_endian(data);
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = static_cast<double>(data[i]);
    ckpt.tensors.emplace_back(name, std::move(m));
  }
  return ckpt;
}

ModelParams params_from_checkpoint(const Checkpoint& ckpt) {
  ModelParams p;
  p.num_users = ckpt.manifest.at("num_users");
  p.num_items = ckpt.manifest.at("num_items");
  for (const auto& [name, value] : ckpt.tensors) {
    Tensor t = Tensor::param(value);
    if (name == "user_embed") p.user_embed = t;
    else if (name == "item_embed") p.item_embed = t;
    else if (name == "user_structure_proj") p.user_structure_proj = t;
    else if (name == "item_structure_proj") p.item_structure_proj = t;
    else if (name == "user_structure_free") p.user_structure_free = t;
    else if (name == "item_structure_free") p.item_structure_free = t;
    else if (name.rfind("user_hyper_map_", 0) == 0) p.user_hyper_maps.push_back(t);
    else if (name.rfind("item_hyper_map_", 0) == 0) p.item_hyper_maps.push_back(t);
    else throw IntegrityError("unknown parameter in checkpoint: " + name);
  }
  if (!p.user_embed.defined() || !p.item_embed.defined())
    throw IntegrityError("checkpoint is missing embedding tensors");
  return p;
}

ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt) {
  const auto& j = ckpt.manifest.at("model");
  ModelConfig cfg;
  cfg.embed_dim = j.at("embed_dim");
  cfg.layers = j.at("layers");
  cfg.hyperedges = j.at("hyperedges");
  cfg.hyper_layers = j.at("hyper_layers");
  cfg.dropout = j.at("dropout");
  cfg.hyper = j.at("hyper");
  cfg.hhm = j.at("hhm");
  cfg.lowrank = j.at("lowrank");
  cfg.ccl = j.at("ccl");
  cfg.tied_hyper_maps = j.at("tied_hyper_maps");
  cfg.per_layer_structure = j.at("per_layer_structure");
  cfg.rescale_dropout = j.at("rescale_dropout");
  cfg.init_bound_cap = j.at("init_bound_cap");
  return cfg;
}

LossConfig loss_config_from_checkpoint(const Checkpoint& ckpt) {
  const auto& j = ckpt.manifest.at("loss");
  LossConfig cfg;
  cfg.lambda1 = j.at("lambda1");
  cfg.lambda2 = j.at("lambda2");
  cfg.tau = j.at("tau");
  cfg.samples_per_anchor = j.at("samples_per_anchor");
  cfg.negatives_scope =
      j.at("negatives_scope") == "batch" ? NegativeScope::Batch : NegativeScope::AllNodes;
  cfg.contrastive_enabled = j.at("contrastive_enabled");
  return cfg;
}

TrainConfig train_config_from_checkpoint(const Checkpoint& ckpt) {
  const auto& j = ckpt.manifest.at("train");
  TrainConfig cfg;
  cfg.lr = j.at("lr");
  cfg.lr_decay = j.at("lr_decay");
  cfg.epochs = j.at("epochs");
  cfg.batch_size = j.at("batch_size");
  cfg.patience = j.at("patience");
  cfg.early_stop_cutoff = j.at("early_stop_cutoff");
  cfg.seed = j.at("seed");
  return cfg;
}

json model_config_json(const ModelConfig& cfg) {
  return {{"embed_dim", cfg.embed_dim},
          {"layers", cfg.layers},
          {"hyperedges", cfg.hyperedges},
          {"hyper_layers", cfg.hyper_layers},
          {"dropout", cfg.dropout},
          {"hyper", cfg.hyper},
          {"hhm", cfg.hhm},
          {"lowrank", cfg.lowrank},
          {"ccl", cfg.ccl},
          {"tied_hyper_maps", cfg.tied_hyper_maps},
          {"per_layer_structure", cfg.per_layer_structure},
          {"rescale_dropout", cfg.rescale_dropout},
          {"init_bound_cap", cfg.init_bound_cap}};
}

json loss_config_json(const LossConfig& cfg) {
  return {{"lambda1", cfg.lambda1},
          {"lambda2", cfg.lambda2},
          {"tau", cfg.tau},
          {"samples_per_anchor", cfg.samples_per_anchor},
          {"negatives_scope", cfg.negatives_scope == NegativeScope::Batch ? "batch" : "all"},
          {"contrastive_enabled", cfg.contrastive_enabled}};
}

json train_config_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr},
          {"lr_decay", cfg.lr_decay},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"patience", cfg.patience},
          {"early_stop_cutoff", cfg.early_stop_cutoff},
          {"seed", cfg.seed}};
}

json epoch_record_json(const EpochRecord& rec) {
  return {{"epoch", rec.epoch},
          {"lr", rec.lr},
          {"margin", rec.loss.margin},
          {"infonce_user", rec.loss.infonce_user},
          {"infonce_item", rec.loss.infonce_item},
          {"regularizer", rec.loss.regularizer},
          {"total", rec.loss.total},
          {"val_recall", rec.val_recall},
          {"val_ndcg", rec.val_ndcg},
          {"improved", rec.improved}};
}

}  // namespace hccf
