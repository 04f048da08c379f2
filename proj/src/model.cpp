#include "hccf/model.hpp"

#include <cmath>

#include "hccf/errors.hpp"
#include "hccf/log.hpp"

namespace hccf {

void ModelConfig::validate() const {
  if (embed_dim < 1 || layers < 1 || hyperedges < 1)
    throw ConfigError("model config: d, L and H must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("model config: dropout must be in [0, 1)");
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, double bound_cap, std::uint64_t seed,
              const std::string& name) {
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  if (bound_cap > 0.0) bound = std::min(bound, bound_cap);
  Rng rng(mix_seed(seed, hash_str(name)));
  return Tensor::param(DenseMatrix::random_uniform(rows, cols, -bound, bound, rng));
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::size_t num_users,
                              std::size_t num_items, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.num_users = num_users;
  p.num_items = num_items;
  const std::size_t d = cfg.embed_dim;
  const std::size_t H = cfg.hyperedges;
  const double cap = cfg.init_bound_cap;
  p.user_embed = xavier(num_users, d, cap, seed, "user_embed");
  p.item_embed = xavier(num_items, d, cap, seed, "item_embed");
  if (cfg.hyper) {
    if (cfg.lowrank) {
      p.user_structure_proj = xavier(d, H, cap, seed, "user_structure_proj");
      p.item_structure_proj = xavier(d, H, cap, seed, "item_structure_proj");
    } else {
      p.user_structure_free = xavier(num_users, H, cap, seed, "user_structure_free");
      p.item_structure_free = xavier(num_items, H, cap, seed, "item_structure_free");
    }
    const std::size_t c = cfg.effective_hyper_layers();
    const std::size_t n_maps = c == 0 ? 0 : (cfg.tied_hyper_maps ? 1 : c);
    for (std::size_t k = 0; k < n_maps; ++k) {
      p.user_hyper_maps.push_back(
          xavier(H, H, cap, seed, "user_hyper_map_" + std::to_string(k)));
      p.item_hyper_maps.push_back(
          xavier(H, H, cap, seed, "item_hyper_map_" + std::to_string(k)));
    }
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("user_embed", user_embed);
  out.emplace_back("item_embed", item_embed);
  if (user_structure_proj.defined()) {
    out.emplace_back("user_structure_proj", user_structure_proj);
    out.emplace_back("item_structure_proj", item_structure_proj);
  }
  if (user_structure_free.defined()) {
    out.emplace_back("user_structure_free", user_structure_free);
    out.emplace_back("item_structure_free", item_structure_free);
  }
  for (std::size_t k = 0; k < user_hyper_maps.size(); ++k)
    out.emplace_back("user_hyper_map_" + std::to_string(k), user_hyper_maps[k]);
  for (std::size_t k = 0; k < item_hyper_maps.size(); ++k)
    out.emplace_back("item_hyper_map_" + std::to_string(k), item_hyper_maps[k]);
  return out;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

std::size_t ModelParams::non_embedding_param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) {
    if (name == "user_embed" || name == "item_embed") continue;
    n += t.value().size();
  }
  return n;
}

void ModelParams::zero_grads() {
  for (Tensor& t : trainable()) t.zero_grad();
}

ForwardMasks sample_masks(const SparseMatrix& adj, const ModelConfig& cfg, Rng& rng) {
  ForwardMasks masks;
  masks.adj = edge_dropout(adj, cfg.dropout, rng, cfg.rescale_dropout);
  masks.adj_t = masks.adj.transposed();
  if (cfg.hyper) {
    masks.user_structure_mask =
        dense_dropout_mask(adj.rows, cfg.hyperedges, cfg.dropout, rng, cfg.rescale_dropout);
    masks.item_structure_mask =
        dense_dropout_mask(adj.cols, cfg.hyperedges, cfg.dropout, rng, cfg.rescale_dropout);
  }
  return masks;
}

std::pair<Tensor, Tensor> local_propagate(const SparseMatrix& adj, const SparseMatrix& adj_t,
                                          const Tensor& user_emb, const Tensor& item_emb) {
  if (adj.rows != user_emb.rows() || adj.cols != item_emb.rows())
    throw DimensionError("local_propagate: adjacency does not match embeddings");
  Tensor z_user = leaky_relu(spmm(adj, item_emb), 0.5);
  Tensor z_item = leaky_relu(spmm(adj_t, user_emb), 0.5);
  return {z_user, z_item};
}

Tensor hyper_structure(const Tensor& embeddings, const Tensor& projection) {
  return matmul(embeddings, projection);
}

Tensor hyper_propagate(const Tensor& structure, const Tensor& prev_embeddings,
                       const std::vector<Tensor>& hyper_maps, std::size_t c) {
  if (hyper_maps.size() != c)
    throw ConfigError("hyper_propagate: expected " + std::to_string(c) +
                      " hyperedge maps, got " + std::to_string(hyper_maps.size()));
  Tensor lambda = matmul(transpose(structure), prev_embeddings);  // H x d
  for (std::size_t k = 0; k < c; ++k)
    lambda = add(leaky_relu(matmul(hyper_maps[k], lambda), 0.5), lambda);
  return leaky_relu(matmul(structure, lambda), 0.5);
}

namespace {

std::vector<Tensor> maps_for_pass(const std::vector<Tensor>& stored, bool tied, std::size_t c) {
  if (c == 0) return {};
  if (!tied) return stored;
  std::vector<Tensor> out(c, stored.at(0));
  return out;
}

}  // namespace

LayerStates forward(const ModelParams& params, const ModelConfig& cfg, const SparseMatrix& adj,
                    const ForwardMasks* masks) {
  cfg.validate();
  const SparseMatrix& a = masks ? masks->adj : adj;
  SparseMatrix a_t_local;
  const SparseMatrix* a_t;
  if (masks) {
    a_t = &masks->adj_t;
  } else {
    a_t_local = adj.transposed();
    a_t = &a_t_local;
  }

  LayerStates st;
  st.hyper_enabled = cfg.hyper;
  st.layers = cfg.layers;
  st.user.embeddings.push_back(params.user_embed);
  st.item.embeddings.push_back(params.item_embed);

  const std::size_t c = cfg.effective_hyper_layers();
  std::vector<Tensor> user_maps, item_maps;
  Tensor user_structure, item_structure;
  if (cfg.hyper) {
    user_maps = maps_for_pass(params.user_hyper_maps, cfg.tied_hyper_maps, c);
    item_maps = maps_for_pass(params.item_hyper_maps, cfg.tied_hyper_maps, c);
    if (!cfg.per_layer_structure) {
      user_structure = cfg.lowrank ? hyper_structure(params.user_embed, params.user_structure_proj)
                                   : params.user_structure_free;
      item_structure = cfg.lowrank ? hyper_structure(params.item_embed, params.item_structure_proj)
                                   : params.item_structure_free;
      if (masks) {
        user_structure = hadamard(user_structure, Tensor::constant(masks->user_structure_mask));
        item_structure = hadamard(item_structure, Tensor::constant(masks->item_structure_mask));
      }
    }
  }

  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    const Tensor& e_u = st.user.embeddings[l - 1];
    const Tensor& e_i = st.item.embeddings[l - 1];
    auto [z_u, z_i] = local_propagate(a, *a_t, e_u, e_i);
    st.user.local.push_back(z_u);
    st.item.local.push_back(z_i);

    if (cfg.hyper) {
      Tensor h_u = user_structure, h_i = item_structure;
      if (cfg.per_layer_structure) {
        h_u = cfg.lowrank ? hyper_structure(e_u, params.user_structure_proj)
                          : params.user_structure_free;
        h_i = cfg.lowrank ? hyper_structure(e_i, params.item_structure_proj)
                          : params.item_structure_free;
        if (masks) {
          h_u = hadamard(h_u, Tensor::constant(masks->user_structure_mask));
          h_i = hadamard(h_i, Tensor::constant(masks->item_structure_mask));
        }
      }
      Tensor g_u = hyper_propagate(h_u, e_u, user_maps, c);
      Tensor g_i = hyper_propagate(h_i, e_i, item_maps, c);
      st.user.hyper.push_back(g_u);
      st.item.hyper.push_back(g_i);
      st.user.embeddings.push_back(add(add(z_u, g_u), e_u));
      st.item.embeddings.push_back(add(add(z_i, g_i), e_i));
    } else {
      st.user.hyper.push_back(Tensor::constant(DenseMatrix(e_u.rows(), e_u.cols(), 0.0)));
      st.item.hyper.push_back(Tensor::constant(DenseMatrix(e_i.rows(), e_i.cols(), 0.0)));
      st.user.embeddings.push_back(add(z_u, e_u));
      st.item.embeddings.push_back(add(z_i, e_i));
    }
  }

  st.user.psi = st.user.embeddings[0];
  st.item.psi = st.item.embeddings[0];
  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    st.user.psi = add(st.user.psi, st.user.embeddings[l]);
    st.item.psi = add(st.item.psi, st.item.embeddings[l]);
  }
  return st;
}

Tensor predict(const Tensor& psi_user, const Tensor& psi_item,
               const std::vector<std::size_t>& users, const std::vector<std::size_t>& items) {
  if (users.size() != items.size()) throw ContractError("predict: index lists differ in length");
  for (std::size_t u : users)
    if (u >= psi_user.rows()) throw ContractError("predict: user index out of range");
  for (std::size_t i : items)
    if (i >= psi_item.rows()) throw ContractError("predict: item index out of range");
  Tensor u_rows = gather_rows(psi_user, users);
  Tensor i_rows = gather_rows(psi_item, items);
  return row_sum(hadamard(u_rows, i_rows));
}

}  // namespace hccf
