#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hccf/dataio.hpp"
#include "hccf/tensor.hpp"

namespace hccf {

struct ModelConfig {
  std::size_t embed_dim = 32;    // d
  std::size_t layers = 2;        // L, graph propagation depth
  std::size_t hyperedges = 128;  // H
  std::size_t hyper_layers = 3;  // c, hyperedge mapping depth
  double dropout = 0.25;         // edge/structure dropout rate during training

  // Ablation switches (all on for the full model).
  bool hyper = true;    // hypergraph branch; off = local propagation only
  bool hhm = true;      // hierarchical hyperedge mapping; off forces c = 0
  bool lowrank = true;  // structure = E*W; off learns a free K x H matrix
  bool ccl = true;      // cross-view contrastive objective

  // Variant switches for readings the equations leave open.
  bool tied_hyper_maps = false;      // share one projection across the c layers
  bool per_layer_structure = false;  // recompute structure from e_{l-1} per layer
  bool rescale_dropout = true;       // inverted-dropout scaling of kept entries

  // Upper bound on the Xavier half-width. Plain fan-based bounds grow as
  // node counts shrink; on few-hundred-node graphs they leave the hypergraph
  // branch dominating the residual stream and the fixed-step budget of the
  // default schedule cannot recover. The cap is inactive at the node counts
  // the fan rule was designed for. 0 disables it.
  double init_bound_cap = 0.05;

  std::size_t effective_hyper_layers() const { return hhm ? hyper_layers : 0; }
  void validate() const;
};

// All trainable tensors. Which ones exist depends on the ablation flags:
// the structure projections W (or the free structure matrices) and the
// hyperedge maps V are only allocated when the hypergraph branch is active.
struct ModelParams {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  Tensor user_embed;  // I x d
  Tensor item_embed;  // J x d
  Tensor user_structure_proj;  // d x H (lowrank)
  Tensor item_structure_proj;  // d x H
  Tensor user_structure_free;  // I x H (lowrank off)
  Tensor item_structure_free;  // J x H
  std::vector<Tensor> user_hyper_maps;  // c of H x H (1 when tied)
  std::vector<Tensor> item_hyper_maps;

  // Xavier-uniform init; each tensor draws from its own stream derived from
  // (seed, tensor name), so shared tensors across ablations match.
  static ModelParams init(const ModelConfig& cfg, std::size_t num_users, std::size_t num_items,
                          std::uint64_t seed);

  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> trainable() const;
  std::size_t non_embedding_param_count() const;
  void zero_grads();
};

// Per-side intermediates of one forward pass. embeddings[l] is e_l for
// l = 0..L; local[l-1] / hyper[l-1] are z_l / Gamma_l for l = 1..L, and
// psi is the sum of all e_l.
struct SideStates {
  std::vector<Tensor> embeddings;
  std::vector<Tensor> local;
  std::vector<Tensor> hyper;
  Tensor psi;
};

struct LayerStates {
  SideStates user;
  SideStates item;
  bool hyper_enabled = true;
  std::size_t layers = 0;
};

// Training-mode dropout masks, sampled fresh per step: the edge-dropped
// interaction graph (and its transpose, from the same mask) plus dense
// masks laid over the two structure matrices.
struct ForwardMasks {
  SparseMatrix adj;
  SparseMatrix adj_t;
  DenseMatrix user_structure_mask;
  DenseMatrix item_structure_mask;
};

ForwardMasks sample_masks(const SparseMatrix& adj, const ModelConfig& cfg, Rng& rng);

// One propagation hop over the bipartite graph:
//   Z_u = leaky(adj * E_v), Z_v = leaky(adj_t * E_u), slope 0.5.
std::pair<Tensor, Tensor> local_propagate(const SparseMatrix& adj, const SparseMatrix& adj_t,
                                          const Tensor& user_emb, const Tensor& item_emb);

// Node-hyperedge incidence, parameterized low-rank as E * W; the -LowR
// variant passes the free matrix through unchanged.
Tensor hyper_structure(const Tensor& embeddings, const Tensor& projection);

// Hypergraph message passing with c residual hyperedge-mapping layers:
//   lambda = H^T E, lambda' = psi_c(...psi_1(lambda)...),
//   psi_k(X) = leaky(V_k X) + X, Gamma = leaky(H lambda').
// c = 0 reduces exactly to leaky(H (H^T E)).
Tensor hyper_propagate(const Tensor& structure, const Tensor& prev_embeddings,
                       const std::vector<Tensor>& hyper_maps, std::size_t c);

// Full multi-order pass; masks == nullptr means evaluation mode (no
// dropout). The structure matrices are computed once per pass from the
// layer-0 embeddings unless per_layer_structure is set.
LayerStates forward(const ModelParams& params, const ModelConfig& cfg, const SparseMatrix& adj,
                    const ForwardMasks* masks);

// Inner-product scores for aligned (user, item) index lists.
Tensor predict(const Tensor& psi_user, const Tensor& psi_item,
               const std::vector<std::size_t>& users, const std::vector<std::size_t>& items);

}  // namespace hccf
