#pragma once

#include <utility>
#include <vector>

#include "hccf/dataio.hpp"
#include "hccf/model.hpp"
#include "hccf/tensor.hpp"

namespace hccf {

enum class NegativeScope {
  AllNodes,  // softmax denominator over every user/item (default)
  Batch      // denominator restricted to the batch's anchor set
};

struct LossConfig {
  double lambda1 = 1e-3;  // contrastive weight
  double lambda2 = 1e-4;  // weight decay
  double tau = 1.0;       // InfoNCE temperature
  std::size_t samples_per_anchor = 1;  // S
  NegativeScope negatives_scope = NegativeScope::AllNodes;
  bool contrastive_enabled = true;  // mirrors the model's ccl ablation flag

  void validate() const;
};

struct LossReport {
  double margin = 0.0;
  double infonce_user = 0.0;
  double infonce_item = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
};

// Pairwise hinge with margin 1: sum over aligned score pairs of
// max(0, 1 - pos + neg). Subgradient at the kink is 0.
Tensor margin_loss(const Tensor& positive_scores, const Tensor& negative_scores);

// One (layer, side) InfoNCE term. anchor_views holds the anchors' local
// embeddings (n x d); candidate_views the hypergraph embeddings the softmax
// runs over (K x d); anchor_indices maps each anchor to its own row in
// candidate_views (the positive pair). Similarities are cosine; zero-norm
// rows contribute cosine 0. The per-anchor term is
//   -s(z_i, g_i)/tau + logsumexp_k(s(z_i, g_k)/tau)
// computed with a max-shifted log-sum-exp, summed over anchors.
Tensor infonce_loss(const Tensor& anchor_views, const Tensor& candidate_views,
                    const std::vector<std::size_t>& anchor_indices, double tau);

// Sum of squared Frobenius norms over all given parameters.
Tensor weight_decay(const std::vector<Tensor>& params);

// Unified objective: margin + lambda1 * (contrastive user + item) +
// lambda2 * weight decay. Zero-weighted or disabled terms are skipped
// entirely, so e.g. lambda1 = lambda2 = 0 returns the margin tensor itself.
// Contrastive anchors are the batch's distinct users, and on the item side
// the batch's distinct positive/negative items; layer terms run over
// l = 1..L.
std::pair<Tensor, LossReport> total_loss(const LayerStates& states, const PairBatch& batch,
                                         const ModelParams& params, const LossConfig& cfg);

}  // namespace hccf
