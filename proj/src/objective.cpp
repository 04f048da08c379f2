#include "hccf/objective.hpp"

#include <algorithm>

#include "hccf/errors.hpp"
#include "hccf/log.hpp"

namespace hccf {

void LossConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("loss config: lambdas must be >= 0");
  if (tau <= 0.0) throw ConfigError("loss config: tau must be > 0");
  if (samples_per_anchor < 1) throw ConfigError("loss config: S must be >= 1");
}

Tensor margin_loss(const Tensor& positive_scores, const Tensor& negative_scores) {
  if (positive_scores.rows() != negative_scores.rows() || positive_scores.cols() != 1 ||
      negative_scores.cols() != 1)
    throw ContractError("margin_loss: score lists must be aligned n x 1");
  // max(0, 1 - pos + neg)
  return sum_all(relu(add_const(sub(negative_scores, positive_scores), 1.0)));
}

Tensor infonce_loss(const Tensor& anchor_views, const Tensor& candidate_views,
                    const std::vector<std::size_t>& anchor_indices, double tau) {
  if (tau <= 0.0) throw ContractError("infonce_loss: tau must be > 0");
  if (anchor_views.rows() != anchor_indices.size())
    throw ContractError("infonce_loss: one index per anchor required");
  for (std::size_t idx : anchor_indices)
    if (idx >= candidate_views.rows()) throw ContractError("infonce_loss: index out of range");

  Tensor anchors_unit = normalize_rows(anchor_views);
  Tensor candidates_unit = normalize_rows(candidate_views);
  Tensor pos_sim = row_sum(hadamard(anchors_unit, gather_rows(candidates_unit, anchor_indices)));
  Tensor sims = matmul(anchors_unit, transpose(candidates_unit));  // n x K
  Tensor lse = row_logsumexp(scale(sims, 1.0 / tau));
  return sum_all(sub(lse, scale(pos_sim, 1.0 / tau)));
}

Tensor weight_decay(const std::vector<Tensor>& params) {
  if (params.empty()) throw ContractError("weight_decay: empty parameter list");
  Tensor total = sum_all(hadamard(params[0], params[0]));
  for (std::size_t p = 1; p < params.size(); ++p)
    total = add(total, sum_all(hadamard(params[p], params[p])));
  return total;
}

namespace {

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Sums the per-layer InfoNCE terms for one side.
Tensor side_contrastive(const SideStates& side, const std::vector<std::size_t>& anchors,
                        const LossConfig& cfg, std::size_t layers) {
  Tensor total;
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor anchor_views = gather_rows(side.local[l], anchors);
    Tensor term;
    if (cfg.negatives_scope == NegativeScope::AllNodes) {
      term = infonce_loss(anchor_views, side.hyper[l], anchors, cfg.tau);
    } else {
      // Candidates restricted to the anchor set; anchor k's positive is row k.
      std::vector<std::size_t> self_idx(anchors.size());
      for (std::size_t k = 0; k < anchors.size(); ++k) self_idx[k] = k;
      term = infonce_loss(anchor_views, gather_rows(side.hyper[l], anchors), self_idx, cfg.tau);
    }
    total = l == 0 ? term : add(total, term);
  }
  return total;
}

}  // namespace

std::pair<Tensor, LossReport> total_loss(const LayerStates& states, const PairBatch& batch,
                                         const ModelParams& params, const LossConfig& cfg) {
  cfg.validate();
  if (batch.anchors.size() != batch.positives.size() ||
      batch.anchors.size() != batch.negatives.size())
    throw ContractError("total_loss: batch index lists must be aligned");

  LossReport report;
  Tensor pos_scores = predict(states.user.psi, states.item.psi, batch.anchors, batch.positives);
  Tensor neg_scores = predict(states.user.psi, states.item.psi, batch.anchors, batch.negatives);
  Tensor margin = margin_loss(pos_scores, neg_scores);
  report.margin = margin.scalar();
  Tensor total = margin;

  bool contrastive = cfg.contrastive_enabled;
  if (contrastive && !states.hyper_enabled) {
    warn_once("ccl_without_hyper",
              "contrastive objective skipped: hypergraph branch is disabled");
    contrastive = false;
  }
  if (contrastive && cfg.lambda1 > 0.0) {
    const std::vector<std::size_t> user_anchors = sorted_unique(batch.anchors);
    std::vector<std::size_t> item_pool = batch.positives;
    item_pool.insert(item_pool.end(), batch.negatives.begin(), batch.negatives.end());
    const std::vector<std::size_t> item_anchors = sorted_unique(std::move(item_pool));

    Tensor cl_user = side_contrastive(states.user, user_anchors, cfg, states.layers);
    Tensor cl_item = side_contrastive(states.item, item_anchors, cfg, states.layers);
    report.infonce_user = cl_user.scalar();
    report.infonce_item = cl_item.scalar();
    total = add(total, scale(add(cl_user, cl_item), cfg.lambda1));
  }

  Tensor reg = weight_decay(params.trainable());
  report.regularizer = reg.scalar();
  if (cfg.lambda2 > 0.0) total = add(total, scale(reg, cfg.lambda2));

  report.total = total.scalar();
  return {total, report};
}

}  // namespace hccf
