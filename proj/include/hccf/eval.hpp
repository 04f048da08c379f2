#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hccf/dataio.hpp"
#include "hccf/dense.hpp"
#include "hccf/rng.hpp"

namespace hccf {

// Per-user top-N ranking over all items. Each user's train items are
// excluded from the candidate set (unless mask_train is off); ties break
// toward the lower item index. Users with empty truth get an empty list and
// are excluded from metric means.
std::vector<std::vector<std::size_t>> rank_all(
    const DenseMatrix& psi_user, const DenseMatrix& psi_item,
    const std::vector<std::vector<std::size_t>>& train_items,
    const std::vector<std::vector<std::size_t>>& truth_items, std::size_t n,
    bool mask_train = true);

// truth must be sorted ascending.
double recall_at_n(const std::vector<std::size_t>& topn, const std::vector<std::size_t>& truth,
                   std::size_t n);
double ndcg_at_n(const std::vector<std::size_t>& topn, const std::vector<std::size_t>& truth,
                 std::size_t n);

struct MetricSummary {
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t users_evaluated = 0;
};

// Means over users with nonempty truth, reduced in user-index order.
MetricSummary summarize_metrics(const std::vector<std::vector<std::size_t>>& topn,
                                const std::vector<std::vector<std::size_t>>& truth,
                                std::size_t n);

// Mean pairwise cosine distance (1 - cos) over unordered row pairs.
// Zero-norm rows are excluded with a warning. When more than node_cap usable
// rows exist, a uniform subsample of node_cap rows is measured instead.
double mad(const DenseMatrix& embeddings, std::size_t node_cap, Rng& rng);

// Per-candidate gradient magnitudes of the contrastive softmax for one
// anchor: entry k is || (g_k - (z . g_k) z) ||_2 * softmax_k where
// softmax_k = exp(z.g_k / tau) / sum_j exp(z.g_j / tau). Inputs are expected
// row-normalized (anchor z of length d, candidates K x d); positive_index
// marks the anchor's own view inside candidates (its entry is computed like
// any other but is not a negative).
std::vector<double> hard_negative_norms(const std::vector<double>& anchor,
                                        const DenseMatrix& candidates,
                                        std::size_t positive_index, double tau);

// The closed-form envelope sqrt(1 - x^2) * exp(x / tau) on a grid of cosine
// similarities in [-1, 1].
struct GradCurve {
  double tau = 1.0;
  std::vector<double> x;
  std::vector<double> norm;
};

GradCurve grad_curve(double tau, const std::vector<double>& grid);

// Sparsity-bucketed metrics: users grouped by train-interaction count into
// [0, edges[0]), [edges[0], edges[1]), ..., [edges.back(), inf).
struct BucketMetrics {
  std::size_t lo = 0;
  std::size_t hi = 0;  // 0 means unbounded
  MetricSummary metrics;
};

std::vector<BucketMetrics> sparsity_buckets(const std::vector<std::vector<std::size_t>>& topn,
                                            const std::vector<std::vector<std::size_t>>& truth,
                                            const std::vector<std::size_t>& train_counts,
                                            std::size_t n, const std::vector<std::size_t>& edges);

// Ranks every user by global item train-degree (ties toward lower index),
// masking the user's train items; the sanity baseline for learned models.
std::vector<std::vector<std::size_t>> popularity_rank_all(
    const std::vector<std::size_t>& item_train_degrees,
    const std::vector<std::vector<std::size_t>>& train_items,
    const std::vector<std::vector<std::size_t>>& truth_items, std::size_t n);

struct EvalReport {
  std::vector<std::size_t> cutoffs;
  std::vector<MetricSummary> per_cutoff;  // aligned with cutoffs
  double mad_user = 0.0;
  double mad_item = 0.0;
  std::size_t users_evaluated = 0;
  std::vector<BucketMetrics> buckets;  // optional; empty unless requested

  std::string to_text() const;        // one metric per line
  std::string to_csv() const;         // header + one flat row (buckets excluded)
};

}  // namespace hccf
