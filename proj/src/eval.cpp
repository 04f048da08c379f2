#include "hccf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hccf/errors.hpp"
#include "hccf/log.hpp"

namespace hccf {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::vector<std::size_t>> rank_all(
    const DenseMatrix& psi_user, const DenseMatrix& psi_item,
    const std::vector<std::vector<std::size_t>>& train_items,
    const std::vector<std::vector<std::size_t>>& truth_items, std::size_t n, bool mask_train) {
  const std::size_t num_users = psi_user.rows;
  const std::size_t num_items = psi_item.rows;
  if (train_items.size() != num_users || truth_items.size() != num_users)
    throw ContractError("rank_all: per-user lists must cover all users");
  if (psi_user.cols != psi_item.cols) throw DimensionError("rank_all: embedding dims differ");

  std::vector<std::vector<std::size_t>> top(num_users);
  std::vector<double> scores(num_items);
  std::vector<std::size_t> candidates;
  for (std::size_t u = 0; u < num_users; ++u) {
    if (truth_items[u].empty()) continue;
    for (std::size_t i = 0; i < num_items; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < psi_user.cols; ++k)
        s += psi_user.at(u, k) * psi_item.at(i, k);
      scores[i] = s;
    }
    candidates.clear();
    const auto& train = train_items[u];
    for (std::size_t i = 0; i < num_items; ++i) {
      if (mask_train && std::binary_search(train.begin(), train.end(), i)) continue;
      candidates.push_back(i);
    }
    const std::size_t take = std::min(n, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(),
                      [&scores](std::size_t a, std::size_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return a < b;  // tie: lower item index first
                      });
    top[u].assign(candidates.begin(), candidates.begin() + take);
  }
  return top;
}

double recall_at_n(const std::vector<std::size_t>& topn, const std::vector<std::size_t>& truth,
                   std::size_t n) {
  if (truth.empty()) throw ContractError("recall_at_n: empty truth");
  std::size_t hits = 0;
  const std::size_t limit = std::min(n, topn.size());
  for (std::size_t r = 0; r < limit; ++r)
    hits += std::binary_search(truth.begin(), truth.end(), topn[r]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ndcg_at_n(const std::vector<std::size_t>& topn, const std::vector<std::size_t>& truth,
                 std::size_t n) {
  if (truth.empty()) throw ContractError("ndcg_at_n: empty truth");
  double dcg = 0.0;
  const std::size_t limit = std::min(n, topn.size());
  for (std::size_t r = 0; r < limit; ++r) {
    if (std::binary_search(truth.begin(), truth.end(), topn[r]))
      dcg += 1.0 / std::log2(static_cast<double>(r + 2));  // rank r+1 -> log2(rank+1)
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(n, truth.size());
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r + 2));
  return dcg / idcg;
}

MetricSummary summarize_metrics(const std::vector<std::vector<std::size_t>>& topn,
                                const std::vector<std::vector<std::size_t>>& truth,
                                std::size_t n) {
  MetricSummary s;
  double recall_sum = 0.0, ndcg_sum = 0.0;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (truth[u].empty()) continue;
    recall_sum += recall_at_n(topn[u], truth[u], n);
    ndcg_sum += ndcg_at_n(topn[u], truth[u], n);
    s.users_evaluated++;
  }
  if (s.users_evaluated > 0) {
    s.recall = recall_sum / static_cast<double>(s.users_evaluated);
    s.ndcg = ndcg_sum / static_cast<double>(s.users_evaluated);
  }
  return s;
}

double mad(const DenseMatrix& embeddings, std::size_t node_cap, Rng& rng) {
  if (embeddings.rows < 2) throw ContractError("mad: need at least 2 rows");
  std::vector<std::size_t> usable;
  std::vector<double> norms(embeddings.rows, 0.0);
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < embeddings.cols; ++j)
      s += embeddings.at(i, j) * embeddings.at(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] > 0.0) usable.push_back(i);
  }
  if (usable.size() < embeddings.rows)
    log_warn("mad: excluded " + std::to_string(embeddings.rows - usable.size()) +
             " zero-norm row(s)");
  if (usable.size() < 2) {
    log_warn("mad: fewer than 2 usable rows; returning 0");
    return 0.0;
  }
  if (usable.size() > node_cap && node_cap >= 2) {
    std::vector<std::size_t> picked;
    for (std::size_t pick : rng.sample_without_replacement(usable.size(), node_cap))
      picked.push_back(usable[pick]);
    std::sort(picked.begin(), picked.end());
    usable = std::move(picked);
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < usable.size(); ++a) {
    for (std::size_t b = a + 1; b < usable.size(); ++b) {
      const std::size_t i = usable[a], j = usable[b];
      double dot = 0.0;
      for (std::size_t k = 0; k < embeddings.cols; ++k)
        dot += embeddings.at(i, k) * embeddings.at(j, k);
      sum += 1.0 - dot / (norms[i] * norms[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<double> hard_negative_norms(const std::vector<double>& anchor,
                                        const DenseMatrix& candidates,
                                        std::size_t positive_index, double tau) {
  if (tau <= 0.0) throw ContractError("hard_negative_norms: tau must be > 0");
  if (anchor.size() != candidates.cols)
    throw DimensionError("hard_negative_norms: dimension mismatch");
  if (positive_index >= candidates.rows)
    throw ContractError("hard_negative_norms: positive index out of range");
  const std::size_t K = candidates.rows;
  const std::size_t d = candidates.cols;

  std::vector<double> sims(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += anchor[j] * candidates.at(k, j);
    sims[k] = s;
  }
  double m = sims[0];
  for (double s : sims) m = std::max(m, s);
  double z = 0.0;
  for (double s : sims) z += std::exp((s - m) / tau);

  std::vector<double> norms(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double weight = std::exp((sims[k] - m) / tau) / z;
    double tang_sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = candidates.at(k, j) - sims[k] * anchor[j];
      tang_sq += t * t;
    }
    norms[k] = std::sqrt(tang_sq) * weight;
  }
  return norms;
}

GradCurve grad_curve(double tau, const std::vector<double>& grid) {
  if (tau <= 0.0) throw ContractError("grad_curve: tau must be > 0");
  GradCurve curve;
  curve.tau = tau;
  for (double x : grid) {
    if (x < -1.0 || x > 1.0) throw ContractError("grad_curve: x must be in [-1, 1]");
    curve.x.push_back(x);
    curve.norm.push_back(std::sqrt(1.0 - x * x) * std::exp(x / tau));
  }
  return curve;
}

std::vector<BucketMetrics> sparsity_buckets(const std::vector<std::vector<std::size_t>>& topn,
                                            const std::vector<std::vector<std::size_t>>& truth,
                                            const std::vector<std::size_t>& train_counts,
                                            std::size_t n,
                                            const std::vector<std::size_t>& edges) {
  for (std::size_t k = 1; k < edges.size(); ++k)
    if (edges[k] <= edges[k - 1]) throw ContractError("sparsity_buckets: edges must increase");
  std::vector<BucketMetrics> buckets(edges.size() + 1);
  for (std::size_t b = 0; b <= edges.size(); ++b) {
    buckets[b].lo = b == 0 ? 0 : edges[b - 1];
    buckets[b].hi = b == edges.size() ? 0 : edges[b];
  }
  std::vector<double> recall_sum(buckets.size(), 0.0), ndcg_sum(buckets.size(), 0.0);
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (truth[u].empty()) continue;
    std::size_t b = 0;
    while (b < edges.size() && train_counts[u] >= edges[b]) ++b;
    recall_sum[b] += recall_at_n(topn[u], truth[u], n);
    ndcg_sum[b] += ndcg_at_n(topn[u], truth[u], n);
    buckets[b].metrics.users_evaluated++;
  }
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    if (buckets[b].metrics.users_evaluated > 0) {
      const double cnt = static_cast<double>(buckets[b].metrics.users_evaluated);
      buckets[b].metrics.recall = recall_sum[b] / cnt;
      buckets[b].metrics.ndcg = ndcg_sum[b] / cnt;
    }
  }
  return buckets;
}

std::vector<std::vector<std::size_t>> popularity_rank_all(
    const std::vector<std::size_t>& item_train_degrees,
    const std::vector<std::vector<std::size_t>>& train_items,
    const std::vector<std::vector<std::size_t>>& truth_items, std::size_t n) {
  const std::size_t num_items = item_train_degrees.size();
  std::vector<std::size_t> by_popularity(num_items);
  for (std::size_t i = 0; i < num_items; ++i) by_popularity[i] = i;
  std::stable_sort(by_popularity.begin(), by_popularity.end(),
                   [&item_train_degrees](std::size_t a, std::size_t b) {
                     if (item_train_degrees[a] != item_train_degrees[b])
                       return item_train_degrees[a] > item_train_degrees[b];
                     return a < b;
                   });
  std::vector<std::vector<std::size_t>> top(train_items.size());
  for (std::size_t u = 0; u < train_items.size(); ++u) {
    if (truth_items[u].empty()) continue;
    const auto& train = train_items[u];
    for (std::size_t i : by_popularity) {
      if (std::binary_search(train.begin(), train.end(), i)) continue;
      top[u].push_back(i);
      if (top[u].size() == n) break;
    }
  }
  return top;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "users_evaluated = " << users_evaluated << '\n';
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    out << "recall@" << cutoffs[k] << " = " << fmt_double(per_cutoff[k].recall) << '\n';
    out << "ndcg@" << cutoffs[k] << " = " << fmt_double(per_cutoff[k].ndcg) << '\n';
  }
  out << "mad_user = " << fmt_double(mad_user) << '\n';
  out << "mad_item = " << fmt_double(mad_item) << '\n';
  for (const BucketMetrics& b : buckets) {
    out << "bucket[" << b.lo << ",";
    if (b.hi == 0) out << "inf";
    else out << b.hi;
    out << ").recall = " << fmt_double(b.metrics.recall) << '\n';
    out << "bucket[" << b.lo << ",";
    if (b.hi == 0) out << "inf";
    else out << b.hi;
    out << ").ndcg = " << fmt_double(b.metrics.ndcg) << '\n';
  }
  return out.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream header, row;
  header << "users_evaluated";
  row << users_evaluated;
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    header << ",recall@" << cutoffs[k] << ",ndcg@" << cutoffs[k];
    row << ',' << fmt_double(per_cutoff[k].recall) << ',' << fmt_double(per_cutoff[k].ndcg);
  }
  header << ",mad_user,mad_item";
  row << ',' << fmt_double(mad_user) << ',' << fmt_double(mad_item);
  return header.str() + "\n" + row.str() + "\n";
}

}  // namespace hccf
