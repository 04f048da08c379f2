#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hccf/rng.hpp"
#include "hccf/sparse.hpp"

namespace hccf {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct Interaction {
  std::size_t user;
  std::size_t item;
};

// Implicit-feedback interactions with dense 0-based ids (first-appearance
// order) and a split tag per interaction. Duplicate (user, item) pairs are
// collapsed at ingestion, so no split can contain one twice.
struct InteractionDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<Interaction> interactions;
  std::vector<Split> tags;  // parallel to interactions; Train before split()
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  std::size_t count(Split s) const;
  // Per-user item lists for one split, each sorted ascending.
  std::vector<std::vector<std::size_t>> items_by_user(Split s) const;
  // Per-item user counts for one split.
  std::vector<std::size_t> item_degrees(Split s) const;
};

enum class FileFormat { Tsv, Csv };

// Reads `user<sep>item[<sep>ignored...]` lines; '#' comments and blank lines
// are skipped, duplicates collapsed, ids densely re-indexed in
// first-appearance order.
InteractionDataset load_interactions(const std::string& path, FileFormat format);

// Per-user random partition by the given ratios, rounding toward train.
// Users with fewer than 3 interactions go entirely to train (logged).
// Deterministic given seed: each user gets an independent stream derived
// from (seed, user index).
void split(InteractionDataset& ds, std::array<double, 3> ratios, std::uint64_t seed);

// Symmetrically normalized train adjacency: entry (i,j) = 1/sqrt(d_i * d_j)
// where both degrees count train interactions only.
struct NormalizedAdjacency {
  SparseMatrix matrix;  // num_users x num_items
  std::vector<std::size_t> user_degrees;
  std::vector<std::size_t> item_degrees;
};

NormalizedAdjacency build_normalized_adjacency(const InteractionDataset& ds);

// Aligned (anchor, positive, negative) index triples; with S samples per
// anchor each anchor index repeats S times.
struct PairBatch {
  std::vector<std::size_t> anchors;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

// One epoch worth of batches: every user with at least one train item
// appears exactly once, in shuffled order, with S positives sampled
// uniformly from its train items (distinct when possible, with replacement
// otherwise) and S negatives sampled uniformly over items outside its train
// set (rejection). Users whose train set covers every item are skipped with
// a warning.
std::vector<PairBatch> sample_epoch(const InteractionDataset& ds, std::size_t samples_per_anchor,
                                    std::size_t batch_size, Rng& rng);

// Keeps each nonzero independently with probability 1-rate. Kept values are
// scaled by 1/(1-rate) when rescale is set (inverted dropout) so the
// expectation matches the input; rate == 0 returns the input unchanged
// without consuming randomness.
SparseMatrix edge_dropout(const SparseMatrix& m, double rate, Rng& rng, bool rescale = true);

// Dense mask with entries 0 (dropped) or 1/(1-rate) (kept; 1 when rescale is
// off), drawn row-major. rate == 0 gives all ones without consuming
// randomness.
DenseMatrix dense_dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng,
                               bool rescale = true);

// Iteratively removes users and items with fewer than min_degree
// interactions until none remain, then re-indexes densely.
InteractionDataset kcore_filter(const InteractionDataset& ds, std::size_t min_degree);

// Two-block synthetic dataset: users/items split into equal halves; each
// within-block pair is an interaction with probability p_in, each
// cross-block pair with probability p_out. Zero-degree users/items are
// excluded by re-indexing, like any other ingestion path.
InteractionDataset synthetic_blocks(std::size_t num_users, std::size_t num_items, double p_in,
                                    double p_out, std::uint64_t seed);

// Split persistence: three interaction files (train.tsv, val.tsv, test.tsv,
// original string ids) plus manifest.json recording seed, ratios and counts.
void save_split_dir(const InteractionDataset& ds, const std::string& dir, std::uint64_t seed,
                    std::array<double, 3> ratios);
InteractionDataset load_split_dir(const std::string& dir);

}  // namespace hccf
