#include "hccf/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "hccf/errors.hpp"
#include "hccf/log.hpp"

namespace hccf {

namespace {

using json = nlohmann::ordered_json;

struct DenseIndexer {
  std::unordered_map<std::string, std::size_t> map;
  std::vector<std::string> names;

  std::size_t intern(const std::string& id) {
    auto it = map.find(id);
    if (it != map.end()) return it->second;
    const std::size_t idx = names.size();
    map.emplace(id, idx);
    names.push_back(id);
    return idx;
  }
};

std::uint64_t pair_key(std::size_t u, std::size_t i) {
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
}

// Parses one interaction file into (user, item) token pairs.
void parse_interaction_file(const std::string& path, char sep,
                            std::vector<std::pair<std::string, std::string>>& out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t p1 = line.find(sep);
    if (p1 == std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected user" + std::string(1, sep) + "item");
    std::size_t p2 = line.find(sep, p1 + 1);
    if (p2 == std::string::npos) p2 = line.size();
    const std::string user = line.substr(0, p1);
    const std::string item = line.substr(p1 + 1, p2 - p1 - 1);
    if (user.empty() || item.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty id field");
    out.emplace_back(user, item);
  }
}

InteractionDataset build_dataset(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::vector<Split>* tags_in, std::vector<Split>* tags_out) {
  InteractionDataset ds;
  DenseIndexer users, items;
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const std::size_t u = users.intern(pairs[k].first);
    const std::size_t i = items.intern(pairs[k].second);
    if (!seen.insert(pair_key(u, i)).second) continue;  // duplicate collapsed
    ds.interactions.push_back({u, i});
    if (tags_in && tags_out) tags_out->push_back((*tags_in)[k]);
  }
  ds.num_users = users.names.size();
  ds.num_items = items.names.size();
  ds.user_ids = std::move(users.names);
  ds.item_ids = std::move(items.names);
  ds.tags.assign(ds.interactions.size(), Split::Train);
  return ds;
}

}  // namespace

std::size_t InteractionDataset::count(Split s) const {
  std::size_t n = 0;
  for (Split t : tags) n += t == s ? 1 : 0;
  return n;
}

std::vector<std::vector<std::size_t>> InteractionDataset::items_by_user(Split s) const {
  std::vector<std::vector<std::size_t>> out(num_users);
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    if (tags[k] == s) out[interactions[k].user].push_back(interactions[k].item);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

std::vector<std::size_t> InteractionDataset::item_degrees(Split s) const {
  std::vector<std::size_t> deg(num_items, 0);
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    if (tags[k] == s) deg[interactions[k].item]++;
  }
  return deg;
}

InteractionDataset load_interactions(const std::string& path, FileFormat format) {
  const char sep = format == FileFormat::Tsv ? '\t' : ',';
  std::vector<std::pair<std::string, std::string>> pairs;
  parse_interaction_file(path, sep, pairs);
  if (pairs.empty()) throw DataError(path + ": empty dataset");
  return build_dataset(pairs, nullptr, nullptr);
}

void split(InteractionDataset& ds, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (r <= 0.0) throw ContractError("split: ratios must be positive");
  }
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ContractError("split: ratios must sum to 1");

  std::vector<std::vector<std::size_t>> per_user(ds.num_users);
  for (std::size_t k = 0; k < ds.interactions.size(); ++k)
    per_user[ds.interactions[k].user].push_back(k);

  std::size_t all_train_users = 0;
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    auto& idx = per_user[u];
    const std::size_t n = idx.size();
    if (n < 3) {
      for (std::size_t k : idx) ds.tags[k] = Split::Train;
      ++all_train_users;
      continue;
    }
    Rng rng(mix_seed(seed, u));
    rng.shuffle(idx);
    const std::size_t n_val = static_cast<std::size_t>(std::floor(ratios[1] * n));
    const std::size_t n_test = static_cast<std::size_t>(std::floor(ratios[2] * n));
    const std::size_t n_train = n - n_val - n_test;  // remainder rounds toward train
    for (std::size_t k = 0; k < n; ++k) {
      Split tag = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
      ds.tags[idx[k]] = tag;
    }
  }
  if (all_train_users > 0)
    log_info("split: " + std::to_string(all_train_users) +
             " user(s) with <3 interactions assigned entirely to train");
}

NormalizedAdjacency build_normalized_adjacency(const InteractionDataset& ds) {
  NormalizedAdjacency adj;
  adj.user_degrees.assign(ds.num_users, 0);
  adj.item_degrees.assign(ds.num_items, 0);
  std::vector<std::vector<std::size_t>> rows(ds.num_users);
  for (std::size_t k = 0; k < ds.interactions.size(); ++k) {
    if (ds.tags[k] != Split::Train) continue;
    const auto [u, i] = ds.interactions[k];
    rows[u].push_back(i);
    adj.user_degrees[u]++;
    adj.item_degrees[i]++;
  }
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.size();
  if (nnz == 0) throw ContractError("build_normalized_adjacency: train split is empty");

  SparseMatrix m(ds.num_users, ds.num_items);
  m.col_indices.reserve(nnz);
  m.values.reserve(nnz);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    std::sort(rows[u].begin(), rows[u].end());
    for (std::size_t i : rows[u]) {
      m.col_indices.push_back(i);
      m.values.push_back(1.0 / std::sqrt(static_cast<double>(adj.user_degrees[u]) *
                                         static_cast<double>(adj.item_degrees[i])));
    }
    m.row_offsets[u + 1] = m.col_indices.size();
  }
  adj.matrix = std::move(m);
  return adj;
}

std::vector<PairBatch> sample_epoch(const InteractionDataset& ds, std::size_t samples_per_anchor,
                                    std::size_t batch_size, Rng& rng) {
  if (samples_per_anchor < 1) throw ContractError("sample_epoch: S must be >= 1");
  if (batch_size < 1) throw ContractError("sample_epoch: batch_size must be >= 1");
  const auto train_items = ds.items_by_user(Split::Train);

  std::vector<std::size_t> anchors;
  anchors.reserve(ds.num_users);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    if (train_items[u].empty()) continue;
    if (train_items[u].size() == ds.num_items) {
      warn_once("sampler_full_user",
                "sample_epoch: skipping user(s) whose train set covers all items");
      continue;
    }
    anchors.push_back(u);
  }
  rng.shuffle(anchors);

  std::vector<PairBatch> batches;
  for (std::size_t start = 0; start < anchors.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, anchors.size());
    PairBatch batch;
    for (std::size_t a = start; a < end; ++a) {
      const std::size_t u = anchors[a];
      const auto& items = train_items[u];
      std::vector<std::size_t> pos;
      if (items.size() >= samples_per_anchor) {
        for (std::size_t pick : rng.sample_without_replacement(items.size(), samples_per_anchor))
          pos.push_back(items[pick]);
      } else {
        for (std::size_t s = 0; s < samples_per_anchor; ++s)
          pos.push_back(items[rng.uniform_below(items.size())]);
      }
      for (std::size_t s = 0; s < samples_per_anchor; ++s) {
        std::size_t neg;
        do {
          neg = rng.uniform_below(ds.num_items);
        } while (std::binary_search(items.begin(), items.end(), neg));
        batch.anchors.push_back(u);
        batch.positives.push_back(pos[s]);
        batch.negatives.push_back(neg);
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

SparseMatrix edge_dropout(const SparseMatrix& m, double rate, Rng& rng, bool rescale) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("edge_dropout: rate must be in [0, 1)");
  if (rate == 0.0) return m;
  const double scale = rescale ? 1.0 / (1.0 - rate) : 1.0;
  SparseMatrix out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k) {
      if (rng.bernoulli(rate)) continue;  // dropped
      out.col_indices.push_back(m.col_indices[k]);
      out.values.push_back(m.values[k] * scale);
    }
    out.row_offsets[r + 1] = out.col_indices.size();
  }
  return out;
}

DenseMatrix dense_dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng,
                               bool rescale) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dense_dropout_mask: rate must be in [0, 1)");
  DenseMatrix mask(rows, cols, 1.0);
  if (rate == 0.0) return mask;
  const double keep_value = rescale ? 1.0 / (1.0 - rate) : 1.0;
  for (double& v : mask.data) v = rng.bernoulli(rate) ? 0.0 : keep_value;
  return mask;
}

InteractionDataset kcore_filter(const InteractionDataset& ds, std::size_t min_degree) {
  std::vector<bool> keep(ds.interactions.size(), true);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::size_t> udeg(ds.num_users, 0), ideg(ds.num_items, 0);
    for (std::size_t k = 0; k < ds.interactions.size(); ++k) {
      if (!keep[k]) continue;
      udeg[ds.interactions[k].user]++;
      ideg[ds.interactions[k].item]++;
    }
    for (std::size_t k = 0; k < ds.interactions.size(); ++k) {
      if (!keep[k]) continue;
      if (udeg[ds.interactions[k].user] < min_degree ||
          ideg[ds.interactions[k].item] < min_degree) {
        keep[k] = false;
        changed = true;
      }
    }
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t k = 0; k < ds.interactions.size(); ++k) {
    if (keep[k])
      pairs.emplace_back(ds.user_ids[ds.interactions[k].user],
                         ds.item_ids[ds.interactions[k].item]);
  }
  const std::size_t removed = ds.interactions.size() - pairs.size();
  if (removed > 0)
    log_info("kcore_filter: removed " + std::to_string(removed) + " interaction(s) below core " +
             std::to_string(min_degree));
  InteractionDataset out = build_dataset(pairs, nullptr, nullptr);
  return out;
}

InteractionDataset synthetic_blocks(std::size_t num_users, std::size_t num_items, double p_in,
                                    double p_out, std::uint64_t seed) {
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
    throw ContractError("synthetic_blocks: probabilities must be in [0, 1]");
  Rng rng(mix_seed(seed, hash_str("synthetic_blocks")));
  std::vector<std::pair<std::string, std::string>> pairs;
  const std::size_t user_half = num_users / 2;
  const std::size_t item_half = num_items / 2;
  for (std::size_t u = 0; u < num_users; ++u) {
    const bool ublock = u >= user_half;
    for (std::size_t i = 0; i < num_items; ++i) {
      const bool iblock = i >= item_half;
      const double p = ublock == iblock ? p_in : p_out;
      if (rng.bernoulli(p))
        pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
    }
  }
  if (pairs.empty()) throw DataError("synthetic_blocks: generated no interactions");
  return build_dataset(pairs, nullptr, nullptr);
}

namespace {

const char* split_file_name(Split s) {
  switch (s) {
    case Split::Train: return "train.tsv";
    case Split::Val: return "val.tsv";
    default: return "test.tsv";
  }
}

}  // namespace

void save_split_dir(const InteractionDataset& ds, const std::string& dir, std::uint64_t seed,
                    std::array<double, 3> ratios) {
  std::filesystem::create_directories(dir);
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    std::ofstream out(dir + "/" + split_file_name(s));
    if (!out) throw DataError("cannot write " + dir + "/" + split_file_name(s));
    for (std::size_t k = 0; k < ds.interactions.size(); ++k) {
      if (ds.tags[k] != s) continue;
      out << ds.user_ids[ds.interactions[k].user] << '\t'
          << ds.item_ids[ds.interactions[k].item] << '\n';
    }
  }
  json manifest;
  manifest["format"] = "hccf-split/1";
  manifest["seed"] = seed;
  manifest["ratios"] = {ratios[0], ratios[1], ratios[2]};
  manifest["num_users"] = ds.num_users;
  manifest["num_items"] = ds.num_items;
  manifest["counts"] = {{"train", ds.count(Split::Train)},
                        {"val", ds.count(Split::Val)},
                        {"test", ds.count(Split::Test)}};
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw DataError("cannot write " + dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
}

InteractionDataset load_split_dir(const std::string& dir) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<Split> tags;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    const std::string path = dir + "/" + split_file_name(s);
    if (!std::filesystem::exists(path)) throw DataError("missing split file " + path);
    std::vector<std::pair<std::string, std::string>> part;
    parse_interaction_file(path, '\t', part);
    for (auto& p : part) {
      pairs.push_back(std::move(p));
      tags.push_back(s);
    }
  }
  if (pairs.empty()) throw DataError(dir + ": empty dataset");

  std::vector<Split> kept_tags;
  InteractionDataset ds = build_dataset(pairs, &tags, &kept_tags);
  ds.tags = std::move(kept_tags);

  // Users that ended up without any train interaction cannot be ranked or
  // trained; drop them (with their val/test rows) and re-index.
  std::vector<bool> has_train(ds.num_users, false);
  for (std::size_t k = 0; k < ds.interactions.size(); ++k)
    if (ds.tags[k] == Split::Train) has_train[ds.interactions[k].user] = true;
  bool all_ok = true;
  for (bool b : has_train) all_ok = all_ok && b;
  if (!all_ok) {
    std::size_t dropped = 0;
    std::vector<std::pair<std::string, std::string>> kept;
    std::vector<Split> kt;
    for (std::size_t k = 0; k < ds.interactions.size(); ++k) {
      if (!has_train[ds.interactions[k].user]) {
        ++dropped;
        continue;
      }
      kept.emplace_back(ds.user_ids[ds.interactions[k].user],
                        ds.item_ids[ds.interactions[k].item]);
      kt.push_back(ds.tags[k]);
    }
    log_warn("load_split_dir: dropped " + std::to_string(dropped) +
             " interaction(s) of users with no train data");
    std::vector<Split> kept_tags2;
    InteractionDataset filtered = build_dataset(kept, &kt, &kept_tags2);
    filtered.tags = std::move(kept_tags2);
    return filtered;
  }
  return ds;
}

}  // namespace hccf
