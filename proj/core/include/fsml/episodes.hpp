#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsml/corpus.hpp"
#include "fsml/rng.hpp"

namespace fsml {

struct SupportSet {
  std::vector<LabeledUtterance> items;
  int k = 1;

  std::size_t size() const noexcept { return items.size(); }
  /// Number of items carrying each label.
  std::vector<int> label_counts(int n_labels) const;
};

struct Episode {
  std::string domain_name;
  SupportSet support;
  std::vector<LabeledUtterance> queries;
};

struct SupportOptions {
  /// Chance of skipping an allowed removal step.
  double skip_probability = 0.2;
};

/// Minimum-including construction of a K-shot support set.
///   1. shuffle the pool;
///   2. walk it, adding an utterance whenever one of its labels is still
///      below k, until every label reaches k;
///   3. walk the support by descending label-set size (ties in shuffled
///      order) and drop an item when every count stays >= k, unless a
///      Bernoulli(skip_probability) draw says to keep it.
/// Throws DataError naming the first label that occurs fewer than k times.
SupportSet build_support_set(const Domain& domain, int k, Rng& rng,
                             const SupportOptions& options = {});

/// True when every label occurs at least k times.
bool satisfies_k_shot(const SupportSet& support, int n_labels, int k);
/// True when removing any single item breaks satisfies_k_shot.
bool is_minimal(const SupportSet& support, int n_labels, int k);

/// n_episodes episodes, each a fresh support set plus query_size queries
/// drawn without replacement from the rest of the pool.
/// Throws DataError when the pool cannot supply query_size queries.
std::vector<Episode> build_split(const Domain& domain, int k, int n_episodes, int query_size,
                                 Rng& rng, const SupportOptions& options = {});

/// Episode split files store ids only:
/// [{"domain": str, "k": int, "support_ids": [str], "query_ids": [str]}, ...]
void save_split(std::span<const Episode> episodes, const std::filesystem::path& path);
/// Resolves ids against `domain`; throws DataError on unknown ids, a domain
/// name mismatch, or a query id that is also in the support set.
std::vector<Episode> load_split(const std::filesystem::path& path, const Domain& domain);

}  // namespace fsml
