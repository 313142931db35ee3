#include "fsml/episodes.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "fsml/errors.hpp"

namespace fsml {

using nlohmann::json;

std::vector<int> SupportSet::label_counts(int n_labels) const {
  std::vector<int> counts(n_labels, 0);
  for (const auto& item : items) {
    for (int l : item.labels) ++counts[l];
  }
  return counts;
}

bool satisfies_k_shot(const SupportSet& support, int n_labels, int k) {
  const auto counts = support.label_counts(n_labels);
  return std::all_of(counts.begin(), counts.end(), [k](int c) { return c >= k; });
}

bool is_minimal(const SupportSet& support, int n_labels, int k) {
  const auto counts = support.label_counts(n_labels);
  for (const auto& item : support.items) {
    const bool removable =
        std::all_of(item.labels.begin(), item.labels.end(), [&](int l) { return counts[l] - 1 >= k; });
    if (removable) return false;
  }
  return true;
}

SupportSet build_support_set(const Domain& domain, int k, Rng& rng, const SupportOptions& options) {
  if (k < 1) throw ConfigError("k must be positive");
  const int n = domain.n_labels();
  std::vector<int> available(n, 0);
  for (const auto& u : domain.pool) {
    for (int l : u.labels) ++available[l];
  }
  for (int l = 0; l < n; ++l) {
    if (available[l] < k) {
      throw DataError("domain \"" + domain.name + "\": label \"" + domain.label_space.name(l) +
                      "\" occurs " + std::to_string(available[l]) + " times, fewer than k = " +
                      std::to_string(k));
    }
  }

  std::vector<std::size_t> order(domain.pool.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  // Greedy addition in shuffled order.
  std::vector<int> counts(n, 0);
  int deficient = n;
  std::vector<std::size_t> chosen;  // positions in `order`
  for (std::size_t pos = 0; pos < order.size() && deficient > 0; ++pos) {
    const auto& u = domain.pool[order[pos]];
    const bool helps = std::any_of(u.labels.begin(), u.labels.end(), [&](int l) { return counts[l] < k; });
    if (!helps) continue;
    chosen.push_back(pos);
    for (int l : u.labels) {
      if (++counts[l] == k) --deficient;
    }
  }

  // Removal pass: larger label sets first, ties in shuffled order.
  std::vector<std::size_t> candidates = chosen;
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return domain.pool[order[a]].labels.size() > domain.pool[order[b]].labels.size();
  });
  std::set<std::size_t> removed;
  for (std::size_t pos : candidates) {
    const auto& u = domain.pool[order[pos]];
    const bool removable =
        std::all_of(u.labels.begin(), u.labels.end(), [&](int l) { return counts[l] - 1 >= k; });
    if (!removable) continue;
    if (options.skip_probability > 0.0 && rng.bernoulli(options.skip_probability)) continue;
    removed.insert(pos);
    for (int l : u.labels) --counts[l];
  }

  SupportSet support;
  support.k = k;
  for (std::size_t pos : chosen) {
    if (!removed.contains(pos)) support.items.push_back(domain.pool[order[pos]]);
  }
  return support;
}

std::vector<Episode> build_split(const Domain& domain, int k, int n_episodes, int query_size,
                                 Rng& rng, const SupportOptions& options) {
  if (n_episodes < 0) throw ConfigError("n_episodes must be non-negative");
  if (query_size < 1) throw ConfigError("query_size must be positive");
  std::vector<Episode> episodes;
  episodes.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    Episode ep;
    ep.domain_name = domain.name;
    ep.support = build_support_set(domain, k, rng, options);

    std::set<std::string, std::less<>> support_ids;
    for (const auto& item : ep.support.items) support_ids.insert(item.id());
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < domain.pool.size(); ++i) {
      if (!support_ids.contains(domain.pool[i].id())) rest.push_back(i);
    }
    if (static_cast<int>(rest.size()) < query_size) {
      throw DataError("domain \"" + domain.name + "\": only " + std::to_string(rest.size()) +
                      " utterances remain outside the support set, need " + std::to_string(query_size));
    }
    // Partial Fisher-Yates draw without replacement.
    for (int q = 0; q < query_size; ++q) {
      const auto j = q + static_cast<std::size_t>(rng.uniform_int(rest.size() - q));
      std::swap(rest[q], rest[j]);
      ep.queries.push_back(domain.pool[rest[q]]);
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

void save_split(std::span<const Episode> episodes, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& ep : episodes) {
    json support_ids = json::array();
    for (const auto& item : ep.support.items) support_ids.push_back(item.id());
    json query_ids = json::array();
    for (const auto& q : ep.queries) query_ids.push_back(q.id());
    arr.push_back({{"domain", ep.domain_name},
                   {"k", ep.support.k},
                   {"support_ids", std::move(support_ids)},
                   {"query_ids", std::move(query_ids)}});
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write episode file " + path.string());
  f << arr.dump(2) << '\n';
}

std::vector<Episode> load_split(const std::filesystem::path& path, const Domain& domain) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open episode file " + path.string());
  json arr;
  try {
    f >> arr;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!arr.is_array()) throw DataError(path.string() + ": expected a JSON array of episodes");

  std::vector<Episode> episodes;
  for (std::size_t e = 0; e < arr.size(); ++e) {
    const auto& j = arr[e];
    const std::string where = path.string() + ": episode " + std::to_string(e);
    try {
      Episode ep;
      ep.domain_name = j.at("domain").get<std::string>();
      if (ep.domain_name != domain.name) {
        throw DataError("domain \"" + ep.domain_name + "\" does not match \"" + domain.name + "\"");
      }
      ep.support.k = j.at("k").get<int>();
      std::set<std::string, std::less<>> support_ids;
      for (const auto& id : j.at("support_ids")) {
        const auto s = id.get<std::string>();
        const auto idx = domain.find(s);
        if (!idx) throw DataError("unknown support id \"" + s + "\"");
        if (!support_ids.insert(s).second) throw DataError("duplicate support id \"" + s + "\"");
        ep.support.items.push_back(domain.pool[*idx]);
      }
      for (const auto& id : j.at("query_ids")) {
        const auto s = id.get<std::string>();
        const auto idx = domain.find(s);
        if (!idx) throw DataError("unknown query id \"" + s + "\"");
        if (support_ids.contains(s)) throw DataError("query id \"" + s + "\" is also a support id");
        ep.queries.push_back(domain.pool[*idx]);
      }
      episodes.push_back(std::move(ep));
    } catch (const json::exception& ex) {
      throw DataError(where + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError(where + ": " + ex.what());
    }
  }
  return episodes;
}

}  // namespace fsml
