#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/mlp.hpp"
#include "fsml/rng.hpp"

namespace fsml::testing {

inline LabeledUtterance item(const std::string& id, std::vector<int> labels,
                             std::vector<std::string> tokens = {"w"}) {
  LabeledUtterance u;
  u.utterance.id = id;
  u.utterance.text = id;
  u.utterance.tokens = std::move(tokens);
  u.labels = std::move(labels);
  return u;
}

inline Domain make_domain(std::vector<std::string> label_names, std::vector<LabeledUtterance> pool,
                          std::string name = "d") {
  Domain d;
  d.name = std::move(name);
  d.label_space = LabelSpace(std::move(label_names));
  d.pool = std::move(pool);
  return d;
}

inline SupportSet support_of(std::vector<LabeledUtterance> items, int k = 1) {
  SupportSet s;
  s.items = std::move(items);
  s.k = k;
  return s;
}

inline TokenMatrix random_tokens(Rng& rng, int n_tokens, int dim) {
  TokenMatrix m(n_tokens, dim);
  for (int r = 0; r < n_tokens; ++r) {
    for (int c = 0; c < dim; ++c) m(r, c) = static_cast<float>(rng.approx_normal());
  }
  return m;
}

/// Random vectors for every utterance and label name of `domains`.
inline EmbeddingTable random_table(const std::vector<Domain>& domains, int dim, Rng& rng) {
  EmbeddingTable t(dim);
  for (const auto& d : domains) {
    for (const auto& u : d.pool) {
      t.add(RecordKind::kUtterance, u.id(),
            random_tokens(rng, static_cast<int>(u.utterance.tokens.size()), dim));
    }
    for (int l = 0; l < d.n_labels(); ++l) {
      if (!t.has_label(d.label_space.name(l))) {
        t.add(RecordKind::kLabel, d.label_space.name(l),
              random_tokens(rng, static_cast<int>(d.label_space.name_tokens(l).size()), dim));
      }
    }
  }
  return t;
}

inline EmbeddingTable random_table(const Domain& d, int dim, Rng& rng) {
  return random_table(std::vector<Domain>{d}, dim, rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fsml_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Smallest |pre-activation| of `mlp` over `inputs`. Finite differences with
/// a step near this margin cross a ReLU kink.
inline double min_preactivation(const Mlp& mlp, const std::vector<Vector>& inputs) {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& x : inputs) {
    Vector a = x;
    for (const auto& layer : mlp.layers()) {
      const Vector z = layer.weights * a + layer.bias;
      out = std::min(out, z.cwiseAbs().minCoeff());
      a = z.cwiseMax(0.0);
    }
  }
  return out;
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1e-6, std::abs(analytic), std::abs(numeric)});
}

}  // namespace fsml::testing
