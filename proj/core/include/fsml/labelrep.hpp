#pragma once

#include <vector>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/linalg.hpp"

namespace fsml {

/// Prototypes c_i, anchored representations c~_i and support counts M_i for
/// every label of a domain.
struct LabelReps {
  std::vector<Vector> prototypes;
  std::vector<Vector> anchored;
  std::vector<int> counts;
  double beta = 0.0;

  int size() const noexcept { return static_cast<int>(anchored.size()); }
};

/// Mean of the (optionally projected) sentence embeddings of the support
/// items carrying `label`. Throws DataError if no item carries it.
Vector prototype(int label, const SupportSet& support, const EmbeddingTable& table,
                 const Matrix* proj = nullptr);

/// beta * E(y) + (1 - beta) * prototype, with the label-name anchor passed
/// through the same projection. Throws ConfigError when beta is outside [0, 1].
Vector anchored_rep(int label, const SupportSet& support, const LabelSpace& labels,
                    const EmbeddingTable& table, double beta, const Matrix* proj = nullptr);

LabelReps compute_label_reps(const SupportSet& support, const LabelSpace& labels,
                             const EmbeddingTable& table, double beta,
                             const Matrix* proj = nullptr);

}  // namespace fsml
