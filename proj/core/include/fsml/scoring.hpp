#pragma once

#include <string>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/labelrep.hpp"
#include "fsml/linalg.hpp"

namespace fsml {

struct RelevanceScores {
  std::string query_id;
  Vector scores;  // label-space order

  int size() const noexcept { return static_cast<int>(scores.size()); }
};

/// scores[i] = <W E(x), c~_i>. With beta = 0 this is the prototypical
/// network scorer.
RelevanceScores relevance_scores(const Utterance& query, const LabelReps& reps,
                                 const EmbeddingTable& table, const Matrix* proj = nullptr);

/// Matching-network baseline: scores[i] is the mean dot product between the
/// query and the support items carrying label i.
RelevanceScores matching_scores(const Utterance& query, const SupportSet& support, int n_labels,
                                const EmbeddingTable& table, const Matrix* proj = nullptr);

}  // namespace fsml
