#include "fsml/scoring.hpp"

#include "fsml/errors.hpp"

namespace fsml {

RelevanceScores relevance_scores(const Utterance& query, const LabelReps& reps,
                                 const EmbeddingTable& table, const Matrix* proj) {
  Vector q = utterance_embedding(query, table);
  if (proj) q = *proj * q;
  RelevanceScores out{query.id, Vector(reps.size())};
  for (int i = 0; i < reps.size(); ++i) {
    if (reps.anchored[i].size() != q.size()) throw DataError("label representation dimension mismatch");
    out.scores[i] = q.dot(reps.anchored[i]);
  }
  return out;
}

RelevanceScores matching_scores(const Utterance& query, const SupportSet& support, int n_labels,
                                const EmbeddingTable& table, const Matrix* proj) {
  Vector q = utterance_embedding(query, table);
  if (proj) q = *proj * q;
  RelevanceScores out{query.id, Vector::Zero(n_labels)};
  std::vector<int> counts(n_labels, 0);
  for (const auto& item : support.items) {
    Vector s = utterance_embedding(item.utterance, table);
    if (proj) s = *proj * s;
    const double d = q.dot(s);
    for (int l : item.labels) {
      out.scores[l] += d;
      ++counts[l];
    }
  }
  for (int l = 0; l < n_labels; ++l) {
    if (counts[l] == 0) throw DataError("label " + std::to_string(l) + " has no support items");
    out.scores[l] /= counts[l];
  }
  return out;
}

}  // namespace fsml
