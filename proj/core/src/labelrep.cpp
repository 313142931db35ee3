#include "fsml/labelrep.hpp"

#include "fsml/errors.hpp"

namespace fsml {
namespace {

Vector project(const Vector& v, const Matrix* proj) { return proj ? Vector(*proj * v) : v; }

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must be in [0, 1]");
}

}  // namespace

Vector prototype(int label, const SupportSet& support, const EmbeddingTable& table, const Matrix* proj) {
  Vector sum = Vector::Zero(table.dim());
  int count = 0;
  for (const auto& item : support.items) {
    if (!item.has_label(label)) continue;
    sum += utterance_embedding(item.utterance, table);
    ++count;
  }
  if (count == 0) throw DataError("label " + std::to_string(label) + " has no support items");
  return project(sum / count, proj);
}

Vector anchored_rep(int label, const SupportSet& support, const LabelSpace& labels,
                    const EmbeddingTable& table, double beta, const Matrix* proj) {
  check_beta(beta);
  const Vector anchor = project(label_name_embedding(labels.name(label), table), proj);
  const Vector proto = prototype(label, support, table, proj);
  return beta * anchor + (1.0 - beta) * proto;
}

LabelReps compute_label_reps(const SupportSet& support, const LabelSpace& labels,
                             const EmbeddingTable& table, double beta, const Matrix* proj) {
  check_beta(beta);
  const int n = labels.size();
  LabelReps reps;
  reps.beta = beta;
  reps.counts = support.label_counts(n);

  // Embed each support item once.
  std::vector<Vector> item_vecs;
  item_vecs.reserve(support.items.size());
  for (const auto& item : support.items) item_vecs.push_back(utterance_embedding(item.utterance, table));

  for (int l = 0; l < n; ++l) {
    if (reps.counts[l] == 0) {
      throw DataError("label \"" + labels.name(l) + "\" has no support items");
    }
    Vector sum = Vector::Zero(table.dim());
    for (std::size_t i = 0; i < support.items.size(); ++i) {
      if (support.items[i].has_label(l)) sum += item_vecs[i];
    }
    Vector proto = project(sum / reps.counts[l], proj);
    const Vector anchor = project(label_name_embedding(labels.name(l), table), proj);
    reps.anchored.push_back(beta * anchor + (1.0 - beta) * proto);
    reps.prototypes.push_back(std::move(proto));
  }
  return reps;
}

}  // namespace fsml
