#include <benchmark/benchmark.h>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/model_io.hpp"
#include "fsml/thresholding.hpp"

using namespace fsml;

namespace {

struct Fixture {
  Domain domain = generate_synthetic(default_synth_spec(0), 7);
  EmbeddingTable table;
  Lexicons lexicons = Lexicons::shipped();
  ModelParams model;
  Episode episode;

  explicit Fixture(int dim, int k) : table(toy_embed_corpus(std::vector<Domain>{domain}, dim, 7)) {
    Rng rng(1);
    model = ModelParams::initial(dim, 0.5, 1, 10, rng);
    episode = build_split(domain, k, 1, 16, rng).front();
  }
};

void BM_Scores(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)), 1);
  const PredictContext ctx{f.domain.label_space, f.table, f.lexicons};
  const EpisodePredictor p(f.episode.support, f.model, ctx);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.scores(f.episode.queries[q++ % f.episode.queries.size()].utterance));
  }
}
BENCHMARK(BM_Scores)->Arg(64)->Arg(256);

void BM_PredictCalibrated(benchmark::State& state) {
  const Fixture f(256, static_cast<int>(state.range(0)));
  const PredictContext ctx{f.domain.label_space, f.table, f.lexicons};
  std::size_t q = 0;
  for (auto _ : state) {
    const auto& query = f.episode.queries[q++ % f.episode.queries.size()].utterance;
    benchmark::DoNotOptimize(predict(query, f.episode.support, f.model, ThresholdMode::calibrated(), ctx));
  }
}
BENCHMARK(BM_PredictCalibrated)->Arg(1)->Arg(5);

void BM_KernelRegression(benchmark::State& state) {
  const Fixture f(16, static_cast<int>(state.range(0)));
  const KernelRegressor reg(f.episode.support, f.model.threshold, f.lexicons);
  const Vector scores = Vector::LinSpaced(f.domain.n_labels(), -1.0, 1.0);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reg.threshold(f.episode.queries[q++ % f.episode.queries.size()].utterance, scores));
  }
}
BENCHMARK(BM_KernelRegression)->Arg(1)->Arg(5);

void BM_BuildSupportSet(benchmark::State& state) {
  const Domain d = generate_synthetic(default_synth_spec(1), 8);
  Rng rng(2);
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_support_set(d, k, rng));
}
BENCHMARK(BM_BuildSupportSet)->Arg(1)->Arg(5);

}  // namespace

BENCHMARK_MAIN();
