#include <benchmark/benchmark.h>

#include "listgen/decoder.hpp"
#include "listgen/docids.hpp"
#include "listgen/embedding.hpp"
#include "listgen/objectives.hpp"
#include "listgen/rng.hpp"

namespace {

using namespace listgen;

ScorerModel bench_model() {
  ModelConfig config;
  config.query_vocab = 4096;
  config.embed_dim = 32;
  config.hidden_dim = 64;
  config.seed = 1;
  return ScorerModel::init(config);
}

DocidMap bench_map(int n) {
  Rng rng(11);
  std::vector<std::string> ids;
  std::vector<std::vector<double>> embeddings;
  for (int i = 0; i < n; ++i) {
    ids.push_back("d" + std::to_string(100000 + i));
    std::vector<double> v(16);
    for (auto& x : v) x = rng.gaussian();
    embeddings.push_back(std::move(v));
  }
  return assign_docids(ids, embeddings, {}, 11);
}

void BM_HierarchicalKMeans(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  std::vector<std::string> ids;
  std::vector<std::vector<double>> embeddings;
  for (int i = 0; i < n; ++i) {
    ids.push_back("d" + std::to_string(100000 + i));
    std::vector<double> v(16);
    for (auto& x : v) x = rng.gaussian();
    embeddings.push_back(std::move(v));
  }
  for (auto _ : state) {
    DocidMap map = assign_docids(ids, embeddings, {}, 3);
    benchmark::DoNotOptimize(map);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_HierarchicalKMeans)->Arg(200)->Arg(1000);

void BM_ConstrainedBeamSearch(benchmark::State& state) {
  ScorerModel model = bench_model();
  DocidMap map = bench_map(static_cast<int>(state.range(0)));
  DecimalTrie trie = DecimalTrie::build(map);
  std::vector<int> query{17, 912, 44};
  const int beam = static_cast<int>(state.range(1));
  for (auto _ : state) {
    auto out = constrained_beam_search(model, query, trie, beam, beam);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_ConstrainedBeamSearch)->Args({200, 10})->Args({200, 20})->Args({1000, 20});

void BM_TeacherForcedGradient(benchmark::State& state) {
  ScorerModel model = bench_model();
  std::vector<PointwisePair> pairs;
  Rng rng(5);
  for (int i = 0; i < 8; ++i) {
    std::vector<int> query(12);
    for (auto& t : query) t = static_cast<int>(rng.below(4096));
    Docid docid;
    docid.digits = {static_cast<std::uint8_t>(rng.below(10)),
                    static_cast<std::uint8_t>(rng.below(10)),
                    static_cast<std::uint8_t>(rng.below(10))};
    pairs.push_back({std::move(query), std::move(docid)});
  }
  GradientSet grads = GradientSet::zeros_like(model);
  for (auto _ : state) {
    std::fill(grads.values.begin(), grads.values.end(), 0.0);
    double loss = pointwise_loss_grad(model, pairs, 0.0, grads);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * pairs.size());
}
BENCHMARK(BM_TeacherForcedGradient);

}  // namespace

BENCHMARK_MAIN();
