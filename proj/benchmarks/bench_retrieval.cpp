// Microbenchmarks over the bundled mini-corpus fixtures.

#include <benchmark/benchmark.h>

#include <random>

#include "ctrank/corpus.hpp"
#include "ctrank/dense_index.hpp"
#include "ctrank/eval.hpp"
#include "ctrank/fusion.hpp"
#include "ctrank/sparse_index.hpp"

#ifndef CTRANK_BENCH_FIXTURES_DIR
#error "CTRANK_BENCH_FIXTURES_DIR must be defined"
#endif

namespace {

using namespace ctrank;

const std::filesystem::path kFixtures = CTRANK_BENCH_FIXTURES_DIR;

const Corpus& corpus() {
  static Corpus c = Corpus::load(kFixtures / "corpus.jsonl", CorpusFormat::Jsonl);
  return c;
}

const std::vector<Topic>& topics() {
  static auto t = load_topics(kFixtures / "topics_free.xml", TopicKind::FreeText);
  return t;
}

void BM_Bm25Build(benchmark::State& state) {
  const auto& c = corpus();
  for (auto _ : state) {
    auto index = InvertedIndex::build_bm25(c, TokenBudget{512});
    benchmark::DoNotOptimize(index.doc_count());
  }
}
BENCHMARK(BM_Bm25Build);

void BM_Bm25Search(benchmark::State& state) {
  static auto index = InvertedIndex::build_bm25(corpus(), TokenBudget{512});
  Bm25Params params;
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& topic = topics()[i++ % topics().size()];
    auto query = truncate_tokens(topic.text, TokenBudget{256});
    auto ranking = index.search_bm25(query, 1000, params, topic.topic_id);
    benchmark::DoNotOptimize(ranking.entries.size());
  }
}
BENCHMARK(BM_Bm25Search);

void BM_ImpactSearch(benchmark::State& state) {
  static auto index =
      InvertedIndex::build_impact(load_sparse_vectors(kFixtures / "doc_sparse_vectors.jsonl"));
  static auto queries = load_sparse_vectors(kFixtures / "topic_sparse_vectors.jsonl");
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [id, vec] = queries[i++ % queries.size()];
    auto ranking = index.search_impact(vec, 1000, id);
    benchmark::DoNotOptimize(ranking.entries.size());
  }
}
BENCHMARK(BM_ImpactSearch);

void BM_DenseSearch(benchmark::State& state) {
  static auto index = DenseIndex::load(kFixtures / "doc_embeddings.jsonl");
  static auto queries = load_embeddings_jsonl(kFixtures / "topic_embeddings.jsonl");
  std::size_t i = 0;
  for (auto _ : state) {
    auto ranking = index.search(queries[i++ % queries.size()], 1000);
    benchmark::DoNotOptimize(ranking.entries.size());
  }
}
BENCHMARK(BM_DenseSearch);

Ranking synthetic_ranking(std::mt19937_64& rng, std::size_t n) {
  std::vector<ScoredDoc> entries;
  entries.reserve(n);
  double score = 1e9;
  for (std::size_t i = 0; i < n; ++i) {
    score -= static_cast<double>(rng() % 1000) + 1.0;
    entries.push_back({"D" + std::to_string(i), score});
  }
  Ranking r;
  r.topic_id = "1";
  r.entries = std::move(entries);
  return r;
}

void BM_Interpolate1000(benchmark::State& state) {
  std::mt19937_64 rng(1);
  auto a = synthetic_ranking(rng, 1000);
  auto b = synthetic_ranking(rng, 1000);
  FusionWeights w{0.5, 0.5};
  for (auto _ : state) {
    auto fused = interpolate(a, b, w, 1000);
    benchmark::DoNotOptimize(fused.entries.size());
  }
}
BENCHMARK(BM_Interpolate1000);

void BM_NdcgAt10(benchmark::State& state) {
  static Qrels qrels = Qrels::load(kFixtures / "qrels.txt");
  std::mt19937_64 rng(2);
  auto run = synthetic_ranking(rng, 1000);
  run.topic_id = "1";
  for (auto _ : state) {
    benchmark::DoNotOptimize(ndcg_at_k(run, qrels, 10));
  }
}
BENCHMARK(BM_NdcgAt10);

}  // namespace

BENCHMARK_MAIN();
