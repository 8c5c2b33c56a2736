#include <doctest.h>

#include <map>
#include <random>

#include "ctrank/error.hpp"
#include "ctrank/fusion.hpp"
#include "test_support.hpp"

using namespace ctrank;
using ctrank::test::make_ranking;
using ctrank::test::temp_dir;
using ctrank::test::write_file;

namespace {

Ranking random_ranking(std::mt19937_64& rng, const std::string& topic, std::size_t max_docs,
                       std::size_t universe) {
  std::vector<ScoredDoc> entries;
  std::size_t n = 1 + rng() % max_docs;
  std::map<std::string, bool> used;
  for (std::size_t i = 0; i < n; ++i) {
    std::string doc = "D" + std::to_string(100 + rng() % universe);
    if (used[doc]) continue;
    used[doc] = true;
    // integer scores keep the shift/scale invariance checks exact
    entries.push_back({doc, static_cast<double>(rng() % 1000)});
  }
  return make_ranking(topic, std::move(entries));
}

std::vector<std::string> doc_order(const Ranking& r) {
  std::vector<std::string> out;
  for (const auto& e : r.entries) out.push_back(e.doc_id);
  return out;
}

// Straightforward recomputation with plain maps, kept separate from the
// library path on purpose.
std::map<std::string, double> naive_fused_scores(const Ranking& a, const Ranking& b, double wa,
                                                 double wb) {
  auto norm = [](const Ranking& r) {
    std::map<std::string, double> out;
    if (r.entries.empty()) return out;
    double lo = r.entries[0].score, hi = r.entries[0].score;
    for (const auto& e : r.entries) {
      lo = std::min(lo, e.score);
      hi = std::max(hi, e.score);
    }
    for (const auto& e : r.entries) {
      out[e.doc_id] = (hi == lo) ? 0.5 : (e.score - lo) / (hi - lo);
    }
    return out;
  };
  auto na = norm(a);
  auto nb = norm(b);
  std::map<std::string, double> fused;
  for (const auto& [doc, s] : na) fused[doc] += wa * s;
  for (const auto& [doc, s] : nb) fused[doc] += wb * s;
  return fused;
}

}  // namespace

TEST_CASE("minmax_normalize") {
  auto r = make_ranking("t", {{"a", 6.0}, {"b", 4.0}, {"c", 2.0}});
  auto n = minmax_normalize(r);
  CHECK(n.entries[0].score == 1.0);
  CHECK(n.entries[1].score == 0.5);
  CHECK(n.entries[2].score == 0.0);

  auto tied = minmax_normalize(make_ranking("t", {{"a", 7.0}, {"b", 7.0}}));
  CHECK(tied.entries[0].score == 0.5);
  CHECK(tied.entries[1].score == 0.5);

  Ranking empty;
  CHECK(minmax_normalize(empty).entries.empty());
}

TEST_CASE("interpolate matches the worked example") {
  auto a = make_ranking("t", {{"A", 10.0}, {"B", 0.0}});
  auto b = make_ranking("t", {{"B", 5.0}, {"A", 0.0}});
  auto fused = interpolate(a, b, FusionWeights{0.5, 0.5}, 10);
  REQUIRE(fused.entries.size() == 2);
  CHECK(fused.entries[0].doc_id == "A");  // tie broken by id
  CHECK(fused.entries[0].score == 0.5);
  CHECK(fused.entries[1].doc_id == "B");
  CHECK(fused.entries[1].score == 0.5);
}

TEST_CASE("interpolate without normalization uses raw scores") {
  auto a = make_ranking("t", {{"A", 10.0}, {"B", 0.0}});
  auto b = make_ranking("t", {{"B", 5.0}});
  auto fused = interpolate(a, b, FusionWeights{0.5, 0.5}, 10, /*normalize=*/false);
  REQUIRE(fused.entries.size() == 2);
  CHECK(fused.entries[0].doc_id == "A");
  CHECK(fused.entries[0].score == 5.0);
  CHECK(fused.entries[1].doc_id == "B");
  CHECK(fused.entries[1].score == 2.5);
}

TEST_CASE("interpolate rejects topic mismatch and bad weights") {
  auto a = make_ranking("t1", {{"A", 1.0}});
  auto b = make_ranking("t2", {{"A", 1.0}});
  try {
    interpolate(a, b, FusionWeights{0.5, 0.5}, 10);
    FAIL("expected TopicMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TopicMismatch);
  }
  auto b2 = make_ranking("t1", {{"A", 1.0}});
  CHECK_THROWS_AS(interpolate(a, b2, FusionWeights{0.9, 0.3}, 10), std::invalid_argument);
}

TEST_CASE("interpolate against an independent recomputation") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_ranking(rng, "t", 100, 150);
    auto b = random_ranking(rng, "t", 100, 150);
    auto fused = interpolate(a, b, FusionWeights{0.9, 0.1}, 1000);
    auto naive = naive_fused_scores(a, b, 0.9, 0.1);
    REQUIRE(fused.entries.size() == naive.size());
    for (const auto& e : fused.entries) {
      CHECK(e.score == doctest::Approx(naive.at(e.doc_id)).epsilon(1e-12));
    }
  }
}

TEST_CASE("fusion contract properties") {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_ranking(rng, "t", 40, 60);
    auto b = random_ranking(rng, "t", 40, 60);
    FusionWeights w{static_cast<double>(rng() % 101) / 100.0, 0.0};
    w.w_b = 1.0 - w.w_a;

    auto fused = interpolate(a, b, w, 1000);

    // fused scores live in [0,1]
    for (const auto& e : fused.entries) {
      CHECK(e.score >= 0.0);
      CHECK(e.score <= 1.0);
    }

    // symmetry under operand/weight swap
    auto swapped = interpolate(b, a, FusionWeights{w.w_b, w.w_a}, 1000);
    CHECK(fused.entries == swapped.entries);

    // w = (1,0) keeps a's order
    auto identity = interpolate(a, b, FusionWeights{1.0, 0.0}, a.entries.size());
    CHECK(doc_order(identity) == doc_order(a));

    // shift/scale invariance of the inputs (exact transforms)
    Ranking a2 = a;
    const double scales[] = {0.25, 0.5, 2.0, 4.0, 8.0};
    double scale = scales[rng() % 5];
    double shift = static_cast<double>(rng() % 40) - 20.0;
    for (auto& e : a2.entries) e.score = e.score * scale + shift;
    auto fused2 = interpolate(a2, b, w, 1000);
    CHECK(doc_order(fused2) == doc_order(fused));
  }
}

TEST_CASE("interpolate_runs covers the union of topics") {
  RunMap a, b;
  a["1"] = make_ranking("1", {{"A", 2.0}, {"B", 1.0}});
  b["1"] = make_ranking("1", {{"B", 9.0}});
  b["2"] = make_ranking("2", {{"C", 4.0}});
  auto fused = interpolate_runs(a, b, FusionWeights{0.5, 0.5}, 10);
  REQUIRE(fused.size() == 2);
  CHECK(fused.at("2").entries.size() == 1);
  CHECK(fused.at("2").entries[0].doc_id == "C");
}

TEST_CASE("ce score file loading and rescoring") {
  auto dir = temp_dir("ce");
  auto path = dir / "ce.tsv";
  write_file(path, "1\tA\t4.5\n1\tB\t9.25\n2\tA\t1.0\n");
  auto ce = load_ce_scores(path);
  CHECK(ce.scores.size() == 3);

  auto base = make_ranking("1", {{"A", 100.0}, {"B", 50.0}});
  auto rescored = ce_rescore(base, ce);
  REQUIRE(rescored.entries.size() == 2);
  CHECK(rescored.entries[0].doc_id == "B");
  CHECK(rescored.entries[0].score == 9.25);

  auto wider = make_ranking("1", {{"A", 3.0}, {"B", 2.0}, {"Z", 1.0}});
  try {
    ce_rescore(wider, ce);
    FAIL("expected IncompleteScores");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompleteScores);
    CHECK(std::string(e.what()).find("(1, Z)") != std::string::npos);
  }

  write_file(path, "1\tA\tnot-a-number\n");
  CHECK_THROWS_AS(load_ce_scores(path), Error);
  write_file(path, "1\tA\t1.0\n1\tA\t2.0\n");
  CHECK_THROWS_AS(load_ce_scores(path), Error);
}

TEST_CASE("ce-style interpolation reuses the hybrid operation") {
  // the 2.3 stage is interpolate() with w = (0.9, 0.1), a = CE scores
  auto hybrid = make_ranking("1", {{"A", 10.0}, {"B", 8.0}, {"C", 1.0}});
  auto dir = temp_dir("ce2");
  write_file(dir / "ce.tsv", "1\tA\t0.2\n1\tB\t5.0\n1\tC\t4.8\n");
  auto ce = load_ce_scores(dir / "ce.tsv");
  auto rescored = ce_rescore(hybrid, ce);
  auto fused = interpolate(rescored, hybrid, FusionWeights{0.9, 0.1}, 1000);
  // CE dominates: B then C then A
  CHECK(doc_order(fused) == std::vector<std::string>{"B", "C", "A"});
}
