// Drives the real ctrank binary as a subprocess, one subcommand at a time,
// against the bundled fixtures and the in-process fake chat endpoint.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctrank/corpus.hpp"
#include "ctrank/eval.hpp"
#include "ctrank/llm.hpp"
#include "ctrank/mining.hpp"
#include "fake_llm_server.hpp"
#include "test_support.hpp"

#ifndef CTRANK_CLI_PATH
#error "CTRANK_CLI_PATH must be defined"
#endif

using namespace ctrank;
using ctrank::test::fixtures_dir;
using ctrank::test::read_file;
using ctrank::test::temp_dir;
using ctrank::test::write_file;
using nlohmann::json;

namespace {

const std::string kCli = CTRANK_CLI_PATH;

int run_cli(const std::string& args, const std::filesystem::path& stderr_to = {}) {
  std::string command = kCli + " " + args + " > /dev/null";
  if (!stderr_to.empty()) {
    command += " 2> " + stderr_to.string();
  } else {
    command += " 2> /dev/null";
  }
  return std::system(command.c_str());
}

json load_manifest(const std::filesystem::path& artifact) {
  auto path = artifact;
  path += ".manifest.json";
  return json::parse(read_file(path));
}

}  // namespace

TEST_CASE("convert-topics rewrites template topics as free text") {
  fake::FakeLlmServer::Options options;
  fake::FakeLlmServer server(options);
  auto dir = temp_dir("cli-convert");
  auto out = dir / "converted.xml";
  REQUIRE(run_cli("convert-topics --topics " + (fixtures_dir() / "topics_template.xml").string() +
                  " --endpoint " + server.endpoint() + " --cache-dir " +
                  (dir / "cache").string() + " --out " + out.string()) == 0);

  auto topics = load_topics(out, TopicKind::FreeText);
  REQUIRE(topics.size() == 10);
  for (const auto& t : topics) {
    CHECK_FALSE(t.text.empty());
    CHECK(t.text.find('<') == std::string::npos);  // tags stripped by conversion
  }
  // field contents survive the conversion (topic 1 is the diabetes patient)
  CHECK(topics[0].topic_id == "1");
  CHECK(topics[0].text.find("diabetes") != std::string::npos);

  auto manifest = load_manifest(out);
  CHECK(manifest["subcommand"] == "convert-topics");
  CHECK(manifest["config_hash"].get<std::string>().size() == 64);
}

TEST_CASE("generate-synthetic filters refusals and reports counts") {
  auto dir = temp_dir("cli-generate");
  // side corpus with trials whose text trips the fake endpoint's refusal path
  std::string corpus;
  for (int i = 0; i < 6; ++i) {
    TrialDoc doc;
    doc.doc_id = "SD00" + std::to_string(i);
    doc.title = "SD00" + std::to_string(i) + " synthetic corpus trial";
    doc.summary = (i % 2 == 0) ? "routine observational cohort"
                               : "contains sensitive screening material";
    doc.detail = "small corpus for generation tests";
    corpus += trial_to_jsonl(doc) + "\n";
  }
  write_file(dir / "corpus.jsonl", corpus);
  write_file(dir / "topics.tsv", "g1\tgold patient description with a stable chronic condition\n");
  write_file(dir / "qrels.txt", "g1 0 SD000 2\n");

  fake::FakeLlmServer::Options options;
  fake::FakeLlmServer server(options);
  auto out = dir / "pairs.jsonl";
  REQUIRE(run_cli("generate-synthetic --corpus " + (dir / "corpus.jsonl").string() +
                  " --topics " + (dir / "topics.tsv").string() + " --qrels " +
                  (dir / "qrels.txt").string() + " --count 10 --seed 3 --endpoint " +
                  server.endpoint() + " --cache-dir " + (dir / "cache").string() + " --out " +
                  out.string()) == 0);

  auto manifest = load_manifest(out);
  std::size_t kept = manifest["stats"]["kept"].get<std::size_t>();
  std::size_t rejected = manifest["stats"]["rejected"].get<std::size_t>();
  CHECK(kept + rejected == 10);
  CHECK(rejected >= 1);  // half the corpus trips the refusal filter

  std::ifstream in(out);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++lines;
    auto row = json::parse(line);
    auto text = row["query_text"].get<std::string>();
    CHECK(filter_generation(text).keep);  // everything written passed the filter
    CHECK(row["origin"] == "synthetic");
    CHECK(row["positive_doc_id"].get<std::string>().rfind("SD", 0) == 0);
  }
  CHECK(lines == kept);
}

TEST_CASE("mine produces a deduplicated mixed training set from run files") {
  auto dir = temp_dir("cli-mine");

  // queries = 10 human topics + the synthetic pair queries, searched together
  std::string topics_tsv;
  for (const auto& t : load_topics(fixtures_dir() / "topics_free.xml", TopicKind::FreeText)) {
    topics_tsv += t.topic_id + "\t" + t.text + "\n";
  }
  {
    std::ifstream in(fixtures_dir() / "synthetic_pairs.jsonl");
    std::string line;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto row = json::parse(line);
      if (seen.insert(row["query_id"].get<std::string>()).second) {
        topics_tsv +=
            row["query_id"].get<std::string>() + "\t" + row["query_text"].get<std::string>() + "\n";
      }
    }
  }
  write_file(dir / "all_topics.tsv", topics_tsv);

  REQUIRE(run_cli("index-bm25 --corpus " + (fixtures_dir() / "corpus.jsonl").string() +
                  " --doc-budget 512 --out " + (dir / "bm25.idx").string()) == 0);
  REQUIRE(run_cli("search --bm25 --index " + (dir / "bm25.idx").string() + " --topics " +
                  (dir / "all_topics.tsv").string() + " --query-budget 256 --k 200 --out " +
                  (dir / "pool.run").string()) == 0);

  auto out = dir / "train.jsonl";
  REQUIRE(run_cli("mine --run " + (dir / "pool.run").string() + " --pairs " +
                  (fixtures_dir() / "human_pairs.jsonl").string() + " --pairs " +
                  (fixtures_dir() / "synthetic_pairs.jsonl").string() + " --qrels " +
                  (fixtures_dir() / "qrels.txt").string() +
                  " --pool-depth 200 --negatives 3 --seed 42 --out " + out.string()) == 0);

  auto qrels = Qrels::load(fixtures_dir() / "qrels.txt");
  auto examples = load_training_jsonl(out);
  REQUIRE(!examples.empty());
  std::size_t human = 0;
  for (const auto& e : examples) {
    CHECK(e.negative_doc_ids.size() == 3);
    for (const auto& n : e.negative_doc_ids) {
      CHECK(n != e.positive_doc_id);
      auto grade = qrels.grade(e.query_id, n);
      CHECK((!grade || *grade < 2));
    }
    if (e.origin == ExampleOrigin::Human) ++human;
  }
  CHECK(human == 40);  // 4 grade-2 docs x 10 topics
  auto manifest = load_manifest(out);
  CHECK(manifest["stats"]["examples"].get<std::size_t>() == examples.size());

  // same seed, same inputs -> byte-identical output
  auto out2 = dir / "train2.jsonl";
  REQUIRE(run_cli("mine --run " + (dir / "pool.run").string() + " --pairs " +
                  (fixtures_dir() / "human_pairs.jsonl").string() + " --pairs " +
                  (fixtures_dir() / "synthetic_pairs.jsonl").string() + " --qrels " +
                  (fixtures_dir() / "qrels.txt").string() +
                  " --pool-depth 200 --negatives 3 --seed 42 --out " + out2.string()) == 0);
  CHECK(read_file(out) == read_file(out2));
}

TEST_CASE("significance and deltas reports") {
  auto dir = temp_dir("cli-sig");
  auto run_a = (fixtures_dir() / "eval" / "run_a.txt").string();
  auto run_b = (fixtures_dir() / "eval" / "run_b.txt").string();
  auto qrels = (fixtures_dir() / "qrels.txt").string();

  auto table = dir / "sig.txt";
  REQUIRE(run_cli("significance --run " + run_a + " --run " + run_b + " --qrels " + qrels +
                  " --out " + table.string()) == 0);
  auto report = read_file(table);
  CHECK(report.find("(a) run_a") != std::string::npos);
  CHECK(report.find("(b) run_b") != std::string::npos);
  CHECK(report.find("ndcg@10") != std::string::npos);

  auto csv = dir / "deltas.csv";
  REQUIRE(run_cli("deltas --run-a " + run_a + " --run-b " + run_b + " --qrels " + qrels +
                  " --metric ndcg --out " + csv.string()) == 0);
  std::istringstream in(read_file(csv));
  std::string line;
  std::getline(in, line);
  CHECK(line == "topic_id,delta");
  double previous = 1e300;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    double delta = std::stod(line.substr(comma + 1));
    CHECK(delta <= previous);
    previous = delta;
    ++rows;
  }
  CHECK(rows == 10);
}

TEST_CASE("config files apply with CLI flags taking precedence") {
  auto dir = temp_dir("cli-config");
  write_file(dir / "fuse.cfg", "fuse.w-a=0.3\nfuse.w-b=0.7\nfuse.k=5\n");
  auto run_a = (fixtures_dir() / "eval" / "run_a.txt").string();
  auto run_b = (fixtures_dir() / "eval" / "run_b.txt").string();

  auto out = dir / "fused.run";
  REQUIRE(run_cli("--config " + (dir / "fuse.cfg").string() + " fuse --run-a " + run_a +
                  " --run-b " + run_b + " --w-a 0.5 --w-b 0.5 --out " + out.string()) == 0);
  auto manifest = load_manifest(out);
  CHECK(manifest["params"]["w_a"].get<double>() == 0.5);  // CLI wins
  CHECK(manifest["params"]["k"].get<std::size_t>() == 5);  // config file applies
  for (const auto& [topic, ranking] : read_run(out)) {
    CHECK(ranking.entries.size() <= 5);
  }
}

TEST_CASE("failures exit non-zero with a one-line JSON error") {
  auto dir = temp_dir("cli-error");
  auto err_file = dir / "err.txt";
  int rc = run_cli("evaluate --run /nonexistent/run.txt --qrels /nonexistent/qrels.txt --out " +
                       (dir / "report.json").string(),
                   err_file);
  CHECK(rc != 0);
  auto err_text = read_file(err_file);
  REQUIRE_FALSE(err_text.empty());
  CHECK(std::count(err_text.begin(), err_text.end(), '\n') == 1);
  auto err = json::parse(err_text);
  CHECK(err["error"]["code"] == "Io");
  CHECK(err["error"]["subcommand"] == "evaluate");

  // weight validation surfaces as InvalidConfig
  rc = run_cli("fuse --run-a " + (fixtures_dir() / "eval" / "run_a.txt").string() + " --run-b " +
                   (fixtures_dir() / "eval" / "run_b.txt").string() +
                   " --w-a 0.9 --w-b 0.9 --out " + (dir / "x.run").string(),
               err_file);
  CHECK(rc != 0);
  CHECK(json::parse(read_file(err_file))["error"]["code"] == "InvalidConfig");
}

TEST_CASE("search output is independent of the thread count") {
  auto dir = temp_dir("cli-threads");
  REQUIRE(run_cli("index-bm25 --corpus " + (fixtures_dir() / "corpus.jsonl").string() +
                  " --out " + (dir / "bm25.idx").string()) == 0);
  for (const char* threads : {"1", "4"}) {
    REQUIRE(run_cli("search --bm25 --index " + (dir / "bm25.idx").string() + " --topics " +
                    (fixtures_dir() / "topics_free.xml").string() +
                    " --k 1000 --threads " + threads + " --out " +
                    (dir / ("t" + std::string(threads) + ".run")).string()) == 0);
  }
  CHECK(read_file(dir / "t1.run") == read_file(dir / "t4.run"));
}

TEST_CASE("judge retries unparseable answers by bypassing the cache") {
  auto dir = temp_dir("cli-unparseable");
  // single-pair run over the fixture corpus
  write_file(dir / "tiny.run", "1 Q0 NCT0001 1 1.0 t\n");

  SUBCASE("second attempt succeeds") {
    fake::CountingScriptServer server([](int n) {
      return n == 1 ? std::string("unclear") : std::string("eligible");
    });
    REQUIRE(run_cli("judge --run " + (dir / "tiny.run").string() + " --depth 1 --topics " +
                    (fixtures_dir() / "topics_free.xml").string() + " --corpus " +
                    (fixtures_dir() / "corpus.jsonl").string() + " --shots " +
                    (fixtures_dir() / "shots.json").string() + " --endpoint " + server.endpoint() +
                    " --cache-dir " + (dir / "cache1").string() +
                    " --max-retries 2 --backoff-base 0.001 --out " +
                    (dir / "j1.tsv").string()) == 0);
    CHECK(server.requests() == 2);
    CHECK(read_file(dir / "j1.tsv") == "1\tNCT0001\t2\n");
  }

  SUBCASE("persistent garbage surfaces UnparseableJudgment") {
    fake::CountingScriptServer server([](int) { return std::string("who knows"); });
    auto err_file = dir / "err.txt";
    int rc = run_cli("judge --run " + (dir / "tiny.run").string() + " --depth 1 --topics " +
                         (fixtures_dir() / "topics_free.xml").string() + " --corpus " +
                         (fixtures_dir() / "corpus.jsonl").string() + " --shots " +
                         (fixtures_dir() / "shots.json").string() + " --endpoint " +
                         server.endpoint() + " --cache-dir " + (dir / "cache2").string() +
                         " --max-retries 1 --backoff-base 0.001 --out " +
                         (dir / "j2.tsv").string(),
                     err_file);
    CHECK(rc != 0);
    CHECK(json::parse(read_file(err_file))["error"]["code"] == "UnparseableJudgment");
    CHECK(server.requests() == 2);  // initial + one cache-bypassing retry
  }
}

TEST_CASE("search rejects unconverted template topics") {
  auto dir = temp_dir("cli-template");
  auto err_file = dir / "err.txt";
  REQUIRE(run_cli("index-bm25 --corpus " + (fixtures_dir() / "corpus.jsonl").string() +
                  " --out " + (dir / "bm25.idx").string()) == 0);
  int rc = run_cli("search --bm25 --index " + (dir / "bm25.idx").string() + " --topics " +
                       (fixtures_dir() / "topics_template.xml").string() +
                       " --topics-kind template --k 10 --out " + (dir / "r.run").string(),
                   err_file);
  CHECK(rc != 0);
  CHECK(json::parse(read_file(err_file))["error"]["code"] == "InvalidConfig");
}
