#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "ctrank/corpus.hpp"
#include "ctrank/dense_index.hpp"
#include "ctrank/digest.hpp"
#include "ctrank/error.hpp"
#include "ctrank/eval.hpp"
#include "ctrank/fusion.hpp"
#include "ctrank/llm.hpp"
#include "ctrank/mining.hpp"
#include "ctrank/rerank.hpp"
#include "ctrank/rng.hpp"
#include "ctrank/sparse_index.hpp"

namespace ctrank::pipeline {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string iso_now_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hash_input(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& file : files) {
      acc += file.filename().string() + ":" + sha256_file(file) + "\n";
    }
    return sha256_hex(acc);
  }
  return sha256_file(path);
}

/// Collects semantic params and content-hashed inputs; the config hash (and
/// the default run tag derived from it) depends on content, not paths, so a
/// relocated but identical experiment keeps its tag.
class ManifestWriter {
 public:
  explicit ManifestWriter(std::string subcommand) : subcommand_(std::move(subcommand)) {
    started_ = Clock::now();
  }

  template <typename T>
  void param(const std::string& key, const T& value) {
    params_[key] = value;
  }

  void input(const std::string& name, const std::filesystem::path& path) {
    if (path.empty()) return;
    inputs_.push_back({name, path, hash_input(path)});
  }

  template <typename T>
  void stat(const std::string& key, const T& value) {
    stats_[key] = value;
  }

  std::string config_hash() const {
    json preimage;
    preimage["subcommand"] = subcommand_;
    preimage["params"] = params_;
    json hashes = json::array();
    for (const auto& in : inputs_) {
      hashes.push_back({{"name", in.name}, {"sha256", in.sha256}});
    }
    preimage["inputs"] = hashes;
    return sha256_hex(preimage.dump());
  }

  std::string resolve_tag(const std::string& explicit_tag) const {
    if (!explicit_tag.empty()) return explicit_tag;
    return subcommand_ + "-" + config_hash().substr(0, 8);
  }

  void write(const std::filesystem::path& artifact, const std::string& tag) const {
    json manifest;
    manifest["subcommand"] = subcommand_;
    manifest["tag"] = tag;
    manifest["params"] = params_;
    json inputs = json::array();
    for (const auto& in : inputs_) {
      inputs.push_back({{"name", in.name}, {"path", in.path.string()}, {"sha256", in.sha256}});
    }
    manifest["inputs"] = inputs;
    manifest["output"] = {{"path", artifact.string()}, {"sha256", sha256_file(artifact)}};
    manifest["config_hash"] = config_hash();
    if (!stats_.empty()) manifest["stats"] = stats_;
    auto elapsed = std::chrono::duration<double, std::milli>(Clock::now() - started_).count();
    manifest["timing_ms"] = elapsed;
    manifest["created_utc"] = iso_now_utc();

    auto path = artifact;
    path += ".manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::Io, "cannot write manifest: " + path.string());
    }
    out << manifest.dump(2) << '\n';
  }

 private:
  struct Input {
    std::string name;
    std::filesystem::path path;
    std::string sha256;
  };

  std::string subcommand_;
  json params_ = json::object();
  json stats_ = json::object();
  std::vector<Input> inputs_;
  Clock::time_point started_;
};

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int count = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

CorpusFormat parse_corpus_format(const std::string& format) {
  if (format == "jsonl") return CorpusFormat::Jsonl;
  if (format == "xmldir") return CorpusFormat::XmlDir;
  throw Error(ErrorCode::InvalidConfig, "unknown corpus format: " + format);
}

TopicKind parse_topics_kind(const std::string& kind) {
  if (kind == "free") return TopicKind::FreeText;
  if (kind == "template") return TopicKind::TemplateXml;
  throw Error(ErrorCode::InvalidConfig, "unknown topics kind: " + kind);
}

LlmConfig to_llm_config(const LlmCli& cli) {
  if (cli.endpoint.empty()) {
    throw Error(ErrorCode::InvalidConfig, "--endpoint is required for LLM subcommands");
  }
  LlmConfig cfg;
  cfg.endpoint_url = cli.endpoint;
  cfg.model = cli.model;
  cfg.temperature = cli.temperature;
  cfg.api_key_env = cli.api_key_env;
  cfg.cache_dir = cli.cache_dir;
  cfg.max_retries = cli.max_retries;
  cfg.timeout_seconds = cli.timeout_seconds;
  cfg.backoff_base_seconds = cli.backoff_base_seconds;
  return cfg;
}

TokenBudget budget_or_unlimited(std::size_t max_tokens) {
  if (max_tokens == 0) return TokenBudget{std::numeric_limits<std::size_t>::max()};
  return TokenBudget{max_tokens};
}

void llm_params(ManifestWriter& manifest, const LlmCli& llm) {
  manifest.param("model", llm.model);
  manifest.param("temperature", llm.temperature);
}

struct PairRecord {
  std::string query_id;
  std::string query_text;
  std::vector<std::string> positives;
  ExampleOrigin origin = ExampleOrigin::Human;
};

/// (query, positive) pairs JSONL, grouped by query in first-seen order.
std::vector<PairRecord> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open pairs file: " + path.string());
  }
  std::vector<PairRecord> records;
  std::map<std::string, std::size_t> index_of;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::MalformedRecord,
                  path.filename().string() + " line " + std::to_string(line_no) + ": " + ex.what());
    }
    try {
      std::string query_id = j.at("query_id").get<std::string>();
      auto [it, inserted] = index_of.emplace(query_id, records.size());
      if (inserted) {
        PairRecord record;
        record.query_id = query_id;
        record.query_text = j.at("query_text").get<std::string>();
        record.origin = example_origin_from_string(j.at("origin").get<std::string>());
        records.push_back(std::move(record));
      }
      records[it->second].positives.push_back(j.at("positive_doc_id").get<std::string>());
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::MalformedRecord,
                  path.filename().string() + " line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return records;
}

}  // namespace

void run(const IndexBm25Cmd& cmd) {
  ManifestWriter manifest("index-bm25");
  manifest.param("corpus_format", cmd.corpus_format);
  manifest.param("doc_budget", cmd.doc_budget);
  manifest.input("corpus", cmd.corpus);

  auto corpus = Corpus::load(cmd.corpus, parse_corpus_format(cmd.corpus_format));
  auto index = InvertedIndex::build_bm25(corpus, TokenBudget{cmd.doc_budget});
  index.save(cmd.out);
  manifest.stat("docs", index.doc_count());
  manifest.stat("terms", index.term_count());
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
  std::printf("index-bm25: %zu docs, %zu terms -> %s\n", index.doc_count(), index.term_count(),
              cmd.out.string().c_str());
}

void run(const SearchCmd& cmd) {
  const int modes = (cmd.bm25 ? 1 : 0) + (cmd.sparse ? 1 : 0) + (cmd.dense ? 1 : 0);
  if (modes != 1) {
    throw Error(ErrorCode::InvalidConfig, "pick exactly one of --bm25 / --sparse / --dense");
  }
  if (cmd.k == 0) {
    throw Error(ErrorCode::InvalidConfig, "--k must be positive");
  }

  RunMap results;
  std::mutex results_mutex;
  std::string mode_name;
  ManifestWriter manifest("search");
  manifest.param("k", cmd.k);

  if (cmd.bm25) {
    mode_name = "bm25";
    manifest.param("mode", mode_name);
    manifest.param("query_budget", cmd.query_budget);
    manifest.param("k1", cmd.k1);
    manifest.param("b", cmd.b);
    manifest.param("topics_kind", cmd.topics_kind);
    manifest.input("index", cmd.index);
    manifest.input("topics", cmd.topics);

    auto index = InvertedIndex::load(cmd.index);
    auto topics = load_topics(cmd.topics, parse_topics_kind(cmd.topics_kind));
    Bm25Params params{cmd.k1, cmd.b};
    parallel_for(topics.size(), cmd.threads, [&](std::size_t i) {
      const auto& topic = topics[i];
      if (topic.text.empty()) {
        throw Error(ErrorCode::InvalidConfig,
                    "topic " + topic.topic_id +
                        " has no retrieval text (convert template topics first)");
      }
      auto query = truncate_tokens(topic.text, budget_or_unlimited(cmd.query_budget));
      auto ranking = index.search_bm25(query, cmd.k, params, topic.topic_id);
      std::lock_guard<std::mutex> lock(results_mutex);
      results.emplace(topic.topic_id, std::move(ranking));
    });
  } else if (cmd.sparse) {
    mode_name = "sparse";
    manifest.param("mode", mode_name);
    manifest.input("doc_vectors", cmd.doc_vectors);
    manifest.input("query_vectors", cmd.query_vectors);

    auto index = InvertedIndex::build_impact(load_sparse_vectors(cmd.doc_vectors));
    auto queries = load_sparse_vectors(cmd.query_vectors);
    parallel_for(queries.size(), cmd.threads, [&](std::size_t i) {
      auto ranking = index.search_impact(queries[i].second, cmd.k, queries[i].first);
      std::lock_guard<std::mutex> lock(results_mutex);
      results.emplace(queries[i].first, std::move(ranking));
    });
  } else {
    mode_name = "dense";
    manifest.param("mode", mode_name);
    manifest.param("cosine", cmd.cosine);
    manifest.input("doc_embeddings", cmd.doc_embeddings);
    manifest.input("query_embeddings", cmd.query_embeddings);

    auto index = DenseIndex::load(cmd.doc_embeddings, cmd.cosine);
    auto queries = load_embeddings_jsonl(cmd.query_embeddings);
    if (cmd.cosine) {
      for (auto& q : queries) l2_normalize(q.values);
    }
    parallel_for(queries.size(), cmd.threads, [&](std::size_t i) {
      auto ranking = index.search(queries[i], cmd.k, queries[i].id);
      std::lock_guard<std::mutex> lock(results_mutex);
      results.emplace(queries[i].id, std::move(ranking));
    });
  }

  auto tag = manifest.resolve_tag(cmd.tag);
  write_run(cmd.out, results, tag);
  manifest.stat("topics", results.size());
  manifest.write(cmd.out, tag);
  std::printf("search --%s: %zu topics -> %s\n", mode_name.c_str(), results.size(),
              cmd.out.string().c_str());
}

void run(const FuseCmd& cmd) {
  if (cmd.k == 0) {
    throw Error(ErrorCode::InvalidConfig, "--k must be positive");
  }
  ManifestWriter manifest("fuse");
  manifest.param("w_a", cmd.w_a);
  manifest.param("w_b", cmd.w_b);
  manifest.param("k", cmd.k);
  manifest.input("run_a", cmd.run_a);
  manifest.input("run_b", cmd.run_b);

  auto a = read_run(cmd.run_a);
  auto b = read_run(cmd.run_b);
  FusionWeights weights{cmd.w_a, cmd.w_b};
  RunMap fused;
  try {
    fused = interpolate_runs(a, b, weights, cmd.k);
  } catch (const std::invalid_argument& ex) {
    throw Error(ErrorCode::InvalidConfig, ex.what());
  }
  auto tag = manifest.resolve_tag(cmd.tag);
  write_run(cmd.out, fused, tag);
  manifest.stat("topics", fused.size());
  manifest.write(cmd.out, tag);
  std::printf("fuse: %zu topics -> %s\n", fused.size(), cmd.out.string().c_str());
}

void run(const CeInterpolateCmd& cmd) {
  if (cmd.k == 0) {
    throw Error(ErrorCode::InvalidConfig, "--k must be positive");
  }
  ManifestWriter manifest("ce-interpolate");
  manifest.param("w_ce", cmd.w_ce);
  manifest.param("w_run", cmd.w_run);
  manifest.param("k", cmd.k);
  manifest.param("normalize", !cmd.no_normalize);
  manifest.input("run", cmd.run);
  manifest.input("ce_scores", cmd.ce_scores);

  auto base = read_run(cmd.run);
  auto ce = load_ce_scores(cmd.ce_scores);

  // surface every uncovered (topic, doc) pair at once, not just the first topic's
  std::vector<std::pair<std::string, std::string>> missing;
  for (const auto& [topic, ranking] : base) {
    auto gaps = missing_ce_pairs(ranking, ce);
    missing.insert(missing.end(), gaps.begin(), gaps.end());
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::IncompleteScores, format_missing_pairs(missing));
  }

  FusionWeights weights{cmd.w_ce, cmd.w_run};
  RunMap fused;
  for (const auto& [topic, ranking] : base) {
    auto rescored = ce_rescore(ranking, ce);
    try {
      fused.emplace(topic, interpolate(rescored, ranking, weights, cmd.k, !cmd.no_normalize));
    } catch (const std::invalid_argument& ex) {
      throw Error(ErrorCode::InvalidConfig, ex.what());
    }
  }
  auto tag = manifest.resolve_tag(cmd.tag);
  write_run(cmd.out, fused, tag);
  manifest.stat("topics", fused.size());
  manifest.write(cmd.out, tag);
  std::printf("ce-interpolate: %zu topics -> %s\n", fused.size(), cmd.out.string().c_str());
}

void run(const JudgeCmd& cmd) {
  if (cmd.depth == 0) {
    throw Error(ErrorCode::InvalidConfig, "--depth must be positive");
  }
  ManifestWriter manifest("judge");
  manifest.param("depth", cmd.depth);
  manifest.param("query_budget", cmd.query_budget);
  manifest.param("doc_budget", cmd.doc_budget);
  manifest.param("topics_kind", cmd.topics_kind);
  llm_params(manifest, cmd.llm);
  manifest.input("run", cmd.run);
  manifest.input("topics", cmd.topics);
  manifest.input("corpus", cmd.corpus);
  manifest.input("shots", cmd.shots);

  auto cfg = to_llm_config(cmd.llm);
  auto runs = read_run(cmd.run);
  auto corpus = Corpus::load(cmd.corpus, parse_corpus_format(cmd.corpus_format));
  auto shots = load_shots(cmd.shots);

  std::map<std::string, std::string> topic_text;
  for (const auto& topic : load_topics(cmd.topics, parse_topics_kind(cmd.topics_kind))) {
    topic_text.emplace(topic.topic_id, topic.text);
  }

  struct Task {
    std::string topic_id;
    std::string doc_id;
    std::string description;
    std::string trial;
  };
  std::vector<Task> tasks;
  for (const auto& [topic_id, ranking] : runs) {
    auto it = topic_text.find(topic_id);
    if (it == topic_text.end() || it->second.empty()) {
      throw Error(ErrorCode::InvalidConfig,
                  "topic " + topic_id + " has no description text (convert template topics first)");
    }
    std::string description =
        truncate_tokens(it->second, budget_or_unlimited(cmd.query_budget));
    const std::size_t depth = std::min(cmd.depth, ranking.entries.size());
    for (std::size_t i = 0; i < depth; ++i) {
      const auto& doc_id = ranking.entries[i].doc_id;
      const TrialDoc* doc = corpus.find(doc_id);
      if (doc == nullptr) {
        throw Error(ErrorCode::MalformedInput, "run doc " + doc_id + " is not in the corpus");
      }
      tasks.push_back({topic_id, doc_id, description,
                       format_trial_text(*doc, budget_or_unlimited(cmd.doc_budget))});
    }
  }

  JudgmentSet judgments;
  std::mutex judgments_mutex;
  parallel_for(tasks.size(), cmd.threads, [&](std::size_t i) {
    const auto& task = tasks[i];
    auto prompt = build_judge_prompt(shots, task.description, task.trial);
    JudgeLabel label{};
    std::size_t attempts = 0;
    for (;;) {
      std::string response = chat_complete(cfg, prompt, /*refresh_cache=*/attempts > 0);
      try {
        label = parse_judge_response(response);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparseableJudgment || attempts >= cfg.max_retries) throw;
        ++attempts;
      }
    }
    std::lock_guard<std::mutex> lock(judgments_mutex);
    judgments.add(task.topic_id, task.doc_id, label);
  });

  judgments.save_tsv(cmd.out);
  manifest.stat("judged_pairs", judgments.size());
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
  std::printf("judge: %zu pairs -> %s\n", judgments.size(), cmd.out.string().c_str());
}

void run(const LabelRerankCmd& cmd) {
  if (cmd.k == 0) {
    throw Error(ErrorCode::InvalidConfig, "--k must be positive");
  }
  ManifestWriter manifest("label-rerank");
  manifest.param("k", cmd.k);
  manifest.param("assume_not_relevant", cmd.assume_not_relevant);
  manifest.input("run", cmd.run);
  manifest.input("judgments", cmd.judgments);

  auto runs = read_run(cmd.run);
  auto judgments = JudgmentSet::load_tsv(cmd.judgments);
  RunMap reranked;
  for (const auto& [topic, ranking] : runs) {
    reranked.emplace(topic, label_rerank_topk(ranking, judgments, cmd.k, cmd.assume_not_relevant));
  }
  auto tag = manifest.resolve_tag(cmd.tag);
  write_run(cmd.out, reranked, tag);
  manifest.stat("topics", reranked.size());
  manifest.write(cmd.out, tag);
  std::printf("label-rerank: %zu topics -> %s\n", reranked.size(), cmd.out.string().c_str());
}

void run(const ConvertTopicsCmd& cmd) {
  ManifestWriter manifest("convert-topics");
  llm_params(manifest, cmd.llm);
  manifest.input("topics", cmd.topics);

  auto cfg = to_llm_config(cmd.llm);
  auto topics = load_topics(cmd.topics, TopicKind::TemplateXml);
  std::vector<Topic> converted(topics.size());
  parallel_for(topics.size(), cmd.threads, [&](std::size_t i) {
    auto prompt = build_conversion_prompt(topics[i].raw);
    Topic out = topics[i];
    out.text = chat_complete(cfg, prompt);
    out.source_kind = TopicKind::FreeText;
    converted[i] = std::move(out);
  });

  std::ofstream out(cmd.out, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write topics file: " + cmd.out.string());
  }
  out << topics_to_xml(converted);
  out.close();
  manifest.stat("topics", converted.size());
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
  std::printf("convert-topics: %zu topics -> %s\n", converted.size(), cmd.out.string().c_str());
}

void run(const GenerateSyntheticCmd& cmd) {
  ManifestWriter manifest("generate-synthetic");
  manifest.param("count", cmd.count);
  manifest.param("seed", cmd.seed);
  manifest.param("doc_budget", cmd.doc_budget);
  llm_params(manifest, cmd.llm);
  manifest.input("corpus", cmd.corpus);
  manifest.input("topics", cmd.topics);
  manifest.input("qrels", cmd.qrels);

  auto cfg = to_llm_config(cmd.llm);
  auto corpus = Corpus::load(cmd.corpus, parse_corpus_format(cmd.corpus_format));
  if (corpus.size() == 0) {
    throw Error(ErrorCode::EmptyCorpus, "cannot sample trials from an empty corpus");
  }
  auto qrels = Qrels::load(cmd.qrels);
  std::map<std::string, std::string> topic_text;
  for (const auto& topic : load_topics(cmd.topics, TopicKind::FreeText)) {
    topic_text.emplace(topic.topic_id, topic.text);
  }

  // gold (description, trial) exemplars: grade-2 pairs with known text
  struct Gold {
    std::string description;
    std::string trial_text;
  };
  std::vector<Gold> gold;
  const TokenBudget doc_budget = budget_or_unlimited(cmd.doc_budget);
  for (const auto& [topic_id, docs] : qrels.by_topic()) {
    auto text = topic_text.find(topic_id);
    if (text == topic_text.end() || text->second.empty()) continue;
    for (const auto& [doc_id, grade] : docs) {
      if (grade < 2) continue;
      const TrialDoc* doc = corpus.find(doc_id);
      if (doc == nullptr) continue;
      gold.push_back({text->second, format_trial_text(*doc, doc_budget)});
    }
  }
  if (gold.empty()) {
    throw Error(ErrorCode::InvalidConfig,
                "no gold (description, trial) pairs derivable from qrels + topics + corpus");
  }

  std::mt19937_64 rng(cmd.seed);
  std::ofstream out(cmd.out, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write pairs file: " + cmd.out.string());
  }
  std::size_t kept = 0;
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < cmd.count; ++i) {
    const Gold& exemplar = gold[bounded_draw(rng, gold.size())];
    const TrialDoc& sampled = corpus.at(bounded_draw(rng, corpus.size()));
    auto prompt = build_generation_prompt(exemplar.trial_text, exemplar.description,
                                          format_trial_text(sampled, doc_budget));
    std::string description = chat_complete(cfg, prompt);
    auto decision = filter_generation(description);
    if (!decision.keep) {
      ++rejected;
      std::string why = decision.reason == FilterDecision::Reason::TooShort
                            ? "too short"
                            : "keyword: " + decision.keyword;
      std::fprintf(stderr, "generate-synthetic: dropped generation for %s (%s)\n",
                   sampled.doc_id.c_str(), why.c_str());
      continue;
    }
    char query_id[32];
    std::snprintf(query_id, sizeof(query_id), "syn-%05zu", i);
    json row;
    row["query_id"] = query_id;
    row["query_text"] = description;
    row["positive_doc_id"] = sampled.doc_id;
    row["origin"] = "synthetic";
    out << row.dump() << '\n';
    ++kept;
  }
  out.close();
  manifest.stat("kept", kept);
  manifest.stat("rejected", rejected);
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
  std::printf("generate-synthetic: %zu kept, %zu rejected -> %s\n", kept, rejected,
              cmd.out.string().c_str());
}

void run(const MineCmd& cmd) {
  if (cmd.pairs.empty()) {
    throw Error(ErrorCode::InvalidConfig, "at least one --pairs file is required");
  }
  ManifestWriter manifest("mine");
  manifest.param("pool_depth", cmd.pool_depth);
  manifest.param("negatives", cmd.negatives);
  manifest.param("exclude_grade", cmd.exclude_grade);
  manifest.param("seed", cmd.seed);
  manifest.param("query_budget", cmd.query_budget);
  manifest.input("run", cmd.run);
  for (std::size_t i = 0; i < cmd.pairs.size(); ++i) {
    manifest.input("pairs_" + std::to_string(i), cmd.pairs[i]);
  }
  if (!cmd.qrels.empty()) manifest.input("qrels", cmd.qrels);

  auto runs = read_run(cmd.run);
  Qrels qrels;
  bool have_qrels = false;
  if (!cmd.qrels.empty()) {
    qrels = Qrels::load(cmd.qrels);
    have_qrels = true;
  }
  MiningConfig mining;
  mining.pool_depth = cmd.pool_depth;
  mining.negatives_per_positive = cmd.negatives;
  mining.exclude_grade_at_least = cmd.exclude_grade;
  mining.rng_seed = cmd.seed;

  std::vector<TrainingExample> merged;
  std::size_t human = 0;
  std::size_t synthetic = 0;
  std::size_t duplicates = 0;
  for (const auto& pairs_path : cmd.pairs) {
    std::vector<TrainingExample> mined;
    for (const auto& record : load_pairs(pairs_path)) {
      auto it = runs.find(record.query_id);
      if (it == runs.end()) {
        throw Error(ErrorCode::MalformedInput,
                    "run has no ranking for query " + record.query_id + " (from " +
                        pairs_path.filename().string() + ")");
      }
      std::string query_text =
          cmd.query_budget > 0
              ? truncate_tokens(record.query_text, TokenBudget{cmd.query_budget})
              : record.query_text;
      auto examples = mine_hard_negatives(it->second, query_text, record.positives,
                                          have_qrels ? &qrels : nullptr, mining, record.origin);
      mined.insert(mined.end(), examples.begin(), examples.end());
    }
    auto assembled = assemble_training_set(merged, mined);
    merged = std::move(assembled.examples);
    human = assembled.human_count;
    synthetic = assembled.synthetic_count;
    duplicates += assembled.duplicates_dropped;
  }

  auto written = export_training_jsonl(merged, cmd.out);
  manifest.stat("examples", written);
  manifest.stat("human", human);
  manifest.stat("synthetic", synthetic);
  manifest.stat("duplicates_dropped", duplicates);
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
  std::printf("mine: %zu examples (%zu human, %zu synthetic, %zu duplicates dropped) -> %s\n",
              written, human, synthetic, duplicates, cmd.out.string().c_str());
}

namespace {

EvalOptions to_eval_options(const EvalCliOptions& cli) {
  EvalOptions opts;
  opts.ndcg_k = cli.ndcg_k;
  opts.precision_k = cli.precision_k;
  opts.recall_k = cli.recall_k;
  opts.rel_threshold = cli.rel_threshold;
  opts.exponential_gain = cli.exponential_gain;
  return opts;
}

void eval_params(ManifestWriter& manifest, const EvalCliOptions& opts) {
  manifest.param("ndcg_k", opts.ndcg_k);
  manifest.param("precision_k", opts.precision_k);
  manifest.param("recall_k", opts.recall_k);
  manifest.param("rel_threshold", opts.rel_threshold);
  manifest.param("exponential_gain", opts.exponential_gain);
}

json metric_to_json(const MetricResult& metric) {
  json out;
  out["mean"] = metric.mean;
  out["topics"] = metric.per_topic.size();
  json per_topic = json::object();
  for (const auto& [topic, value] : metric.per_topic) per_topic[topic] = value;
  out["per_topic"] = per_topic;
  if (!metric.skipped_topics.empty()) out["skipped_topics"] = metric.skipped_topics;
  return out;
}

}  // namespace

void run(const EvaluateCmd& cmd) {
  ManifestWriter manifest("evaluate");
  eval_params(manifest, cmd.opts);
  manifest.input("run", cmd.run);
  manifest.input("qrels", cmd.qrels);

  auto runs = read_run(cmd.run);
  auto qrels = Qrels::load(cmd.qrels);
  auto results = evaluate_run(runs, qrels, to_eval_options(cmd.opts));

  json report;
  report["run"] = cmd.run.string();
  json metrics = json::object();
  for (const auto& metric : results) {
    metrics[metric.metric] = metric_to_json(metric);
    std::printf("%-12s %.4f over %zu topics\n", metric.metric.c_str(), metric.mean,
                metric.per_topic.size());
  }
  report["metrics"] = metrics;
  std::ofstream out(cmd.out, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write report: " + cmd.out.string());
  }
  out << report.dump(2) << '\n';
  out.close();
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
}

void run(const SignificanceCmd& cmd) {
  if (cmd.runs.size() < 2) {
    throw Error(ErrorCode::InvalidConfig, "significance needs at least two --run files");
  }
  ManifestWriter manifest("significance");
  eval_params(manifest, cmd.opts);
  manifest.param("alpha", cmd.alpha);
  for (std::size_t i = 0; i < cmd.runs.size(); ++i) {
    manifest.input("run_" + std::to_string(i), cmd.runs[i]);
  }
  manifest.input("qrels", cmd.qrels);

  auto qrels = Qrels::load(cmd.qrels);
  std::vector<RunMetrics> runs;
  for (const auto& path : cmd.runs) {
    runs.push_back({path.stem().string(), evaluate_run(read_run(path), qrels, to_eval_options(cmd.opts))});
  }
  auto matrix = significance_matrix(runs);
  auto report = format_significance_report(runs, matrix, cmd.alpha);

  std::ofstream out(cmd.out, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write significance report: " + cmd.out.string());
  }
  out << report;
  out.close();
  std::fputs(report.c_str(), stdout);
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
}

void run(const DeltasCmd& cmd) {
  ManifestWriter manifest("deltas");
  eval_params(manifest, cmd.opts);
  manifest.param("metric", cmd.metric);
  manifest.input("run_a", cmd.run_a);
  manifest.input("run_b", cmd.run_b);
  manifest.input("qrels", cmd.qrels);

  auto qrels = Qrels::load(cmd.qrels);
  auto results_a = evaluate_run(read_run(cmd.run_a), qrels, to_eval_options(cmd.opts));
  auto results_b = evaluate_run(read_run(cmd.run_b), qrels, to_eval_options(cmd.opts));

  auto pick = [&](const std::vector<MetricResult>& results) -> const MetricResult& {
    for (const auto& metric : results) {
      if (metric.metric == cmd.metric ||
          metric.metric.substr(0, metric.metric.find('@')) == cmd.metric) {
        return metric;
      }
    }
    throw Error(ErrorCode::InvalidConfig, "unknown metric: " + cmd.metric);
  };
  auto deltas = per_query_deltas(pick(results_a), pick(results_b));
  write_deltas_csv(cmd.out, deltas);
  manifest.stat("topics", deltas.size());
  manifest.write(cmd.out, manifest.resolve_tag(cmd.tag));
  std::printf("deltas: %zu topics -> %s\n", deltas.size(), cmd.out.string().c_str());
}

}  // namespace ctrank::pipeline
