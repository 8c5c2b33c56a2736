#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ctrank::pipeline {

/// LLM connection settings shared by judge / convert-topics / generate-synthetic.
struct LlmCli {
  std::string endpoint;
  std::string model = "gpt-4";
  double temperature = 0.0;
  std::string api_key_env = "OPENAI_API_KEY";
  std::filesystem::path cache_dir;
  std::size_t max_retries = 3;
  double timeout_seconds = 60.0;
  double backoff_base_seconds = 1.0;
};

struct IndexBm25Cmd {
  std::filesystem::path corpus;
  std::string corpus_format = "jsonl";  // jsonl | xmldir
  std::size_t doc_budget = 512;
  std::filesystem::path out;
  std::string tag;
};

struct SearchCmd {
  bool bm25 = false;
  bool sparse = false;
  bool dense = false;
  // bm25
  std::filesystem::path index;
  std::filesystem::path topics;
  std::string topics_kind = "free";  // free | template
  std::size_t query_budget = 256;
  double k1 = 1.2;
  double b = 0.75;
  // sparse
  std::filesystem::path doc_vectors;
  std::filesystem::path query_vectors;
  // dense
  std::filesystem::path doc_embeddings;
  std::filesystem::path query_embeddings;
  bool cosine = false;
  // common
  std::size_t k = 1000;
  int threads = 1;
  std::filesystem::path out;
  std::string tag;
};

struct FuseCmd {
  std::filesystem::path run_a;
  std::filesystem::path run_b;
  double w_a = 0.5;
  double w_b = 0.5;
  std::size_t k = 1000;
  std::filesystem::path out;
  std::string tag;
};

struct CeInterpolateCmd {
  std::filesystem::path run;
  std::filesystem::path ce_scores;
  double w_ce = 0.9;
  double w_run = 0.1;
  std::size_t k = 1000;
  bool no_normalize = false;
  std::filesystem::path out;
  std::string tag;
};

struct JudgeCmd {
  std::filesystem::path run;
  std::size_t depth = 20;
  std::filesystem::path topics;
  std::string topics_kind = "free";
  std::filesystem::path corpus;
  std::string corpus_format = "jsonl";
  std::filesystem::path shots;
  std::size_t query_budget = 0;  // 0 = no truncation
  std::size_t doc_budget = 0;
  int threads = 4;
  LlmCli llm;
  std::filesystem::path out;
  std::string tag;
};

struct LabelRerankCmd {
  std::filesystem::path run;
  std::filesystem::path judgments;
  std::size_t k = 20;
  bool assume_not_relevant = false;
  std::filesystem::path out;
  std::string tag;
};

struct ConvertTopicsCmd {
  std::filesystem::path topics;
  int threads = 4;
  LlmCli llm;
  std::filesystem::path out;
  std::string tag;
};

struct GenerateSyntheticCmd {
  std::filesystem::path corpus;
  std::string corpus_format = "jsonl";
  std::filesystem::path topics;
  std::filesystem::path qrels;
  std::size_t count = 20;
  std::uint64_t seed = 42;
  std::size_t doc_budget = 512;
  LlmCli llm;
  std::filesystem::path out;
  std::string tag;
};

struct MineCmd {
  std::filesystem::path run;
  std::vector<std::filesystem::path> pairs;
  std::filesystem::path qrels;  // optional
  std::size_t pool_depth = 200;
  std::size_t negatives = 3;
  int exclude_grade = 2;
  std::uint64_t seed = 42;
  std::size_t query_budget = 0;
  std::filesystem::path out;
  std::string tag;
};

struct EvalCliOptions {
  std::size_t ndcg_k = 10;
  std::size_t precision_k = 10;
  std::size_t recall_k = 1000;
  int rel_threshold = 2;
  bool exponential_gain = false;
};

struct EvaluateCmd {
  std::filesystem::path run;
  std::filesystem::path qrels;
  EvalCliOptions opts;
  std::filesystem::path out;
  std::string tag;
};

struct SignificanceCmd {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path qrels;
  double alpha = 0.05;
  EvalCliOptions opts;
  std::filesystem::path out;
  std::string tag;
};

struct DeltasCmd {
  std::filesystem::path run_a;
  std::filesystem::path run_b;
  std::filesystem::path qrels;
  std::string metric = "ndcg";  // ndcg | p | recall (or full name like ndcg@10)
  EvalCliOptions opts;
  std::filesystem::path out;
  std::string tag;
};

void run(const IndexBm25Cmd& cmd);
void run(const SearchCmd& cmd);
void run(const FuseCmd& cmd);
void run(const CeInterpolateCmd& cmd);
void run(const JudgeCmd& cmd);
void run(const LabelRerankCmd& cmd);
void run(const ConvertTopicsCmd& cmd);
void run(const GenerateSyntheticCmd& cmd);
void run(const MineCmd& cmd);
void run(const EvaluateCmd& cmd);
void run(const SignificanceCmd& cmd);
void run(const DeltasCmd& cmd);

}  // namespace ctrank::pipeline
