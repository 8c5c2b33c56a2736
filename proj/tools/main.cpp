// ctrank: multi-stage clinical-trial retrieval pipeline over files.
//
// Every subcommand writes one artifact plus a .manifest.json sidecar with
// config and input hashes, and exits non-zero with a one-line JSON error on
// failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctrank/error.hpp"
#include "pipeline.hpp"

namespace {

using ctrank::pipeline::EvalCliOptions;
using ctrank::pipeline::LlmCli;

void add_llm_options(CLI::App* cmd, LlmCli& llm) {
  cmd->add_option("--endpoint", llm.endpoint, "chat-completions URL")->required();
  cmd->add_option("--model", llm.model, "model name");
  cmd->add_option("--temperature", llm.temperature, "sampling temperature");
  cmd->add_option("--api-key-env", llm.api_key_env, "env var holding the bearer token");
  cmd->add_option("--cache-dir", llm.cache_dir, "response cache directory");
  cmd->add_option("--max-retries", llm.max_retries, "retries on 429/5xx/timeouts");
  cmd->add_option("--timeout", llm.timeout_seconds, "request timeout in seconds");
  cmd->add_option("--backoff-base", llm.backoff_base_seconds, "retry backoff base in seconds");
}

void add_eval_options(CLI::App* cmd, EvalCliOptions& opts) {
  cmd->add_option("--ndcg-k", opts.ndcg_k, "NDCG cutoff");
  cmd->add_option("--precision-k", opts.precision_k, "precision cutoff");
  cmd->add_option("--recall-k", opts.recall_k, "recall cutoff");
  cmd->add_option("--rel-threshold", opts.rel_threshold, "grade counted as relevant");
  cmd->add_flag("--exp-gain", opts.exponential_gain, "use 2^grade - 1 NDCG gains");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctrank: multi-stage clinical trial retrieval experiments"};
  app.require_subcommand(1);
  // flat key=value lines, keys prefixed by the subcommand ("fuse.k=500");
  // values given on the command line win over the file
  app.set_config("--config", "", "flat subcommand.key=value config file; CLI flags win");

  ctrank::pipeline::IndexBm25Cmd index_cmd;
  auto* index_bm25 = app.add_subcommand("index-bm25", "build a BM25 inverted index");
  index_bm25->add_option("--corpus", index_cmd.corpus, "corpus file or directory")->required();
  index_bm25->add_option("--corpus-format", index_cmd.corpus_format, "jsonl | xmldir");
  index_bm25->add_option("--doc-budget", index_cmd.doc_budget, "document token budget");
  index_bm25->add_option("--out", index_cmd.out, "output index path")->required();
  index_bm25->add_option("--tag", index_cmd.tag, "run tag override");

  ctrank::pipeline::SearchCmd search_cmd;
  auto* search = app.add_subcommand("search", "first-stage retrieval to a TREC run");
  search->add_flag("--bm25", search_cmd.bm25, "BM25 over an index file");
  search->add_flag("--sparse", search_cmd.sparse, "impact scoring over sparse vectors");
  search->add_flag("--dense", search_cmd.dense, "inner-product over dense embeddings");
  search->add_option("--index", search_cmd.index, "BM25 index file");
  search->add_option("--topics", search_cmd.topics, "topics file (BM25 queries)");
  search->add_option("--topics-kind", search_cmd.topics_kind, "free | template");
  search->add_option("--query-budget", search_cmd.query_budget, "query token budget (0 = off)");
  search->add_option("--k1", search_cmd.k1, "BM25 k1");
  search->add_option("--b", search_cmd.b, "BM25 b");
  search->add_option("--doc-vectors", search_cmd.doc_vectors, "document sparse vectors JSONL");
  search->add_option("--query-vectors", search_cmd.query_vectors, "topic sparse vectors JSONL");
  search->add_option("--doc-embeddings", search_cmd.doc_embeddings, "document embeddings JSONL");
  search->add_option("--query-embeddings", search_cmd.query_embeddings, "topic embeddings JSONL");
  search->add_flag("--cosine", search_cmd.cosine, "normalize embeddings at load");
  search->add_option("--k", search_cmd.k, "results per topic");
  search->add_option("--threads", search_cmd.threads, "parallel topics");
  search->add_option("--out", search_cmd.out, "output run file")->required();
  search->add_option("--tag", search_cmd.tag, "run tag override");

  ctrank::pipeline::FuseCmd fuse_cmd;
  auto* fuse = app.add_subcommand("fuse", "min-max normalized weighted interpolation of two runs");
  fuse->add_option("--run-a", fuse_cmd.run_a, "first run file")->required();
  fuse->add_option("--run-b", fuse_cmd.run_b, "second run file")->required();
  fuse->add_option("--w-a", fuse_cmd.w_a, "weight of run A");
  fuse->add_option("--w-b", fuse_cmd.w_b, "weight of run B");
  fuse->add_option("--k", fuse_cmd.k, "results per topic");
  fuse->add_option("--out", fuse_cmd.out, "output run file")->required();
  fuse->add_option("--tag", fuse_cmd.tag, "run tag override");

  ctrank::pipeline::CeInterpolateCmd ce_cmd;
  auto* ce = app.add_subcommand("ce-interpolate",
                                "interpolate cross-encoder scores with the retriever run");
  ce->add_option("--run", ce_cmd.run, "retriever run file")->required();
  ce->add_option("--ce-scores", ce_cmd.ce_scores, "TSV topic<TAB>doc<TAB>score")->required();
  ce->add_option("--w-ce", ce_cmd.w_ce, "re-ranker weight");
  ce->add_option("--w-run", ce_cmd.w_run, "retriever weight");
  ce->add_option("--k", ce_cmd.k, "results per topic");
  ce->add_flag("--no-normalize", ce_cmd.no_normalize, "interpolate raw scores");
  ce->add_option("--out", ce_cmd.out, "output run file")->required();
  ce->add_option("--tag", ce_cmd.tag, "run tag override");

  ctrank::pipeline::JudgeCmd judge_cmd;
  auto* judge = app.add_subcommand("judge", "LLM-as-assessor labels for the top of a run");
  judge->add_option("--run", judge_cmd.run, "run file to judge")->required();
  judge->add_option("--depth", judge_cmd.depth, "docs judged per topic");
  judge->add_option("--topics", judge_cmd.topics, "topics file")->required();
  judge->add_option("--topics-kind", judge_cmd.topics_kind, "free | template");
  judge->add_option("--corpus", judge_cmd.corpus, "corpus file or directory")->required();
  judge->add_option("--corpus-format", judge_cmd.corpus_format, "jsonl | xmldir");
  judge->add_option("--shots", judge_cmd.shots, "3-shot exemplars JSON")->required();
  judge->add_option("--query-budget", judge_cmd.query_budget, "description budget (0 = off)");
  judge->add_option("--doc-budget", judge_cmd.doc_budget, "trial text budget (0 = off)");
  judge->add_option("--threads", judge_cmd.threads, "concurrent requests");
  add_llm_options(judge, judge_cmd.llm);
  judge->add_option("--out", judge_cmd.out, "output judgments TSV")->required();
  judge->add_option("--tag", judge_cmd.tag, "run tag override");

  ctrank::pipeline::LabelRerankCmd rerank_cmd;
  auto* rerank = app.add_subcommand("label-rerank", "stable re-rank of the top-k by labels");
  rerank->add_option("--run", rerank_cmd.run, "run file")->required();
  rerank->add_option("--judgments", rerank_cmd.judgments, "judgments TSV")->required();
  rerank->add_option("--k", rerank_cmd.k, "re-ranked prefix length");
  rerank->add_flag("--assume-not-relevant", rerank_cmd.assume_not_relevant,
                   "treat missing judgments as label 0");
  rerank->add_option("--out", rerank_cmd.out, "output run file")->required();
  rerank->add_option("--tag", rerank_cmd.tag, "run tag override");

  ctrank::pipeline::ConvertTopicsCmd convert_cmd;
  auto* convert = app.add_subcommand("convert-topics",
                                     "LLM conversion of template-XML topics to free text");
  convert->add_option("--topics", convert_cmd.topics, "template topics file")->required();
  convert->add_option("--threads", convert_cmd.threads, "concurrent requests");
  add_llm_options(convert, convert_cmd.llm);
  convert->add_option("--out", convert_cmd.out, "output free-text topics XML")->required();
  convert->add_option("--tag", convert_cmd.tag, "run tag override");

  ctrank::pipeline::GenerateSyntheticCmd generate_cmd;
  auto* generate = app.add_subcommand("generate-synthetic",
                                      "LLM-generated patient descriptions for sampled trials");
  generate->add_option("--corpus", generate_cmd.corpus, "corpus file or directory")->required();
  generate->add_option("--corpus-format", generate_cmd.corpus_format, "jsonl | xmldir");
  generate->add_option("--topics", generate_cmd.topics, "free-text topics (gold descriptions)")
      ->required();
  generate->add_option("--qrels", generate_cmd.qrels, "qrels naming gold pairs")->required();
  generate->add_option("--count", generate_cmd.count, "generations requested");
  generate->add_option("--seed", generate_cmd.seed, "sampling seed");
  generate->add_option("--doc-budget", generate_cmd.doc_budget, "trial text budget (0 = off)");
  add_llm_options(generate, generate_cmd.llm);
  generate->add_option("--out", generate_cmd.out, "output pairs JSONL")->required();
  generate->add_option("--tag", generate_cmd.tag, "run tag override");

  ctrank::pipeline::MineCmd mine_cmd;
  auto* mine = app.add_subcommand("mine", "hard-negative mining into training JSONL");
  mine->add_option("--run", mine_cmd.run, "run file supplying the candidate pool")->required();
  mine->add_option("--pairs", mine_cmd.pairs, "pairs JSONL (repeatable, human first)")
      ->required()
      ->take_all();
  mine->add_option("--qrels", mine_cmd.qrels, "qrels for pool exclusions");
  mine->add_option("--pool-depth", mine_cmd.pool_depth, "candidate pool depth");
  mine->add_option("--negatives", mine_cmd.negatives, "negatives per positive");
  mine->add_option("--exclude-grade", mine_cmd.exclude_grade, "exclude grades >= this");
  mine->add_option("--seed", mine_cmd.seed, "sampling seed");
  mine->add_option("--query-budget", mine_cmd.query_budget, "query text budget (0 = off)");
  mine->add_option("--out", mine_cmd.out, "output training JSONL")->required();
  mine->add_option("--tag", mine_cmd.tag, "run tag override");

  ctrank::pipeline::EvaluateCmd eval_cmd;
  auto* evaluate = app.add_subcommand("evaluate", "NDCG@k, P@k and Recall@k against qrels");
  evaluate->add_option("--run", eval_cmd.run, "run file")->required();
  evaluate->add_option("--qrels", eval_cmd.qrels, "qrels file")->required();
  add_eval_options(evaluate, eval_cmd.opts);
  evaluate->add_option("--out", eval_cmd.out, "output report JSON")->required();
  evaluate->add_option("--tag", eval_cmd.tag, "run tag override");

  ctrank::pipeline::SignificanceCmd sig_cmd;
  auto* significance = app.add_subcommand("significance",
                                          "pairwise paired t-tests across runs");
  significance->add_option("--run", sig_cmd.runs, "run files (repeatable)")->required()->take_all();
  significance->add_option("--qrels", sig_cmd.qrels, "qrels file")->required();
  significance->add_option("--alpha", sig_cmd.alpha, "significance level");
  add_eval_options(significance, sig_cmd.opts);
  significance->add_option("--out", sig_cmd.out, "output report path")->required();
  significance->add_option("--tag", sig_cmd.tag, "run tag override");

  ctrank::pipeline::DeltasCmd deltas_cmd;
  auto* deltas = app.add_subcommand("deltas", "per-query metric deltas between two runs");
  deltas->add_option("--run-a", deltas_cmd.run_a, "baseline run")->required();
  deltas->add_option("--run-b", deltas_cmd.run_b, "improved run")->required();
  deltas->add_option("--qrels", deltas_cmd.qrels, "qrels file")->required();
  deltas->add_option("--metric", deltas_cmd.metric, "ndcg | p | recall");
  add_eval_options(deltas, deltas_cmd.opts);
  deltas->add_option("--out", deltas_cmd.out, "output CSV")->required();
  deltas->add_option("--tag", deltas_cmd.tag, "run tag override");

  CLI11_PARSE(app, argc, argv);

  std::string active = app.get_subcommands().front()->get_name();
  try {
    if (index_bm25->parsed()) ctrank::pipeline::run(index_cmd);
    if (search->parsed()) ctrank::pipeline::run(search_cmd);
    if (fuse->parsed()) ctrank::pipeline::run(fuse_cmd);
    if (ce->parsed()) ctrank::pipeline::run(ce_cmd);
    if (judge->parsed()) ctrank::pipeline::run(judge_cmd);
    if (rerank->parsed()) ctrank::pipeline::run(rerank_cmd);
    if (convert->parsed()) ctrank::pipeline::run(convert_cmd);
    if (generate->parsed()) ctrank::pipeline::run(generate_cmd);
    if (mine->parsed()) ctrank::pipeline::run(mine_cmd);
    if (evaluate->parsed()) ctrank::pipeline::run(eval_cmd);
    if (significance->parsed()) ctrank::pipeline::run(sig_cmd);
    if (deltas->parsed()) ctrank::pipeline::run(deltas_cmd);
  } catch (const ctrank::Error& e) {
    nlohmann::json err = {{"error",
                           {{"code", ctrank::to_string(e.code())},
                            {"subcommand", active},
                            {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json err = {
        {"error", {{"code", "Internal"}, {"subcommand", active}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  }
  return 0;
}
