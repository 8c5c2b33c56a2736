#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctrank/ranking.hpp"

namespace ctrank {

/// Graded relevance judgments (0 not relevant, 1 excluded, 2 eligible).
class Qrels {
 public:
  static Qrels load(const std::filesystem::path& path);

  void add(const std::string& topic_id, const std::string& doc_id, int grade);
  std::optional<int> grade(const std::string& topic_id, const std::string& doc_id) const;
  bool has_topic(const std::string& topic_id) const;
  std::size_t size() const noexcept;

  /// topic -> (doc -> grade)
  const std::map<std::string, std::map<std::string, int>>& by_topic() const noexcept {
    return topics_;
  }

 private:
  std::map<std::string, std::map<std::string, int>> topics_;
  std::size_t pairs_ = 0;
};

/// Six-column TREC run files: `topic Q0 doc rank score tag`.
RunMap read_run(const std::filesystem::path& path);
void write_run(const std::filesystem::path& path, const RunMap& run, const std::string& tag);

/// trec_eval ndcg_cut convention: linear gains grade/log2(rank+1), ideal from
/// the topic's qrels grades sorted descending, 0 when the ideal is 0.
double ndcg_at_k(const Ranking& run, const Qrels& qrels, std::size_t k = 10,
                 bool exponential_gain = false);

/// Fraction of the top k with grade >= rel_threshold; short runs count as if
/// padded with non-relevant docs.
double precision_at_k(const Ranking& run, const Qrels& qrels, std::size_t k = 10,
                      int rel_threshold = 2);

/// Relevant-retrieved over total-relevant; nullopt when the topic has no doc
/// at or above the threshold (metric undefined, topic skipped).
std::optional<double> recall_at_k(const Ranking& run, const Qrels& qrels, std::size_t k = 1000,
                                  int rel_threshold = 2);

struct MetricResult {
  std::string metric;
  std::map<std::string, double> per_topic;
  double mean = 0.0;
  std::vector<std::string> skipped_topics;  // undefined for this metric
};

struct EvalOptions {
  std::size_t ndcg_k = 10;
  std::size_t precision_k = 10;
  std::size_t recall_k = 1000;
  int rel_threshold = 2;
  bool exponential_gain = false;
  /// trec_eval -c: topics judged in qrels but absent from the run score 0.
  bool complete_judgments = true;
};

/// NDCG@k, P@k and Recall@k in that order, averaged over judged topics.
std::vector<MetricResult> evaluate_run(const RunMap& run, const Qrels& qrels,
                                       const EvalOptions& opts = {});

/// Two-sided paired Student's t-test over the shared topics of two per-topic
/// value maps. All-zero differences give p = 1.
double paired_t_test(const std::map<std::string, double>& a,
                     const std::map<std::string, double>& b);

/// I_x(a, b) by Lentz continued fraction; absolute accuracy ~1e-12.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p for a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

/// Pairwise p-values between named runs, per metric. Symmetric, diagonal 1.
struct SignificanceMatrix {
  std::map<std::string, std::map<std::pair<std::string, std::string>, double>> p_values;
};

struct RunMetrics {
  std::string name;
  std::vector<MetricResult> metrics;
};

SignificanceMatrix significance_matrix(const std::vector<RunMetrics>& runs);

/// Table-1-style report: per run and metric, the letters of the runs it beats
/// with a higher mean at p <= alpha.
std::string format_significance_report(const std::vector<RunMetrics>& runs,
                                       const SignificanceMatrix& matrix, double alpha = 0.05);

/// Per-topic metric deltas (b - a) over shared topics, sorted by delta
/// descending (ties by topic id) — bar-chart-ready.
std::vector<std::pair<std::string, double>> per_query_deltas(const MetricResult& a,
                                                             const MetricResult& b);

void write_deltas_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, double>>& deltas);

/// Shortest round-trippable decimal form (std::to_chars).
std::string format_double(double value);

}  // namespace ctrank
