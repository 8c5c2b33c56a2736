#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctrank/eval.hpp"
#include "ctrank/ranking.hpp"

namespace ctrank {

enum class ExampleOrigin { Human, Synthetic };

const char* to_string(ExampleOrigin origin) noexcept;
ExampleOrigin example_origin_from_string(std::string_view text);

/// One contrastive training group: a query, its positive, N mined negatives.
struct TrainingExample {
  std::string query_id;
  std::string query_text;
  std::string positive_doc_id;
  std::vector<std::string> negative_doc_ids;
  ExampleOrigin origin = ExampleOrigin::Human;

  bool operator==(const TrainingExample&) const = default;
};

struct MiningConfig {
  std::size_t pool_depth = 200;
  std::size_t negatives_per_positive = 3;
  int exclude_grade_at_least = 2;
  std::uint64_t rng_seed = 0;
};

/// Sample negatives per positive from the run's top pool_depth, excluding the
/// query's positives and any doc judged at or above exclude_grade_at_least.
/// Sampling is uniform without replacement from a generator seeded by
/// (rng_seed, topic_id, positive_doc_id), so parallel and serial runs agree.
std::vector<TrainingExample> mine_hard_negatives(const Ranking& run,
                                                 const std::string& query_text,
                                                 const std::vector<std::string>& positives,
                                                 const Qrels* qrels, const MiningConfig& cfg,
                                                 ExampleOrigin origin);

struct AssembledSet {
  std::vector<TrainingExample> examples;
  std::size_t human_count = 0;
  std::size_t synthetic_count = 0;
  std::size_t duplicates_dropped = 0;
};

/// Human examples first, then synthetic; duplicates by
/// (query_id, positive_doc_id) keep the first occurrence.
AssembledSet assemble_training_set(const std::vector<TrainingExample>& human,
                                   const std::vector<TrainingExample>& synthetic);

/// One JSON object per line: query_id, query_text, positive_doc_id,
/// negative_doc_ids, origin. Returns the number of lines written.
std::size_t export_training_jsonl(const std::vector<TrainingExample>& examples,
                                  const std::filesystem::path& path);

std::vector<TrainingExample> load_training_jsonl(const std::filesystem::path& path);

}  // namespace ctrank
