#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "ctrank/ranking.hpp"

namespace ctrank {

/// Interpolation weights; must sum to 1 (within 1e-12).
struct FusionWeights {
  double w_a = 0.5;
  double w_b = 0.5;
};

/// Map scores to (s - min) / (max - min), order untouched. Degenerate lists
/// (max == min, including single entries) map every score to 0.5.
Ranking minmax_normalize(const Ranking& r);

/// Weighted fusion over the union of both doc sets. A doc absent from one
/// list contributes 0 from that side. Results are the top-k by fused score,
/// ties broken by doc_id ascending. Both inputs are min-max normalized first
/// unless `normalize` is false.
Ranking interpolate(const Ranking& a, const Ranking& b, const FusionWeights& w, std::size_t k,
                    bool normalize = true);

/// Per-topic interpolation over the union of topics; a topic missing from one
/// run is fused against an empty list.
RunMap interpolate_runs(const RunMap& a, const RunMap& b, const FusionWeights& w, std::size_t k,
                        bool normalize = true);

/// Precomputed cross-encoder scores keyed by (topic_id, doc_id).
struct CeScores {
  std::map<std::pair<std::string, std::string>, double> scores;
};

/// TSV `topic_id<TAB>doc_id<TAB>score`.
CeScores load_ce_scores(const std::filesystem::path& path);

/// (topic, doc) pairs of `base` that the score file does not cover.
std::vector<std::pair<std::string, std::string>> missing_ce_pairs(const Ranking& base,
                                                                  const CeScores& ce);

/// Re-score a ranking's docs with CE scores (sorted descending, ties by
/// doc_id). Every doc in `base` must be covered or IncompleteScores is
/// raised listing the missing pairs.
Ranking ce_rescore(const Ranking& base, const CeScores& ce);

/// Message body for IncompleteScores: the offending pairs, capped for sanity.
std::string format_missing_pairs(const std::vector<std::pair<std::string, std::string>>& missing);

}  // namespace ctrank
