#pragma once

#include <map>
#include <string>
#include <vector>

namespace ctrank {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

/// Per-query ordered result list: the currency every pipeline stage exchanges.
/// Entries are sorted by score descending; producers break exact ties by
/// doc_id ascending so identical inputs always serialize identically.
struct Ranking {
  std::string topic_id;
  std::vector<ScoredDoc> entries;

  bool operator==(const Ranking&) const = default;
};

/// A whole run: one Ranking per topic, keyed (and therefore ordered) by topic id.
using RunMap = std::map<std::string, Ranking>;

}  // namespace ctrank
