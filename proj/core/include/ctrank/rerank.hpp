#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "ctrank/ranking.hpp"

namespace ctrank {

/// Three-grade assessor vocabulary: 0 not relevant, 1 excluded, 2 eligible.
enum class JudgeLabel : int { NotRelevant = 0, Excluded = 1, Eligible = 2 };

JudgeLabel judge_label_from_int(int value);

/// (topic, doc) -> label map; also the on-disk judgment cache
/// (TSV topic<TAB>doc<TAB>label).
class JudgmentSet {
 public:
  void add(const std::string& topic_id, const std::string& doc_id, JudgeLabel label);
  std::optional<JudgeLabel> get(const std::string& topic_id, const std::string& doc_id) const;
  std::size_t size() const noexcept { return labels_.size(); }

  static JudgmentSet load_tsv(const std::filesystem::path& path);
  void save_tsv(const std::filesystem::path& path) const;

  const std::map<std::pair<std::string, std::string>, JudgeLabel>& labels() const noexcept {
    return labels_;
  }

 private:
  std::map<std::pair<std::string, std::string>, JudgeLabel> labels_;
};

/// Stable re-sort of the top-k by label descending: equal labels keep their
/// original relative order and entries beyond k keep theirs. Scores are
/// reassigned as (len - rank + 1) so the run file stays strictly monotone.
/// Missing judgments raise MissingJudgment unless assume_not_relevant is set.
Ranking label_rerank_topk(const Ranking& r, const JudgmentSet& judgments, std::size_t k = 20,
                          bool assume_not_relevant = false);

}  // namespace ctrank
