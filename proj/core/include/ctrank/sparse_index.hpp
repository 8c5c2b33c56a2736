#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctrank/corpus.hpp"
#include "ctrank/ranking.hpp"

namespace ctrank {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Learned-sparse term weights for one document or query. Weights are
/// strictly positive; zero-weight terms are simply absent.
struct SparseVec {
  std::map<std::string, double> weights;

  bool operator==(const SparseVec&) const = default;
};

struct Posting {
  std::uint32_t ordinal = 0;
  double payload = 0.0;  // term frequency (Bm25) or impact weight (Impact)
};

enum class IndexMode { Bm25, Impact };

/// Lowercase, split on any non-alphanumeric byte, drop empties. No stemming,
/// no stopwords.
std::vector<std::string> analyze(std::string_view text);

/// Inverted index over either raw text (BM25) or precomputed impact weights.
/// Immutable once built; concurrent searches are safe.
class InvertedIndex {
 public:
  static InvertedIndex build_bm25(const Corpus& corpus, const TokenBudget& doc_budget);
  /// Same index over already-rendered (id, text) pairs.
  static InvertedIndex build_bm25_text(const std::vector<std::pair<std::string, std::string>>& docs);
  static InvertedIndex build_impact(const std::vector<std::pair<std::string, SparseVec>>& vectors);

  Ranking search_bm25(std::string_view query, std::size_t k, const Bm25Params& params,
                      std::string topic_id = {}) const;
  Ranking search_impact(const SparseVec& query, std::size_t k, std::string topic_id = {}) const;

  IndexMode mode() const noexcept { return mode_; }
  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  double doc_length(std::uint32_t ordinal) const { return doc_lengths_.at(ordinal); }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  std::size_t term_count() const noexcept { return postings_.size(); }
  const std::vector<Posting>* postings(std::string_view term) const;

  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

 private:
  InvertedIndex() = default;

  IndexMode mode_ = IndexMode::Bm25;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
  std::vector<double> doc_lengths_;
  std::vector<std::string> doc_ids_;
  double avg_doc_length_ = 0.0;
};

/// Robertson +1-smoothed idf; non-negative for all 1 <= df <= N.
double bm25_idf(std::size_t doc_count, std::size_t df);

/// JSONL `{"id": ..., "vector": {term: weight, ...}}`, order preserved.
std::vector<std::pair<std::string, SparseVec>> load_sparse_vectors(
    const std::filesystem::path& path);

}  // namespace ctrank
