#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ctrank/ranking.hpp"

namespace ctrank {

struct Embedding {
  std::string id;
  std::vector<float> values;

  bool operator==(const Embedding&) const = default;
};

/// JSONL `{"id": ..., "vector": [f32,...]}`; all lines must share a dimension.
std::vector<Embedding> load_embeddings_jsonl(const std::filesystem::path& path);

/// Exhaustive inner-product search over 32-bit vectors with 64-bit sequential
/// accumulation, so scores do not depend on thread count or chunking. This is
/// the oracle-grade implementation any approximate backend must match.
class DenseIndex {
 public:
  static DenseIndex from_embeddings(const std::vector<Embedding>& embeddings,
                                    bool l2_normalize = false);
  static DenseIndex load(const std::filesystem::path& path, bool l2_normalize = false);

  Ranking search(const Embedding& query, std::size_t k, std::string topic_id = {}) const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  DenseIndex() = default;

  std::size_t dim_ = 0;
  std::vector<float> matrix_;  // row-major, size() * dim()
  std::vector<std::string> ids_;
};

/// L2-normalize in place (no-op for the zero vector).
void l2_normalize(std::vector<float>& values);

}  // namespace ctrank
