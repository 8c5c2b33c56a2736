#include "ctrank/dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ctrank/error.hpp"

namespace ctrank {

namespace {
using json = nlohmann::json;
}

void l2_normalize(std::vector<float>& values) {
  double sq = 0.0;
  for (float v : values) sq += static_cast<double>(v) * static_cast<double>(v);
  if (sq == 0.0) return;
  double inv = 1.0 / std::sqrt(sq);
  for (float& v : values) v = static_cast<float>(static_cast<double>(v) * inv);
}

std::vector<Embedding> load_embeddings_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open embedding file: " + path.string());
  }
  std::vector<Embedding> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("vector") ||
        !j["vector"].is_array()) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": expected {\"id\":..., \"vector\":[...]}");
    }
    Embedding e;
    e.id = j["id"].get<std::string>();
    if (!seen.insert(e.id).second) {
      throw Error(ErrorCode::DuplicateId, "embedding id repeated: " + e.id);
    }
    e.values.reserve(j["vector"].size());
    for (const auto& v : j["vector"]) {
      if (!v.is_number()) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line_no) + ": vector entry is not a number");
      }
      float f = v.get<float>();
      if (!std::isfinite(f)) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line_no) + ": vector entry is not finite");
      }
      e.values.push_back(f);
    }
    if (e.values.empty()) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": empty vector");
    }
    if (dim == 0) {
      dim = e.values.size();
    } else if (e.values.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "line " + std::to_string(line_no) + ": dimension " + std::to_string(e.values.size()) +
                      " != " + std::to_string(dim));
    }
    out.push_back(std::move(e));
  }
  return out;
}

DenseIndex DenseIndex::from_embeddings(const std::vector<Embedding>& embeddings,
                                       bool normalize) {
  DenseIndex index;
  if (embeddings.empty()) {
    return index;
  }
  index.dim_ = embeddings.front().values.size();
  index.ids_.reserve(embeddings.size());
  index.matrix_.reserve(embeddings.size() * index.dim_);
  std::set<std::string> seen;
  for (const auto& e : embeddings) {
    if (e.values.size() != index.dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "embedding " + e.id + " has dimension " + std::to_string(e.values.size()) +
                      " != " + std::to_string(index.dim_));
    }
    if (!seen.insert(e.id).second) {
      throw Error(ErrorCode::DuplicateId, "embedding id repeated: " + e.id);
    }
    index.ids_.push_back(e.id);
    if (normalize) {
      std::vector<float> row = e.values;
      l2_normalize(row);
      index.matrix_.insert(index.matrix_.end(), row.begin(), row.end());
    } else {
      index.matrix_.insert(index.matrix_.end(), e.values.begin(), e.values.end());
    }
  }
  return index;
}

DenseIndex DenseIndex::load(const std::filesystem::path& path, bool normalize) {
  return from_embeddings(load_embeddings_jsonl(path), normalize);
}

Ranking DenseIndex::search(const Embedding& query, std::size_t k, std::string topic_id) const {
  if (size() > 0 && query.values.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dimension " + std::to_string(query.values.size()) + " != index dimension " +
                    std::to_string(dim_));
  }
  std::vector<std::uint32_t> order(size());
  std::vector<double> scores(size(), 0.0);
  for (std::size_t row = 0; row < size(); ++row) {
    const float* base = matrix_.data() + row * dim_;
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      acc += static_cast<double>(query.values[i]) * static_cast<double>(base[i]);
    }
    scores[row] = acc;
    order[row] = static_cast<std::uint32_t>(row);
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids_[a] < ids_[b];
  });
  if (order.size() > k) order.resize(k);
  Ranking out;
  out.topic_id = std::move(topic_id);
  out.entries.reserve(order.size());
  for (auto row : order) {
    out.entries.push_back({ids_[row], scores[row]});
  }
  return out;
}

}  // namespace ctrank
