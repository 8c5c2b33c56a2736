#include "ctrank/mining.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ctrank/digest.hpp"
#include "ctrank/error.hpp"
#include "ctrank/rng.hpp"

namespace ctrank {

namespace {

using json = nlohmann::json;

// Per-(seed, topic, positive) generator so example order never matters.
std::mt19937_64 derived_rng(std::uint64_t seed, const std::string& topic_id,
                            const std::string& positive_doc_id) {
  std::string preimage;
  preimage.resize(8);
  for (int i = 0; i < 8; ++i) preimage[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
  preimage.push_back('\x1f');
  preimage += topic_id;
  preimage.push_back('\x1f');
  preimage += positive_doc_id;
  auto digest = sha256_bytes(preimage);
  std::uint64_t derived = 0;
  for (int i = 0; i < 8; ++i) derived |= static_cast<std::uint64_t>(digest[i]) << (8 * i);
  return std::mt19937_64(derived);
}

}  // namespace

const char* to_string(ExampleOrigin origin) noexcept {
  return origin == ExampleOrigin::Human ? "human" : "synthetic";
}

ExampleOrigin example_origin_from_string(std::string_view text) {
  if (text == "human") return ExampleOrigin::Human;
  if (text == "synthetic") return ExampleOrigin::Synthetic;
  throw Error(ErrorCode::MalformedRecord, "unknown origin: " + std::string(text));
}

std::vector<TrainingExample> mine_hard_negatives(const Ranking& run,
                                                 const std::string& query_text,
                                                 const std::vector<std::string>& positives,
                                                 const Qrels* qrels, const MiningConfig& cfg,
                                                 ExampleOrigin origin) {
  if (cfg.negatives_per_positive > cfg.pool_depth) {
    throw std::invalid_argument("negatives_per_positive must be <= pool_depth");
  }
  const std::set<std::string> positive_set(positives.begin(), positives.end());

  std::vector<std::string> pool;
  const std::size_t depth = std::min(cfg.pool_depth, run.entries.size());
  pool.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string& doc = run.entries[i].doc_id;
    if (positive_set.count(doc) > 0) continue;
    if (qrels != nullptr) {
      auto grade = qrels->grade(run.topic_id, doc);
      if (grade && *grade >= cfg.exclude_grade_at_least) continue;
    }
    pool.push_back(doc);
  }
  if (pool.size() < cfg.negatives_per_positive) {
    throw Error(ErrorCode::InsufficientPool,
                "topic " + run.topic_id + ": " + std::to_string(pool.size()) +
                    " candidate(s) available, " + std::to_string(cfg.negatives_per_positive) +
                    " needed");
  }

  std::vector<TrainingExample> out;
  out.reserve(positives.size());
  for (const auto& positive : positives) {
    auto rng = derived_rng(cfg.rng_seed, run.topic_id, positive);
    std::vector<std::string> candidates = pool;
    TrainingExample example;
    example.query_id = run.topic_id;
    example.query_text = query_text;
    example.positive_doc_id = positive;
    example.origin = origin;
    example.negative_doc_ids.reserve(cfg.negatives_per_positive);
    for (std::size_t i = 0; i < cfg.negatives_per_positive; ++i) {
      std::size_t j = i + static_cast<std::size_t>(bounded_draw(rng, candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
      example.negative_doc_ids.push_back(candidates[i]);
    }
    out.push_back(std::move(example));
  }
  return out;
}

AssembledSet assemble_training_set(const std::vector<TrainingExample>& human,
                                   const std::vector<TrainingExample>& synthetic) {
  AssembledSet out;
  std::set<std::pair<std::string, std::string>> seen;
  auto append = [&](const std::vector<TrainingExample>& examples) {
    for (const auto& e : examples) {
      if (!seen.emplace(e.query_id, e.positive_doc_id).second) {
        ++out.duplicates_dropped;
        continue;
      }
      if (e.origin == ExampleOrigin::Human) {
        ++out.human_count;
      } else {
        ++out.synthetic_count;
      }
      out.examples.push_back(e);
    }
  };
  append(human);
  append(synthetic);
  return out;
}

std::size_t export_training_jsonl(const std::vector<TrainingExample>& examples,
                                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write training file: " + path.string());
  }
  for (const auto& e : examples) {
    json j;
    j["query_id"] = e.query_id;
    j["query_text"] = e.query_text;
    j["positive_doc_id"] = e.positive_doc_id;
    j["negative_doc_ids"] = e.negative_doc_ids;
    j["origin"] = to_string(e.origin);
    out << j.dump() << '\n';
  }
  if (!out) {
    throw Error(ErrorCode::Io, "failed writing training file: " + path.string());
  }
  return examples.size();
}

std::vector<TrainingExample> load_training_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open training file: " + path.string());
  }
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t line_no = 0;
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
    TrainingExample e;
    try {
      e.query_id = j.at("query_id").get<std::string>();
      e.query_text = j.at("query_text").get<std::string>();
      e.positive_doc_id = j.at("positive_doc_id").get<std::string>();
      e.negative_doc_ids = j.at("negative_doc_ids").get<std::vector<std::string>>();
      e.origin = example_origin_from_string(j.at("origin").get<std::string>());
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ctrank
