#include "ctrank/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "ctrank/error.hpp"

namespace ctrank {

namespace {

void check_weights(const FusionWeights& w) {
  if (w.w_a < 0.0 || w.w_a > 1.0 || w.w_b < 0.0 || w.w_b > 1.0 ||
      std::fabs(w.w_a + w.w_b - 1.0) > 1e-12) {
    throw std::invalid_argument("fusion weights must lie in [0,1] and sum to 1");
  }
}

}  // namespace

Ranking minmax_normalize(const Ranking& r) {
  Ranking out = r;
  if (out.entries.empty()) return out;
  double lo = out.entries.front().score;
  double hi = lo;
  for (const auto& e : out.entries) {
    lo = std::min(lo, e.score);
    hi = std::max(hi, e.score);
  }
  if (hi == lo) {
    for (auto& e : out.entries) e.score = 0.5;
    return out;
  }
  double span = hi - lo;
  for (auto& e : out.entries) e.score = (e.score - lo) / span;
  return out;
}

Ranking interpolate(const Ranking& a, const Ranking& b, const FusionWeights& w, std::size_t k,
                    bool normalize) {
  check_weights(w);
  if (a.topic_id != b.topic_id) {
    throw Error(ErrorCode::TopicMismatch,
                "cannot fuse topic '" + a.topic_id + "' with topic '" + b.topic_id + "'");
  }
  Ranking na = normalize ? minmax_normalize(a) : a;
  Ranking nb = normalize ? minmax_normalize(b) : b;

  // Union of doc ids, iterated in sorted order so exact ties land
  // id-ascending. A zero-weight side cannot affect any score, so its docs do
  // not enter the candidate set; this keeps w=(1,0) an exact identity on a.
  std::map<std::string, std::pair<double, double>> contributions;
  if (w.w_a > 0.0) {
    for (const auto& e : na.entries) contributions[e.doc_id].first = e.score;
  }
  if (w.w_b > 0.0) {
    for (const auto& e : nb.entries) contributions[e.doc_id].second = e.score;
  }

  Ranking out;
  out.topic_id = a.topic_id;
  out.entries.reserve(contributions.size());
  for (const auto& [doc_id, scores] : contributions) {
    out.entries.push_back({doc_id, w.w_a * scores.first + w.w_b * scores.second});
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const ScoredDoc& x, const ScoredDoc& y) { return x.score > y.score; });
  if (out.entries.size() > k) out.entries.resize(k);
  return out;
}

RunMap interpolate_runs(const RunMap& a, const RunMap& b, const FusionWeights& w, std::size_t k,
                        bool normalize) {
  RunMap out;
  std::set<std::string> topics;
  for (const auto& [topic, ranking] : a) topics.insert(topic);
  for (const auto& [topic, ranking] : b) topics.insert(topic);
  for (const auto& topic : topics) {
    Ranking empty;
    empty.topic_id = topic;
    auto ita = a.find(topic);
    auto itb = b.find(topic);
    const Ranking& ra = ita != a.end() ? ita->second : empty;
    const Ranking& rb = itb != b.end() ? itb->second : empty;
    out.emplace(topic, interpolate(ra, rb, w, k, normalize));
  }
  return out;
}

CeScores load_ce_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open CE score file: " + path.string());
  }
  CeScores out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw Error(ErrorCode::MalformedLine,
                  "CE score line " + std::to_string(line_no) + " needs topic<TAB>doc<TAB>score");
    }
    std::string topic = line.substr(0, t1);
    std::string doc = line.substr(t1 + 1, t2 - t1 - 1);
    std::string score_text = line.substr(t2 + 1);
    char* end = nullptr;
    double score = std::strtod(score_text.c_str(), &end);
    if (end == score_text.c_str() || *end != '\0' || !std::isfinite(score)) {
      throw Error(ErrorCode::MalformedLine,
                  "CE score line " + std::to_string(line_no) + " has a bad score: " + score_text);
    }
    if (topic.empty() || doc.empty()) {
      throw Error(ErrorCode::MalformedLine,
                  "CE score line " + std::to_string(line_no) + " has an empty id");
    }
    if (!out.scores.emplace(std::make_pair(std::move(topic), std::move(doc)), score).second) {
      throw Error(ErrorCode::DuplicatePair, "CE score repeated on line " + std::to_string(line_no));
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> missing_ce_pairs(const Ranking& base,
                                                                  const CeScores& ce) {
  std::vector<std::pair<std::string, std::string>> missing;
  for (const auto& e : base.entries) {
    if (ce.scores.find(std::make_pair(base.topic_id, e.doc_id)) == ce.scores.end()) {
      missing.emplace_back(base.topic_id, e.doc_id);
    }
  }
  return missing;
}

std::string format_missing_pairs(const std::vector<std::pair<std::string, std::string>>& missing) {
  std::string msg = std::to_string(missing.size()) + " (topic, doc) pair(s) lack CE scores:";
  std::size_t shown = 0;
  for (const auto& [topic, doc] : missing) {
    if (shown == 100) {
      msg += " ...";
      break;
    }
    msg += " (" + topic + ", " + doc + ")";
    ++shown;
  }
  return msg;
}

Ranking ce_rescore(const Ranking& base, const CeScores& ce) {
  auto missing = missing_ce_pairs(base, ce);
  if (!missing.empty()) {
    throw Error(ErrorCode::IncompleteScores, format_missing_pairs(missing));
  }
  Ranking out;
  out.topic_id = base.topic_id;
  out.entries.reserve(base.entries.size());
  for (const auto& e : base.entries) {
    out.entries.push_back({e.doc_id, ce.scores.at(std::make_pair(base.topic_id, e.doc_id))});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const ScoredDoc& x, const ScoredDoc& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.doc_id < y.doc_id;
  });
  return out;
}

}  // namespace ctrank
