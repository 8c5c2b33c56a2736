#include "ctrank/rerank.hpp"

#include <algorithm>
#include <fstream>
#include <vector>

#include "ctrank/error.hpp"

namespace ctrank {

JudgeLabel judge_label_from_int(int value) {
  switch (value) {
    case 0: return JudgeLabel::NotRelevant;
    case 1: return JudgeLabel::Excluded;
    case 2: return JudgeLabel::Eligible;
    default:
      throw Error(ErrorCode::GradeOutOfRange, "judge label must be 0, 1 or 2, got " + std::to_string(value));
  }
}

void JudgmentSet::add(const std::string& topic_id, const std::string& doc_id, JudgeLabel label) {
  auto [it, inserted] = labels_.emplace(std::make_pair(topic_id, doc_id), label);
  if (!inserted) {
    throw Error(ErrorCode::DuplicatePair, "judgment repeated for (" + topic_id + ", " + doc_id + ")");
  }
}

std::optional<JudgeLabel> JudgmentSet::get(const std::string& topic_id,
                                           const std::string& doc_id) const {
  auto it = labels_.find(std::make_pair(topic_id, doc_id));
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

JudgmentSet JudgmentSet::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open judgment file: " + path.string());
  }
  JudgmentSet out;
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
                  "judgment line " + std::to_string(line_no) + " needs topic<TAB>doc<TAB>label");
    }
    std::string topic = line.substr(0, t1);
    std::string doc = line.substr(t1 + 1, t2 - t1 - 1);
    std::string label_text = line.substr(t2 + 1);
    if (topic.empty() || doc.empty() || label_text.size() != 1 || label_text[0] < '0' ||
        label_text[0] > '9') {
      throw Error(ErrorCode::MalformedLine, "judgment line " + std::to_string(line_no) + " is malformed");
    }
    out.add(topic, doc, judge_label_from_int(label_text[0] - '0'));
  }
  return out;
}

void JudgmentSet::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write judgment file: " + path.string());
  }
  for (const auto& [key, label] : labels_) {
    out << key.first << '\t' << key.second << '\t' << static_cast<int>(label) << '\n';
  }
  if (!out) {
    throw Error(ErrorCode::Io, "failed writing judgment file: " + path.string());
  }
}

Ranking label_rerank_topk(const Ranking& r, const JudgmentSet& judgments, std::size_t k,
                          bool assume_not_relevant) {
  const std::size_t head = std::min(k, r.entries.size());

  std::vector<JudgeLabel> labels(head, JudgeLabel::NotRelevant);
  std::string missing;
  std::size_t missing_count = 0;
  for (std::size_t i = 0; i < head; ++i) {
    auto label = judgments.get(r.topic_id, r.entries[i].doc_id);
    if (label) {
      labels[i] = *label;
    } else if (!assume_not_relevant) {
      missing += " (" + r.topic_id + ", " + r.entries[i].doc_id + ")";
      ++missing_count;
    }
  }
  if (missing_count > 0) {
    throw Error(ErrorCode::MissingJudgment,
                std::to_string(missing_count) + " top-" + std::to_string(k) +
                    " doc(s) lack judgments:" + missing);
  }

  std::vector<std::size_t> order(head);
  for (std::size_t i = 0; i < head; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return static_cast<int>(labels[a]) > static_cast<int>(labels[b]);
  });

  Ranking out;
  out.topic_id = r.topic_id;
  out.entries.reserve(r.entries.size());
  for (std::size_t i = 0; i < head; ++i) out.entries.push_back(r.entries[order[i]]);
  for (std::size_t i = head; i < r.entries.size(); ++i) out.entries.push_back(r.entries[i]);

  const double len = static_cast<double>(out.entries.size());
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    out.entries[i].score = len - static_cast<double>(i);  // rank i+1 -> len - rank + 1
  }
  return out;
}

}  // namespace ctrank
