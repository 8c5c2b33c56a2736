#include "ctrank/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctrank/error.hpp"

namespace ctrank {

namespace {

using json = nlohmann::json;

constexpr char kIndexMagic[8] = {'C', 'T', 'R', 'I', 'D', 'X', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw Error(ErrorCode::MalformedRecord, "truncated index file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string read_str(std::istream& in) {
  std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error(ErrorCode::MalformedRecord, "truncated index file");
  return s;
}

// Rank accumulated scores: descending, exact ties by doc_id ascending.
Ranking top_k(const std::vector<double>& scores, const std::vector<char>& touched,
              const std::vector<std::string>& doc_ids, std::size_t k, std::string topic_id) {
  std::vector<std::uint32_t> hits;
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    if (touched[i]) hits.push_back(i);
  }
  std::sort(hits.begin(), hits.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return doc_ids[a] < doc_ids[b];
  });
  if (hits.size() > k) hits.resize(k);
  Ranking out;
  out.topic_id = std::move(topic_id);
  out.entries.reserve(hits.size());
  for (auto ordinal : hits) {
    out.entries.push_back({doc_ids[ordinal], scores[ordinal]});
  }
  return out;
}

}  // namespace

std::vector<std::string> analyze(std::string_view text) {
  std::vector<std::string> out;
  std::string token;
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (alnum) {
      token.push_back(static_cast<char>(c));
    } else if (!token.empty()) {
      out.push_back(std::move(token));
      token.clear();
    }
  }
  if (!token.empty()) out.push_back(std::move(token));
  return out;
}

double bm25_idf(std::size_t doc_count, std::size_t df) {
  double n = static_cast<double>(doc_count);
  double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

InvertedIndex InvertedIndex::build_bm25_text(
    const std::vector<std::pair<std::string, std::string>>& docs) {
  if (docs.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "cannot build a BM25 index over zero documents");
  }
  InvertedIndex index;
  index.mode_ = IndexMode::Bm25;
  index.doc_ids_.reserve(docs.size());
  index.doc_lengths_.reserve(docs.size());

  double total_tokens = 0.0;
  for (std::size_t ordinal = 0; ordinal < docs.size(); ++ordinal) {
    auto tokens = analyze(docs[ordinal].second);
    std::map<std::string, std::uint32_t> tf;
    for (auto& t : tokens) ++tf[std::move(t)];
    for (auto& [term, count] : tf) {
      index.postings_[term].push_back(
          {static_cast<std::uint32_t>(ordinal), static_cast<double>(count)});
    }
    index.doc_ids_.push_back(docs[ordinal].first);
    index.doc_lengths_.push_back(static_cast<double>(tokens.size()));
    total_tokens += static_cast<double>(tokens.size());
  }
  index.avg_doc_length_ = total_tokens / static_cast<double>(docs.size());
  return index;
}

InvertedIndex InvertedIndex::build_bm25(const Corpus& corpus, const TokenBudget& doc_budget) {
  std::vector<std::pair<std::string, std::string>> docs;
  docs.reserve(corpus.size());
  for (const TrialDoc& doc : corpus) {
    docs.emplace_back(doc.doc_id, format_trial_text(doc, doc_budget));
  }
  return build_bm25_text(docs);
}

InvertedIndex InvertedIndex::build_impact(
    const std::vector<std::pair<std::string, SparseVec>>& vectors) {
  if (vectors.empty()) {
    throw Error(ErrorCode::EmptyInput, "cannot build an impact index over zero vectors");
  }
  InvertedIndex index;
  index.mode_ = IndexMode::Impact;
  index.doc_ids_.reserve(vectors.size());
  for (std::size_t ordinal = 0; ordinal < vectors.size(); ++ordinal) {
    const auto& [id, vec] = vectors[ordinal];
    for (const auto& [term, weight] : vec.weights) {
      if (weight <= 0.0) {
        throw Error(ErrorCode::MalformedRecord,
                    "non-positive weight for term '" + term + "' in vector " + id);
      }
      index.postings_[term].push_back({static_cast<std::uint32_t>(ordinal), weight});
    }
    index.doc_ids_.push_back(id);
    index.doc_lengths_.push_back(static_cast<double>(vec.weights.size()));
  }
  return index;
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

Ranking InvertedIndex::search_bm25(std::string_view query, std::size_t k, const Bm25Params& params,
                                   std::string topic_id) const {
  if (mode_ != IndexMode::Bm25) {
    throw Error(ErrorCode::WrongMode, "search_bm25 on an impact index");
  }
  std::vector<double> scores(doc_count(), 0.0);
  std::vector<char> touched(doc_count(), 0);
  // Query terms are scored as a multiset: a term occurring twice in the
  // query contributes twice, mirroring the exhaustive oracle.
  for (const auto& term : analyze(query)) {
    const auto* list = postings(term);
    if (list == nullptr) continue;
    double idf = bm25_idf(doc_count(), list->size());
    for (const auto& posting : *list) {
      double tf = posting.payload;
      double dl = doc_lengths_[posting.ordinal];
      double norm = tf * (params.k1 + 1.0) /
                    (tf + params.k1 * (1.0 - params.b + params.b * dl / avg_doc_length_));
      scores[posting.ordinal] += idf * norm;
      touched[posting.ordinal] = 1;
    }
  }
  return top_k(scores, touched, doc_ids_, k, std::move(topic_id));
}

Ranking InvertedIndex::search_impact(const SparseVec& query, std::size_t k,
                                     std::string topic_id) const {
  if (mode_ != IndexMode::Impact) {
    throw Error(ErrorCode::WrongMode, "search_impact on a BM25 index");
  }
  std::vector<double> scores(doc_count(), 0.0);
  std::vector<char> touched(doc_count(), 0);
  for (const auto& [term, weight] : query.weights) {
    const auto* list = postings(term);
    if (list == nullptr) continue;
    for (const auto& posting : *list) {
      scores[posting.ordinal] += weight * posting.payload;
      touched[posting.ordinal] = 1;
    }
  }
  return top_k(scores, touched, doc_ids_, k, std::move(topic_id));
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write index file: " + path.string());
  }
  out.write(kIndexMagic, sizeof(kIndexMagic));
  write_u64(out, mode_ == IndexMode::Bm25 ? 0 : 1);
  write_u64(out, doc_ids_.size());
  write_f64(out, avg_doc_length_);
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    write_str(out, doc_ids_[i]);
    write_f64(out, doc_lengths_[i]);
  }
  write_u64(out, postings_.size());
  for (const auto& [term, list] : postings_) {
    write_str(out, term);
    write_u64(out, list.size());
    for (const auto& posting : list) {
      write_u64(out, posting.ordinal);
      write_f64(out, posting.payload);
    }
  }
  if (!out) {
    throw Error(ErrorCode::Io, "failed writing index file: " + path.string());
  }
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open index file: " + path.string());
  }
  char magic[sizeof(kIndexMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::MalformedRecord, "not a ctrank index file: " + path.string());
  }
  InvertedIndex index;
  index.mode_ = read_u64(in) == 0 ? IndexMode::Bm25 : IndexMode::Impact;
  std::uint64_t docs = read_u64(in);
  index.avg_doc_length_ = read_f64(in);
  index.doc_ids_.reserve(docs);
  index.doc_lengths_.reserve(docs);
  for (std::uint64_t i = 0; i < docs; ++i) {
    index.doc_ids_.push_back(read_str(in));
    index.doc_lengths_.push_back(read_f64(in));
  }
  std::uint64_t terms = read_u64(in);
  for (std::uint64_t i = 0; i < terms; ++i) {
    std::string term = read_str(in);
    std::uint64_t n = read_u64(in);
    std::vector<Posting> list;
    list.reserve(n);
    for (std::uint64_t p = 0; p < n; ++p) {
      Posting posting;
      posting.ordinal = static_cast<std::uint32_t>(read_u64(in));
      posting.payload = read_f64(in);
      list.push_back(posting);
    }
    index.postings_.emplace(std::move(term), std::move(list));
  }
  return index;
}

std::vector<std::pair<std::string, SparseVec>> load_sparse_vectors(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open sparse vector file: " + path.string());
  }
  std::vector<std::pair<std::string, SparseVec>> out;
  std::map<std::string, std::size_t> seen;
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
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("vector") ||
        !j["vector"].is_object()) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": expected {\"id\":..., \"vector\":{...}}");
    }
    std::string id = j["id"].get<std::string>();
    if (!seen.emplace(id, line_no).second) {
      throw Error(ErrorCode::DuplicateId, "sparse vector id repeated: " + id);
    }
    SparseVec vec;
    for (const auto& [term, weight] : j["vector"].items()) {
      if (!weight.is_number()) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line_no) + ": weight for '" + term + "' is not a number");
      }
      double w = weight.get<double>();
      if (w <= 0.0 || !std::isfinite(w)) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line_no) + ": weight for '" + term + "' must be finite and > 0");
      }
      vec.weights.emplace(term, w);
    }
    out.emplace_back(std::move(id), std::move(vec));
  }
  return out;
}

}  // namespace ctrank
