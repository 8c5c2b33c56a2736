#include "ctrank/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "ctrank/error.hpp"

namespace ctrank {

namespace {

using json = nlohmann::json;
namespace pt = boost::property_tree;

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Recursively concatenate the text content of an element, skipping attribute
// and comment pseudo-nodes. Registry exports sometimes nest sections inside
// wrapper elements (e.g. textblock).
void collect_text(const pt::ptree& node, std::string& out) {
  if (!node.data().empty()) {
    if (!out.empty()) out.push_back(' ');
    out += node.data();
  }
  for (const auto& child : node) {
    if (child.first == "<xmlattr>" || child.first == "<xmlcomment>") continue;
    collect_text(child.second, out);
  }
}

std::string section_text(const pt::ptree& root, const char* name) {
  auto child = root.get_child_optional(name);
  if (!child) return {};
  std::string out;
  collect_text(*child, out);
  return collapse_whitespace(out);
}

std::string decode_xml_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '&') {
      auto rest = text.substr(i);
      if (rest.rfind("&amp;", 0) == 0) { out.push_back('&'); i += 5; continue; }
      if (rest.rfind("&lt;", 0) == 0) { out.push_back('<'); i += 4; continue; }
      if (rest.rfind("&gt;", 0) == 0) { out.push_back('>'); i += 4; continue; }
      if (rest.rfind("&quot;", 0) == 0) { out.push_back('"'); i += 6; continue; }
      if (rest.rfind("&apos;", 0) == 0) { out.push_back('\''); i += 6; continue; }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

struct RawTopic {
  std::string id;
  std::string inner;  // byte-exact content between the tags
};

// Byte-level scan for <topic number="..."> elements. A DOM parse cannot give
// back the exact original bytes, which TemplateXml topics must keep.
std::vector<RawTopic> scan_topic_elements(std::string_view bytes) {
  std::vector<RawTopic> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t start = bytes.find("<topic", pos);
    if (start == std::string_view::npos) break;
    std::size_t after = start + 6;
    if (after < bytes.size() && (std::isalnum(static_cast<unsigned char>(bytes[after])) || bytes[after] == '_')) {
      pos = after;  // "<topics>" or similar
      continue;
    }
    // find the end of the opening tag, honoring quoted attribute values
    std::size_t tag_end = std::string_view::npos;
    char quote = 0;
    bool self_closing = false;
    for (std::size_t i = after; i < bytes.size(); ++i) {
      char c = bytes[i];
      if (quote != 0) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '>') {
        tag_end = i;
        self_closing = i > 0 && bytes[i - 1] == '/';
        break;
      }
    }
    if (tag_end == std::string_view::npos) {
      throw Error(ErrorCode::MalformedInput, "unterminated <topic> opening tag");
    }
    std::string_view opening = bytes.substr(start, tag_end - start + 1);

    std::size_t attr = opening.find("number");
    std::string id;
    if (attr != std::string_view::npos) {
      std::size_t eq = opening.find('=', attr);
      if (eq != std::string_view::npos) {
        std::size_t v = eq + 1;
        while (v < opening.size() && is_space(opening[v])) ++v;
        if (v < opening.size() && (opening[v] == '"' || opening[v] == '\'')) {
          char q = opening[v];
          std::size_t close_q = opening.find(q, v + 1);
          if (close_q != std::string_view::npos) {
            id = std::string(opening.substr(v + 1, close_q - v - 1));
          }
        }
      }
    }
    if (id.empty()) {
      throw Error(ErrorCode::MalformedInput, "<topic> element without a number attribute");
    }

    std::string inner;
    std::size_t next_pos;
    if (self_closing) {
      next_pos = tag_end + 1;
    } else {
      std::size_t close = bytes.find("</topic>", tag_end + 1);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::MalformedInput, "missing </topic> for topic " + id);
      }
      inner = std::string(bytes.substr(tag_end + 1, close - tag_end - 1));
      next_pos = close + 8;
    }
    out.push_back(RawTopic{std::move(id), std::move(inner)});
    pos = next_pos;
  }
  return out;
}

std::vector<Topic> parse_topics_tsv(std::string_view bytes, TopicKind kind) {
  std::vector<Topic> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= bytes.size()) {
    std::size_t end = bytes.find('\n', start);
    std::string_view line = bytes.substr(start, end == std::string_view::npos ? bytes.size() - start : end - start);
    start = end == std::string_view::npos ? bytes.size() + 1 : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::MalformedInput,
                  "topics TSV line " + std::to_string(line_no) + " has no tab separator");
    }
    Topic t;
    t.topic_id = std::string(trim(line.substr(0, tab)));
    if (t.topic_id.empty()) {
      throw Error(ErrorCode::MalformedInput, "topics TSV line " + std::to_string(line_no) + " has an empty id");
    }
    t.source_kind = kind;
    if (kind == TopicKind::FreeText) {
      t.raw = std::string(trim(line.substr(tab + 1)));
      t.text = t.raw;
    } else {
      t.raw = std::string(line.substr(tab + 1));
    }
    out.push_back(std::move(t));
  }
  return out;
}

void check_unique_topic_ids(const std::vector<Topic>& topics) {
  std::map<std::string_view, std::size_t> seen;
  for (const auto& t : topics) {
    auto [it, inserted] = seen.emplace(t.topic_id, 1);
    if (!inserted) {
      throw Error(ErrorCode::DuplicateTopicId, "topic id repeated: " + t.topic_id);
    }
  }
}

std::string escape_xml(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

TrialDoc trial_from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line_no) + ": " + ex.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": not a JSON object");
  }
  auto field = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line_no) + ": missing key '" + key + "'");
      }
      return {};
    }
    if (!it->is_string()) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": key '" + key + "' is not a string");
    }
    return it->get<std::string>();
  };
  TrialDoc doc;
  doc.doc_id = field("doc_id", true);
  if (doc.doc_id.empty()) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": empty doc_id");
  }
  doc.title = field("title", false);
  doc.eligibility = field("eligibility", false);
  doc.summary = field("summary", false);
  doc.detail = field("detail", false);
  return doc;
}

}  // namespace

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = false;
  for (char c : text) {
    if (is_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

std::string truncate_tokens(const std::string& text, const TokenBudget& budget,
                            const TokenizerFn& external) {
  if (budget.max_tokens == 0) {
    throw std::invalid_argument("TokenBudget.max_tokens must be >= 1");
  }
  std::vector<std::string> tokens;
  if (budget.tokenizer == TokenizerKind::External) {
    if (!external) {
      throw std::invalid_argument("External tokenizer requested but no tokenizer supplied");
    }
    tokens = external(text);
  } else {
    tokens = whitespace_tokens(text);
  }
  if (tokens.size() <= budget.max_tokens) {
    return text;
  }
  std::string out;
  for (std::size_t i = 0; i < budget.max_tokens; ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

TrialDoc parse_trial_xml(std::string_view xml_bytes) {
  pt::ptree tree;
  std::istringstream in{std::string(xml_bytes)};
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& ex) {
    throw Error(ErrorCode::MalformedXml, ex.message());
  }

  const pt::ptree* root = nullptr;
  for (const auto& child : tree) {
    if (child.first.empty() || child.first.front() == '<') continue;
    root = &child.second;
    break;
  }
  if (root == nullptr) {
    throw Error(ErrorCode::MalformedXml, "no root element");
  }

  TrialDoc doc;
  doc.doc_id = section_text(*root, "id");
  if (doc.doc_id.empty()) {
    throw Error(ErrorCode::MissingId, "trial XML has no id element");
  }
  doc.title = section_text(*root, "title");
  doc.eligibility = section_text(*root, "eligibility");
  doc.summary = section_text(*root, "summary");
  doc.detail = section_text(*root, "detail");
  return doc;
}

std::string format_trial_text(const TrialDoc& doc, const TokenBudget& budget,
                              const TokenizerFn& external) {
  std::string text = "Title: " + doc.title + " Eligibility: " + doc.eligibility +
                     " Summary: " + doc.summary + " Description: " + doc.detail;
  return truncate_tokens(text, budget, external);
}

std::vector<Topic> parse_topics(std::string_view file_bytes, TopicKind kind) {
  std::string_view body = trim(file_bytes);
  std::vector<Topic> out;
  if (body.empty()) {
    return out;
  }
  if (body.front() != '<') {
    out = parse_topics_tsv(file_bytes, kind);
  } else {
    for (auto& raw : scan_topic_elements(body)) {
      Topic t;
      t.topic_id = std::move(raw.id);
      t.source_kind = kind;
      if (kind == TopicKind::FreeText) {
        t.raw = decode_xml_entities(trim(raw.inner));
        t.text = t.raw;
      } else {
        t.raw = std::move(raw.inner);
      }
      out.push_back(std::move(t));
    }
  }
  check_unique_topic_ids(out);
  return out;
}

std::vector<Topic> load_topics(const std::filesystem::path& path, TopicKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open topics file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_topics(buf.str(), kind);
}

std::string topics_to_xml(const std::vector<Topic>& topics) {
  std::string out = "<topics>\n";
  for (const auto& t : topics) {
    out += "  <topic number=\"" + escape_xml(t.topic_id) + "\">" + escape_xml(t.text) +
           "</topic>\n";
  }
  out += "</topics>\n";
  return out;
}

Corpus Corpus::from_docs(std::vector<TrialDoc> docs) {
  Corpus corpus;
  corpus.docs_ = std::move(docs);
  for (std::size_t i = 0; i < corpus.docs_.size(); ++i) {
    const auto& doc = corpus.docs_[i];
    if (doc.doc_id.empty()) {
      throw Error(ErrorCode::MalformedRecord, "document " + std::to_string(i) + " has an empty doc_id");
    }
    auto [it, inserted] = corpus.by_id_.emplace(doc.doc_id, i);
    if (!inserted) {
      throw Error(ErrorCode::MalformedRecord, "duplicate doc_id: " + doc.doc_id);
    }
  }
  return corpus;
}

Corpus Corpus::load(const std::filesystem::path& path, CorpusFormat format) {
  std::vector<TrialDoc> docs;
  if (format == CorpusFormat::Jsonl) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw Error(ErrorCode::Io, "cannot open corpus file: " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      docs.push_back(trial_from_json_line(line, line_no));
    }
  } else {
    std::error_code ec;
    if (!std::filesystem::is_directory(path, ec)) {
      throw Error(ErrorCode::Io, "not a directory: " + path.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".xml") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      if (!in) {
        throw Error(ErrorCode::Io, "cannot open trial file: " + file.string());
      }
      std::ostringstream buf;
      buf << in.rdbuf();
      try {
        docs.push_back(parse_trial_xml(buf.str()));
      } catch (const Error& ex) {
        throw Error(ErrorCode::MalformedRecord, file.filename().string() + ": " + ex.what());
      }
    }
  }
  try {
    return from_docs(std::move(docs));
  } catch (const Error& ex) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": " + ex.what());
  }
}

const TrialDoc* Corpus::find(std::string_view doc_id) const {
  auto it = by_id_.find(doc_id);
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::string trial_to_jsonl(const TrialDoc& doc) {
  json j;
  j["doc_id"] = doc.doc_id;
  j["title"] = doc.title;
  j["eligibility"] = doc.eligibility;
  j["summary"] = doc.summary;
  j["detail"] = doc.detail;
  return j.dump();
}

}  // namespace ctrank
