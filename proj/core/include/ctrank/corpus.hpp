#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ctrank {

/// One clinical trial: registry identifier plus the four text sections the
/// ranking pipeline consumes. Sections may be empty but are never absent.
struct TrialDoc {
  std::string doc_id;
  std::string title;
  std::string eligibility;
  std::string summary;
  std::string detail;

  bool operator==(const TrialDoc&) const = default;
};

enum class TopicKind { FreeText, TemplateXml };

/// A patient-description query. FreeText topics carry their retrieval text
/// directly (text == raw); TemplateXml topics keep the original XML payload
/// byte-exact in `raw` and leave `text` empty until converted.
struct Topic {
  std::string topic_id;
  std::string raw;
  std::string text;
  TopicKind source_kind = TopicKind::FreeText;

  bool operator==(const Topic&) const = default;
};

enum class TokenizerKind { Whitespace, External };

struct TokenBudget {
  std::size_t max_tokens = 0;  // must be >= 1
  TokenizerKind tokenizer = TokenizerKind::Whitespace;
};

/// Hook for plugging a subword tokenizer in place of whitespace splitting.
using TokenizerFn = std::function<std::vector<std::string>(std::string_view)>;

std::vector<std::string> whitespace_tokens(std::string_view text);

/// Collapse internal whitespace runs to single spaces and trim the ends.
std::string collapse_whitespace(std::string_view text);

/// Returns `text` unchanged when it fits the budget, otherwise the first
/// max_tokens tokens joined by single spaces.
std::string truncate_tokens(const std::string& text, const TokenBudget& budget,
                            const TokenizerFn& external = {});

/// Parse one trial record from flat registry-style XML. Missing sections map
/// to empty strings; section text is whitespace-normalized at parse time.
TrialDoc parse_trial_xml(std::string_view xml_bytes);

/// "Title: .. Eligibility: .. Summary: .. Description: .." truncated to budget.
std::string format_trial_text(const TrialDoc& doc, const TokenBudget& budget,
                              const TokenizerFn& external = {});

/// FreeText accepts a <topics> XML file or an id<TAB>text TSV; TemplateXml
/// keeps each <topic> element's inner bytes untouched for later conversion.
std::vector<Topic> parse_topics(std::string_view file_bytes, TopicKind kind);

std::vector<Topic> load_topics(const std::filesystem::path& path, TopicKind kind);

/// Serialize free-text topics back to the <topics> XML interchange format.
std::string topics_to_xml(const std::vector<Topic>& topics);

enum class CorpusFormat { Jsonl, XmlDir };

/// Immutable in-memory document collection; iteration order is input order.
class Corpus {
 public:
  static Corpus load(const std::filesystem::path& path, CorpusFormat format);
  static Corpus from_docs(std::vector<TrialDoc> docs);

  std::size_t size() const noexcept { return docs_.size(); }
  const TrialDoc& at(std::size_t ordinal) const { return docs_.at(ordinal); }
  const TrialDoc* find(std::string_view doc_id) const;
  const std::vector<TrialDoc>& docs() const noexcept { return docs_; }

  auto begin() const noexcept { return docs_.begin(); }
  auto end() const noexcept { return docs_.end(); }

 private:
  Corpus() = default;

  std::vector<TrialDoc> docs_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

/// One corpus JSONL line (keys doc_id/title/eligibility/summary/detail).
std::string trial_to_jsonl(const TrialDoc& doc);

}  // namespace ctrank
