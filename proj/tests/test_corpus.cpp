#include <doctest.h>

#include <random>
#include <sstream>

#include "ctrank/corpus.hpp"
#include "ctrank/error.hpp"
#include "test_support.hpp"

using namespace ctrank;
using ctrank::test::fixtures_dir;
using ctrank::test::temp_dir;
using ctrank::test::write_file;

namespace {

std::size_t independent_token_count(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  std::size_t n = 0;
  while (in >> tok) ++n;
  return n;
}

}  // namespace

TEST_CASE("truncate_tokens basics") {
  TokenBudget b5{5};
  CHECK(truncate_tokens("a b c", b5) == "a b c");
  CHECK(truncate_tokens("a b c", TokenBudget{2}) == "a b");
  CHECK(truncate_tokens("", b5).empty());
  CHECK_THROWS_AS(truncate_tokens("a", TokenBudget{0}), std::invalid_argument);
}

TEST_CASE("truncate_tokens long input keeps exactly the budget") {
  std::string text;
  for (int i = 0; i < 10000; ++i) text += "tok" + std::to_string(i) + " ";
  auto out = truncate_tokens(text, TokenBudget{256});
  CHECK(independent_token_count(out) == 256);
}

TEST_CASE("truncate_tokens properties: idempotent, never over budget") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "ab cd\te\nfg  hi";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    std::size_t len = rng() % 120;
    for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    TokenBudget budget{1 + rng() % 12};
    auto once = truncate_tokens(text, budget);
    CHECK(whitespace_tokens(once).size() <= budget.max_tokens);
    CHECK(truncate_tokens(once, budget) == once);
  }
}

TEST_CASE("truncate_tokens external tokenizer hook") {
  TokenizerFn comma = [](std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find(',', start);
      if (pos == std::string_view::npos) pos = text.size();
      if (pos > start) out.emplace_back(text.substr(start, pos - start));
      start = pos + 1;
    }
    return out;
  };
  TokenBudget budget{2, TokenizerKind::External};
  CHECK(truncate_tokens("one,two,three", budget, comma) == "one two");
  CHECK_THROWS_AS(truncate_tokens("x", budget), std::invalid_argument);
}

TEST_CASE("parse_trial_xml maps fields and fills blanks") {
  auto doc = parse_trial_xml("<trial><id>NCT001</id><title>T</title></trial>");
  CHECK(doc.doc_id == "NCT001");
  CHECK(doc.title == "T");
  CHECK(doc.eligibility.empty());
  CHECK(doc.summary.empty());
  CHECK(doc.detail.empty());
}

TEST_CASE("parse_trial_xml error paths") {
  CHECK_THROWS_WITH_AS(parse_trial_xml("<trial><title>T</title></trial>"),
                       doctest::Contains("MissingId"), Error);
  try {
    parse_trial_xml("<trial><title>");
    FAIL("expected MalformedXml");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedXml);
  }
}

TEST_CASE("parse_trial_xml whitespace-collapses the bundled fixture") {
  auto doc = parse_trial_xml(ctrank::test::read_file(fixtures_dir() / "trial_full.xml"));
  TrialDoc expected;
  expected.doc_id = "NCT7001";
  expected.title = "Phase II study of adjuvant therapy";
  expected.eligibility = "Inclusion: adults aged 18 to 65. Exclusion: pregnancy & lactation.";
  expected.summary = "Assesses safety and efficacy of the adjuvant regimen.";
  expected.detail = "The study enrolls participants across twelve sites. Follow-up continues for two years.";
  CHECK(doc == expected);
}

TEST_CASE("format_trial_text fixed section order and truncation") {
  TrialDoc doc{"id", "A", "B", "C", "D"};
  CHECK(format_trial_text(doc, TokenBudget{512}) ==
        "Title: A Eligibility: B Summary: C Description: D");
  CHECK(format_trial_text(doc, TokenBudget{3}) == "Title: A Eligibility:");

  TrialDoc big = doc;
  for (int i = 0; i < 600; ++i) big.detail += " word" + std::to_string(i);
  auto out = format_trial_text(big, TokenBudget{512});
  CHECK(independent_token_count(out) == 512);
  CHECK(out.rfind("Title: ", 0) == 0);
}

TEST_CASE("parse_topics free-text XML") {
  auto topics = parse_topics(
      "<topics>\n  <topic number=\"1\">first patient</topic>\n"
      "  <topic number=\"2\">second &amp; third</topic>\n</topics>",
      TopicKind::FreeText);
  REQUIRE(topics.size() == 2);
  CHECK(topics[0].topic_id == "1");
  CHECK(topics[0].text == "first patient");
  CHECK(topics[0].raw == topics[0].text);
  CHECK(topics[0].source_kind == TopicKind::FreeText);
  CHECK(topics[1].text == "second & third");
}

TEST_CASE("parse_topics template XML keeps raw bytes and blank fields") {
  const std::string inner = "\n    <age>54</age>\n    <conditions></conditions>\n  ";
  const std::string payload = "<topics><topic number=\"7\">" + inner + "</topic></topics>";
  auto topics = parse_topics(payload, TopicKind::TemplateXml);
  REQUIRE(topics.size() == 1);
  CHECK(topics[0].topic_id == "7");
  CHECK(topics[0].text.empty());
  CHECK(topics[0].raw == inner);
  CHECK(topics[0].source_kind == TopicKind::TemplateXml);
}

TEST_CASE("parse_topics duplicate ids and TSV form") {
  CHECK_THROWS_AS(parse_topics("<topics><topic number=\"1\">a</topic>"
                               "<topic number=\"1\">b</topic></topics>",
                               TopicKind::FreeText),
                  Error);
  try {
    parse_topics("1\ta\n1\tb\n", TopicKind::FreeText);
    FAIL("expected DuplicateTopicId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateTopicId);
  }

  auto topics = parse_topics("1\tfirst patient\n2\tsecond one\n", TopicKind::FreeText);
  REQUIRE(topics.size() == 2);
  CHECK(topics[1].text == "second one");

  CHECK(parse_topics("", TopicKind::FreeText).empty());
}

TEST_CASE("parse_topics fixture files") {
  auto free_topics = load_topics(fixtures_dir() / "topics_free.xml", TopicKind::FreeText);
  CHECK(free_topics.size() == 10);
  for (const auto& t : free_topics) CHECK_FALSE(t.text.empty());

  auto template_topics =
      load_topics(fixtures_dir() / "topics_template.xml", TopicKind::TemplateXml);
  CHECK(template_topics.size() == 10);
  for (const auto& t : template_topics) {
    CHECK(t.text.empty());
    CHECK(t.raw.find("<conditions>") != std::string::npos);
  }
}

TEST_CASE("load_corpus jsonl") {
  auto dir = temp_dir("corpus");
  auto path = dir / "c.jsonl";

  SUBCASE("three records") {
    write_file(path, trial_to_jsonl({"d1", "t", "e", "s", "x"}) + "\n" +
                         trial_to_jsonl({"d2", "", "", "", ""}) + "\n" +
                         trial_to_jsonl({"d3", "t3", "", "", ""}) + "\n");
    auto corpus = Corpus::load(path, CorpusFormat::Jsonl);
    CHECK(corpus.size() == 3);
    CHECK(corpus.at(0).doc_id == "d1");
    CHECK(corpus.find("d3") != nullptr);
    CHECK(corpus.find("nope") == nullptr);
  }

  SUBCASE("empty file is a valid empty corpus") {
    write_file(path, "");
    CHECK(Corpus::load(path, CorpusFormat::Jsonl).size() == 0);
  }

  SUBCASE("corrupt line is reported with its number") {
    write_file(path, trial_to_jsonl({"d1", "", "", "", ""}) + "\nnot json\n");
    try {
      Corpus::load(path, CorpusFormat::Jsonl);
      FAIL("expected MalformedRecord");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedRecord);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("duplicate doc_id rejected") {
    write_file(path, trial_to_jsonl({"d1", "", "", "", ""}) + "\n" +
                         trial_to_jsonl({"d1", "", "", "", ""}) + "\n");
    CHECK_THROWS_AS(Corpus::load(path, CorpusFormat::Jsonl), Error);
  }

  SUBCASE("missing path is Io") {
    try {
      Corpus::load(dir / "absent.jsonl", CorpusFormat::Jsonl);
      FAIL("expected Io");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Io);
    }
  }
}

TEST_CASE("load_corpus xml directory in filename order") {
  auto corpus = Corpus::load(fixtures_dir() / "corpus_xml", CorpusFormat::XmlDir);
  REQUIRE(corpus.size() == 3);
  CHECK(corpus.at(0).doc_id == "NCTX001");
  CHECK(corpus.at(1).doc_id == "NCTX002");
  CHECK(corpus.at(2).doc_id == "NCTX003");
  CHECK(corpus.at(1).eligibility.empty());
}

TEST_CASE("load_corpus xml directory names the offending file") {
  auto dir = temp_dir("badxmldir");
  write_file(dir / "ok.xml", "<trial><id>A1</id></trial>");
  write_file(dir / "zz_broken.xml", "<trial><title>unterminated");
  try {
    Corpus::load(dir, CorpusFormat::XmlDir);
    FAIL("expected MalformedRecord");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedRecord);
    CHECK(std::string(e.what()).find("zz_broken.xml") != std::string::npos);
  }
}

TEST_CASE("jsonl round-trip is field-identical") {
  std::mt19937_64 rng(11);
  const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,:;!?'\"\\/()-";
  auto random_text = [&](std::size_t max_len) {
    std::string out;
    std::size_t len = rng() % max_len;
    for (std::size_t i = 0; i < len; ++i) out.push_back(alphabet[rng() % alphabet.size()]);
    return out;
  };
  auto dir = temp_dir("roundtrip");
  auto path = dir / "docs.jsonl";
  std::vector<TrialDoc> docs;
  std::string payload;
  for (int i = 0; i < 50; ++i) {
    TrialDoc doc{"doc-" + std::to_string(i), random_text(40), random_text(80), random_text(60),
                 random_text(120)};
    payload += trial_to_jsonl(doc) + "\n";
    docs.push_back(std::move(doc));
  }
  // non-ASCII content survives too
  docs.push_back({"doc-utf8", "étude randomisée", "âge ≥ 18", "résumé", "détail"});
  payload += trial_to_jsonl(docs.back()) + "\n";
  write_file(path, payload);

  auto corpus = Corpus::load(path, CorpusFormat::Jsonl);
  REQUIRE(corpus.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(corpus.at(i) == docs[i]);
  }
}

TEST_CASE("topics_to_xml round-trips through parse_topics") {
  std::vector<Topic> topics;
  topics.push_back({"1", "a patient & their history", "a patient & their history",
                    TopicKind::FreeText});
  topics.push_back({"2", "uses <tags> safely", "uses <tags> safely", TopicKind::FreeText});
  auto xml = topics_to_xml(topics);
  auto reparsed = parse_topics(xml, TopicKind::FreeText);
  REQUIRE(reparsed.size() == 2);
  CHECK(reparsed[0].text == topics[0].text);
  CHECK(reparsed[1].text == topics[1].text);
}
