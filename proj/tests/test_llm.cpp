#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ctrank/error.hpp"
#include "ctrank/llm.hpp"
#include "test_support.hpp"

using namespace ctrank;
using ctrank::test::fixtures_dir;
using ctrank::test::read_file;
using ctrank::test::render_prompt;
using ctrank::test::temp_dir;

namespace {

// Minimal in-process chat endpoint with a scripted handler.
class TestServer {
 public:
  using Handler = std::function<void(int request_no, const httplib::Request&, httplib::Response&)>;

  explicit TestServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handler_(++count_, req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~TestServer() {
    server_.stop();
    thread_.join();
  }

  int requests() const { return count_; }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

 private:
  httplib::Server server_;
  Handler handler_;
  std::thread thread_;
  std::atomic<int> count_{0};
  int port_ = 0;
};

void reply_content(httplib::Response& res, const std::string& content) {
  nlohmann::json body = {
      {"id", "fake"},
      {"object", "chat.completion"},
      {"choices",
       nlohmann::json::array(
           {{{"index", 0},
             {"message", {{"role", "assistant"}, {"content", content}}},
             {"finish_reason", "stop"}}})},
  };
  res.set_content(body.dump(), "application/json");
}

LlmConfig test_config(const std::string& endpoint, const std::filesystem::path& cache_dir) {
  LlmConfig cfg;
  cfg.endpoint_url = endpoint;
  cfg.model = "fake-model";
  cfg.temperature = 0.0;
  cfg.max_retries = 3;
  cfg.timeout_seconds = 5.0;
  cfg.cache_dir = cache_dir;
  cfg.backoff_base_seconds = 0.001;
  cfg.api_key_env = "CTRANK_TEST_API_KEY";
  return cfg;
}

ChatPrompt trivial_prompt(const std::string& text) {
  ChatPrompt p;
  p.messages.push_back({ChatRole::User, text});
  return p;
}

}  // namespace

TEST_CASE("generation prompt matches the golden transcription") {
  auto prompt = build_generation_prompt("T1", "D1", "T2");
  REQUIRE(prompt.messages.size() == 4);
  CHECK(prompt.messages[0].role == ChatRole::System);
  CHECK(prompt.messages[1].role == ChatRole::User);
  CHECK(prompt.messages[2].role == ChatRole::Assistant);
  CHECK(prompt.messages[3].role == ChatRole::User);
  CHECK(render_prompt(prompt) == read_file(fixtures_dir() / "golden" / "generation_prompt.txt"));
}

TEST_CASE("generation prompt rejects empty fields, no recursive templating") {
  CHECK_THROWS_AS(build_generation_prompt("T1", "", "T2"), Error);
  CHECK_THROWS_AS(build_generation_prompt("", "D", "T"), Error);
  auto prompt = build_generation_prompt("contains {gold_trial} literally", "D", "T");
  CHECK(prompt.messages[1].content.find("{gold_trial}") != std::string::npos);
}

TEST_CASE("judge prompt matches the golden transcription") {
  std::array<JudgeShot, 3> shots{{
      {"PD", "ET1", JudgeLabel::Excluded},
      {"PD", "ET2", JudgeLabel::Eligible},
      {"PD", "ET3", JudgeLabel::NotRelevant},
  }};
  auto prompt = build_judge_prompt(shots, "CD", "CT");
  REQUIRE(prompt.messages.size() == 8);
  CHECK(prompt.messages[2].content == "excluded");
  CHECK(prompt.messages[4].content == "eligible");
  CHECK(prompt.messages[6].content == "not relevant");
  CHECK(render_prompt(prompt) == read_file(fixtures_dir() / "golden" / "judge_prompt.txt"));

  CHECK_THROWS_AS(build_judge_prompt(shots, "CD", ""), Error);
  std::array<JudgeShot, 3> reordered{{
      {"PD", "ET2", JudgeLabel::Eligible},
      {"PD", "ET1", JudgeLabel::Excluded},
      {"PD", "ET3", JudgeLabel::NotRelevant},
  }};
  CHECK_THROWS_AS(build_judge_prompt(reordered, "CD", "CT"), std::invalid_argument);
}

TEST_CASE("conversion prompt matches the golden transcription") {
  auto prompt = build_conversion_prompt("<patient><age>54</age></patient>");
  REQUIRE(prompt.messages.size() == 1);
  CHECK(prompt.messages[0].role == ChatRole::User);
  CHECK(render_prompt(prompt) == read_file(fixtures_dir() / "golden" / "conversion_prompt.txt"));
  CHECK_THROWS_AS(build_conversion_prompt(""), Error);

  auto multiline = build_conversion_prompt("<p>\n  <a>1</a>\n</p>");
  CHECK(multiline.messages[0].content.find("<p>\n  <a>1</a>\n</p>") != std::string::npos);
}

TEST_CASE("load_shots validates the fixture format") {
  auto shots = load_shots(fixtures_dir() / "shots.json");
  CHECK(shots[0].label == JudgeLabel::Excluded);
  CHECK(shots[1].label == JudgeLabel::Eligible);
  CHECK(shots[2].label == JudgeLabel::NotRelevant);

  auto dir = temp_dir("shots");
  ctrank::test::write_file(dir / "bad.json", "[{\"description\":\"d\",\"trial\":\"t\",\"label\":2},"
                                             "{\"description\":\"d\",\"trial\":\"t\",\"label\":1},"
                                             "{\"description\":\"d\",\"trial\":\"t\",\"label\":0}]");
  CHECK_THROWS_AS(load_shots(dir / "bad.json"), Error);
}

TEST_CASE("filter_generation rule") {
  CHECK_FALSE(filter_generation("I'm sorry, but I can't help").keep);
  CHECK(filter_generation("I'm sorry, but I can't help").keyword == "sorry");
  auto short_reject = filter_generation("twenty nine characters here");
  CHECK_FALSE(short_reject.keep);
  CHECK(short_reject.reason == FilterDecision::Reason::TooShort);
  CHECK(filter_generation(
            "A 54 year old patient with controlled hypertension seeking an interventional study.")
            .keep);
}

TEST_CASE("filter_generation agrees with the labeled fixture") {
  auto cases = nlohmann::json::parse(read_file(fixtures_dir() / "filter_cases.json"));
  REQUIRE(cases.size() == 50);
  for (const auto& c : cases) {
    auto decision = filter_generation(c["text"].get<std::string>());
    CHECK_MESSAGE(decision.keep == c["keep"].get<bool>(), c["text"].get<std::string>());
  }
}

TEST_CASE("filter_generation property: keyword casings always reject, clean long strings keep") {
  std::mt19937_64 rng(13);
  const std::string clean = "patient with a long stable history of treated disease and follow up";
  for (int trial = 0; trial < 200; ++trial) {
    std::string keyword = (trial % 3 == 0)   ? "sorry"
                          : (trial % 3 == 1) ? "i cannot generate"
                                             : "ai language model";
    for (auto& c : keyword) {
      if (rng() % 2 == 0) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    std::string padded = clean.substr(0, rng() % clean.size()) + keyword +
                         clean.substr(0, rng() % clean.size());
    CHECK_FALSE(filter_generation(padded).keep);
  }
  CHECK(filter_generation(clean).keep);
}

TEST_CASE("parse_judge_response vocabulary and priority") {
  CHECK(parse_judge_response("eligible") == JudgeLabel::Eligible);
  CHECK(parse_judge_response("Excluded.") == JudgeLabel::Excluded);
  CHECK(parse_judge_response("The trial is not relevant.") == JudgeLabel::NotRelevant);
  CHECK(parse_judge_response("Not eligible, not relevant") == JudgeLabel::NotRelevant);
  CHECK(parse_judge_response("the patient is EXCLUDED on criteria") == JudgeLabel::Excluded);
  CHECK_THROWS_AS(parse_judge_response("maybe"), Error);
  try {
    parse_judge_response("maybe");
    FAIL("expected UnparseableJudgment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnparseableJudgment);
  }
}

TEST_CASE("canonical serialization is deterministic and key-sensitive") {
  LlmConfig cfg;
  cfg.model = "m";
  cfg.temperature = 0.25;
  auto p = trivial_prompt("hello");
  CHECK(canonical_request_json(cfg, p) == canonical_request_json(cfg, p));
  CHECK(prompt_cache_key(cfg, p) == prompt_cache_key(cfg, p));
  LlmConfig other = cfg;
  other.temperature = 0.5;
  CHECK(prompt_cache_key(cfg, p) != prompt_cache_key(other, p));
  other = cfg;
  other.model = "m2";
  CHECK(prompt_cache_key(cfg, p) != prompt_cache_key(other, p));
}

TEST_CASE("chat_complete caches responses") {
  TestServer server([](int, const httplib::Request&, httplib::Response& res) {
    reply_content(res, "cached answer");
  });
  auto cfg = test_config(server.endpoint(), temp_dir("llmcache"));
  auto prompt = trivial_prompt("question");
  CHECK(chat_complete(cfg, prompt) == "cached answer");
  CHECK(server.requests() == 1);
  CHECK(chat_complete(cfg, prompt) == "cached answer");
  CHECK(server.requests() == 1);  // zero network calls on the hit

  // refresh bypasses the cache read but re-stores
  CHECK(chat_complete(cfg, prompt, /*refresh_cache=*/true) == "cached answer");
  CHECK(server.requests() == 2);
}

TEST_CASE("chat_complete retries transient statuses with backoff") {
  TestServer server([](int n, const httplib::Request&, httplib::Response& res) {
    if (n <= 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    reply_content(res, "ok after retries");
  });
  auto cfg = test_config(server.endpoint(), temp_dir("llmretry"));
  CHECK(chat_complete(cfg, trivial_prompt("q")) == "ok after retries");
  CHECK(server.requests() == 3);
}

TEST_CASE("chat_complete gives up after max_retries") {
  TestServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("down", "text/plain");
  });
  auto cfg = test_config(server.endpoint(), temp_dir("llmdown"));
  cfg.max_retries = 1;
  try {
    chat_complete(cfg, trivial_prompt("q"));
    FAIL("expected ExhaustedRetries");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ExhaustedRetries);
  }
  CHECK(server.requests() == 2);  // max_retries + 1
}

TEST_CASE("chat_complete surfaces non-transient and malformed responses") {
  SUBCASE("HTTP 400 is immediate") {
    TestServer server([](int, const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content("bad request", "text/plain");
    });
    auto cfg = test_config(server.endpoint(), temp_dir("llm400"));
    try {
      chat_complete(cfg, trivial_prompt("q"));
      FAIL("expected HttpError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::HttpError);
    }
    CHECK(server.requests() == 1);
  }

  SUBCASE("non-JSON body") {
    TestServer server([](int, const httplib::Request&, httplib::Response& res) {
      res.set_content("definitely not json", "text/plain");
    });
    auto cfg = test_config(server.endpoint(), temp_dir("llmgarbage"));
    try {
      chat_complete(cfg, trivial_prompt("q"));
      FAIL("expected MalformedResponse");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedResponse);
    }
  }

  SUBCASE("JSON without choices") {
    TestServer server([](int, const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"object\":\"chat.completion\"}", "application/json");
    });
    auto cfg = test_config(server.endpoint(), temp_dir("llmnochoice"));
    CHECK_THROWS_AS(chat_complete(cfg, trivial_prompt("q")), Error);
  }
}

TEST_CASE("chat_complete sends the canonical body and bearer token") {
  std::string seen_body;
  std::string seen_auth;
  TestServer server([&](int, const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
    reply_content(res, "fine");
  });
  ::setenv("CTRANK_TEST_API_KEY", "sk-test-123", 1);
  auto cfg = test_config(server.endpoint(), "");
  auto prompt = build_conversion_prompt("<p/>");
  chat_complete(cfg, prompt);
  CHECK(seen_body == canonical_request_json(cfg, prompt));
  CHECK(seen_auth == "Bearer sk-test-123");
  auto parsed = nlohmann::json::parse(seen_body);
  CHECK(parsed["model"] == "fake-model");
  CHECK(parsed["messages"][0]["role"] == "user");
}
