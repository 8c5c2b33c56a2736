#include "fake_llm_server.hpp"

#include <regex>
#include <string>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ctrank/corpus.hpp"
#include "ctrank/eval.hpp"

namespace ctrank::fake {

namespace {

using json = nlohmann::json;

constexpr const char* kJudgeMarker = "Judge if the clinical trial is either";
constexpr const char* kConvertMarker = "Covert the following patient information";
constexpr const char* kGenerateMarker = "Generate a patient description for this clinical trial.";

std::string json_reply(const std::string& content) {
  json body = {
      {"id", "fake-llm"},
      {"object", "chat.completion"},
      {"model", "fake-llm"},
      {"choices",
       json::array({{{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", content}}},
                     {"finish_reason", "stop"}}})},
  };
  return body.dump();
}

std::string strip_tags(const std::string& xml) {
  std::string no_tags = std::regex_replace(xml, std::regex("<[^>]*>"), " ");
  return collapse_whitespace(no_tags);
}

std::string extract_between(const std::string& text, const std::string& start,
                            const std::string& end) {
  auto s = text.find(start);
  if (s == std::string::npos) return {};
  s += start.size();
  auto e = text.find(end, s);
  if (e == std::string::npos) return {};
  return text.substr(s, e - s);
}

std::string first_nct_id(const std::string& text) {
  static const std::regex pattern("NCT[A-Za-z0-9]+");
  std::smatch match;
  if (std::regex_search(text, match, pattern)) return match.str();
  return {};
}

}  // namespace

struct FakeLlmServer::Impl {
  httplib::Server server;
  Options options;
  std::map<std::string, std::string> topic_by_text;  // description -> topic id
  Qrels qrels;
  bool have_qrels = false;

  std::string judge(const std::string& user_turn) const {
    std::string description = extract_between(
        user_turn, "Given the patient description: ", " \n and the clinical trial description: ");
    std::string trial =
        extract_between(user_turn, " \n and the clinical trial description: ", " \n Judge if");
    std::string doc_id = first_nct_id(trial);
    auto topic_it = topic_by_text.find(description);
    if (!have_qrels || doc_id.empty() || topic_it == topic_by_text.end()) {
      return "not relevant";
    }
    int grade = qrels.grade(topic_it->second, doc_id).value_or(0);
    switch (grade) {
      case 2: return "eligible";
      case 1: return "excluded";
      default: return "not relevant";
    }
  }

  std::string generate(const std::string& user_turn) const {
    std::string trial = extract_between(user_turn, "The clinical trial: ", " \n Generate");
    if (trial.find("sensitive") != std::string::npos) {
      return "I'm sorry, but as an AI language model I cannot generate a patient description "
             "for this clinical trial.";
    }
    std::string id = first_nct_id(trial);
    if (id.empty()) id = "the sampled trial";
    auto tokens = whitespace_tokens(trial);
    std::string gist;
    for (std::size_t i = 0; i < tokens.size() && i < 8; ++i) {
      gist += " " + tokens[i];
    }
    return "A 57 year old patient who matches the inclusion criteria of " + id +
           ". Key context:" + gist + ".";
  }

  std::string handle(const std::string& body) const {
    json request = json::parse(body, nullptr, false);
    if (request.is_discarded() || !request.contains("messages") || request["messages"].empty()) {
      return json_reply("not relevant");
    }
    std::string last_user;
    for (const auto& m : request["messages"]) {
      if (m.value("role", "") == "user") last_user = m.value("content", "");
    }
    if (last_user.find(kJudgeMarker) != std::string::npos) {
      return json_reply(judge(last_user));
    }
    if (last_user.find(kConvertMarker) != std::string::npos) {
      auto colon = last_user.find(":\n ");
      std::string xml = colon == std::string::npos ? last_user : last_user.substr(colon + 3);
      return json_reply(strip_tags(xml));
    }
    if (last_user.find(kGenerateMarker) != std::string::npos) {
      return json_reply(generate(last_user));
    }
    return json_reply("not relevant");
  }
};

FakeLlmServer::FakeLlmServer(Options options) : impl_(std::make_unique<Impl>()) {
  impl_->options = options;
  if (!options.qrels_path.empty()) {
    impl_->qrels = Qrels::load(options.qrels_path);
    impl_->have_qrels = true;
  }
  if (!options.topics_path.empty()) {
    for (const auto& topic : load_topics(options.topics_path, TopicKind::FreeText)) {
      impl_->topic_by_text.emplace(topic.text, topic.topic_id);
    }
  }
  impl_->server.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                       int n = ++requests_;
                       if (n <= impl_->options.fail_first) {
                         res.status = 429;
                         res.set_content("try again", "text/plain");
                         return;
                       }
                       res.set_content(impl_->handle(req.body), "application/json");
                     });
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

FakeLlmServer::~FakeLlmServer() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string FakeLlmServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

struct CountingScriptServer::Impl {
  httplib::Server server;
  Script script;
};

CountingScriptServer::CountingScriptServer(Script script) : impl_(std::make_unique<Impl>()) {
  impl_->script = std::move(script);
  impl_->server.Post("/v1/chat/completions",
                     [this](const httplib::Request&, httplib::Response& res) {
                       res.set_content(json_reply(impl_->script(++requests_)),
                                       "application/json");
                     });
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

CountingScriptServer::~CountingScriptServer() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string CountingScriptServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

}  // namespace ctrank::fake
