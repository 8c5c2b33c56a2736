#include "ctrank/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ctrank/digest.hpp"
#include "ctrank/error.hpp"

namespace ctrank {

namespace {

using json = nlohmann::json;

constexpr const char* kGenerationSystem =
    "You are a clinical trial specialist. You can generate patient descriptions that are best "
    "suited for particular clinical trials.";

constexpr const char* kJudgeSystem =
    "You are a physician trained in medical informatics. Given a patient description and a "
    "clinical trial description, you can judge if the trial is either eligible (patient meets "
    "inclusion criteria and exclusion criteria do not apply), excluded (patient meets inclusion "
    "criteria, but is excluded on the grounds of the trial's exclusion criteria), or not relevant "
    "(patient does not meet inclusion criteria).";

std::string generation_user_turn(const std::string& trial) {
  return "The clinical trial: " + trial + " \n Generate a patient description for this clinical trial.";
}

std::string judge_user_turn(const std::string& description, const std::string& trial) {
  return "Given the patient description: " + description +
         " \n and the clinical trial description: " + trial +
         " \n Judge if the clinical trial is either 'eligible', 'excluded' or 'not relevant' for "
         "the patient. ";
}

const char* judge_answer(JudgeLabel label) {
  switch (label) {
    case JudgeLabel::Excluded: return "excluded";
    case JudgeLabel::Eligible: return "eligible";
    case JudgeLabel::NotRelevant: return "not relevant";
  }
  return "";
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void require_non_empty(const std::string& value, const char* what) {
  if (value.empty()) {
    throw Error(ErrorCode::EmptyField, std::string(what) + " must be non-empty");
  }
}

// Split "http://host:port/some/path" into the client base and request path.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint URL needs a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/chat/completions"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::filesystem::path cache_path(const LlmConfig& cfg, const std::string& key) {
  return cfg.cache_dir / key;
}

bool read_cache(const std::filesystem::path& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return true;
}

// Atomic publish: write a unique temp file, then rename over the key.
void write_cache(const std::filesystem::path& dir, const std::string& key,
                 const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  static std::atomic<std::uint64_t> counter{0};
  auto tmp = dir / (key + ".tmp." + std::to_string(::getpid()) + "." +
                    std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::Io, "cannot write cache file: " + tmp.string());
    }
    out << content;
  }
  std::filesystem::rename(tmp, dir / key, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot publish cache file for key " + key);
  }
}

double full_jitter_delay(double base_seconds, std::size_t attempt) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  double cap = base_seconds * std::pow(2.0, static_cast<double>(attempt));
  std::uniform_real_distribution<double> dist(0.0, cap);
  return dist(rng);
}

}  // namespace

const char* to_string(ChatRole role) noexcept {
  switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "user";
}

ChatPrompt build_generation_prompt(const std::string& gold_trial,
                                   const std::string& gold_description,
                                   const std::string& sampled_trial) {
  require_non_empty(gold_trial, "gold_trial");
  require_non_empty(gold_description, "gold_description");
  require_non_empty(sampled_trial, "sampled_trial");
  ChatPrompt prompt;
  prompt.messages = {
      {ChatRole::System, kGenerationSystem},
      {ChatRole::User, generation_user_turn(gold_trial)},
      {ChatRole::Assistant, gold_description},
      {ChatRole::User, generation_user_turn(sampled_trial)},
  };
  return prompt;
}

FilterDecision filter_generation(std::string_view text) {
  static const char* kKeywords[] = {"sorry", "i cannot generate", "ai language model"};
  std::string lowered = lowercase(text);
  for (const char* keyword : kKeywords) {
    if (lowered.find(keyword) != std::string::npos) {
      return {false, FilterDecision::Reason::Keyword, keyword};
    }
  }
  if (text.size() < 30) {
    return {false, FilterDecision::Reason::TooShort, {}};
  }
  return {true, FilterDecision::Reason::None, {}};
}

std::array<JudgeShot, 3> load_shots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open shots file: " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::MalformedInput, std::string("shots file: ") + ex.what());
  }
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::MalformedInput, "shots file must be a JSON array of exactly 3 shots");
  }
  std::array<JudgeShot, 3> shots;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& s = j[i];
    if (!s.is_object() || !s.contains("description") || !s.contains("trial") ||
        !s.contains("label") || !s["description"].is_string() || !s["trial"].is_string() ||
        !s["label"].is_number_integer()) {
      throw Error(ErrorCode::MalformedInput,
                  "shot " + std::to_string(i) + " needs string description/trial and integer label");
    }
    shots[i].description = s["description"].get<std::string>();
    shots[i].trial = s["trial"].get<std::string>();
    shots[i].label = judge_label_from_int(s["label"].get<int>());
    if (shots[i].description.empty() || shots[i].trial.empty()) {
      throw Error(ErrorCode::MalformedInput, "shot " + std::to_string(i) + " has an empty field");
    }
  }
  if (shots[0].label != JudgeLabel::Excluded || shots[1].label != JudgeLabel::Eligible ||
      shots[2].label != JudgeLabel::NotRelevant) {
    throw Error(ErrorCode::MalformedInput,
                "shots must be ordered excluded(1), eligible(2), not relevant(0)");
  }
  return shots;
}

ChatPrompt build_judge_prompt(const std::array<JudgeShot, 3>& shots,
                              const std::string& current_description,
                              const std::string& current_trial) {
  require_non_empty(current_description, "current_description");
  require_non_empty(current_trial, "current_trial");
  if (shots[0].label != JudgeLabel::Excluded || shots[1].label != JudgeLabel::Eligible ||
      shots[2].label != JudgeLabel::NotRelevant) {
    throw std::invalid_argument("judge shots must be ordered excluded, eligible, not relevant");
  }
  ChatPrompt prompt;
  prompt.messages.push_back({ChatRole::System, kJudgeSystem});
  for (const auto& shot : shots) {
    require_non_empty(shot.description, "shot description");
    require_non_empty(shot.trial, "shot trial");
    prompt.messages.push_back({ChatRole::User, judge_user_turn(shot.description, shot.trial)});
    prompt.messages.push_back({ChatRole::Assistant, judge_answer(shot.label)});
  }
  prompt.messages.push_back(
      {ChatRole::User, judge_user_turn(current_description, current_trial)});
  return prompt;
}

JudgeLabel parse_judge_response(std::string_view text) {
  std::string lowered = lowercase(text);
  if (lowered.find("not relevant") != std::string::npos) return JudgeLabel::NotRelevant;
  if (lowered.find("excluded") != std::string::npos) return JudgeLabel::Excluded;
  if (lowered.find("eligible") != std::string::npos) return JudgeLabel::Eligible;
  throw Error(ErrorCode::UnparseableJudgment,
              "response matches none of eligible/excluded/not relevant: " +
                  std::string(text.substr(0, 120)));
}

ChatPrompt build_conversion_prompt(const std::string& xml_topic) {
  require_non_empty(xml_topic, "xml_topic");
  ChatPrompt prompt;
  prompt.messages.push_back(
      {ChatRole::User,
       "Covert the following patient information in XML format into a natural language "
       "description:\n " +
           xml_topic});
  return prompt;
}

std::string canonical_request_json(const LlmConfig& cfg, const ChatPrompt& prompt) {
  json body;
  body["model"] = prompt.model.empty() ? cfg.model : prompt.model;
  body["temperature"] = prompt.temperature >= 0.0 ? prompt.temperature : cfg.temperature;
  json messages = json::array();
  for (const auto& m : prompt.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["messages"] = std::move(messages);
  return body.dump();
}

std::string prompt_cache_key(const LlmConfig& cfg, const ChatPrompt& prompt) {
  return sha256_hex(canonical_request_json(cfg, prompt));
}

std::string chat_complete(const LlmConfig& cfg, const ChatPrompt& prompt, bool refresh_cache) {
  const std::string body = canonical_request_json(cfg, prompt);
  const std::string key = sha256_hex(body);
  const bool caching = !cfg.cache_dir.empty();

  if (caching && !refresh_cache) {
    std::string cached;
    if (read_cache(cache_path(cfg, key), cached)) {
      return cached;
    }
  }

  auto [base, path] = split_endpoint(cfg.endpoint_url);
  httplib::Client client(base);
  auto seconds = static_cast<time_t>(cfg.timeout_seconds);
  auto micros = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    if (const char* api_key = std::getenv(cfg.api_key_env.c_str()); api_key && *api_key) {
      headers.emplace("Authorization", std::string("Bearer ") + api_key);
    }
  }

  std::string last_failure;
  bool last_was_timeout = false;
  for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(
          full_jitter_delay(cfg.backoff_base_seconds, attempt - 1)));
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      auto err = res.error();
      last_was_timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                         err == httplib::Error::Write;
      last_failure = httplib::to_string(err);
      continue;  // transport failures are transient
    }
    if (res->status == 429 || res->status >= 500) {
      last_was_timeout = false;
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::HttpError,
                  "HTTP " + std::to_string(res->status) + " from " + cfg.endpoint_url);
    }
    json payload;
    try {
      payload = json::parse(res->body);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + ex.what());
    }
    if (!payload.contains("choices") || !payload["choices"].is_array() ||
        payload["choices"].empty() || !payload["choices"][0].contains("message") ||
        !payload["choices"][0]["message"].contains("content") ||
        !payload["choices"][0]["message"]["content"].is_string()) {
      throw Error(ErrorCode::MalformedResponse, "response lacks choices[0].message.content");
    }
    std::string content = payload["choices"][0]["message"]["content"].get<std::string>();
    if (caching) {
      write_cache(cfg.cache_dir, key, content);
    }
    return content;
  }

  if (last_was_timeout && cfg.max_retries == 0) {
    throw Error(ErrorCode::Timeout, "request to " + cfg.endpoint_url + " timed out");
  }
  throw Error(ErrorCode::ExhaustedRetries,
              std::to_string(cfg.max_retries + 1) + " attempt(s) failed; last: " + last_failure);
}

}  // namespace ctrank
