#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctrank/rerank.hpp"

namespace ctrank {

enum class ChatRole { System, User, Assistant };

const char* to_string(ChatRole role) noexcept;

struct ChatMessage {
  ChatRole role = ChatRole::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatPrompt {
  std::vector<ChatMessage> messages;
  std::string model;         // empty -> take from LlmConfig
  double temperature = -1.0;  // < 0 -> take from LlmConfig

  bool operator==(const ChatPrompt&) const = default;
};

struct LlmConfig {
  std::string endpoint_url;  // full chat-completions URL
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model = "gpt-4";
  double temperature = 0.0;
  std::size_t max_retries = 3;
  double timeout_seconds = 60.0;
  std::filesystem::path cache_dir;  // empty disables caching
  double backoff_base_seconds = 1.0;
};

/// One-shot synthetic-description prompt: specialist system instruction, a
/// gold (trial, description) exemplar, then the sampled trial to describe.
ChatPrompt build_generation_prompt(const std::string& gold_trial,
                                   const std::string& gold_description,
                                   const std::string& sampled_trial);

struct FilterDecision {
  enum class Reason { None, Keyword, TooShort };
  bool keep = true;
  Reason reason = Reason::None;
  std::string keyword;  // set when reason == Keyword
};

/// Refusal filter for generated descriptions: reject on any of the refusal
/// keywords (case-insensitive) or when shorter than 30 characters.
FilterDecision filter_generation(std::string_view text);

/// A fixed few-shot exemplar for the assessor prompt.
struct JudgeShot {
  std::string description;
  std::string trial;
  JudgeLabel label = JudgeLabel::NotRelevant;
};

/// Shots file: JSON array of exactly three {description, trial, label}
/// entries ordered excluded(1), eligible(2), not relevant(0).
std::array<JudgeShot, 3> load_shots(const std::filesystem::path& path);

/// 3-shot assessor prompt: physician system instruction, the three exemplar
/// question/answer pairs, then the pair to judge.
ChatPrompt build_judge_prompt(const std::array<JudgeShot, 3>& shots,
                              const std::string& current_description,
                              const std::string& current_trial);

/// Map an assessor answer onto a label. Longest phrase wins: "not relevant"
/// before "excluded" before "eligible".
JudgeLabel parse_judge_response(std::string_view text);

/// Single-user-turn prompt converting templated XML topics to free text.
ChatPrompt build_conversion_prompt(const std::string& xml_topic);

/// Canonical request body: {"messages": [...], "model": ..., "temperature": ...}.
/// Doubles as the wire payload and the cache-key preimage.
std::string canonical_request_json(const LlmConfig& cfg, const ChatPrompt& prompt);

/// SHA-256 hex of the canonical request body.
std::string prompt_cache_key(const LlmConfig& cfg, const ChatPrompt& prompt);

/// Cached OpenAI-compatible chat completion. Transient failures (HTTP 429,
/// 5xx, transport timeouts) retry up to max_retries with exponential backoff
/// (base 1 s, factor 2, full jitter); other statuses raise HttpError at once.
/// `refresh_cache` skips the cache read (the response is still stored).
std::string chat_complete(const LlmConfig& cfg, const ChatPrompt& prompt,
                          bool refresh_cache = false);

}  // namespace ctrank
