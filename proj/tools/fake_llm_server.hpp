#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>

namespace ctrank::fake {

/// Deterministic offline stand-in for the hosted chat endpoint. It answers
/// the three pipeline prompt shapes:
///   - judge prompts: looks up the qrels grade for the (topic, trial) pair by
///     matching the prompt's patient description against the loaded topics
///     and extracting the NCT id from the trial text, then answers with the
///     grade's word ("eligible" / "excluded" / "not relevant");
///   - conversion prompts: strips tags from the XML and returns the flattened
///     field text;
///   - generation prompts: returns a synthetic description, or a refusal when
///     the sampled trial text contains the token "sensitive".
class FakeLlmServer {
 public:
  struct Options {
    std::filesystem::path qrels_path;   // optional
    std::filesystem::path topics_path;  // optional, free-text topics
    int fail_first = 0;                 // reply 429 to the first N requests
  };

  explicit FakeLlmServer(Options options);
  ~FakeLlmServer();

  FakeLlmServer(const FakeLlmServer&) = delete;
  FakeLlmServer& operator=(const FakeLlmServer&) = delete;

  int port() const noexcept { return port_; }
  std::string endpoint() const;
  int request_count() const noexcept { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::atomic<int> requests_{0};
  int port_ = 0;
};

/// Scripted endpoint for protocol-level tests: the script maps the request
/// ordinal (1-based) to the assistant answer.
class CountingScriptServer {
 public:
  using Script = std::function<std::string(int request_no)>;

  explicit CountingScriptServer(Script script);
  ~CountingScriptServer();

  CountingScriptServer(const CountingScriptServer&) = delete;
  CountingScriptServer& operator=(const CountingScriptServer&) = delete;

  int port() const noexcept { return port_; }
  std::string endpoint() const;
  int requests() const noexcept { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::atomic<int> requests_{0};
  int port_ = 0;
};

}  // namespace ctrank::fake
