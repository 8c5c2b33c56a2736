// Standalone fake chat endpoint for offline pipeline runs and demos.

#include <csignal>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fake_llm_server.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctrank-fake-llm: deterministic OpenAI-compatible endpoint backed by qrels"};
  std::string qrels;
  std::string topics;
  int fail_first = 0;
  app.add_option("--qrels", qrels, "qrels file used to answer judge prompts");
  app.add_option("--topics", topics, "free-text topics file used to resolve descriptions");
  app.add_option("--fail-first", fail_first, "respond 429 to the first N requests");
  CLI11_PARSE(app, argc, argv);

  ctrank::fake::FakeLlmServer::Options options;
  options.qrels_path = qrels;
  options.topics_path = topics;
  options.fail_first = fail_first;
  ctrank::fake::FakeLlmServer server(options);

  std::printf("listening on %s\n", server.endpoint().c_str());
  std::fflush(stdout);
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (g_stop == 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  return 0;
}
