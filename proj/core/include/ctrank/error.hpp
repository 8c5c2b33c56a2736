#pragma once

#include <stdexcept>
#include <string>

namespace ctrank {

/// Every recoverable failure in the pipeline carries one of these codes so
/// callers (and the CLI) can react without parsing message text.
enum class ErrorCode {
  // corpus
  MalformedXml,
  MissingId,
  MalformedInput,
  DuplicateTopicId,
  Io,
  MalformedRecord,
  // indexes
  EmptyCorpus,
  WrongMode,
  EmptyInput,
  DimensionMismatch,
  DuplicateId,
  // fusion
  TopicMismatch,
  IncompleteScores,
  // rerank
  MissingJudgment,
  // llm
  EmptyField,
  UnparseableJudgment,
  HttpError,
  Timeout,
  ExhaustedRetries,
  MalformedResponse,
  // mining
  InsufficientPool,
  // eval
  MalformedLine,
  NonMonotoneScores,
  DuplicateDoc,
  DuplicatePair,
  GradeOutOfRange,
  TopicNotInQrels,
  InsufficientTopics,
  MetricMismatch,
  // cli
  InvalidConfig,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ctrank
