#include "ctrank/error.hpp"

namespace ctrank {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::DuplicateTopicId: return "DuplicateTopicId";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::TopicMismatch: return "TopicMismatch";
    case ErrorCode::IncompleteScores: return "IncompleteScores";
    case ErrorCode::MissingJudgment: return "MissingJudgment";
    case ErrorCode::EmptyField: return "EmptyField";
    case ErrorCode::UnparseableJudgment: return "UnparseableJudgment";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::InsufficientPool: return "InsufficientPool";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonMonotoneScores: return "NonMonotoneScores";
    case ErrorCode::DuplicateDoc: return "DuplicateDoc";
    case ErrorCode::DuplicatePair: return "DuplicatePair";
    case ErrorCode::GradeOutOfRange: return "GradeOutOfRange";
    case ErrorCode::TopicNotInQrels: return "TopicNotInQrels";
    case ErrorCode::InsufficientTopics: return "InsufficientTopics";
    case ErrorCode::MetricMismatch: return "MetricMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

}  // namespace ctrank
