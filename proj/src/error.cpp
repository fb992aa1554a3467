#include "biastracer/error.hpp"

namespace bt {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DanglingPromptRelation: return "DanglingPromptRelation";
    case ErrorCode::DuplicateRelationId: return "DuplicateRelationId";
    case ErrorCode::PromptCountViolation: return "PromptCountViolation";
    case ErrorCode::NoControlAvailable: return "NoControlAvailable";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::OverrideOutOfBounds: return "OverrideOutOfBounds";
    case ErrorCode::NoMaskPosition: return "NoMaskPosition";
    case ErrorCode::AnswerNotInVocab: return "AnswerNotInVocab";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::VocabTooSmall: return "VocabTooSmall";
    case ErrorCode::TooFewSets: return "TooFewSets";
    case ErrorCode::TooFewRelations: return "TooFewRelations";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::EmptyPromptSet: return "EmptyPromptSet";
    case ErrorCode::StageFailed: return "StageFailed";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace bt
