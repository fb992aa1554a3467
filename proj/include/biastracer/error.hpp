#pragma once

#include <stdexcept>
#include <string>

namespace bt {

// Values mirror bt_status in biastracer.h.
enum class ErrorCode : int {
  InvalidArgument = 1,
  Io = 2,
  MalformedRecord = 3,
  DanglingPromptRelation = 4,
  DuplicateRelationId = 5,
  PromptCountViolation = 6,
  NoControlAvailable = 7,
  EmptyCorpus = 8,
  SequenceTooLong = 9,
  OverrideOutOfBounds = 10,
  NoMaskPosition = 11,
  AnswerNotInVocab = 12,
  NonFiniteLoss = 13,
  VocabTooSmall = 14,
  TooFewSets = 15,
  TooFewRelations = 16,
  AllZeroDifferences = 17,
  EmptyInput = 18,
  LengthMismatch = 19,
  ConstantInput = 20,
  EmptyPromptSet = 21,
  StageFailed = 22,
  Internal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bt
