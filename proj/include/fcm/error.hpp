#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcm {

enum class ErrorCode {
  UnrecognizedDirection,
  EmptyPhrase,
  UnknownPassage,
  DuplicatePassage,
  ParseFailure,
  EndpointError,
  MalformedScore,
  InvalidConfig,
  PassageMismatch,
  SelfRating,
  UnknownAnnotation,
  MixedPassages,
  EmptyLeaderboard,
  NoEligibleRater,
  ItemMismatch,
  DegenerateRanking,
  InsufficientData,
  AlignmentError,
  GoldMismatch,
  SchemaMismatch,
  ValidationError,
  StorageError,
  InvalidSession,
  UnknownPair,
  AlreadyJudged,
};

std::string_view to_string(ErrorCode code);

// All domain failures surface as fcm::Error; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace fcm
