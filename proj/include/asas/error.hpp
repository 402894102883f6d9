#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asas {

/// Failure kinds raised across the pipeline. Each maps to one contract
/// violation; callers branch on `Error::code()`, never on message text.
enum class Errc {
  InvalidArgument,
  MalformedRow,
  NonIntegerScore,
  DuplicateId,
  EmptyInput,
  MissingSecondRead,
  HeaderMismatch,
  RowLengthMismatch,
  UnknownResponseId,
  DimMismatch,
  LengthMismatch,
  LabelOutOfRange,
  DegenerateDistribution,
  InsufficientClasses,
  RankDeficient,
  MissingEmbedding,
  NonFiniteGradient,
  NonFiniteLoss,
  SingleClass,
  EmptySpace,
  AllTrialsFailed,
  CoverageGap,
  KMismatch,
  TooFewCandidates,
  Io,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace asas
