#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tandem {

/// Every failure the platform can report. The names returned by code_name()
/// are part of the wire contract (ERROR.code) and must never change.
enum class Errc {
  // ledger
  DuplicateAccount,
  UnknownAccount,
  InsufficientBalance,
  AlreadyGranted,
  InvalidAmount,
  // presence / matchmaking
  UnknownUser,
  DuplicateUser,
  InvalidProfile,
  InvalidReferral,
  SelfInvite,
  SenderUnavailable,
  RecipientUnavailable,
  LanguageMismatch,
  UnknownInvitation,
  InvalidState,
  NotRecipient,
  // sessions
  NoLesson,
  InvalidLesson,
  InvalidInvitationState,
  UnknownSession,
  NotTeacher,
  OutOfRange,
  SessionEnded,
  SessionNotEnded,
  NotParticipant,
  AlreadyRated,
  InvalidStars,
  // protocol
  MalformedFrame,
  UnknownType,
  SchemaViolation,
  UnsupportedVersion,
  NotAuthenticated,
  AlreadyAuthenticated,
  AuthFailed,
  SeqRegression,
  NoLiveSession,
  // analytics
  EmptyWindow,
  EmptyPreviousDay,
  DegenerateInput,
  EmptyPopulation,
  // storage
  StorageFailure,
  OffsetOutOfRange,
  ParseError,
  // tools
  ConfigInvalid,
};

std::string_view code_name(Errc c) noexcept;

class Error : public std::runtime_error
{
public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(code_name(code)) + ": " + detail),
        code_(code), detail_(detail)
  {
  }

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

private:
  Errc code_;
  std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& detail = {})
{
  throw Error(code, detail);
}

} // namespace tandem
