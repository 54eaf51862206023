#include "tandem/error.hpp"

namespace tandem {

std::string_view code_name(Errc c) noexcept
{
  switch (c)
    {
    case Errc::DuplicateAccount: return "DUPLICATE_ACCOUNT";
    case Errc::UnknownAccount: return "UNKNOWN_ACCOUNT";
    case Errc::InsufficientBalance: return "INSUFFICIENT_BALANCE";
    case Errc::AlreadyGranted: return "ALREADY_GRANTED";
    case Errc::InvalidAmount: return "INVALID_AMOUNT";
    case Errc::UnknownUser: return "UNKNOWN_USER";
    case Errc::DuplicateUser: return "DUPLICATE_USER";
    case Errc::InvalidProfile: return "INVALID_PROFILE";
    case Errc::InvalidReferral: return "INVALID_REFERRAL";
    case Errc::SelfInvite: return "SELF_INVITE";
    case Errc::SenderUnavailable: return "SENDER_UNAVAILABLE";
    case Errc::RecipientUnavailable: return "RECIPIENT_UNAVAILABLE";
    case Errc::LanguageMismatch: return "LANGUAGE_MISMATCH";
    case Errc::UnknownInvitation: return "UNKNOWN_INVITATION";
    case Errc::InvalidState: return "INVALID_STATE";
    case Errc::NotRecipient: return "NOT_RECIPIENT";
    case Errc::NoLesson: return "NO_LESSON";
    case Errc::InvalidLesson: return "INVALID_LESSON";
    case Errc::InvalidInvitationState: return "INVALID_INVITATION_STATE";
    case Errc::UnknownSession: return "UNKNOWN_SESSION";
    case Errc::NotTeacher: return "NOT_TEACHER";
    case Errc::OutOfRange: return "OUT_OF_RANGE";
    case Errc::SessionEnded: return "SESSION_ENDED";
    case Errc::SessionNotEnded: return "SESSION_NOT_ENDED";
    case Errc::NotParticipant: return "NOT_PARTICIPANT";
    case Errc::AlreadyRated: return "ALREADY_RATED";
    case Errc::InvalidStars: return "INVALID_STARS";
    case Errc::MalformedFrame: return "MALFORMED_FRAME";
    case Errc::UnknownType: return "UNKNOWN_TYPE";
    case Errc::SchemaViolation: return "SCHEMA_VIOLATION";
    case Errc::UnsupportedVersion: return "UNSUPPORTED_VERSION";
    case Errc::NotAuthenticated: return "NOT_AUTHENTICATED";
    case Errc::AlreadyAuthenticated: return "ALREADY_AUTHENTICATED";
    case Errc::AuthFailed: return "AUTH_FAILED";
    case Errc::SeqRegression: return "SEQ_REGRESSION";
    case Errc::NoLiveSession: return "NO_LIVE_SESSION";
    case Errc::EmptyWindow: return "EMPTY_WINDOW";
    case Errc::EmptyPreviousDay: return "EMPTY_PREVIOUS_DAY";
    case Errc::DegenerateInput: return "DEGENERATE_INPUT";
    case Errc::EmptyPopulation: return "EMPTY_POPULATION";
    case Errc::StorageFailure: return "STORAGE_FAILURE";
    case Errc::OffsetOutOfRange: return "OFFSET_OUT_OF_RANGE";
    case Errc::ParseError: return "PARSE_ERROR";
    case Errc::ConfigInvalid: return "CONFIG_INVALID";
    }
  return "INTERNAL";
}

} // namespace tandem
