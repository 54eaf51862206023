#pragma once

#include "tandem/event_store.hpp"
#include "tandem/ledger.hpp"
#include "tandem/lesson.hpp"
#include "tandem/matchmaking.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace tandem {

enum class SessionState { Live, Ended };
enum class TerminationCause { Finished, Hangup, Disconnect, BalanceExhausted };

std::string_view to_string(SessionState s) noexcept;
std::string_view to_string(TerminationCause c) noexcept;
TerminationCause parse_cause(std::string_view s);

struct Session
{
  SessionId id{};
  InvitationId invitation{};
  UserId teacher;
  UserId student;
  AccountId teacher_account{};
  AccountId student_account{};
  std::shared_ptr<const Lesson> lesson;
  std::size_t card_index = 0;
  SessionState state = SessionState::Live;
  Timestamp started_at{};
  std::optional<Timestamp> ended_at;
  std::optional<TerminationCause> cause;
  /// The student's balance when the session started; caps billing.
  Seconds balance_at_start{0};
  Seconds billed{0};
  /// rater -> stars
  std::map<UserId, int> ratings;

  bool participant(const UserId& u) const { return u == teacher || u == student; }
  const UserId& counterpart(const UserId& u) const { return u == teacher ? student : teacher; }
};

struct SessionSummary
{
  SessionId id{};
  UserId teacher;
  UserId student;
  Timestamp started_at{};
  Timestamp ended_at{};
  Seconds elapsed{0};
  Seconds billed{0};
  TerminationCause cause = TerminationCause::Hangup;
};

struct CardState
{
  SessionId session{};
  std::size_t index = 0;
  std::size_t count = 0;
  LessonCard card;
};

struct Rating
{
  SessionId session{};
  UserId rater;
  UserId ratee;
  int stars = 0;
};

/// Lesson sessions: card cursor, wall-clock billing, termination, ratings.
///
/// Billing is min(elapsed, student balance at start), settled through the
/// ledger exactly once per session. tick() ends a session whose elapsed time
/// has reached that balance. When a store is attached, SESSION records and
/// the growth events of finished calls are appended to it.
///
/// Lock order is matchmaker -> engine -> ledger; the engine never calls the
/// matchmaker while holding its own lock.
class SessionEngine
{
public:
  SessionEngine(Ledger& ledger, Matchmaker& matchmaker, const LessonLibrary& lessons,
                EventStore* store = nullptr);

  Session start_session(const Invitation& accepted, Timestamp now);
  CardState advance_card(SessionId id, const UserId& actor, std::size_t to_index, Timestamp now);
  std::optional<SessionSummary> tick(SessionId id, Timestamp now);
  /// Ticks every live session; returns those that ended.
  std::vector<SessionSummary> tick_all(Timestamp now);
  SessionSummary end_session(SessionId id, TerminationCause cause, Timestamp now);
  /// A participant ends the lesson: FINISHED on the last card, else HANGUP.
  SessionSummary hang_up(SessionId id, const UserId& actor, Timestamp now);
  Rating rate(SessionId id, const UserId& rater, int stars, Timestamp now);

  Session session(SessionId id) const;
  std::optional<SessionId> live_session_of(const UserId& user) const;
  CardState card_state(SessionId id) const;
  std::vector<Session> sessions() const;
  std::size_t live_count() const;

  /// Canonical text of every session; equal for equal session histories.
  std::string canonical_state() const;
  /// The same text rebuilt purely from the SESSION records of a log.
  static std::string canonical_state_from(const EventStore& store);

  /// Loads the session history of `store` into this empty engine without
  /// writing. Ratings are re-applied to the matchmaker, whose users must
  /// already be registered. Returns the sessions still live in the log.
  std::vector<SessionId> restore(const EventStore& store);

private:
  Session& lookup(SessionId id);
  const Session& lookup(SessionId id) const;
  SessionSummary finish_locked(Session& s, TerminationCause cause, Timestamp now);
  void record(Stream stream, Timestamp now, json body);

  Ledger& ledger_;
  Matchmaker& matchmaker_;
  const LessonLibrary& lessons_;
  EventStore* store_;
  mutable std::mutex mutex_;
  std::map<SessionId, Session> sessions_;
  std::map<UserId, SessionId> live_by_user_;
  std::uint64_t next_id_ = 1;
};

} // namespace tandem
