#pragma once

#include "tandem/event_store.hpp"
#include "tandem/growth_event.hpp"
#include "tandem/ledger.hpp"
#include "tandem/lesson.hpp"
#include "tandem/matchmaking.hpp"
#include "tandem/session_engine.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>

namespace tandem {

struct PlatformConfig
{
  LedgerConfig ledger;
  MatchmakingConfig matchmaking;
  /// Share of users who see invite dialog variant A.
  double variant_a_share = 0.5;
};

/// Sticky A/B assignment for the friend-invite dialog; a pure function of
/// the user id so it survives restarts without being stored.
FunnelVariant funnel_variant_of(const UserId& user, double a_share = 0.5) noexcept;

/// The domain services wired to one event store, plus the user-level
/// bookkeeping that spans them: registration, tokens, growth events.
class Platform
{
public:
  Platform(PlatformConfig cfg, EventStore& store, LessonLibrary lessons);
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  /// Rebuilds users, ledger and sessions from the attached store, which must
  /// be the only writer. Sessions left live by a crash end as DISCONNECT at
  /// the last logged timestamp. Returns the number of records read.
  std::size_t restore();

  /// Registers a user, opens the account with its signup grant and, for a
  /// referral, pays the inviter's bonus. The inviter must have sent at least
  /// one friend invite.
  Account register_user(const UserProfile& profile, const std::string& token, Timestamp now);
  std::optional<UserId> authenticate(const std::string& token) const;

  /// ACTIVE_DAY at most once per user per UTC day.
  void mark_active(const UserId& user, Timestamp now);
  /// FUNNEL event; INVITED also counts `count` INVITE_SENT.
  void record_funnel(const UserId& user, FunnelAction action, std::uint64_t count, Timestamp now);
  LedgerEntry purchase(const UserId& user, Seconds amount, const std::string& payment_ref,
                       Timestamp now);
  Seconds balance(const UserId& user) const;
  AccountId account_of(const UserId& user) const;
  FunnelVariant funnel_variant(const UserId& user) const noexcept
  {
    return funnel_variant_of(user, cfg_.variant_a_share);
  }

  /// Appends a PROTOCOL_AUDIT record of the user's current presence.
  void audit_presence(const UserId& user, Timestamp now);

  Ledger& ledger() noexcept { return ledger_; }
  Matchmaker& matchmaker() noexcept { return matchmaker_; }
  SessionEngine& engine() noexcept { return engine_; }
  EventStore& store() noexcept { return store_; }
  const LessonLibrary& lessons() const noexcept { return lessons_; }
  const Ledger& ledger() const noexcept { return ledger_; }
  const SessionEngine& engine() const noexcept { return engine_; }

  /// SHA-256 of the canonical ledger and session state.
  std::string state_hash() const;
  /// The same hash computed only from the records of `store`.
  static std::string replay_state_hash(const EventStore& store, LedgerConfig cfg = {});

private:
  void growth(const GrowthEvent& e);

  PlatformConfig cfg_;
  EventStore& store_;
  LessonLibrary lessons_;
  Ledger ledger_;
  Matchmaker matchmaker_;
  SessionEngine engine_;

  mutable std::mutex mutex_;
  std::map<std::string, UserId> token_digests_;
  std::set<UserId> invite_senders_;
  std::set<std::pair<UserId, std::int64_t>> active_days_;
};

} // namespace tandem
