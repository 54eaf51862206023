#pragma once

#include "tandem/types.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tandem {

enum class PresenceStatus { Online, InSession, Offline };
enum class InvitationState { Pending, Accepted, Rejected, Expired, Canceled };
enum class Decision { Accept, Reject };

std::string_view to_string(PresenceStatus s) noexcept;
std::string_view to_string(InvitationState s) noexcept;
PresenceStatus parse_presence_status(std::string_view s);
Decision parse_decision(std::string_view s);

constexpr bool is_terminal(InvitationState s) noexcept { return s != InvitationState::Pending; }

struct UserProfile
{
  UserId id;
  Language native_language;
  Language learning_language;
  std::optional<UserId> invited_by;
  std::uint64_t rating_count = 0;
  std::uint64_t rating_sum = 0;

  /// Mean of received stars, absent until the first rating.
  std::optional<double> rating_avg() const
  {
    if (rating_count == 0)
      return std::nullopt;
    return static_cast<double>(rating_sum) / static_cast<double>(rating_count);
  }
};

struct PresenceRecord
{
  UserId user;
  PresenceStatus status = PresenceStatus::Offline;
  RoleSet roles;
  Timestamp since{};

  bool operator==(const PresenceRecord&) const = default;
};

struct Invitation
{
  InvitationId id{};
  UserId from;
  UserId to;
  Role recipient_role = Role::Teacher;
  Language language;
  std::string level;
  InvitationState state = InvitationState::Pending;
  Timestamp created_at{};
  std::optional<SessionId> session;

  /// The user who will teach if this invitation is accepted.
  const UserId& teacher() const { return recipient_role == Role::Teacher ? to : from; }
  const UserId& student() const { return recipient_role == Role::Teacher ? from : to; }
};

struct MatchmakingConfig
{
  Seconds invite_ttl{60};
};

struct PresenceChange
{
  PresenceRecord record;
  /// Pending invitations dropped because a party went offline.
  std::vector<Invitation> canceled;
};

struct InviteResponse
{
  Invitation invitation;
  /// Other pending invitations of either party, canceled by an acceptance.
  std::vector<Invitation> canceled;
};

/// Authoritative registry of users, presence and teach/learn invitations.
///
/// Everything is serialized through one mutex, which is what makes "at most
/// one live session per user" hold under concurrent accepts: the first
/// acceptance moves both parties to IN_SESSION and cancels every other
/// pending invitation that involves either of them.
class Matchmaker
{
public:
  /// Starts the session for an invitation that has just become ACCEPTED.
  /// If it throws, the invitation reverts to PENDING and the error propagates.
  using SessionStarter = std::function<SessionId(const Invitation&)>;

  explicit Matchmaker(MatchmakingConfig cfg = {}) : cfg_(cfg) {}

  void register_user(const UserProfile& profile);
  bool is_registered(const UserId& user) const;
  UserProfile profile(const UserId& user) const;
  std::vector<UserProfile> profiles() const;

  /// Clients may only choose ONLINE or OFFLINE. Going ONLINE while in a
  /// session keeps the user IN_SESSION and only refreshes the roles.
  PresenceChange set_presence(const UserId& user, PresenceStatus status, RoleSet roles,
                              Timestamp now);
  PresenceRecord presence(const UserId& user) const;
  std::vector<PresenceRecord> presence() const;

  /// ONLINE users advertising `sought` whose native (TEACHER) or learning
  /// (STUDENT) language is `language`, most recently updated first.
  std::vector<PresenceRecord> roster(const Language& language, Role sought) const;

  Invitation send_invite(const UserId& from, const UserId& to, Role recipient_role,
                         const Language& language, const std::string& level, Timestamp now);
  InviteResponse respond_invite(InvitationId id, const UserId& responder, Decision decision,
                                Timestamp now, const SessionStarter& start);
  /// PENDING invitations strictly older than the TTL become EXPIRED.
  std::vector<Invitation> expire_invites(Timestamp now);
  Invitation invitation(InvitationId id) const;
  std::vector<Invitation> invitations() const;

  /// Returns both participants of an ended session to ONLINE.
  void release(const UserId& a, const UserId& b, Timestamp now);
  void add_rating(const UserId& user, int stars);
  /// Future invitation ids start at `next` or later (used after a restore).
  void reserve_invitation_ids(std::uint64_t next);

  const MatchmakingConfig& config() const noexcept { return cfg_; }

private:
  UserProfile& user_ref(const UserId& user);
  const UserProfile& user_ref(const UserId& user) const;
  PresenceRecord& presence_ref(const UserId& user);
  std::vector<Invitation> cancel_pending_of(const UserId& user, InvitationId keep);
  void touch(PresenceRecord& rec, PresenceStatus status, Timestamp now);

  MatchmakingConfig cfg_;
  mutable std::mutex mutex_;
  std::map<UserId, UserProfile> users_;
  std::map<UserId, PresenceRecord> presence_;
  std::map<InvitationId, Invitation> invitations_;
  std::set<InvitationId> pending_;
  std::uint64_t next_invitation_ = 1;
};

} // namespace tandem
