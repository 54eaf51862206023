#include "tandem/matchmaking.hpp"

#include "tandem/error.hpp"

#include <algorithm>

namespace tandem {

std::string_view to_string(PresenceStatus s) noexcept
{
  switch (s)
    {
    case PresenceStatus::Online: return "ONLINE";
    case PresenceStatus::InSession: return "IN_SESSION";
    case PresenceStatus::Offline: return "OFFLINE";
    }
  return "OFFLINE";
}

std::string_view to_string(InvitationState s) noexcept
{
  switch (s)
    {
    case InvitationState::Pending: return "PENDING";
    case InvitationState::Accepted: return "ACCEPTED";
    case InvitationState::Rejected: return "REJECTED";
    case InvitationState::Expired: return "EXPIRED";
    case InvitationState::Canceled: return "CANCELED";
    }
  return "PENDING";
}

PresenceStatus parse_presence_status(std::string_view s)
{
  if (s == "ONLINE")
    return PresenceStatus::Online;
  if (s == "OFFLINE")
    return PresenceStatus::Offline;
  if (s == "IN_SESSION")
    return PresenceStatus::InSession;
  fail(Errc::SchemaViolation, "unknown presence status '" + std::string(s) + "'");
}

Decision parse_decision(std::string_view s)
{
  if (s == "ACCEPT")
    return Decision::Accept;
  if (s == "REJECT")
    return Decision::Reject;
  fail(Errc::SchemaViolation, "unknown decision '" + std::string(s) + "'");
}

UserProfile& Matchmaker::user_ref(const UserId& user)
{
  auto it = users_.find(user);
  if (it == users_.end())
    fail(Errc::UnknownUser, user);
  return it->second;
}

const UserProfile& Matchmaker::user_ref(const UserId& user) const
{
  auto it = users_.find(user);
  if (it == users_.end())
    fail(Errc::UnknownUser, user);
  return it->second;
}

PresenceRecord& Matchmaker::presence_ref(const UserId& user)
{
  user_ref(user);
  return presence_.at(user);
}

void Matchmaker::touch(PresenceRecord& rec, PresenceStatus status, Timestamp now)
{
  rec.status = status;
  rec.since = std::max(rec.since, now);
}

void Matchmaker::register_user(const UserProfile& profile)
{
  if (profile.id.empty() || profile.native_language.empty() || profile.learning_language.empty())
    fail(Errc::InvalidProfile, "user id and both languages are required");
  if (profile.native_language == profile.learning_language)
    fail(Errc::InvalidProfile, profile.id + ": native and learning language must differ");
  std::lock_guard lock(mutex_);
  if (users_.contains(profile.id))
    fail(Errc::DuplicateUser, profile.id);
  if (profile.invited_by && !users_.contains(*profile.invited_by))
    fail(Errc::InvalidReferral, *profile.invited_by + " is not a registered user");
  users_.emplace(profile.id, profile);
  presence_.emplace(profile.id, PresenceRecord{profile.id, PresenceStatus::Offline, {}, {}});
}

bool Matchmaker::is_registered(const UserId& user) const
{
  std::lock_guard lock(mutex_);
  return users_.contains(user);
}

UserProfile Matchmaker::profile(const UserId& user) const
{
  std::lock_guard lock(mutex_);
  return user_ref(user);
}

std::vector<UserProfile> Matchmaker::profiles() const
{
  std::lock_guard lock(mutex_);
  std::vector<UserProfile> out;
  for (const auto& [id, p] : users_)
    out.push_back(p);
  return out;
}

std::vector<Invitation> Matchmaker::cancel_pending_of(const UserId& user, InvitationId keep)
{
  std::vector<Invitation> canceled;
  for (auto it = pending_.begin(); it != pending_.end();)
    {
      Invitation& inv = invitations_.at(*it);
      if (inv.id != keep && (inv.from == user || inv.to == user))
        {
          inv.state = InvitationState::Canceled;
          canceled.push_back(inv);
          it = pending_.erase(it);
        }
      else
        ++it;
    }
  return canceled;
}

PresenceChange Matchmaker::set_presence(const UserId& user, PresenceStatus status, RoleSet roles,
                                        Timestamp now)
{
  std::lock_guard lock(mutex_);
  PresenceRecord& rec = presence_ref(user);
  if (status == PresenceStatus::InSession)
    fail(Errc::SchemaViolation, "IN_SESSION is set by the server only");
  PresenceChange change;
  rec.roles = status == PresenceStatus::Offline ? RoleSet{} : roles;
  if (status == PresenceStatus::Offline)
    {
      touch(rec, PresenceStatus::Offline, now);
      change.canceled = cancel_pending_of(user, InvitationId{0});
    }
  else if (rec.status != PresenceStatus::InSession)
    touch(rec, PresenceStatus::Online, now);
  else
    rec.since = std::max(rec.since, now);
  change.record = rec;
  return change;
}

PresenceRecord Matchmaker::presence(const UserId& user) const
{
  std::lock_guard lock(mutex_);
  user_ref(user);
  return presence_.at(user);
}

std::vector<PresenceRecord> Matchmaker::presence() const
{
  std::lock_guard lock(mutex_);
  std::vector<PresenceRecord> out;
  for (const auto& [id, rec] : presence_)
    out.push_back(rec);
  return out;
}

std::vector<PresenceRecord> Matchmaker::roster(const Language& language, Role sought) const
{
  std::lock_guard lock(mutex_);
  std::vector<PresenceRecord> out;
  for (const auto& [id, rec] : presence_)
    {
      if (rec.status != PresenceStatus::Online || !rec.roles.contains(sought))
        continue;
      const UserProfile& p = users_.at(id);
      const Language& spoken = sought == Role::Teacher ? p.native_language : p.learning_language;
      if (spoken == language)
        out.push_back(rec);
    }
  std::stable_sort(out.begin(), out.end(), [](const PresenceRecord& a, const PresenceRecord& b) {
    return a.since > b.since;
  });
  return out;
}

Invitation Matchmaker::send_invite(const UserId& from, const UserId& to, Role recipient_role,
                                   const Language& language, const std::string& level,
                                   Timestamp now)
{
  std::lock_guard lock(mutex_);
  if (from == to)
    fail(Errc::SelfInvite, from);
  user_ref(from);
  const UserProfile& recipient = user_ref(to);
  if (presence_.at(from).status != PresenceStatus::Online)
    fail(Errc::SenderUnavailable, from + " is " + std::string(to_string(presence_.at(from).status)));
  const PresenceRecord& target = presence_.at(to);
  if (target.status != PresenceStatus::Online)
    fail(Errc::RecipientUnavailable, to + " is " + std::string(to_string(target.status)));
  const Language& spoken = recipient_role == Role::Teacher ? recipient.native_language
                                                           : recipient.learning_language;
  if (spoken != language)
    fail(Errc::LanguageMismatch, to + " cannot act as " + std::string(to_string(recipient_role))
                                     + " for " + language);
  if (!target.roles.contains(recipient_role))
    fail(Errc::RecipientUnavailable, to + " does not advertise "
                                         + std::string(to_string(recipient_role)));
  Invitation inv{InvitationId{next_invitation_++}, from, to, recipient_role, language, level,
                 InvitationState::Pending, now, std::nullopt};
  invitations_.emplace(inv.id, inv);
  pending_.insert(inv.id);
  return inv;
}

InviteResponse Matchmaker::respond_invite(InvitationId id, const UserId& responder,
                                          Decision decision, Timestamp now,
                                          const SessionStarter& start)
{
  std::lock_guard lock(mutex_);
  auto it = invitations_.find(id);
  if (it == invitations_.end())
    fail(Errc::UnknownInvitation, std::to_string(raw(id)));
  Invitation& inv = it->second;
  if (inv.to != responder)
    fail(Errc::NotRecipient, responder);
  if (is_terminal(inv.state))
    fail(Errc::InvalidState, "invitation is " + std::string(to_string(inv.state)));

  InviteResponse out;
  if (decision == Decision::Reject)
    {
      inv.state = InvitationState::Rejected;
      pending_.erase(id);
      out.invitation = inv;
      return out;
    }

  inv.state = InvitationState::Accepted;
  try
    {
      inv.session = start(inv);
    }
  catch (...)
    {
      inv.state = InvitationState::Pending;
      throw;
    }
  pending_.erase(id);
  touch(presence_.at(inv.from), PresenceStatus::InSession, now);
  touch(presence_.at(inv.to), PresenceStatus::InSession, now);
  out.canceled = cancel_pending_of(inv.from, id);
  auto more = cancel_pending_of(inv.to, id);
  out.canceled.insert(out.canceled.end(), more.begin(), more.end());
  out.invitation = inv;
  return out;
}

std::vector<Invitation> Matchmaker::expire_invites(Timestamp now)
{
  std::lock_guard lock(mutex_);
  std::vector<Invitation> expired;
  for (auto it = pending_.begin(); it != pending_.end();)
    {
      Invitation& inv = invitations_.at(*it);
      if (now - inv.created_at > cfg_.invite_ttl)
        {
          inv.state = InvitationState::Expired;
          expired.push_back(inv);
          it = pending_.erase(it);
        }
      else
        ++it;
    }
  return expired;
}

Invitation Matchmaker::invitation(InvitationId id) const
{
  std::lock_guard lock(mutex_);
  auto it = invitations_.find(id);
  if (it == invitations_.end())
    fail(Errc::UnknownInvitation, std::to_string(raw(id)));
  return it->second;
}

std::vector<Invitation> Matchmaker::invitations() const
{
  std::lock_guard lock(mutex_);
  std::vector<Invitation> out;
  for (const auto& [id, inv] : invitations_)
    out.push_back(inv);
  return out;
}

void Matchmaker::release(const UserId& a, const UserId& b, Timestamp now)
{
  std::lock_guard lock(mutex_);
  for (const UserId* u : {&a, &b})
    {
      PresenceRecord& rec = presence_ref(*u);
      if (rec.status == PresenceStatus::InSession)
        touch(rec, PresenceStatus::Online, now);
    }
}

void Matchmaker::add_rating(const UserId& user, int stars)
{
  std::lock_guard lock(mutex_);
  UserProfile& p = user_ref(user);
  ++p.rating_count;
  p.rating_sum += static_cast<std::uint64_t>(stars);
}

void Matchmaker::reserve_invitation_ids(std::uint64_t next)
{
  std::lock_guard lock(mutex_);
  next_invitation_ = std::max(next_invitation_, next);
}

} // namespace tandem
