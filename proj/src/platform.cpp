#include "tandem/platform.hpp"

#include "tandem/digest.hpp"
#include "tandem/error.hpp"

#include <algorithm>

namespace tandem {

FunnelVariant funnel_variant_of(const UserId& user, double a_share) noexcept
{
  // FNV-1a then a murmur3 finalizer; stable across platforms and builds.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : user)
    h = (h ^ c) * 1099511628211ULL;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < a_share ? FunnelVariant::A : FunnelVariant::B;
}

Platform::Platform(PlatformConfig cfg, EventStore& store, LessonLibrary lessons)
    : cfg_(cfg), store_(store), lessons_(std::move(lessons)), ledger_(cfg.ledger, &store),
      matchmaker_(cfg.matchmaking), engine_(ledger_, matchmaker_, lessons_, &store)
{
}

void Platform::growth(const GrowthEvent& e)
{
  store_.append(Stream::Growth, e.ts, to_json(e));
}

std::size_t Platform::restore()
{
  std::size_t records = 0;
  std::optional<Timestamp> last;
  std::uint64_t max_invitation = 0;
  {
    std::lock_guard lock(mutex_);
    store_.for_each(0, [&](const StoredRecord& rec) {
      ++records;
      last = last ? std::max(*last, rec.ts) : rec.ts;
      const json& b = rec.body;
      switch (rec.stream)
        {
        case Stream::ProtocolAudit:
          if (b.value("op", "") == "register")
            {
              UserProfile p;
              p.id = b.at("user").get<std::string>();
              p.native_language = b.at("native_language").get<std::string>();
              p.learning_language = b.at("learning_language").get<std::string>();
              if (b.contains("invited_by"))
                p.invited_by = b.at("invited_by").get<std::string>();
              matchmaker_.register_user(p);
              token_digests_[b.at("token_sha256").get<std::string>()] = p.id;
            }
          break;
        case Stream::Growth:
          {
            const GrowthEvent e = growth_event_from_json(rec.ts, b);
            if (e.aggregate())
              break;
            if (e.kind == GrowthKind::InviteSent)
              invite_senders_.insert(e.user);
            else if (e.kind == GrowthKind::ActiveDay)
              active_days_.emplace(e.user, to_epoch(day_start(e.ts)));
            break;
          }
        case Stream::Session:
          if (b.value("op", "") == "start")
            max_invitation = std::max(max_invitation, b.at("invitation").get<std::uint64_t>());
          break;
        case Stream::Ledger: break;
        }
    });
  }
  matchmaker_.reserve_invitation_ids(max_invitation + 1);
  ledger_.restore(store_);
  for (SessionId id : engine_.restore(store_))
    engine_.end_session(id, TerminationCause::Disconnect, *last);
  return records;
}

Account Platform::register_user(const UserProfile& profile, const std::string& token,
                                Timestamp now)
{
  std::lock_guard lock(mutex_);
  if (token.empty())
    fail(Errc::InvalidProfile, "empty token");
  const std::string digest = sha256_hex(token);
  if (token_digests_.contains(digest))
    fail(Errc::InvalidProfile, "token already in use");
  if (profile.invited_by && !invite_senders_.contains(*profile.invited_by))
    fail(Errc::InvalidReferral, *profile.invited_by + " never sent a friend invite");

  UserProfile fresh{profile.id, profile.native_language, profile.learning_language,
                    profile.invited_by};
  matchmaker_.register_user(fresh);
  json audit{{"op", "register"},
             {"user", fresh.id},
             {"native_language", fresh.native_language},
             {"learning_language", fresh.learning_language},
             {"token_sha256", digest}};
  if (fresh.invited_by)
    audit["invited_by"] = *fresh.invited_by;
  store_.append(Stream::ProtocolAudit, now, std::move(audit));
  token_digests_[digest] = fresh.id;

  const Account acct = ledger_.open_account(fresh.id, now);
  GrowthEvent reg;
  reg.ts = now;
  reg.kind = GrowthKind::Register;
  reg.user = fresh.id;
  growth(reg);
  if (fresh.invited_by)
    {
      GrowthEvent inv;
      inv.ts = now;
      inv.kind = GrowthKind::InvitedRegister;
      inv.user = fresh.id;
      inv.inviter = fresh.invited_by;
      growth(inv);
      ledger_.grant_invite_bonus(*ledger_.find_account(*fresh.invited_by), fresh.id, now);
    }
  return ledger_.account(acct.id);
}

std::optional<UserId> Platform::authenticate(const std::string& token) const
{
  std::lock_guard lock(mutex_);
  auto it = token_digests_.find(sha256_hex(token));
  if (it == token_digests_.end())
    return std::nullopt;
  return it->second;
}

void Platform::mark_active(const UserId& user, Timestamp now)
{
  std::lock_guard lock(mutex_);
  if (!active_days_.emplace(user, to_epoch(day_start(now))).second)
    return;
  GrowthEvent e;
  e.ts = now;
  e.kind = GrowthKind::ActiveDay;
  e.user = user;
  growth(e);
}

void Platform::record_funnel(const UserId& user, FunnelAction action, std::uint64_t count,
                             Timestamp now)
{
  if (action == FunnelAction::Invited && count == 0)
    fail(Errc::SchemaViolation, "an INVITED funnel step needs count >= 1");
  std::lock_guard lock(mutex_);
  GrowthEvent f;
  f.ts = now;
  f.kind = GrowthKind::Funnel;
  f.user = user;
  f.variant = funnel_variant(user);
  f.action = action;
  growth(f);
  if (action == FunnelAction::Invited)
    {
      GrowthEvent sent;
      sent.ts = now;
      sent.kind = GrowthKind::InviteSent;
      sent.user = user;
      sent.count = count;
      growth(sent);
      invite_senders_.insert(user);
    }
}

AccountId Platform::account_of(const UserId& user) const
{
  const auto acct = ledger_.find_account(user);
  if (!acct)
    fail(Errc::UnknownAccount, user);
  return *acct;
}

LedgerEntry Platform::purchase(const UserId& user, Seconds amount, const std::string& payment_ref,
                               Timestamp now)
{
  const LedgerEntry e = ledger_.purchase_minutes(account_of(user), amount, payment_ref, now);
  GrowthEvent p;
  p.ts = now;
  p.kind = GrowthKind::Purchased;
  p.user = user;
  p.duration_s = amount.count();
  growth(p);
  return e;
}

Seconds Platform::balance(const UserId& user) const
{
  return ledger_.balance(account_of(user));
}

void Platform::audit_presence(const UserId& user, Timestamp now)
{
  const PresenceRecord rec = matchmaker_.presence(user);
  json roles = json::array();
  for (Role r : {Role::Teacher, Role::Student})
    if (rec.roles.contains(r))
      roles.push_back(to_string(r));
  store_.append(Stream::ProtocolAudit, now,
                json{{"op", "presence"},
                     {"user", user},
                     {"status", to_string(rec.status)},
                     {"roles", std::move(roles)}});
}

std::string Platform::state_hash() const
{
  return sha256_hex(ledger_.canonical_state() + "--\n" + engine_.canonical_state());
}

std::string Platform::replay_state_hash(const EventStore& store, LedgerConfig cfg)
{
  return sha256_hex(Ledger::replay(store, cfg)->canonical_state() + "--\n"
                    + SessionEngine::canonical_state_from(store));
}

} // namespace tandem
