#include "tandem/ledger.hpp"

#include "tandem/error.hpp"

#include <sstream>

namespace tandem {

namespace {

json entry_to_json(const LedgerEntry& e)
{
  json j{{"entry", raw(e.id)},
         {"account", raw(e.account)},
         {"delta_s", e.delta.count()},
         {"reason", to_string(e.reason)}};
  if (e.ref)
    j["ref"] = *e.ref;
  return j;
}

LedgerEntry entry_from_json(const json& j, Timestamp ts)
{
  LedgerEntry e;
  e.id = EntryId{j.at("entry").get<std::uint64_t>()};
  e.account = AccountId{j.at("account").get<std::uint64_t>()};
  e.delta = Seconds{j.at("delta_s").get<std::int64_t>()};
  e.reason = parse_entry_reason(j.at("reason").get<std::string>());
  if (j.contains("ref"))
    e.ref = j["ref"].get<std::string>();
  e.ts = ts;
  return e;
}

std::string invite_ref(const UserId& invited) { return "invite:" + invited; }

} // namespace

std::string_view to_string(EntryReason r) noexcept
{
  switch (r)
    {
    case EntryReason::SignupGrant: return "SIGNUP_GRANT";
    case EntryReason::TeachEarn: return "TEACH_EARN";
    case EntryReason::LearnSpend: return "LEARN_SPEND";
    case EntryReason::InviteBonus: return "INVITE_BONUS";
    case EntryReason::Purchase: return "PURCHASE";
    }
  return "SIGNUP_GRANT";
}

EntryReason parse_entry_reason(std::string_view s)
{
  for (auto r : {EntryReason::SignupGrant, EntryReason::TeachEarn, EntryReason::LearnSpend,
                 EntryReason::InviteBonus, EntryReason::Purchase})
    if (to_string(r) == s)
      return r;
  fail(Errc::ParseError, "unknown entry reason '" + std::string(s) + "'");
}

std::string session_ref(SessionId id) { return "session:" + std::to_string(raw(id)); }

Ledger::Ledger(LedgerConfig cfg, EventStore* store) : cfg_(cfg), store_(store)
{
  if (cfg_.signup_grant < Seconds{0} || cfg_.invite_bonus < Seconds{0})
    fail(Errc::ConfigInvalid, "grants must be non-negative");
}

const Account& Ledger::lookup(AccountId acct) const
{
  auto it = accounts_.find(acct);
  if (it == accounts_.end())
    fail(Errc::UnknownAccount, "account " + std::to_string(raw(acct)));
  return it->second;
}

LedgerEntry Ledger::make_entry(AccountId acct, Seconds delta, EntryReason reason,
                               std::optional<std::string> ref, Timestamp now,
                               std::uint64_t k) const
{
  return LedgerEntry{EntryId{journal_.size() + 1 + k}, acct, delta, reason, std::move(ref), now};
}

void Ledger::commit(const std::vector<LedgerEntry>& entries, Timestamp now)
{
  if (store_)
    {
      json list = json::array();
      for (const auto& e : entries)
        list.push_back(entry_to_json(e));
      store_->append(Stream::Ledger, now, json{{"op", "entries"}, {"entries", std::move(list)}});
    }
  for (const auto& e : entries)
    apply(e);
}

void Ledger::apply(const LedgerEntry& e)
{
  Account& a = accounts_.at(e.account);
  a.balance += e.delta;
  if (is_mint(e.reason))
    minted_ += e.delta;
  if (e.reason == EntryReason::InviteBonus && e.ref)
    bonus_granted_.insert(e.ref->substr(invite_ref("").size()));
  journal_.push_back(e);
}

void Ledger::apply_open(const Account& a)
{
  accounts_.emplace(a.id, Account{a.id, a.owner, Seconds{0}, a.created_at});
  by_user_.emplace(a.owner, a.id);
}

Account Ledger::open_account(const UserId& user, Timestamp now)
{
  std::lock_guard lock(mutex_);
  if (by_user_.contains(user))
    fail(Errc::DuplicateAccount, user);
  const Account acct{AccountId{accounts_.size() + 1}, user, Seconds{0}, now};
  const LedgerEntry grant = make_entry(acct.id, cfg_.signup_grant, EntryReason::SignupGrant,
                                       std::nullopt, now, 0);
  if (store_)
    store_->append(Stream::Ledger, now,
                   json{{"op", "open"},
                        {"account", raw(acct.id)},
                        {"user", user},
                        {"entries", json::array({entry_to_json(grant)})}});
  apply_open(acct);
  apply(grant);
  return accounts_.at(acct.id);
}

std::pair<LedgerEntry, LedgerEntry> Ledger::settle_session(AccountId student, AccountId teacher,
                                                           Seconds duration, SessionId session,
                                                           Timestamp now)
{
  std::lock_guard lock(mutex_);
  const Account& s = lookup(student);
  lookup(teacher);
  if (student == teacher)
    fail(Errc::InvalidState, "student and teacher share account "
                                 + std::to_string(raw(student)));
  if (duration < Seconds{0})
    fail(Errc::InvalidAmount, "negative duration");
  if (s.balance < duration)
    fail(Errc::InsufficientBalance, "balance " + std::to_string(s.balance.count())
                                        + " s < " + std::to_string(duration.count()) + " s");
  const std::string ref = session_ref(session);
  std::pair<LedgerEntry, LedgerEntry> legs{
      make_entry(student, -duration, EntryReason::LearnSpend, ref, now, 0),
      make_entry(teacher, duration, EntryReason::TeachEarn, ref, now, 1)};
  commit({legs.first, legs.second}, now);
  return legs;
}

LedgerEntry Ledger::grant_invite_bonus(AccountId inviter, const UserId& invited_user,
                                       Timestamp now)
{
  std::lock_guard lock(mutex_);
  lookup(inviter);
  if (bonus_granted_.contains(invited_user))
    fail(Errc::AlreadyGranted, invited_user);
  LedgerEntry e = make_entry(inviter, cfg_.invite_bonus, EntryReason::InviteBonus,
                             invite_ref(invited_user), now, 0);
  commit({e}, now);
  return e;
}

LedgerEntry Ledger::purchase_minutes(AccountId acct, Seconds amount,
                                     const std::string& payment_ref, Timestamp now)
{
  std::lock_guard lock(mutex_);
  lookup(acct);
  if (amount <= Seconds{0} || amount.count() % 60 != 0)
    fail(Errc::InvalidAmount, std::to_string(amount.count()) + " s is not a positive whole minute");
  LedgerEntry e = make_entry(acct, amount, EntryReason::Purchase, payment_ref, now, 0);
  commit({e}, now);
  return e;
}

Seconds Ledger::balance(AccountId acct) const
{
  std::lock_guard lock(mutex_);
  return lookup(acct).balance;
}

Account Ledger::account(AccountId acct) const
{
  std::lock_guard lock(mutex_);
  return lookup(acct);
}

std::optional<AccountId> Ledger::find_account(const UserId& user) const
{
  std::lock_guard lock(mutex_);
  auto it = by_user_.find(user);
  if (it == by_user_.end())
    return std::nullopt;
  return it->second;
}

std::vector<Account> Ledger::accounts() const
{
  std::lock_guard lock(mutex_);
  std::vector<Account> out;
  out.reserve(accounts_.size());
  for (const auto& [id, a] : accounts_)
    out.push_back(a);
  return out;
}

std::vector<LedgerEntry> Ledger::journal() const
{
  std::lock_guard lock(mutex_);
  return journal_;
}

std::vector<LedgerEntry> Ledger::journal(AccountId acct) const
{
  std::lock_guard lock(mutex_);
  lookup(acct);
  std::vector<LedgerEntry> out;
  for (const auto& e : journal_)
    if (e.account == acct)
      out.push_back(e);
  return out;
}

Seconds Ledger::total_balance() const
{
  std::lock_guard lock(mutex_);
  Seconds sum{0};
  for (const auto& [id, a] : accounts_)
    sum += a.balance;
  return sum;
}

Seconds Ledger::total_minted() const
{
  std::lock_guard lock(mutex_);
  return minted_;
}

std::string Ledger::canonical_state() const
{
  std::lock_guard lock(mutex_);
  std::ostringstream os;
  for (const auto& [id, a] : accounts_)
    os << "A|" << raw(id) << '|' << a.owner << '|' << a.balance.count() << '|'
       << to_epoch(a.created_at) << '\n';
  for (const auto& e : journal_)
    os << "E|" << raw(e.id) << '|' << raw(e.account) << '|' << e.delta.count() << '|'
       << to_string(e.reason) << '|' << e.ref.value_or("") << '|' << to_epoch(e.ts) << '\n';
  return os.str();
}

std::unique_ptr<Ledger> Ledger::replay(const EventStore& store, LedgerConfig cfg)
{
  auto ledger = std::make_unique<Ledger>(cfg, nullptr);
  auto corrupt = [](const StoredRecord& rec, const std::string& why) {
    fail(Errc::StorageFailure, "ledger record at offset " + std::to_string(rec.offset) + ": " + why);
  };
  store.for_each(0, [&](const StoredRecord& rec) {
    if (rec.stream != Stream::Ledger)
      return;
    const std::string op = rec.body.at("op").get<std::string>();
    if (op == "open")
      {
        const Account a{AccountId{rec.body.at("account").get<std::uint64_t>()},
                        rec.body.at("user").get<std::string>(), Seconds{0}, rec.ts};
        if (ledger->accounts_.contains(a.id) || ledger->by_user_.contains(a.owner))
          corrupt(rec, "account opened twice");
        ledger->apply_open(a);
      }
    else if (op != "entries")
      corrupt(rec, "unknown op '" + op + "'");
    for (const auto& j : rec.body.at("entries"))
      {
        const LedgerEntry e = entry_from_json(j, rec.ts);
        if (!ledger->accounts_.contains(e.account))
          corrupt(rec, "entry for unknown account");
        if (raw(e.id) != ledger->journal_.size() + 1)
          corrupt(rec, "entry ids not dense");
        ledger->apply(e);
        if (ledger->accounts_.at(e.account).balance < Seconds{0})
          corrupt(rec, "negative balance");
      }
  });
  return ledger;
}

void Ledger::restore(const EventStore& store)
{
  auto loaded = replay(store, cfg_);
  std::lock_guard lock(mutex_);
  if (!accounts_.empty())
    fail(Errc::InvalidState, "restore needs an empty ledger");
  accounts_ = std::move(loaded->accounts_);
  by_user_ = std::move(loaded->by_user_);
  journal_ = std::move(loaded->journal_);
  bonus_granted_ = std::move(loaded->bonus_granted_);
  minted_ = loaded->minted_;
}

} // namespace tandem
