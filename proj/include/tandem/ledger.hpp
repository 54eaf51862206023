#pragma once

#include "tandem/event_store.hpp"
#include "tandem/types.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace tandem {

enum class EntryReason { SignupGrant, TeachEarn, LearnSpend, InviteBonus, Purchase };

std::string_view to_string(EntryReason r) noexcept;
EntryReason parse_entry_reason(std::string_view s);
/// SIGNUP_GRANT, INVITE_BONUS and PURCHASE create time; the rest move it.
constexpr bool is_mint(EntryReason r) noexcept
{
  return r == EntryReason::SignupGrant || r == EntryReason::InviteBonus
         || r == EntryReason::Purchase;
}

struct Account
{
  AccountId id{};
  UserId owner;
  Seconds balance{0};
  Timestamp created_at{};

  bool operator==(const Account&) const = default;
};

struct LedgerEntry
{
  EntryId id{};
  AccountId account{};
  Seconds delta{0};
  EntryReason reason = EntryReason::SignupGrant;
  std::optional<std::string> ref;
  Timestamp ts{};

  bool operator==(const LedgerEntry&) const = default;
};

struct LedgerConfig
{
  Seconds signup_grant{1800};
  Seconds invite_bonus{1800};
};

std::string session_ref(SessionId id);

/// Double-entry time bank denominated in seconds.
///
/// Every mutation is validated first, then written to the event store as a
/// single LEDGER record, then applied in memory, so a failed append leaves
/// the ledger untouched and a settlement's two legs are never split.
/// All operations are linearizable through one internal mutex.
class Ledger
{
public:
  explicit Ledger(LedgerConfig cfg = {}, EventStore* store = nullptr);

  Account open_account(const UserId& user, Timestamp now);

  /// Moves `duration` from student to teacher: LEARN_SPEND(-d) and
  /// TEACH_EARN(+d), both referencing the session.
  std::pair<LedgerEntry, LedgerEntry> settle_session(AccountId student, AccountId teacher,
                                                     Seconds duration, SessionId session,
                                                     Timestamp now);

  /// At most once per invited user.
  LedgerEntry grant_invite_bonus(AccountId inviter, const UserId& invited_user, Timestamp now);

  /// Stub purchase: mints `amount` (a positive multiple of 60 s). The payment
  /// reference is recorded verbatim and never interpreted.
  LedgerEntry purchase_minutes(AccountId acct, Seconds amount, const std::string& payment_ref,
                               Timestamp now);

  Seconds balance(AccountId acct) const;
  Account account(AccountId acct) const;
  std::optional<AccountId> find_account(const UserId& user) const;
  std::vector<Account> accounts() const;
  std::vector<LedgerEntry> journal() const;
  std::vector<LedgerEntry> journal(AccountId acct) const;

  Seconds total_balance() const;
  Seconds total_minted() const;
  const LedgerConfig& config() const noexcept { return cfg_; }

  /// Canonical text of every account and entry; equal for equal ledgers.
  std::string canonical_state() const;

  /// Rebuilds a ledger from the LEDGER records of `store`. The rebuilt
  /// ledger has no store attached. Throws StorageFailure if the journal
  /// violates a ledger invariant.
  static std::unique_ptr<Ledger> replay(const EventStore& store, LedgerConfig cfg = {});

  /// Loads the journal of `store` into this empty ledger without writing.
  void restore(const EventStore& store);

private:
  const Account& lookup(AccountId acct) const;
  LedgerEntry make_entry(AccountId acct, Seconds delta, EntryReason reason,
                         std::optional<std::string> ref, Timestamp now, std::uint64_t k) const;
  void commit(const std::vector<LedgerEntry>& entries, Timestamp now);
  void apply(const LedgerEntry& e);
  void apply_open(const Account& a);

  LedgerConfig cfg_;
  EventStore* store_;
  mutable std::mutex mutex_;
  std::map<AccountId, Account> accounts_;
  std::map<UserId, AccountId> by_user_;
  std::vector<LedgerEntry> journal_;
  std::set<UserId> bonus_granted_;
  Seconds minted_{0};
};

} // namespace tandem
