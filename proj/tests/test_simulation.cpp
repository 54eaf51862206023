#include "doctest.h"

#include "support.hpp"
#include "tandem/error.hpp"
#include "tandem/ledger.hpp"
#include "tandem/platform.hpp"
#include "tandem/simulation.hpp"

#include <map>

using namespace tandem;

namespace {

SimConfig small(std::uint64_t seed = 7)
{
  SimConfig c;
  c.seed = seed;
  c.bot_count = 20;
  c.days = 7;
  return c;
}

// Transfers are the journal entries that move time between two accounts.
std::size_t transfer_entries(const EventStore& store)
{
  const auto ledger = Ledger::replay(store);
  std::size_t n = 0;
  for (const LedgerEntry& e : ledger->journal())
    n += e.reason == EntryReason::LearnSpend || e.reason == EntryReason::TeachEarn;
  return n;
}

} // namespace

TEST_CASE("simulation: equal configs give byte-identical logs")
{
  EventStore a, b, c;
  const SimSummary sa = run_simulation(small(), a);
  const SimSummary sb = run_simulation(small(), b);
  const SimSummary sc = run_simulation(small(8), c);
  CHECK(sa.sessions > 0);
  CHECK(sa.log_digest == sb.log_digest);
  CHECK(sa.state_hash == sb.state_hash);
  CHECK(format_summary(sa) == format_summary(sb));
  CHECK(sa.log_digest != sc.log_digest);
}

TEST_CASE("simulation: nobody accepting means no sessions and no transfers")
{
  SimConfig cfg = small();
  cfg.behavior.accept_probability = 0.0;
  EventStore store;
  const SimSummary s = run_simulation(cfg, store);
  CHECK(s.sessions == 0);
  CHECK(s.connects == 0);
  CHECK(transfer_entries(store) == 0);
  CHECK(s.frames_in > 0);
}

TEST_CASE("simulation: mean call length tracks the duration model")
{
  SimConfig cfg;
  cfg.seed = 3;
  cfg.bot_count = 50;
  cfg.days = 30;
  EventStore store;
  const SimSummary s = run_simulation(cfg, store);
  REQUIRE(s.mean_minutes);
  CHECK(s.connects > 100);
  CHECK(*s.mean_minutes > 12.0 * 0.85);
  CHECK(*s.mean_minutes < 12.0 * 1.15);
}

TEST_CASE("simulation: time is conserved and every session ends once")
{
  EventStore store;
  const SimSummary s = run_simulation(small(11), store);
  CHECK(s.total_balance == s.total_minted);

  std::map<std::uint64_t, int> starts, ends;
  for (const StoredRecord& r : store.replay())
    if (r.stream == Stream::Session)
      {
        const std::string op = r.body.at("op");
        const std::uint64_t id = r.body.at("session");
        starts[id] += op == "start";
        ends[id] += op == "end";
      }
  CHECK(starts.size() == s.sessions);
  for (const auto& [id, n] : starts)
    {
      CHECK(n == 1);
      CHECK(ends[id] == 1);
    }
  CHECK(s.connects == s.sessions);
  CHECK(Platform::replay_state_hash(store) == s.state_hash);

  // Running balances never dip below zero.
  const auto ledger = Ledger::replay(store);
  std::map<AccountId, std::int64_t> running;
  for (const LedgerEntry& e : ledger->journal())
    {
      running[e.account] += e.delta.count();
      CHECK(running[e.account] >= 0);
    }
}

TEST_CASE("simulation: friend invites produce referrals")
{
  SimConfig cfg = small(5);
  cfg.behavior.friend_dialog_probability = 0.5;
  cfg.behavior.friend_conversion = 0.5;
  EventStore store;
  const SimSummary s = run_simulation(cfg, store);
  CHECK(s.registered > cfg.bot_count);
  std::size_t referred = 0;
  for (const GrowthEvent& e : growth_events(store))
    referred += e.kind == GrowthKind::InvitedRegister;
  CHECK(referred == s.registered - cfg.bot_count);
}

TEST_CASE("simulation: config validation and JSON form")
{
  SimConfig bad;
  bad.behavior.accept_probability = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SimConfig{};
  bad.bot_count = 1;
  CHECK_THROWS_AS(bad.validate(), Error);

  const SimConfig c = sim_config_from_json(
      json{{"seed", 9}, {"bots", 12}, {"behavior", {{"accept_probability", 0.5}}}});
  CHECK(c.seed == 9);
  CHECK(c.bot_count == 12);
  CHECK(c.behavior.accept_probability == 0.5);
  CHECK(c.days == SimConfig{}.days);
  CHECK(sim_config_from_json(to_json(c)).seed == 9);
  CHECK_THROWS_AS(sim_config_from_json(json{{"bogus", 1}}), Error);
  CHECK_THROWS_AS(sim_config_from_json(json{{"days", "x"}}), Error);

  EventStore used;
  used.append(Stream::Growth, test::t0(), json{{"kind", "ACTIVE_DAY"}});
  CHECK_THROWS_AS(run_simulation(small(), used), Error);
}
