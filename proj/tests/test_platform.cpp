#include "doctest.h"

#include "support.hpp"
#include "tandem/error.hpp"
#include "tandem/platform.hpp"

using namespace tandem;
using tandem::test::at;

namespace {

Errc code_of(auto&& fn)
{
  try
    {
      fn();
    }
  catch (const Error& e)
    {
      return e.code();
    }
  FAIL("expected an Error");
  return Errc::StorageFailure;
}

std::size_t count_kind(const EventStore& store, GrowthKind k)
{
  std::size_t n = 0;
  for (const auto& e : growth_events(store))
    n += e.kind == k;
  return n;
}

} // namespace

TEST_CASE("registration opens a funded account and emits REGISTER")
{
  EventStore store;
  Platform p({}, store, LessonLibrary::builtin());
  const Account a = p.register_user({"ana", "es", "en"}, "secret", at(0));
  CHECK(a.balance == Seconds{1800});
  CHECK(p.authenticate("secret") == UserId{"ana"});
  CHECK_FALSE(p.authenticate("nope"));
  CHECK(count_kind(store, GrowthKind::Register) == 1);
  CHECK(code_of([&] { p.register_user({"bob", "en", "es"}, "secret", at(1)); })
        == Errc::InvalidProfile);
  CHECK(code_of([&] { p.register_user({"ana", "en", "es"}, "other", at(1)); })
        == Errc::DuplicateUser);
  // Tokens are stored only as digests.
  bool leaked = false;
  store.for_each(0, [&](const StoredRecord& r) { leaked |= r.body.dump().find("secret") != std::string::npos; });
  CHECK_FALSE(leaked);
}

TEST_CASE("a referral needs a prior friend invite and pays once")
{
  EventStore store;
  Platform p({}, store, LessonLibrary::builtin());
  p.register_user({"ana", "es", "en"}, "a", at(0));
  CHECK(code_of([&] { p.register_user({"bob", "en", "es", UserId{"ana"}}, "b", at(1)); })
        == Errc::InvalidReferral);
  p.record_funnel("ana", FunnelAction::Invited, 2, at(2));
  p.register_user({"bob", "en", "es", UserId{"ana"}}, "b", at(3));
  CHECK(p.balance("ana") == Seconds{3600});
  CHECK(count_kind(store, GrowthKind::InvitedRegister) == 1);
  CHECK(count_kind(store, GrowthKind::InviteSent) == 1);
  CHECK(code_of([&] { p.record_funnel("ana", FunnelAction::Invited, 0, at(4)); })
        == Errc::SchemaViolation);
}

TEST_CASE("ACTIVE_DAY is emitted once per user per UTC day")
{
  EventStore store;
  Platform p({}, store, LessonLibrary::builtin());
  p.register_user({"ana", "es", "en"}, "a", at(0));
  p.mark_active("ana", at(10));
  p.mark_active("ana", at(86399));
  p.mark_active("ana", at(86400));
  CHECK(count_kind(store, GrowthKind::ActiveDay) == 2);
}

TEST_CASE("purchases mint minutes and record PURCHASED")
{
  EventStore store;
  Platform p({}, store, LessonLibrary::builtin());
  p.register_user({"ana", "es", "en"}, "a", at(0));
  p.purchase("ana", Seconds{600}, "stub-1", at(1));
  CHECK(p.balance("ana") == Seconds{2400});
  CHECK(count_kind(store, GrowthKind::Purchased) == 1);
  CHECK(code_of([&] { p.purchase("ana", Seconds{59}, "stub-2", at(2)); }) == Errc::InvalidAmount);
  CHECK(code_of([&] { p.purchase("zed", Seconds{60}, "stub-3", at(2)); }) == Errc::UnknownAccount);
}

TEST_CASE("funnel variants are sticky and roughly balanced")
{
  int a = 0;
  for (int k = 0; k < 2000; ++k)
    {
      const UserId u = "user-" + std::to_string(k);
      CHECK(funnel_variant_of(u) == funnel_variant_of(u));
      a += funnel_variant_of(u) == FunnelVariant::A;
    }
  CHECK(a > 900);
  CHECK(a < 1100);
}

TEST_CASE("restore rebuilds users, balances and sessions from disk")
{
  test::TempDir dir;
  std::string hash;
  {
    EventStore store(dir.path());
    Platform p({}, store, LessonLibrary::builtin());
    p.register_user({"t", "es", "en"}, "tt", at(0));
    p.register_user({"s", "en", "es"}, "ss", at(0));
    Matchmaker& mm = p.matchmaker();
    for (auto u : {"t", "s"})
      mm.set_presence(u, PresenceStatus::Online, {Role::Teacher, Role::Student}, at(0));
    auto inv = mm.send_invite("s", "t", Role::Teacher, "es", "A1", at(1));
    auto res = mm.respond_invite(inv.id, "t", Decision::Accept, at(1), [&](const Invitation& i) {
      return p.engine().start_session(i, at(1)).id;
    });
    p.engine().end_session(*res.invitation.session, TerminationCause::Hangup, at(301));
    p.engine().rate(*res.invitation.session, "s", 4, at(302));
    // A second session is still live when the process "crashes".
    inv = mm.send_invite("s", "t", Role::Teacher, "es", "A1", at(400));
    mm.respond_invite(inv.id, "t", Decision::Accept, at(400), [&](const Invitation& i) {
      return p.engine().start_session(i, at(400)).id;
    });
    p.mark_active("s", at(500));
    hash = p.state_hash();
  }
  EventStore store(dir.path());
  Platform p({}, store, LessonLibrary::builtin());
  CHECK(p.restore() > 0);
  CHECK(p.authenticate("ss") == UserId{"s"});
  CHECK(p.matchmaker().profile("t").rating_avg() == doctest::Approx(4.0));
  const auto sessions = p.engine().sessions();
  REQUIRE(sessions.size() == 2);
  CHECK(sessions[1].cause == TerminationCause::Disconnect);
  CHECK(*sessions[1].ended_at == at(500));
  CHECK(p.balance("s") == Seconds{1800 - 300 - 100});
  CHECK(p.state_hash() != hash); // the crashed session has now been settled
  CHECK(p.state_hash() == Platform::replay_state_hash(store));
  CHECK(p.ledger().total_balance() == p.ledger().total_minted());

  // New invitations and sessions continue past the restored ids.
  for (auto u : {"t", "s"})
    p.matchmaker().set_presence(u, PresenceStatus::Online, {Role::Teacher}, at(600));
  const auto inv = p.matchmaker().send_invite("s", "t", Role::Teacher, "es", "A1", at(600));
  CHECK(raw(inv.id) == 3);
}
