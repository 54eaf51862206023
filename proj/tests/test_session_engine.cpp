#include "doctest.h"

#include "support.hpp"
#include "tandem/error.hpp"
#include "tandem/growth_event.hpp"
#include "tandem/session_engine.hpp"

#include <random>
#include <set>

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

const RoleSet both{Role::Teacher, Role::Student};

/// Teacher "t" (Spanish native) and student "s" (learning Spanish).
struct Rig
{
  EventStore store;
  Ledger ledger;
  Matchmaker mm;
  LessonLibrary lessons = LessonLibrary::builtin();
  SessionEngine engine{ledger, mm, lessons, &store};

  explicit Rig(Seconds grant = Seconds{1800}) : ledger({.signup_grant = grant}, &store)
  {
    for (auto [id, native, learning] : {std::tuple{"t", "es", "en"}, std::tuple{"s", "en", "es"}})
      {
        mm.register_user({id, native, learning});
        ledger.open_account(id, at(0));
        mm.set_presence(id, PresenceStatus::Online, both, at(0));
      }
  }

  Session begin(Timestamp now)
  {
    auto inv = mm.send_invite("s", "t", Role::Teacher, "es", "A1", now);
    auto res = mm.respond_invite(inv.id, "t", Decision::Accept, now, [&](const Invitation& i) {
      return engine.start_session(i, now).id;
    });
    return engine.session(*res.invitation.session);
  }
};

} // namespace

TEST_CASE("accepted invitation starts a live session on card 0")
{
  Rig rig;
  const Session s = rig.begin(at(10));
  CHECK(s.state == SessionState::Live);
  CHECK(s.card_index == 0);
  CHECK(s.teacher == "t");
  CHECK(s.student == "s");
  CHECK(s.balance_at_start == Seconds{1800});
  CHECK(rig.mm.presence("t").status == PresenceStatus::InSession);
  CHECK(rig.engine.live_session_of("s") == s.id);
}

TEST_CASE("start_session preconditions")
{
  SUBCASE("student without minutes")
  {
    Rig rig(Seconds{0});
    auto inv = rig.mm.send_invite("s", "t", Role::Teacher, "es", "A1", at(0));
    CHECK(code_of([&] {
            rig.mm.respond_invite(inv.id, "t", Decision::Accept, at(1), [&](const Invitation& i) {
              return rig.engine.start_session(i, at(1)).id;
            });
          })
          == Errc::InsufficientBalance);
    CHECK(rig.mm.invitation(inv.id).state == InvitationState::Pending);
  }
  SUBCASE("rejected invitation")
  {
    Rig rig;
    auto inv = rig.mm.send_invite("s", "t", Role::Teacher, "es", "A1", at(0));
    auto res = rig.mm.respond_invite(inv.id, "t", Decision::Reject, at(1), nullptr);
    CHECK(code_of([&] { rig.engine.start_session(res.invitation, at(2)); })
          == Errc::InvalidInvitationState);
  }
}

TEST_CASE("teacher drives the card cursor")
{
  Rig rig;
  const Session s = rig.begin(at(0));
  const CardState c = rig.engine.advance_card(s.id, "t", 1, at(5));
  CHECK(c.index == 1);
  CHECK(c.count == 8);
  CHECK(rig.engine.card_state(s.id).index == 1);
  CHECK(rig.engine.advance_card(s.id, "t", 0, at(6)).index == 0); // backwards is fine
  CHECK(code_of([&] { rig.engine.advance_card(s.id, "s", 2, at(7)); }) == Errc::NotTeacher);
  CHECK(code_of([&] { rig.engine.advance_card(s.id, "t", 8, at(7)); }) == Errc::OutOfRange);
  rig.engine.end_session(s.id, TerminationCause::Hangup, at(8));
  CHECK(code_of([&] { rig.engine.advance_card(s.id, "t", 1, at(9)); }) == Errc::SessionEnded);
}

TEST_CASE("tick ends a session exactly at balance exhaustion")
{
  Rig rig(Seconds{600});
  const Session s = rig.begin(at(0));
  CHECK_FALSE(rig.engine.tick(s.id, at(300)));
  auto ended = rig.engine.tick(s.id, at(600));
  REQUIRE(ended);
  CHECK(ended->cause == TerminationCause::BalanceExhausted);
  CHECK(ended->billed == Seconds{600});
  CHECK(rig.ledger.balance(*rig.ledger.find_account("s")) == Seconds{0});
  CHECK(rig.ledger.balance(*rig.ledger.find_account("t")) == Seconds{1200});
  CHECK(code_of([&] { rig.engine.tick(s.id, at(700)); }) == Errc::SessionEnded);
  CHECK(rig.mm.presence("s").status == PresenceStatus::Online);
}

TEST_CASE("a late tick never bills beyond the balance")
{
  Rig rig(Seconds{600});
  const Session s = rig.begin(at(0));
  auto ended = rig.engine.tick_all(at(609));
  REQUIRE(ended.size() == 1);
  CHECK(ended[0].billed == Seconds{600});
  CHECK(ended[0].elapsed == Seconds{600});
  CHECK(rig.engine.session(s.id).ended_at == at(600));
}

TEST_CASE("end_session bills elapsed wall-clock time")
{
  Rig rig;
  SUBCASE("hangup after 720 s")
  {
    const Session s = rig.begin(at(0));
    auto sum = rig.engine.end_session(s.id, TerminationCause::Hangup, at(720));
    CHECK(sum.billed == Seconds{720});
    CHECK(sum.cause == TerminationCause::Hangup);
    CHECK(rig.ledger.balance(*rig.ledger.find_account("s")) == Seconds{1080});
  }
  SUBCASE("immediate end")
  {
    const Session s = rig.begin(at(0));
    auto sum = rig.engine.end_session(s.id, TerminationCause::Hangup, at(0));
    CHECK(sum.billed == Seconds{0});
    CHECK(rig.ledger.balance(*rig.ledger.find_account("s")) == Seconds{1800});
  }
  SUBCASE("browser closed after 300 s")
  {
    const Session s = rig.begin(at(0));
    auto sum = rig.engine.end_session(s.id, TerminationCause::Disconnect, at(300));
    CHECK(sum.billed == Seconds{300});
    CHECK(sum.cause == TerminationCause::Disconnect);
  }
  SUBCASE("double end keeps the first cause")
  {
    const Session s = rig.begin(at(0));
    rig.engine.end_session(s.id, TerminationCause::Disconnect, at(10));
    CHECK(code_of([&] { rig.engine.end_session(s.id, TerminationCause::Hangup, at(20)); })
          == Errc::SessionEnded);
    CHECK(rig.engine.session(s.id).cause == TerminationCause::Disconnect);
  }
}

TEST_CASE("hang_up on the last card is FINISHED")
{
  Rig rig;
  const Session s = rig.begin(at(0));
  rig.engine.advance_card(s.id, "t", 7, at(60));
  CHECK(rig.engine.hang_up(s.id, "s", at(120)).cause == TerminationCause::Finished);

  const Session s2 = rig.begin(at(200));
  CHECK(rig.engine.hang_up(s2.id, "t", at(260)).cause == TerminationCause::Hangup);
  const Session s3 = rig.begin(at(300));
  CHECK(code_of([&] { rig.engine.hang_up(s3.id, "x", at(301)); }) == Errc::NotParticipant);
}

TEST_CASE("mutual ratings after the session ends")
{
  Rig rig;
  const Session s = rig.begin(at(0));
  CHECK(code_of([&] { rig.engine.rate(s.id, "s", 5, at(1)); }) == Errc::SessionNotEnded);
  rig.engine.end_session(s.id, TerminationCause::Hangup, at(60));
  CHECK(code_of([&] { rig.engine.rate(s.id, "s", 0, at(61)); }) == Errc::InvalidStars);
  CHECK(code_of([&] { rig.engine.rate(s.id, "s", 6, at(61)); }) == Errc::InvalidStars);
  const Rating r = rig.engine.rate(s.id, "s", 5, at(61));
  CHECK(r.ratee == "t");
  CHECK(rig.mm.profile("t").rating_avg() == doctest::Approx(5.0));
  CHECK(code_of([&] { rig.engine.rate(s.id, "s", 4, at(62)); }) == Errc::AlreadyRated);
  rig.engine.rate(s.id, "t", 3, at(62));
  CHECK(rig.mm.profile("s").rating_avg() == doctest::Approx(3.0));

  const Session s2 = rig.begin(at(100));
  rig.engine.end_session(s2.id, TerminationCause::Hangup, at(160));
  rig.engine.rate(s2.id, "s", 2, at(161));
  CHECK(rig.mm.profile("t").rating_avg() == doctest::Approx(3.5));
  CHECK(code_of([&] { rig.engine.rate(s2.id, "x", 2, at(161)); }) == Errc::NotParticipant);
}

TEST_CASE("session end emits growth events")
{
  Rig rig;
  const Session s = rig.begin(at(0));
  rig.engine.end_session(s.id, TerminationCause::Hangup, at(720));
  std::multiset<GrowthKind> kinds;
  GrowthEvent done;
  for (const auto& e : growth_events(rig.store))
    {
      kinds.insert(e.kind);
      if (e.kind == GrowthKind::SessionDone)
        done = e;
    }
  CHECK(kinds.count(GrowthKind::SessionDone) == 1);
  CHECK(kinds.count(GrowthKind::CallMade) == 2);
  CHECK(kinds.count(GrowthKind::Taught) == 1);
  CHECK(done.duration_s == 720);
  CHECK(done.cause == "HANGUP");
}

TEST_CASE("every end path sets exactly one cause and keeps billing within bounds")
{
  std::mt19937_64 rng(99);
  for (int round = 0; round < 300; ++round)
    {
      Rig rig(Seconds{static_cast<int>(rng() % 1200) + 1});
      const Session s = rig.begin(at(0));
      const Seconds student_start = s.balance_at_start;
      std::int64_t now = 0;
      std::optional<SessionSummary> summary;
      while (!summary)
        {
          now += static_cast<std::int64_t>(rng() % 120);
          switch (rng() % 4)
            {
            case 0:
              rig.engine.advance_card(s.id, "t", rng() % 8, at(now));
              break;
            case 1:
              summary = rig.engine.tick(s.id, at(now));
              break;
            case 2:
              if (rng() % 4 == 0)
                summary = rig.engine.hang_up(s.id, rng() % 2 ? "t" : "s", at(now));
              break;
            case 3:
              if (rng() % 6 == 0)
                summary = rig.engine.end_session(s.id, TerminationCause::Disconnect, at(now));
              break;
            }
        }
      const Session done = rig.engine.session(s.id);
      REQUIRE(done.cause);
      CHECK(done.state == SessionState::Ended);
      CHECK(done.billed <= *done.ended_at - done.started_at);
      CHECK(done.billed <= student_start);
      if (*done.ended_at - done.started_at < student_start)
        CHECK(done.billed == *done.ended_at - done.started_at);
      CHECK(rig.engine.canonical_state() == SessionEngine::canonical_state_from(rig.store));

      int transfers = 0;
      for (const auto& e : rig.ledger.journal())
        if (e.ref == session_ref(s.id))
          ++transfers;
      CHECK(transfers == 2);
    }
}
