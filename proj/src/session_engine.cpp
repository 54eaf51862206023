#include "tandem/session_engine.hpp"

#include "tandem/error.hpp"
#include "tandem/growth_event.hpp"

#include <algorithm>
#include <sstream>

namespace tandem {

namespace {

/// Flat view of a session shared by the live and replayed canonical forms.
struct SessionRow
{
  std::uint64_t id = 0;
  std::uint64_t invitation = 0;
  std::string teacher, student, lesson;
  std::size_t card = 0;
  bool ended = false;
  std::int64_t started = 0, ended_at = 0;
  std::string cause;
  std::int64_t balance = 0, billed = 0;
  std::map<std::string, int> ratings;
};

std::string format_rows(const std::map<std::uint64_t, SessionRow>& rows)
{
  std::ostringstream os;
  for (const auto& [id, r] : rows)
    {
      os << "S|" << r.id << '|' << r.invitation << '|' << r.teacher << '|' << r.student << '|'
         << r.lesson << '|' << r.card << '|' << (r.ended ? "ENDED" : "LIVE") << '|' << r.started
         << '|' << r.ended_at << '|' << r.cause << '|' << r.balance << '|' << r.billed;
      for (const auto& [rater, stars] : r.ratings)
        os << '|' << rater << '=' << stars;
      os << '\n';
    }
  return os.str();
}

} // namespace

std::string_view to_string(SessionState s) noexcept
{
  return s == SessionState::Live ? "LIVE" : "ENDED";
}

std::string_view to_string(TerminationCause c) noexcept
{
  switch (c)
    {
    case TerminationCause::Finished: return "FINISHED";
    case TerminationCause::Hangup: return "HANGUP";
    case TerminationCause::Disconnect: return "DISCONNECT";
    case TerminationCause::BalanceExhausted: return "BALANCE_EXHAUSTED";
    }
  return "HANGUP";
}

TerminationCause parse_cause(std::string_view s)
{
  for (auto c : {TerminationCause::Finished, TerminationCause::Hangup,
                 TerminationCause::Disconnect, TerminationCause::BalanceExhausted})
    if (to_string(c) == s)
      return c;
  fail(Errc::SchemaViolation, "unknown termination cause '" + std::string(s) + "'");
}

SessionEngine::SessionEngine(Ledger& ledger, Matchmaker& matchmaker, const LessonLibrary& lessons,
                             EventStore* store)
    : ledger_(ledger), matchmaker_(matchmaker), lessons_(lessons), store_(store)
{
}

void SessionEngine::record(Stream stream, Timestamp now, json body)
{
  if (store_)
    store_->append(stream, now, std::move(body));
}

Session& SessionEngine::lookup(SessionId id)
{
  auto it = sessions_.find(id);
  if (it == sessions_.end())
    fail(Errc::UnknownSession, std::to_string(raw(id)));
  return it->second;
}

const Session& SessionEngine::lookup(SessionId id) const
{
  auto it = sessions_.find(id);
  if (it == sessions_.end())
    fail(Errc::UnknownSession, std::to_string(raw(id)));
  return it->second;
}

Session SessionEngine::start_session(const Invitation& accepted, Timestamp now)
{
  if (accepted.state != InvitationState::Accepted)
    fail(Errc::InvalidInvitationState,
         "invitation is " + std::string(to_string(accepted.state)));
  const auto student_acct = ledger_.find_account(accepted.student());
  const auto teacher_acct = ledger_.find_account(accepted.teacher());
  if (!student_acct || !teacher_acct)
    fail(Errc::UnknownAccount, "both participants need an account");
  auto lesson = lessons_.find(accepted.language, accepted.level);

  std::lock_guard lock(mutex_);
  const Seconds balance = ledger_.balance(*student_acct);
  if (balance <= Seconds{0})
    fail(Errc::InsufficientBalance, accepted.student() + " has no minutes left");
  for (const UserId* u : {&accepted.teacher(), &accepted.student()})
    if (live_by_user_.contains(*u))
      fail(Errc::InvalidState, *u + " is already in a session");

  Session s;
  s.id = SessionId{next_id_};
  s.invitation = accepted.id;
  s.teacher = accepted.teacher();
  s.student = accepted.student();
  s.teacher_account = *teacher_acct;
  s.student_account = *student_acct;
  s.lesson = std::move(lesson);
  s.started_at = now;
  s.balance_at_start = balance;

  record(Stream::Session, now,
         json{{"op", "start"},
              {"session", raw(s.id)},
              {"invitation", raw(s.invitation)},
              {"teacher", s.teacher},
              {"student", s.student},
              {"lesson", s.lesson->lesson_id},
              {"balance_s", balance.count()}});
  ++next_id_;
  live_by_user_[s.teacher] = s.id;
  live_by_user_[s.student] = s.id;
  sessions_.emplace(s.id, s);
  return s;
}

CardState SessionEngine::advance_card(SessionId id, const UserId& actor, std::size_t to_index,
                                      Timestamp now)
{
  std::lock_guard lock(mutex_);
  Session& s = lookup(id);
  if (s.state == SessionState::Ended)
    fail(Errc::SessionEnded, std::to_string(raw(id)));
  if (!s.participant(actor))
    fail(Errc::NotParticipant, actor);
  if (actor != s.teacher)
    fail(Errc::NotTeacher, actor);
  if (to_index >= s.lesson->size())
    fail(Errc::OutOfRange, std::to_string(to_index) + " not in [0, "
                               + std::to_string(s.lesson->size()) + ")");
  record(Stream::Session, now, json{{"op", "card"}, {"session", raw(id)}, {"index", to_index}});
  s.card_index = to_index;
  return CardState{id, s.card_index, s.lesson->size(), s.lesson->cards[s.card_index]};
}

SessionSummary SessionEngine::finish_locked(Session& s, TerminationCause cause, Timestamp now)
{
  const Timestamp end = std::max(now, s.started_at);
  const Seconds elapsed = end - s.started_at;
  const Seconds billed = std::min(elapsed, s.balance_at_start);
  ledger_.settle_session(s.student_account, s.teacher_account, billed, s.id, end);
  record(Stream::Session, end,
         json{{"op", "end"},
              {"session", raw(s.id)},
              {"cause", to_string(cause)},
              {"elapsed_s", elapsed.count()},
              {"billed_s", billed.count()}});

  GrowthEvent done;
  done.ts = end;
  done.kind = GrowthKind::SessionDone;
  done.user = s.student;
  done.duration_s = elapsed.count();
  done.cause = std::string(to_string(cause));
  done.session = raw(s.id);
  record(Stream::Growth, end, to_json(done));
  for (const UserId* u : {&s.teacher, &s.student})
    {
      GrowthEvent call;
      call.ts = end;
      call.kind = GrowthKind::CallMade;
      call.user = *u;
      call.session = raw(s.id);
      record(Stream::Growth, end, to_json(call));
    }
  GrowthEvent taught;
  taught.ts = end;
  taught.kind = GrowthKind::Taught;
  taught.user = s.teacher;
  taught.session = raw(s.id);
  record(Stream::Growth, end, to_json(taught));

  s.state = SessionState::Ended;
  s.ended_at = end;
  s.cause = cause;
  s.billed = billed;
  live_by_user_.erase(s.teacher);
  live_by_user_.erase(s.student);
  return SessionSummary{s.id, s.teacher, s.student, s.started_at, end, elapsed, billed, cause};
}

std::optional<SessionSummary> SessionEngine::tick(SessionId id, Timestamp now)
{
  std::optional<SessionSummary> out;
  {
    std::lock_guard lock(mutex_);
    Session& s = lookup(id);
    if (s.state == SessionState::Ended)
      fail(Errc::SessionEnded, std::to_string(raw(id)));
    if (now - s.started_at < s.balance_at_start)
      return std::nullopt;
    out = finish_locked(s, TerminationCause::BalanceExhausted,
                        s.started_at + s.balance_at_start);
  }
  matchmaker_.release(out->teacher, out->student, now);
  return out;
}

std::vector<SessionSummary> SessionEngine::tick_all(Timestamp now)
{
  std::vector<SessionSummary> ended;
  {
    std::lock_guard lock(mutex_);
    std::vector<SessionId> live;
    for (const auto& [user, id] : live_by_user_)
      if (user == sessions_.at(id).student)
        live.push_back(id);
    std::sort(live.begin(), live.end());
    for (SessionId id : live)
      {
        Session& s = sessions_.at(id);
        if (now - s.started_at >= s.balance_at_start)
          ended.push_back(finish_locked(s, TerminationCause::BalanceExhausted,
                                        s.started_at + s.balance_at_start));
      }
  }
  for (const auto& summary : ended)
    matchmaker_.release(summary.teacher, summary.student, now);
  return ended;
}

SessionSummary SessionEngine::end_session(SessionId id, TerminationCause cause, Timestamp now)
{
  SessionSummary out;
  {
    std::lock_guard lock(mutex_);
    Session& s = lookup(id);
    if (s.state == SessionState::Ended)
      fail(Errc::SessionEnded, std::to_string(raw(id)));
    // Time beyond the balance is never billed; end at the exhaustion point.
    const Timestamp cap = s.started_at + s.balance_at_start;
    if (now >= cap && cause != TerminationCause::BalanceExhausted)
      out = finish_locked(s, TerminationCause::BalanceExhausted, cap);
    else
      out = finish_locked(s, cause, now);
  }
  matchmaker_.release(out.teacher, out.student, now);
  return out;
}

SessionSummary SessionEngine::hang_up(SessionId id, const UserId& actor, Timestamp now)
{
  TerminationCause cause = TerminationCause::Hangup;
  {
    std::lock_guard lock(mutex_);
    const Session& s = lookup(id);
    if (!s.participant(actor))
      fail(Errc::NotParticipant, actor);
    if (s.card_index + 1 == s.lesson->size())
      cause = TerminationCause::Finished;
  }
  return end_session(id, cause, now);
}

Rating SessionEngine::rate(SessionId id, const UserId& rater, int stars, Timestamp now)
{
  Rating rating;
  {
    std::lock_guard lock(mutex_);
    Session& s = lookup(id);
    if (!s.participant(rater))
      fail(Errc::NotParticipant, rater);
    if (stars < 1 || stars > 5)
      fail(Errc::InvalidStars, std::to_string(stars));
    if (s.state != SessionState::Ended)
      fail(Errc::SessionNotEnded, std::to_string(raw(id)));
    if (s.ratings.contains(rater))
      fail(Errc::AlreadyRated, rater);
    record(Stream::Session, now,
           json{{"op", "rate"}, {"session", raw(id)}, {"rater", rater}, {"stars", stars}});
    s.ratings[rater] = stars;
    rating = Rating{id, rater, s.counterpart(rater), stars};
  }
  matchmaker_.add_rating(rating.ratee, stars);
  return rating;
}

Session SessionEngine::session(SessionId id) const
{
  std::lock_guard lock(mutex_);
  return lookup(id);
}

std::optional<SessionId> SessionEngine::live_session_of(const UserId& user) const
{
  std::lock_guard lock(mutex_);
  auto it = live_by_user_.find(user);
  if (it == live_by_user_.end())
    return std::nullopt;
  return it->second;
}

CardState SessionEngine::card_state(SessionId id) const
{
  std::lock_guard lock(mutex_);
  const Session& s = lookup(id);
  return CardState{id, s.card_index, s.lesson->size(), s.lesson->cards[s.card_index]};
}

std::vector<Session> SessionEngine::sessions() const
{
  std::lock_guard lock(mutex_);
  std::vector<Session> out;
  for (const auto& [id, s] : sessions_)
    out.push_back(s);
  return out;
}

std::size_t SessionEngine::live_count() const
{
  std::lock_guard lock(mutex_);
  return live_by_user_.size() / 2;
}

std::string SessionEngine::canonical_state() const
{
  std::lock_guard lock(mutex_);
  std::map<std::uint64_t, SessionRow> rows;
  for (const auto& [id, s] : sessions_)
    {
      SessionRow r;
      r.id = raw(id);
      r.invitation = raw(s.invitation);
      r.teacher = s.teacher;
      r.student = s.student;
      r.lesson = s.lesson->lesson_id;
      r.card = s.card_index;
      r.ended = s.state == SessionState::Ended;
      r.started = to_epoch(s.started_at);
      r.ended_at = s.ended_at ? to_epoch(*s.ended_at) : 0;
      r.cause = s.cause ? std::string(to_string(*s.cause)) : "";
      r.balance = s.balance_at_start.count();
      r.billed = s.billed.count();
      r.ratings = s.ratings;
      rows.emplace(r.id, std::move(r));
    }
  return format_rows(rows);
}

std::string SessionEngine::canonical_state_from(const EventStore& store)
{
  std::map<std::uint64_t, SessionRow> rows;
  store.for_each(0, [&](const StoredRecord& rec) {
    if (rec.stream != Stream::Session)
      return;
    const json& b = rec.body;
    const std::string op = b.at("op").get<std::string>();
    const std::uint64_t id = b.at("session").get<std::uint64_t>();
    if (op == "start")
      {
        SessionRow r;
        r.id = id;
        r.invitation = b.at("invitation").get<std::uint64_t>();
        r.teacher = b.at("teacher").get<std::string>();
        r.student = b.at("student").get<std::string>();
        r.lesson = b.at("lesson").get<std::string>();
        r.started = to_epoch(rec.ts);
        r.balance = b.at("balance_s").get<std::int64_t>();
        rows[id] = std::move(r);
        return;
      }
    auto it = rows.find(id);
    if (it == rows.end())
      fail(Errc::StorageFailure, "session record before start at offset "
                                     + std::to_string(rec.offset));
    SessionRow& r = it->second;
    if (op == "card")
      r.card = b.at("index").get<std::size_t>();
    else if (op == "end")
      {
        r.ended = true;
        r.ended_at = to_epoch(rec.ts);
        r.cause = b.at("cause").get<std::string>();
        r.billed = b.at("billed_s").get<std::int64_t>();
      }
    else if (op == "rate")
      r.ratings[b.at("rater").get<std::string>()] = b.at("stars").get<int>();
  });
  return format_rows(rows);
}

std::vector<SessionId> SessionEngine::restore(const EventStore& store)
{
  std::vector<std::pair<UserId, int>> ratings;
  std::vector<SessionId> live;
  {
    std::lock_guard lock(mutex_);
    if (!sessions_.empty())
      fail(Errc::InvalidState, "restore needs an empty engine");
    store.for_each(0, [&](const StoredRecord& rec) {
      if (rec.stream != Stream::Session)
        return;
      const json& b = rec.body;
      const std::string op = b.at("op").get<std::string>();
      const SessionId id{b.at("session").get<std::uint64_t>()};
      if (op == "start")
        {
          Session s;
          s.id = id;
          s.invitation = InvitationId{b.at("invitation").get<std::uint64_t>()};
          s.teacher = b.at("teacher").get<std::string>();
          s.student = b.at("student").get<std::string>();
          const auto t = ledger_.find_account(s.teacher);
          const auto st = ledger_.find_account(s.student);
          if (!t || !st)
            fail(Errc::StorageFailure, "session " + std::to_string(raw(id)) + " without accounts");
          s.teacher_account = *t;
          s.student_account = *st;
          s.lesson = lessons_.by_id(b.at("lesson").get<std::string>());
          s.started_at = rec.ts;
          s.balance_at_start = Seconds{b.at("balance_s").get<std::int64_t>()};
          live_by_user_[s.teacher] = id;
          live_by_user_[s.student] = id;
          sessions_[id] = std::move(s);
          next_id_ = std::max(next_id_, raw(id) + 1);
          return;
        }
      Session& s = lookup(id);
      if (op == "card")
        s.card_index = b.at("index").get<std::size_t>();
      else if (op == "end")
        {
          s.state = SessionState::Ended;
          s.ended_at = rec.ts;
          s.cause = parse_cause(b.at("cause").get<std::string>());
          s.billed = Seconds{b.at("billed_s").get<std::int64_t>()};
          live_by_user_.erase(s.teacher);
          live_by_user_.erase(s.student);
        }
      else if (op == "rate")
        {
          const UserId rater = b.at("rater").get<std::string>();
          const int stars = b.at("stars").get<int>();
          s.ratings[rater] = stars;
          ratings.emplace_back(s.counterpart(rater), stars);
        }
    });
    for (const auto& [user, id] : live_by_user_)
      if (user == sessions_.at(id).student)
        live.push_back(id);
  }
  for (const auto& [ratee, stars] : ratings)
    matchmaker_.add_rating(ratee, stars);
  std::sort(live.begin(), live.end());
  return live;
}

} // namespace tandem
