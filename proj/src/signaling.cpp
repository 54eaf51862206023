#include "tandem/signaling.hpp"

#include "tandem/error.hpp"

namespace tandem {

namespace {

json roles_json(RoleSet roles)
{
  json out = json::array();
  for (Role r : {Role::Teacher, Role::Student})
    if (roles.contains(r))
      out.push_back(to_string(r));
  return out;
}

RoleSet parse_roles(const json& arr)
{
  RoleSet roles;
  for (const auto& r : arr)
    {
      if (!r.is_string())
        fail(Errc::SchemaViolation, "roles must be strings");
      roles.insert(parse_role(r.get<std::string>()));
    }
  return roles;
}

} // namespace

void Effects::append(Effects&& other)
{
  for (auto& f : other.frames)
    frames.push_back(std::move(f));
  closed.insert(closed.end(), other.closed.begin(), other.closed.end());
}

SignalingHub::SignalingHub(Platform& platform, HubConfig cfg) : platform_(platform), cfg_(cfg) {}

ConnectionId SignalingHub::connect(Timestamp now)
{
  std::lock_guard lock(mutex_);
  const ConnectionId id = next_conn_++;
  conns_[id] = Connection{id, std::nullopt, std::nullopt, 0, now};
  return id;
}

std::optional<UserId> SignalingHub::user_of(ConnectionId conn) const
{
  std::lock_guard lock(mutex_);
  auto it = conns_.find(conn);
  return it == conns_.end() ? std::nullopt : it->second.user;
}

std::optional<ConnectionId> SignalingHub::connection_of(const UserId& user) const
{
  std::lock_guard lock(mutex_);
  auto it = by_user_.find(user);
  if (it == by_user_.end())
    return std::nullopt;
  return it->second;
}

std::size_t SignalingHub::connection_count() const
{
  std::lock_guard lock(mutex_);
  return conns_.size();
}

void SignalingHub::send(Effects& fx, ConnectionId conn, MessageType type, json payload)
{
  Envelope env;
  env.type = type;
  env.payload = std::move(payload);
  send_raw(fx, conn, env);
}

void SignalingHub::send_raw(Effects& fx, ConnectionId conn, const Envelope& env)
{
  auto it = conns_.find(conn);
  if (it == conns_.end())
    return;
  Envelope out = env;
  out.seq = ++it->second.out_seq;
  fx.frames.push_back({conn, encode(out)});
}

void SignalingHub::send_user(Effects& fx, const UserId& user, MessageType type, json payload)
{
  auto it = by_user_.find(user);
  if (it != by_user_.end())
    send(fx, it->second, type, std::move(payload));
}

void SignalingHub::invitation_result(Effects& fx, const Invitation& inv)
{
  json p{{"invitation_id", raw(inv.id)}, {"state", to_string(inv.state)}};
  if (inv.session)
    p["session_id"] = raw(*inv.session);
  send_user(fx, inv.from, MessageType::InviteResult, p);
  send_user(fx, inv.to, MessageType::InviteResult, p);
}

void SignalingHub::card_state(Effects& fx, SessionId id)
{
  const Session s = platform_.engine().session(id);
  const LessonCard& card = s.lesson->cards[s.card_index];
  for (const UserId* u : {&s.teacher, &s.student})
    {
      const bool teacher = *u == s.teacher;
      const auto [lang, prompt] =
          pick_prompt(teacher ? card.teacher_prompt : card.student_prompt,
                      platform_.matchmaker().profile(*u).native_language);
      send_user(fx, *u, MessageType::CardState,
                json{{"session_id", raw(id)},
                     {"card_index", s.card_index},
                     {"card_count", s.lesson->size()},
                     {"role", teacher ? "TEACHER" : "STUDENT"},
                     {"content", card.content},
                     {"prompt", prompt},
                     {"prompt_language", lang},
                     {"lesson_id", s.lesson->lesson_id},
                     {"peer", s.counterpart(*u)}});
    }
}

void SignalingHub::session_ended(Effects& fx, const SessionSummary& s, Timestamp now)
{
  for (const UserId* u : {&s.teacher, &s.student})
    {
      send_user(fx, *u, MessageType::SessionEnd,
                json{{"session_id", raw(s.id)},
                     {"cause", to_string(s.cause)},
                     {"elapsed_s", s.elapsed.count()},
                     {"billed_s", s.billed.count()},
                     {"balance_s", platform_.balance(*u).count()}});
      platform_.audit_presence(*u, now);
    }
}

void SignalingHub::drop_locked(Effects& fx, ConnectionId conn, Timestamp now)
{
  auto it = conns_.find(conn);
  if (it == conns_.end())
    return;
  const std::optional<UserId> user = it->second.user;
  conns_.erase(it);
  fx.closed.push_back(conn);
  if (!user)
    return;
  auto bu = by_user_.find(*user);
  if (bu == by_user_.end() || bu->second != conn)
    return; // superseded by a newer connection
  by_user_.erase(bu);

  if (const auto live = platform_.engine().live_session_of(*user))
    {
      try
        {
          session_ended(fx, platform_.engine().end_session(*live, TerminationCause::Disconnect, now),
                        now);
        }
      catch (const Error&)
        {
          // Already ended by a concurrent path; nothing to bill.
        }
    }
  const PresenceChange change =
      platform_.matchmaker().set_presence(*user, PresenceStatus::Offline, {}, now);
  platform_.audit_presence(*user, now);
  for (const Invitation& inv : change.canceled)
    invitation_result(fx, inv);
}

Effects SignalingHub::disconnect(ConnectionId conn, Timestamp now)
{
  std::lock_guard lock(mutex_);
  Effects fx;
  drop_locked(fx, conn, now);
  return fx;
}

Effects SignalingHub::tick(Timestamp now)
{
  std::lock_guard lock(mutex_);
  Effects fx;
  for (const Invitation& inv : platform_.matchmaker().expire_invites(now))
    invitation_result(fx, inv);
  for (const SessionSummary& s : platform_.engine().tick_all(now))
    session_ended(fx, s, now);
  std::vector<ConnectionId> silent;
  for (const auto& [id, c] : conns_)
    if (now - c.last_seen > cfg_.heartbeat_timeout)
      silent.push_back(id);
  for (ConnectionId id : silent)
    drop_locked(fx, id, now);
  return fx;
}

Effects SignalingHub::receive(ConnectionId conn, std::string_view frame, Timestamp now)
{
  std::lock_guard lock(mutex_);
  Effects fx;
  auto it = conns_.find(conn);
  if (it == conns_.end())
    return fx;
  Connection& c = it->second;
  c.last_seen = std::max(c.last_seen, now);

  std::uint64_t ref_seq = 0;
  try
    {
      const Envelope env = decode(frame, Direction::ToServer);
      ref_seq = env.seq;
      if (c.last_seq && env.seq <= *c.last_seq)
        fail(Errc::SeqRegression,
             std::to_string(env.seq) + " after " + std::to_string(*c.last_seq));
      c.last_seq = env.seq;
      if (!c.user && env.type != MessageType::Auth)
        fail(Errc::NotAuthenticated, std::string(to_string(env.type)) + " before AUTH");
      handle(fx, c, env, now);
    }
  catch (const Error& e)
    {
      send(fx, conn, MessageType::Error,
           json{{"code", code_name(e.code())}, {"detail", e.detail()}, {"ref_seq", ref_seq}});
    }
  catch (const json::exception& e)
    {
      send(fx, conn, MessageType::Error,
           json{{"code", code_name(Errc::SchemaViolation)}, {"detail", e.what()},
                {"ref_seq", ref_seq}});
    }
  return fx;
}

void SignalingHub::relay(Effects& fx, const UserId& user, const Envelope& env)
{
  SessionEngine& engine = platform_.engine();
  std::optional<SessionId> target;
  if (const auto sid = env.payload.find("session_id"); sid != env.payload.end())
    {
      const Session s = engine.session(SessionId{sid->get<std::uint64_t>()});
      if (!s.participant(user))
        fail(Errc::NotParticipant, user);
      if (s.state != SessionState::Live)
        fail(Errc::NoLiveSession, "session " + std::to_string(raw(s.id)) + " has ended");
      target = s.id;
    }
  else
    target = engine.live_session_of(user);
  if (!target)
    fail(Errc::NoLiveSession, user);
  const UserId peer = engine.session(*target).counterpart(user);
  auto pc = by_user_.find(peer);
  if (pc == by_user_.end())
    fail(Errc::RecipientUnavailable, peer + " is not connected");
  send_raw(fx, pc->second, env);
}

void SignalingHub::handle(Effects& fx, Connection& c, const Envelope& env, Timestamp now)
{
  const json& p = env.payload;
  Matchmaker& mm = platform_.matchmaker();
  SessionEngine& engine = platform_.engine();

  if (env.type == MessageType::Auth)
    {
      if (c.user)
        fail(Errc::AlreadyAuthenticated, *c.user);
      const auto user = platform_.authenticate(p.at("token").get<std::string>());
      if (!user)
        fail(Errc::AuthFailed, "unknown token");
      if (auto old = by_user_.find(*user); old != by_user_.end())
        {
          // Newest connection wins; the old one is closed without teardown.
          conns_.erase(old->second);
          fx.closed.push_back(old->second);
        }
      c.user = *user;
      by_user_[*user] = c.id;
      const UserProfile prof = mm.profile(*user);
      json ok{{"user_id", *user},
              {"balance_s", platform_.balance(*user).count()},
              {"native_language", prof.native_language},
              {"learning_language", prof.learning_language},
              {"funnel_variant", to_string(platform_.funnel_variant(*user))}};
      if (const auto live = engine.live_session_of(*user))
        ok["session_id"] = raw(*live);
      send(fx, c.id, MessageType::AuthOk, std::move(ok));
      platform_.mark_active(*user, now);
      return;
    }

  const UserId user = *c.user;
  switch (env.type)
    {
    case MessageType::Presence:
      {
        const PresenceStatus status = parse_presence_status(p.at("status").get<std::string>());
        const RoleSet roles = p.contains("roles") ? parse_roles(p.at("roles")) : RoleSet{};
        if (status == PresenceStatus::Offline)
          if (const auto live = engine.live_session_of(user))
            session_ended(fx, engine.hang_up(*live, user, now), now);
        const PresenceRecord before = mm.presence(user);
        const PresenceChange change = mm.set_presence(user, status, roles, now);
        if (change.record.status != before.status || change.record.roles != before.roles)
          platform_.audit_presence(user, now);
        for (const Invitation& inv : change.canceled)
          invitation_result(fx, inv);
        return;
      }
    case MessageType::RosterReq:
      {
        const Language lang = p.at("language").get<std::string>();
        const Role role = parse_role(p.at("role").get<std::string>());
        json users = json::array();
        for (const PresenceRecord& rec : mm.roster(lang, role))
          {
            if (rec.user == user)
              continue;
            const UserProfile prof = mm.profile(rec.user);
            const auto avg = prof.rating_avg();
            users.push_back(json{{"user_id", rec.user},
                                 {"native_language", prof.native_language},
                                 {"learning_language", prof.learning_language},
                                 {"roles", roles_json(rec.roles)},
                                 {"rating_avg", avg ? json(*avg) : json(nullptr)},
                                 {"since", to_epoch(rec.since)}});
          }
        send(fx, c.id, MessageType::Roster,
             json{{"language", lang}, {"role", to_string(role)}, {"users", std::move(users)}});
        return;
      }
    case MessageType::Invite:
      {
        if (p.value("kind", "LESSON") == "FRIEND")
          {
            const FunnelVariant v = parse_variant(p.at("variant").get<std::string>());
            if (v != platform_.funnel_variant(user))
              fail(Errc::SchemaViolation, "variant does not match the assigned one");
            platform_.record_funnel(user, parse_funnel_action(p.at("action").get<std::string>()),
                                    p.value("count", std::uint64_t{1}), now);
            return;
          }
        if (p.value("kind", "LESSON") != "LESSON")
          fail(Errc::SchemaViolation, "unknown invite kind");
        const Invitation inv = mm.send_invite(user, p.at("to").get<std::string>(),
                                              parse_role(p.at("role").get<std::string>()),
                                              p.at("language").get<std::string>(),
                                              p.at("level").get<std::string>(), now);
        send_user(fx, inv.to, MessageType::Invite,
                  json{{"invitation_id", raw(inv.id)},
                       {"from", inv.from},
                       {"role", to_string(inv.recipient_role)},
                       {"language", inv.language},
                       {"level", inv.level},
                       {"created_at", to_epoch(inv.created_at)}});
        send(fx, c.id, MessageType::InviteResult,
             json{{"invitation_id", raw(inv.id)}, {"state", to_string(inv.state)}});
        return;
      }
    case MessageType::InviteResult:
      {
        const InvitationId id{p.at("invitation_id").get<std::uint64_t>()};
        const Decision d = parse_decision(p.at("decision").get<std::string>());
        const InviteResponse res =
            mm.respond_invite(id, user, d, now, [&](const Invitation& inv) {
              return engine.start_session(inv, now).id;
            });
        invitation_result(fx, res.invitation);
        for (const Invitation& inv : res.canceled)
          invitation_result(fx, inv);
        if (res.invitation.session)
          {
            card_state(fx, *res.invitation.session);
            platform_.audit_presence(res.invitation.from, now);
            platform_.audit_presence(res.invitation.to, now);
          }
        return;
      }
    case MessageType::RtcOffer:
    case MessageType::RtcAnswer:
    case MessageType::RtcIce: relay(fx, user, env); return;
    case MessageType::CardAdvance:
      {
        const auto live = engine.live_session_of(user);
        if (!live)
          fail(Errc::NoLiveSession, user);
        engine.advance_card(*live, user, p.at("to_index").get<std::size_t>(), now);
        card_state(fx, *live);
        return;
      }
    case MessageType::SessionEnd:
      {
        const auto live = engine.live_session_of(user);
        if (p.contains("session_id"))
          {
            const SessionId want{p.at("session_id").get<std::uint64_t>()};
            if (!engine.session(want).participant(user))
              fail(Errc::NotParticipant, user);
            if (live != want)
              fail(Errc::SessionEnded, std::to_string(raw(want)));
          }
        if (!live)
          fail(Errc::NoLiveSession, user);
        session_ended(fx, engine.hang_up(*live, user, now), now);
        return;
      }
    case MessageType::Rate:
      {
        // Out-of-range values collapse to 0 so the engine reports them in order.
        const std::int64_t stars = p.at("stars").get<std::int64_t>();
        const int clamped = stars < 1 || stars > 5 ? 0 : static_cast<int>(stars);
        const Rating r =
            engine.rate(SessionId{p.at("session_id").get<std::uint64_t>()}, user, clamped, now);
        send(fx, c.id, MessageType::Rate,
             json{{"session_id", raw(r.session)}, {"stars", r.stars}, {"ratee", r.ratee}});
        return;
      }
    default: fail(Errc::SchemaViolation, std::string(to_string(env.type)) + " is server-only");
    }
}

} // namespace tandem
