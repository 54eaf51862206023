#include "tandem/simulation.hpp"

#include "tandem/error.hpp"
#include "tandem/growth_event.hpp"
#include "tandem/protocol.hpp"
#include "tandem/signaling.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

namespace tandem {

namespace {

void check(bool ok, const char* field)
{
  if (!ok)
    fail(Errc::ConfigInvalid, field);
}

bool unit(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

} // namespace

void SimConfig::validate() const
{
  const BotBehavior& b = behavior;
  check(bot_count >= 2, "bots");
  check(days >= 1, "days");
  check(unit(variant_split), "variant_split");
  check(unit(b.accept_probability), "accept_probability");
  check(std::isfinite(b.invite_propensity) && b.invite_propensity >= 0, "invite_propensity");
  check(std::isfinite(b.session_median_minutes) && b.session_median_minutes > 0,
        "session_median_minutes");
  check(std::isfinite(b.session_dispersion) && b.session_dispersion >= 0, "session_dispersion");
  check(unit(b.daily_return_probability), "daily_return_probability");
  check(unit(b.teach_willingness), "teach_willingness");
  check(std::isfinite(b.visit_minutes) && b.visit_minutes > 0 && b.visit_minutes <= 360,
        "visit_minutes");
  check(unit(b.friend_dialog_probability), "friend_dialog_probability");
  check(unit(b.friend_invite_probability_a), "friend_invite_probability_a");
  check(unit(b.friend_invite_probability_b), "friend_invite_probability_b");
  check(unit(b.friend_conversion), "friend_conversion");
}

namespace {

template <class T> void take(const json& obj, const char* key, T& out)
{
  const auto it = obj.find(key);
  if (it == obj.end())
    return;
  try
    {
      out = it->get<T>();
    }
  catch (const json::exception&)
    {
      fail(Errc::ConfigInvalid, key);
    }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known)
{
  for (const auto& [key, _] : obj.items())
    {
      bool found = false;
      for (const char* k : known)
        found = found || key == k;
      if (!found)
        fail(Errc::ConfigInvalid, "unknown key " + key);
    }
}

} // namespace

SimConfig sim_config_from_json(const json& j)
{
  if (!j.is_object())
    fail(Errc::ConfigInvalid, "config must be an object");
  reject_unknown(j, {"seed", "bots", "days", "variant_split", "start", "behavior"});
  SimConfig c;
  take(j, "seed", c.seed);
  take(j, "bots", c.bot_count);
  take(j, "days", c.days);
  take(j, "variant_split", c.variant_split);
  if (j.contains("start"))
    {
      std::string s;
      take(j, "start", s);
      try
        {
          c.start = parse_date(s);
        }
      catch (const Error&)
        {
          fail(Errc::ConfigInvalid, "start");
        }
    }
  if (j.contains("behavior"))
    {
      const json& b = j.at("behavior");
      if (!b.is_object())
        fail(Errc::ConfigInvalid, "behavior");
      reject_unknown(b, {"accept_probability", "invite_propensity", "session_median_minutes",
                         "session_dispersion", "daily_return_probability", "teach_willingness",
                         "visit_minutes", "friend_dialog_probability",
                         "friend_invite_probability_a", "friend_invite_probability_b",
                         "friend_conversion", "payers"});
      BotBehavior& o = c.behavior;
      take(b, "accept_probability", o.accept_probability);
      take(b, "invite_propensity", o.invite_propensity);
      take(b, "session_median_minutes", o.session_median_minutes);
      take(b, "session_dispersion", o.session_dispersion);
      take(b, "daily_return_probability", o.daily_return_probability);
      take(b, "teach_willingness", o.teach_willingness);
      take(b, "visit_minutes", o.visit_minutes);
      take(b, "friend_dialog_probability", o.friend_dialog_probability);
      take(b, "friend_invite_probability_a", o.friend_invite_probability_a);
      take(b, "friend_invite_probability_b", o.friend_invite_probability_b);
      take(b, "friend_conversion", o.friend_conversion);
      take(b, "payers", o.payers);
    }
  c.validate();
  return c;
}

json to_json(const SimConfig& c)
{
  const BotBehavior& b = c.behavior;
  return json{{"seed", c.seed},
              {"bots", c.bot_count},
              {"days", c.days},
              {"variant_split", c.variant_split},
              {"start", format_date(c.start)},
              {"behavior",
               {{"accept_probability", b.accept_probability},
                {"invite_propensity", b.invite_propensity},
                {"session_median_minutes", b.session_median_minutes},
                {"session_dispersion", b.session_dispersion},
                {"daily_return_probability", b.daily_return_probability},
                {"teach_willingness", b.teach_willingness},
                {"visit_minutes", b.visit_minutes},
                {"friend_dialog_probability", b.friend_dialog_probability},
                {"friend_invite_probability_a", b.friend_invite_probability_a},
                {"friend_invite_probability_b", b.friend_invite_probability_b},
                {"friend_conversion", b.friend_conversion},
                {"payers", b.payers}}}};
}

namespace {

const std::vector<Language> kLanguages{"en", "es", "ru", "de"};
constexpr Seconds kHeartbeat{15};
constexpr Seconds kHubTick{10};
// Students stop inviting below this balance rather than buy a stub session.
constexpr Seconds kMinBalanceToLearn{600};

struct Bot
{
  UserId id;
  Language native, learning;
  bool teaches = false;
  std::string token;

  std::optional<ConnectionId> conn;
  std::uint64_t seq = 0;
  // Bumped on every disconnect; scheduled actions of older visits are void.
  std::uint64_t generation = 0;
  bool leaving = false;
  Seconds balance{0};
  FunnelVariant variant = FunnelVariant::A;
  std::optional<std::uint64_t> pending_invite;
  std::optional<std::uint64_t> session;
  std::set<std::uint64_t> seen_sessions;
  std::size_t card_index = 0, card_count = 0;
  bool teacher_in_session = false;
};

class Simulation
{
public:
  Simulation(const SimConfig& cfg, EventStore& store, LessonLibrary lessons)
      : cfg_(cfg),
        platform_(PlatformConfig{{}, {}, cfg.variant_split}, store, std::move(lessons)),
        hub_(platform_),
        rng_(cfg.seed),
        now_(cfg.start),
        end_(cfg.start + std::chrono::days{cfg.days})
  {
  }

  SimSummary run();

private:
  using Action = std::function<void()>;
  struct Item
  {
    Timestamp at;
    std::uint64_t seq;
    Action fn;
  };
  struct Later
  {
    bool operator()(const Item& a, const Item& b) const
    {
      return std::tie(a.at, a.seq) > std::tie(b.at, b.seq);
    }
  };

  void post(Timestamp at, Action fn) { queue_.push(Item{at, next_item_++, std::move(fn)}); }
  // Runs `fn` only while the bot is still in the same visit.
  void post_visit(std::size_t b, Timestamp at, std::function<void(Bot&)> fn)
  {
    const std::uint64_t gen = bots_[b].generation;
    post(at, [this, b, gen, fn = std::move(fn)] {
      Bot& bot = bots_[b];
      if (bot.conn && bot.generation == gen)
        fn(bot);
    });
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool chance(double p) { return uniform() < p; }
  Seconds uniform_seconds(std::int64_t lo, std::int64_t hi)
  {
    return Seconds{std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_)};
  }

  std::size_t add_bot(std::optional<UserId> invited_by);
  void plan_day(std::int64_t day);
  void start_visit(std::size_t b);
  void end_visit(std::size_t b);
  void go_offline(std::size_t b);
  void invite_attempt(std::size_t b);
  void heartbeat(std::size_t b);
  void friend_dialog(std::size_t b);
  void hub_tick();

  void send(Bot& b, MessageType type, json payload);
  void dispatch(Effects fx);
  void deliver(const Outbound& o);
  void on_frame(std::size_t b, const Envelope& env);
  void on_card(std::size_t b, const json& p);
  void advance(std::size_t b, std::uint64_t sid, Seconds pace);
  std::int64_t session_length_s();

  SimConfig cfg_;
  Platform platform_;
  SignalingHub hub_;
  std::mt19937_64 rng_;
  Timestamp now_;
  Timestamp end_;
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
  std::uint64_t next_item_ = 0;
  std::vector<Bot> bots_;
  std::map<ConnectionId, std::size_t> by_conn_;
  std::uint64_t frames_in_ = 0, frames_out_ = 0, errors_ = 0;
};

std::size_t Simulation::add_bot(std::optional<UserId> invited_by)
{
  const std::size_t k = bots_.size();
  char name[32];
  std::snprintf(name, sizeof name, "bot-%04zu", k + 1);
  Bot b;
  b.id = name;
  b.native = kLanguages[k % kLanguages.size()];
  const std::size_t shift = 1 + static_cast<std::size_t>(rng_() % (kLanguages.size() - 1));
  b.learning = kLanguages[(k + shift) % kLanguages.size()];
  b.teaches = chance(cfg_.behavior.teach_willingness);
  b.token = "tok-" + b.id + "-" + std::to_string(rng_());
  UserProfile prof;
  prof.id = b.id;
  prof.native_language = b.native;
  prof.learning_language = b.learning;
  prof.invited_by = std::move(invited_by);
  const Account acct = platform_.register_user(prof, b.token, now_);
  b.balance = acct.balance;
  b.variant = platform_.funnel_variant(b.id);
  bots_.push_back(std::move(b));
  return k;
}

std::int64_t Simulation::session_length_s()
{
  const BotBehavior& bh = cfg_.behavior;
  const double median_s = bh.session_median_minutes * 60.0;
  std::lognormal_distribution<double> dist(std::log(median_s), bh.session_dispersion);
  return std::max<std::int64_t>(30, std::llround(dist(rng_)));
}

void Simulation::plan_day(std::int64_t day)
{
  for (std::size_t b = 0; b < bots_.size(); ++b)
    if (day == 0 || chance(cfg_.behavior.daily_return_probability))
      {
        // Evening visits overlap enough for partners to find each other.
        const Timestamp at = now_ + std::chrono::hours{17} + uniform_seconds(0, 6 * 3600 - 1);
        post(at, [this, b] { start_visit(b); });
      }
  const Timestamp next = now_ + std::chrono::days{1};
  if (next < end_)
    post(next, [this, day] { plan_day(day + 1); });
}

void Simulation::start_visit(std::size_t b)
{
  Bot& bot = bots_[b];
  if (bot.conn)
    return;
  if (cfg_.behavior.payers && bot.balance < kMinBalanceToLearn)
    platform_.purchase(bot.id, Seconds{1800}, "sim-" + bot.id + "-" + std::to_string(to_epoch(now_)),
                       now_);
  const ConnectionId c = hub_.connect(now_);
  bot.conn = c;
  bot.seq = 0;
  bot.leaving = false;
  bot.pending_invite.reset();
  by_conn_[c] = b;
  send(bot, MessageType::Auth, json{{"token", bot.token}});
  json roles = json::array({"STUDENT"});
  if (bot.teaches)
    roles.push_back("TEACHER");
  send(bot, MessageType::Presence, json{{"status", "ONLINE"}, {"roles", roles}});

  const BotBehavior& bh = cfg_.behavior;
  post_visit(b, now_ + kHeartbeat, [this, b](Bot&) { heartbeat(b); });
  if (bh.invite_propensity > 0)
    {
      const double mean_gap = bh.visit_minutes * 60.0 / bh.invite_propensity;
      const auto gap = std::exponential_distribution<double>(1.0 / mean_gap)(rng_);
      post_visit(b, now_ + Seconds{1 + std::llround(gap)}, [this, b](Bot&) { invite_attempt(b); });
    }
  if (chance(bh.friend_dialog_probability))
    post_visit(b, now_ + uniform_seconds(1, 120), [this, b](Bot&) { friend_dialog(b); });
  const auto visit = Seconds{std::llround(bh.visit_minutes * 60.0)};
  post_visit(b, now_ + visit, [this, b](Bot&) { end_visit(b); });
}

void Simulation::heartbeat(std::size_t b)
{
  Bot& bot = bots_[b];
  json roles = json::array({"STUDENT"});
  if (bot.teaches)
    roles.push_back("TEACHER");
  send(bot, MessageType::Presence, json{{"status", "ONLINE"}, {"roles", roles}});
  post_visit(b, now_ + kHeartbeat, [this, b](Bot&) { heartbeat(b); });
}

void Simulation::invite_attempt(std::size_t b)
{
  Bot& bot = bots_[b];
  if (!bot.leaving && !bot.session && !bot.pending_invite && bot.balance >= kMinBalanceToLearn)
    send(bot, MessageType::RosterReq, json{{"language", bot.learning}, {"role", "TEACHER"}});
  const BotBehavior& bh = cfg_.behavior;
  const double mean_gap = bh.visit_minutes * 60.0 / bh.invite_propensity;
  const auto gap = std::exponential_distribution<double>(1.0 / mean_gap)(rng_);
  post_visit(b, now_ + Seconds{1 + std::llround(gap)}, [this, b](Bot&) { invite_attempt(b); });
}

void Simulation::friend_dialog(std::size_t b)
{
  Bot& bot = bots_[b];
  const std::string variant{to_string(bot.variant)};
  send(bot, MessageType::Invite,
       json{{"kind", "FRIEND"}, {"variant", variant}, {"action", "SHOWN"}});
  const BotBehavior& bh = cfg_.behavior;
  const double p = bot.variant == FunnelVariant::A ? bh.friend_invite_probability_a
                                                   : bh.friend_invite_probability_b;
  if (!chance(p))
    {
      const char* action = bot.variant == FunnelVariant::A ? "DISMISSED" : "DECLINED";
      send(bot, MessageType::Invite,
           json{{"kind", "FRIEND"}, {"variant", variant}, {"action", action}});
      return;
    }
  const std::uint64_t count = 1 + rng_() % 3;
  send(bot, MessageType::Invite,
       json{{"kind", "FRIEND"}, {"variant", variant}, {"action", "INVITED"}, {"count", count}});
  const UserId inviter = bot.id;
  const Timestamp tomorrow = day_start(now_) + std::chrono::days{1};
  for (std::uint64_t f = 0; f < count; ++f)
    if (chance(bh.friend_conversion) && tomorrow < end_)
      {
        const Timestamp at = tomorrow + uniform_seconds(0, 17 * 3600 - 1);
        post(at, [this, inviter] {
          const std::size_t nb = add_bot(inviter);
          const Timestamp visit = now_ + uniform_seconds(60, 6 * 3600);
          post(visit, [this, nb] { start_visit(nb); });
        });
      }
}

void Simulation::end_visit(std::size_t b)
{
  Bot& bot = bots_[b];
  bot.leaving = true;
  // A bot in a lesson stays until the session ends.
  if (!bot.session)
    go_offline(b);
}

void Simulation::go_offline(std::size_t b)
{
  Bot& bot = bots_[b];
  if (!bot.conn)
    return;
  send(bot, MessageType::Presence, json{{"status", "OFFLINE"}});
  const ConnectionId c = *bot.conn;
  bot.conn.reset();
  ++bot.generation;
  bot.session.reset();
  bot.pending_invite.reset();
  by_conn_.erase(c);
  dispatch(hub_.disconnect(c, now_));
}

void Simulation::hub_tick()
{
  dispatch(hub_.tick(now_));
  const Timestamp next = now_ + kHubTick;
  if (next < end_)
    post(next, [this] { hub_tick(); });
}

void Simulation::send(Bot& b, MessageType type, json payload)
{
  if (!b.conn)
    return;
  Envelope env;
  env.type = type;
  env.seq = ++b.seq;
  env.payload = std::move(payload);
  ++frames_in_;
  dispatch(hub_.receive(*b.conn, encode(env), now_));
}

// Outbound frames reach bots after every action already due at this instant,
// like a network hop of zero latency.
void Simulation::dispatch(Effects fx)
{
  for (Outbound& o : fx.frames)
    {
      ++frames_out_;
      post(now_, [this, o = std::move(o)] { deliver(o); });
    }
  for (ConnectionId c : fx.closed)
    post(now_, [this, c] {
      const auto it = by_conn_.find(c);
      if (it == by_conn_.end())
        return;
      Bot& bot = bots_[it->second];
      bot.conn.reset();
      ++bot.generation;
      bot.session.reset();
      by_conn_.erase(it);
    });
}

void Simulation::deliver(const Outbound& o)
{
  const auto it = by_conn_.find(o.to);
  if (it == by_conn_.end())
    return;
  on_frame(it->second, decode(o.frame, Direction::ToClient));
}

void Simulation::on_frame(std::size_t b, const Envelope& env)
{
  Bot& bot = bots_[b];
  const json& p = env.payload;
  switch (env.type)
    {
    case MessageType::AuthOk: bot.balance = Seconds{p.at("balance_s").get<std::int64_t>()}; return;
    case MessageType::Roster:
      {
        const json& users = p.at("users");
        if (users.empty() || bot.session || bot.pending_invite || bot.leaving)
          return;
        const json& pick = users.at(rng_() % users.size());
        send(bot, MessageType::Invite,
             json{{"to", pick.at("user_id")},
                  {"role", "TEACHER"},
                  {"language", bot.learning},
                  {"level", "A1"}});
        return;
      }
    case MessageType::Invite:
      {
        const std::uint64_t id = p.at("invitation_id").get<std::uint64_t>();
        const bool accept = chance(cfg_.behavior.accept_probability);
        post_visit(b, now_ + uniform_seconds(5, 20), [this, id, accept](Bot& me) {
          if (me.session)
            return;
          send(me, MessageType::InviteResult,
               json{{"invitation_id", id}, {"decision", accept ? "ACCEPT" : "REJECT"}});
        });
        return;
      }
    case MessageType::InviteResult:
      {
        const std::uint64_t id = p.at("invitation_id").get<std::uint64_t>();
        const std::string state = p.at("state").get<std::string>();
        if (state == "PENDING")
          bot.pending_invite = id;
        else if (bot.pending_invite == id)
          bot.pending_invite.reset();
        return;
      }
    case MessageType::CardState: on_card(b, p); return;
    case MessageType::RtcOffer:
      send(bot, MessageType::RtcAnswer,
           json{{"session_id", p.value("session_id", std::uint64_t{0})}, {"sdp", "answer"}});
      return;
    case MessageType::RtcAnswer:
      send(bot, MessageType::RtcIce,
           json{{"session_id", p.value("session_id", std::uint64_t{0})},
                {"candidate", "candidate:1 1 udp 2122260223 10.0.0.1 50000 typ host"}});
      return;
    case MessageType::SessionEnd:
      {
        const std::uint64_t sid = p.at("session_id").get<std::uint64_t>();
        bot.balance = Seconds{p.at("balance_s").get<std::int64_t>()};
        if (bot.session == sid)
          bot.session.reset();
        if (chance(0.9))
          {
            const int stars = 3 + static_cast<int>(rng_() % 3);
            post_visit(b, now_ + Seconds{3}, [this, sid, stars](Bot& me) {
              send(me, MessageType::Rate, json{{"session_id", sid}, {"stars", stars}});
            });
          }
        if (bot.leaving)
          post_visit(b, now_ + Seconds{5}, [this, b](Bot&) { go_offline(b); });
        return;
      }
    case MessageType::Error: ++errors_; return;
    default: return;
    }
}

void Simulation::on_card(std::size_t b, const json& p)
{
  Bot& bot = bots_[b];
  const std::uint64_t sid = p.at("session_id").get<std::uint64_t>();
  bot.session = sid;
  bot.card_index = p.at("card_index").get<std::size_t>();
  bot.card_count = p.at("card_count").get<std::size_t>();
  bot.teacher_in_session = p.at("role").get<std::string>() == "TEACHER";
  if (!bot.seen_sessions.insert(sid).second)
    return;

  if (!bot.teacher_in_session)
    {
      // The student decides when the call ends.
      const Seconds length{session_length_s()};
      post_visit(b, now_ + length, [this, sid](Bot& me) {
        if (me.session == sid)
          send(me, MessageType::SessionEnd, json{{"session_id", sid}});
      });
      send(bot, MessageType::RtcOffer, json{{"session_id", sid}, {"sdp", "offer"}});
      return;
    }
  // The teacher paces the cards so the deck lasts about one median call.
  const auto pace = Seconds{std::max<std::int64_t>(
      10, std::llround(cfg_.behavior.session_median_minutes * 60.0 /
                       static_cast<double>(std::max<std::size_t>(1, bot.card_count))))};
  post_visit(b, now_ + pace, [this, b, sid, pace](Bot&) { advance(b, sid, pace); });
}

void Simulation::advance(std::size_t b, std::uint64_t sid, Seconds pace)
{
  Bot& bot = bots_[b];
  if (bot.session != sid || bot.card_index + 1 >= bot.card_count)
    return;
  send(bot, MessageType::CardAdvance, json{{"to_index", bot.card_index + 1}});
  post_visit(b, now_ + pace, [this, b, sid, pace](Bot&) { advance(b, sid, pace); });
}

SimSummary Simulation::run()
{
  for (std::uint32_t k = 0; k < cfg_.bot_count; ++k)
    add_bot(std::nullopt);
  post(now_, [this] { plan_day(0); });
  post(now_ + kHubTick, [this] { hub_tick(); });

  while (!queue_.empty() && queue_.top().at < end_)
    {
      Item item = queue_.top();
      queue_.pop();
      now_ = item.at;
      item.fn();
    }
  // Close whatever is still connected; live sessions end as DISCONNECT.
  now_ = end_;
  for (std::size_t b = 0; b < bots_.size(); ++b)
    if (bots_[b].conn)
      {
        const ConnectionId c = *bots_[b].conn;
        bots_[b].conn.reset();
        by_conn_.erase(c);
        hub_.disconnect(c, now_);
      }

  SimSummary s;
  s.registered = bots_.size();
  s.sessions = platform_.engine().sessions().size();
  const std::vector<GrowthEvent> events = growth_events(platform_.store());
  const ConnectionStats cs = connection_stats(events, Window::all());
  s.connects = cs.connects;
  if (const auto m = cs.mean_minutes())
    s.mean_minutes = m->value();
  s.frames_in = frames_in_;
  s.frames_out = frames_out_;
  s.errors = errors_;
  s.total_balance = platform_.ledger().total_balance();
  s.total_minted = platform_.ledger().total_minted();
  s.records = platform_.store().size();
  s.log_digest = platform_.store().digest();
  s.state_hash = platform_.state_hash();
  s.weekly = weekly_series(events);
  return s;
}

} // namespace

SimSummary run_simulation(const SimConfig& cfg, EventStore& store, LessonLibrary lessons)
{
  cfg.validate();
  if (store.size() != 0)
    fail(Errc::InvalidState, "simulation needs an empty store");
  Simulation sim(cfg, store, std::move(lessons));
  return sim.run();
}

std::string format_summary(const SimSummary& s)
{
  std::ostringstream out;
  char buf[64];
  out << "registered: " << s.registered << '\n';
  out << "sessions: " << s.sessions << '\n';
  out << "connects: " << s.connects << '\n';
  if (s.mean_minutes)
    {
      std::snprintf(buf, sizeof buf, "%.2f", *s.mean_minutes);
      out << "mean_minutes: " << buf << '\n';
    }
  else
    out << "mean_minutes: n/a\n";
  out << "frames: " << s.frames_in << " in, " << s.frames_out << " out, " << s.errors
      << " errors\n";
  out << "balance_total_s: " << s.total_balance.count() << '\n';
  out << "minted_total_s: " << s.total_minted.count() << '\n';
  out << "records: " << s.records << '\n';
  out << "log_sha256: " << s.log_digest << '\n';
  out << "state_sha256: " << s.state_hash << '\n';
  out << "weekly:\n" << series_csv(s.weekly);
  return out.str();
}

} // namespace tandem
