#include "tandem/growth_event.hpp"

#include "tandem/error.hpp"

#include <array>
#include <utility>

namespace tandem {

namespace {

constexpr std::array<std::pair<GrowthKind, std::string_view>, 9> kKinds{{
    {GrowthKind::Register, "REGISTER"},
    {GrowthKind::InviteSent, "INVITE_SENT"},
    {GrowthKind::InvitedRegister, "INVITED_REGISTER"},
    {GrowthKind::ActiveDay, "ACTIVE_DAY"},
    {GrowthKind::CallMade, "CALL_MADE"},
    {GrowthKind::SessionDone, "SESSION_DONE"},
    {GrowthKind::Taught, "TAUGHT"},
    {GrowthKind::Purchased, "PURCHASED"},
    {GrowthKind::Funnel, "FUNNEL"},
}};

constexpr std::array<std::pair<FunnelAction, std::string_view>, 4> kActions{{
    {FunnelAction::Shown, "SHOWN"},
    {FunnelAction::Invited, "INVITED"},
    {FunnelAction::Dismissed, "DISMISSED"},
    {FunnelAction::Declined, "DECLINED"},
}};

} // namespace

std::string_view to_string(GrowthKind k) noexcept
{
  for (const auto& [kind, name] : kKinds)
    if (kind == k)
      return name;
  return "ACTIVE_DAY";
}

GrowthKind parse_growth_kind(std::string_view s)
{
  for (const auto& [kind, name] : kKinds)
    if (name == s)
      return kind;
  fail(Errc::ParseError, "unknown growth kind '" + std::string(s) + "'");
}

std::string_view to_string(FunnelVariant v) noexcept { return v == FunnelVariant::A ? "A" : "B"; }

FunnelVariant parse_variant(std::string_view s)
{
  if (s == "A")
    return FunnelVariant::A;
  if (s == "B")
    return FunnelVariant::B;
  fail(Errc::SchemaViolation, "unknown funnel variant '" + std::string(s) + "'");
}

std::string_view to_string(FunnelAction a) noexcept
{
  for (const auto& [act, name] : kActions)
    if (act == a)
      return name;
  return "SHOWN";
}

FunnelAction parse_funnel_action(std::string_view s)
{
  for (const auto& [act, name] : kActions)
    if (name == s)
      return act;
  fail(Errc::SchemaViolation, "unknown funnel action '" + std::string(s) + "'");
}

json to_json(const GrowthEvent& e)
{
  json j;
  j["kind"] = to_string(e.kind);
  j["user"] = e.user;
  if (e.count != 1)
    j["count"] = e.count;
  if (e.kind == GrowthKind::SessionDone)
    j["duration_s"] = e.duration_s;
  if (e.cause)
    j["cause"] = *e.cause;
  if (e.session)
    j["session"] = *e.session;
  if (e.called != 0)
    j["called"] = e.called;
  if (e.inviter)
    j["inviter"] = *e.inviter;
  if (e.variant)
    j["variant"] = to_string(*e.variant);
  if (e.action)
    j["action"] = to_string(*e.action);
  return j;
}

GrowthEvent growth_event_from_json(Timestamp ts, const json& body)
{
  GrowthEvent e;
  e.ts = ts;
  e.kind = parse_growth_kind(body.at("kind").get<std::string>());
  e.user = body.value("user", std::string{});
  e.count = body.value("count", std::uint64_t{1});
  e.duration_s = body.value("duration_s", std::int64_t{0});
  if (body.contains("cause"))
    e.cause = body["cause"].get<std::string>();
  if (body.contains("session"))
    e.session = body["session"].get<std::uint64_t>();
  e.called = body.value("called", std::uint64_t{0});
  if (body.contains("inviter"))
    e.inviter = body["inviter"].get<std::string>();
  if (body.contains("variant"))
    e.variant = parse_variant(body["variant"].get<std::string>());
  if (body.contains("action"))
    e.action = parse_funnel_action(body["action"].get<std::string>());
  return e;
}

std::vector<GrowthEvent> growth_events(const EventStore& store)
{
  std::vector<GrowthEvent> out;
  store.for_each(0, [&](const StoredRecord& rec) {
    if (rec.stream == Stream::Growth)
      out.push_back(growth_event_from_json(rec.ts, rec.body));
  });
  return out;
}

} // namespace tandem
