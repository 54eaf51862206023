#include "tandem/protocol.hpp"

#include "tandem/error.hpp"

#include <array>
#include <initializer_list>
#include <utility>

namespace tandem {

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 15> kTypes{{
    {MessageType::Auth, "AUTH"},
    {MessageType::AuthOk, "AUTH_OK"},
    {MessageType::Presence, "PRESENCE"},
    {MessageType::RosterReq, "ROSTER_REQ"},
    {MessageType::Roster, "ROSTER"},
    {MessageType::Invite, "INVITE"},
    {MessageType::InviteResult, "INVITE_RESULT"},
    {MessageType::RtcOffer, "RTC_OFFER"},
    {MessageType::RtcAnswer, "RTC_ANSWER"},
    {MessageType::RtcIce, "RTC_ICE"},
    {MessageType::CardAdvance, "CARD_ADVANCE"},
    {MessageType::CardState, "CARD_STATE"},
    {MessageType::SessionEnd, "SESSION_END"},
    {MessageType::Rate, "RATE"},
    {MessageType::Error, "ERROR"},
}};

enum class Kind { String, Uint, Int, Bool, Object, Array };

struct Field
{
  std::string_view name;
  Kind kind;
  bool required = true;
};

bool matches(const json& v, Kind k)
{
  switch (k)
    {
    case Kind::String: return v.is_string();
    case Kind::Uint: return v.is_number_unsigned();
    case Kind::Int: return v.is_number_integer();
    case Kind::Bool: return v.is_boolean();
    case Kind::Object: return v.is_object();
    case Kind::Array: return v.is_array();
    }
  return false;
}

void check(MessageType type, const json& p, std::initializer_list<Field> fields)
{
  for (const Field& f : fields)
    {
      const auto it = p.find(f.name);
      if (it == p.end())
        {
          if (f.required)
            fail(Errc::SchemaViolation,
                 std::string(to_string(type)) + " requires '" + std::string(f.name) + "'");
          continue;
        }
      if (!matches(*it, f.kind))
        fail(Errc::SchemaViolation,
             std::string(to_string(type)) + " field '" + std::string(f.name) + "' has wrong type");
    }
}

[[noreturn]] void wrong_direction(MessageType type, Direction dir)
{
  fail(Errc::SchemaViolation, std::string(to_string(type))
                                  + (dir == Direction::ToServer ? " is server-only"
                                                                : " is client-only"));
}

void validate_to_server(MessageType t, const json& p)
{
  using enum Kind;
  switch (t)
    {
    case MessageType::Auth: check(t, p, {{"token", String}}); break;
    case MessageType::Presence: check(t, p, {{"status", String}, {"roles", Array, false}}); break;
    case MessageType::RosterReq: check(t, p, {{"language", String}, {"role", String}}); break;
    case MessageType::Invite:
      check(t, p, {{"kind", String, false}});
      if (p.value("kind", "LESSON") == "FRIEND")
        check(t, p, {{"variant", String}, {"action", String}, {"count", Uint, false}});
      else
        check(t, p, {{"to", String}, {"role", String}, {"language", String}, {"level", String}});
      break;
    case MessageType::InviteResult:
      check(t, p, {{"invitation_id", Uint}, {"decision", String}});
      break;
    case MessageType::RtcOffer:
    case MessageType::RtcAnswer:
    case MessageType::RtcIce: check(t, p, {{"session_id", Uint, false}}); break;
    case MessageType::CardAdvance: check(t, p, {{"to_index", Uint}}); break;
    case MessageType::SessionEnd: check(t, p, {{"session_id", Uint, false}}); break;
    case MessageType::Rate: check(t, p, {{"session_id", Uint}, {"stars", Int}}); break;
    case MessageType::AuthOk:
    case MessageType::Roster:
    case MessageType::CardState:
    case MessageType::Error: wrong_direction(t, Direction::ToServer);
    }
}

void validate_to_client(MessageType t, const json& p)
{
  using enum Kind;
  switch (t)
    {
    case MessageType::AuthOk:
      check(t, p,
            {{"user_id", String},
             {"balance_s", Int},
             {"native_language", String},
             {"learning_language", String},
             {"funnel_variant", String}});
      break;
    case MessageType::Roster:
      check(t, p, {{"language", String}, {"role", String}, {"users", Array}});
      break;
    case MessageType::Invite:
      check(t, p,
            {{"invitation_id", Uint},
             {"from", String},
             {"role", String},
             {"language", String},
             {"level", String}});
      break;
    case MessageType::InviteResult:
      check(t, p, {{"invitation_id", Uint}, {"state", String}, {"session_id", Uint, false}});
      break;
    case MessageType::RtcOffer:
    case MessageType::RtcAnswer:
    case MessageType::RtcIce: break;
    case MessageType::CardState:
      check(t, p,
            {{"session_id", Uint},
             {"card_index", Uint},
             {"card_count", Uint},
             {"role", String},
             {"content", String},
             {"prompt", String},
             {"lesson_id", String},
             {"peer", String}});
      break;
    case MessageType::SessionEnd:
      check(t, p,
            {{"session_id", Uint},
             {"cause", String},
             {"elapsed_s", Int},
             {"billed_s", Int},
             {"balance_s", Int}});
      break;
    case MessageType::Rate:
      check(t, p, {{"session_id", Uint}, {"stars", Int}, {"ratee", String}});
      break;
    case MessageType::Error:
      check(t, p, {{"code", String}, {"detail", String}, {"ref_seq", Uint}});
      break;
    case MessageType::Auth:
    case MessageType::Presence:
    case MessageType::RosterReq:
    case MessageType::CardAdvance: wrong_direction(t, Direction::ToClient);
    }
}

// Minimal scanner over text already accepted by the JSON parser.
struct Scanner
{
  std::string_view s;
  std::size_t i = 0;

  void ws()
  {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r'))
      ++i;
  }
  std::string_view string()
  {
    const std::size_t start = i++;
    while (i < s.size() && s[i] != '"')
      i += s[i] == '\\' ? 2 : 1;
    ++i;
    return s.substr(start, i - start);
  }
  std::string_view value()
  {
    const std::size_t start = i;
    if (s[i] == '"')
      return string();
    if (s[i] == '{' || s[i] == '[')
      {
        int depth = 0;
        do
          {
            if (s[i] == '"')
              {
                string();
                continue;
              }
            if (s[i] == '{' || s[i] == '[')
              ++depth;
            else if (s[i] == '}' || s[i] == ']')
              --depth;
            ++i;
          }
        while (depth > 0 && i < s.size());
        return s.substr(start, i - start);
      }
    while (i < s.size() && s[i] != ',' && s[i] != '}' && s[i] != ']' && s[i] != ' '
           && s[i] != '\t' && s[i] != '\n' && s[i] != '\r')
      ++i;
    return s.substr(start, i - start);
  }
};

} // namespace

std::string_view to_string(MessageType t) noexcept
{
  for (const auto& [type, name] : kTypes)
    if (type == t)
      return name;
  return "ERROR";
}

std::optional<MessageType> parse_message_type(std::string_view s) noexcept
{
  for (const auto& [type, name] : kTypes)
    if (name == s)
      return type;
  return std::nullopt;
}

void validate_payload(MessageType type, Direction dir, const json& payload)
{
  if (!payload.is_object())
    fail(Errc::SchemaViolation, "payload must be an object");
  if (dir == Direction::ToServer)
    validate_to_server(type, payload);
  else
    validate_to_client(type, payload);
}

std::optional<std::string_view> member_span(std::string_view text, std::string_view key)
{
  Scanner sc{text};
  sc.ws();
  if (sc.i >= text.size() || text[sc.i] != '{')
    return std::nullopt;
  ++sc.i;
  std::optional<std::string_view> found;
  for (;;)
    {
      sc.ws();
      if (sc.i >= text.size() || text[sc.i] == '}')
        return found;
      const std::string_view k = sc.string();
      sc.ws();
      ++sc.i; // ':'
      sc.ws();
      const std::string_view v = sc.value();
      // Last duplicate wins, as in the parser.
      if (k.size() == key.size() + 2 && k.substr(1, key.size()) == key)
        found = v;
      sc.ws();
      if (sc.i < text.size() && text[sc.i] == ',')
        ++sc.i;
    }
}

std::string encode(const Envelope& env)
{
  std::string out = "{\"v\":";
  out += std::to_string(env.v);
  out += ",\"type\":\"";
  out += to_string(env.type);
  out += "\",\"seq\":";
  out += std::to_string(env.seq);
  out += ",\"payload\":";
  out += env.raw_payload.empty() ? env.payload.dump() : env.raw_payload;
  out += '}';
  return out;
}

Envelope decode(std::string_view frame, Direction dir)
{
  json doc;
  try
    {
      doc = json::parse(frame);
    }
  catch (const json::exception& e)
    {
      fail(Errc::MalformedFrame, e.what());
    }
  if (!doc.is_object())
    fail(Errc::MalformedFrame, "frame is not a JSON object");

  const auto v = doc.find("v");
  if (v == doc.end() || !v->is_number_integer())
    fail(Errc::MalformedFrame, "missing or non-integer 'v'");
  if (v->get<std::int64_t>() != kProtocolVersion)
    fail(Errc::UnsupportedVersion, "version " + v->dump());

  const auto type = doc.find("type");
  if (type == doc.end() || !type->is_string())
    fail(Errc::MalformedFrame, "missing 'type'");
  const auto mt = parse_message_type(type->get_ref<const std::string&>());
  if (!mt)
    fail(Errc::UnknownType, "type '" + type->get<std::string>() + "'");

  const auto seq = doc.find("seq");
  if (seq == doc.end() || !seq->is_number_unsigned())
    fail(Errc::MalformedFrame, "missing or non-unsigned 'seq'");

  const auto payload = doc.find("payload");
  if (payload == doc.end())
    fail(Errc::SchemaViolation, "missing 'payload'");
  validate_payload(*mt, dir, *payload);

  Envelope env;
  env.type = *mt;
  env.seq = seq->get<std::uint64_t>();
  env.payload = std::move(*payload);
  if (const auto span = member_span(frame, "payload"))
    env.raw_payload = std::string(*span);
  return env;
}

} // namespace tandem
