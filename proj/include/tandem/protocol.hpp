#pragma once

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tandem {

using json = nlohmann::json;

inline constexpr int kProtocolVersion = 1;

enum class MessageType {
  Auth,
  AuthOk,
  Presence,
  RosterReq,
  Roster,
  Invite,
  InviteResult,
  RtcOffer,
  RtcAnswer,
  RtcIce,
  CardAdvance,
  CardState,
  SessionEnd,
  Rate,
  Error,
};

/// Who sent a frame; several types carry different payloads each way.
enum class Direction { ToServer, ToClient };

std::string_view to_string(MessageType t) noexcept;
std::optional<MessageType> parse_message_type(std::string_view s) noexcept;
constexpr bool is_rtc(MessageType t) noexcept
{
  return t == MessageType::RtcOffer || t == MessageType::RtcAnswer || t == MessageType::RtcIce;
}

/// One protocol message. A text frame carries exactly one envelope:
///
///   {"v":1,"type":"<TYPE>","seq":<uint>,"payload":{...}}
///
/// `raw_payload` holds the payload's exact bytes as received; encode() emits
/// them verbatim so relayed payloads are byte-identical. Locally built
/// envelopes leave it empty and are encoded from `payload`.
struct Envelope
{
  int v = kProtocolVersion;
  MessageType type = MessageType::Error;
  std::uint64_t seq = 0;
  json payload = json::object();
  std::string raw_payload;

  /// Equality of the decoded content; raw bytes are not compared.
  bool operator==(const Envelope& o) const
  {
    return v == o.v && type == o.type && seq == o.seq && payload == o.payload;
  }
};

std::string encode(const Envelope& env);

/// Parses and validates one frame. Throws Error with MalformedFrame,
/// UnsupportedVersion, UnknownType or SchemaViolation.
Envelope decode(std::string_view frame, Direction dir);

/// Checks required fields and their JSON types for `type` in direction `dir`.
void validate_payload(MessageType type, Direction dir, const json& payload);

/// Byte span of the value of top-level member `key` in a JSON object text,
/// or nullopt. Assumes `text` is already known to be valid JSON.
std::optional<std::string_view> member_span(std::string_view text, std::string_view key);

} // namespace tandem
