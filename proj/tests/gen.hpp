#pragma once

// Hand-rolled generators shared by the property tests and the acceptance run.

#include "tandem/protocol.hpp"

#include <cmath>
#include <random>
#include <string>

namespace tandem::test {

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len = 12)
{
  // Mix of ASCII, JSON escapes and multi-byte UTF-8.
  static const char* const pieces[] = {"a", "Z", "0", " ", "\"", "\\", "/", "\n", "\t",
                                       "\x01", "{", "}", ",", ":", "é", "ж", "日", "🎧"};
  std::string s;
  const std::size_t n = rng() % (max_len + 1);
  for (std::size_t k = 0; k < n; ++k)
    s += pieces[rng() % std::size(pieces)];
  return s;
}

inline json random_value(std::mt19937_64& rng, int depth = 0)
{
  switch (rng() % (depth > 2 ? 5 : 7))
    {
    case 0: return nullptr;
    case 1: return rng() % 2 == 0;
    case 2: return static_cast<std::int64_t>(rng()) >> (rng() % 64);
    case 3:
      return std::ldexp(static_cast<double>(static_cast<std::int32_t>(rng())),
                        -static_cast<int>(rng() % 40));
    case 4: return random_text(rng);
    case 5:
      {
        json a = json::array();
        for (std::size_t k = rng() % 4; k > 0; --k)
          a.push_back(random_value(rng, depth + 1));
        return a;
      }
    default:
      {
        json o = json::object();
        for (std::size_t k = rng() % 4; k > 0; --k)
          o["x" + random_text(rng, 5)] = random_value(rng, depth + 1);
        return o;
      }
    }
}

/// A schema-valid envelope of a random type legal in direction `dir`, with
/// random extra payload members.
inline Envelope random_envelope(std::mt19937_64& rng, Direction dir)
{
  using MT = MessageType;
  static const MT to_server[] = {MT::Auth,        MT::Presence, MT::RosterReq, MT::Invite,
                                 MT::InviteResult, MT::RtcOffer, MT::RtcAnswer, MT::RtcIce,
                                 MT::CardAdvance, MT::SessionEnd, MT::Rate};
  static const MT to_client[] = {MT::AuthOk,   MT::Roster,    MT::Invite,    MT::InviteResult,
                                 MT::RtcOffer, MT::RtcAnswer, MT::RtcIce,    MT::CardState,
                                 MT::SessionEnd, MT::Rate,    MT::Error};
  Envelope e;
  e.type = dir == Direction::ToServer ? to_server[rng() % std::size(to_server)]
                                      : to_client[rng() % std::size(to_client)];
  e.seq = rng() >> (rng() % 64);
  json p = json::object();
  for (std::size_t k = rng() % 3; k > 0; --k)
    p["extra_" + random_text(rng, 4)] = random_value(rng);
  auto str = [&] { return random_text(rng); };
  auto uint = [&] { return static_cast<std::uint64_t>(rng() >> (rng() % 64)); };
  auto sint = [&] { return static_cast<std::int64_t>(rng()) >> (rng() % 64); };
  const bool up = dir == Direction::ToServer;
  switch (e.type)
    {
    case MT::Auth: p["token"] = str(); break;
    case MT::Presence:
      p["status"] = rng() % 2 ? "ONLINE" : "OFFLINE";
      p["roles"] = json::array({"TEACHER"});
      break;
    case MT::RosterReq:
      p["language"] = str();
      p["role"] = "TEACHER";
      break;
    case MT::Invite:
      if (up && rng() % 3 == 0)
        {
          p["kind"] = "FRIEND";
          p["variant"] = "A";
          p["action"] = "SHOWN";
        }
      else
        {
          p[up ? "to" : "from"] = str();
          if (!up)
            p["invitation_id"] = uint();
          p["role"] = "TEACHER";
          p["language"] = str();
          p["level"] = "A1";
        }
      break;
    case MT::InviteResult:
      p["invitation_id"] = uint();
      p[up ? "decision" : "state"] = up ? "ACCEPT" : "ACCEPTED";
      break;
    case MT::RtcOffer:
    case MT::RtcAnswer:
    case MT::RtcIce:
      p["sdp"] = random_value(rng);
      if (rng() % 2)
        p["session_id"] = uint();
      break;
    case MT::CardAdvance: p["to_index"] = uint(); break;
    case MT::SessionEnd:
      if (!up)
        {
          p["session_id"] = uint();
          p["cause"] = "HANGUP";
          p["elapsed_s"] = sint();
          p["billed_s"] = sint();
          p["balance_s"] = sint();
        }
      break;
    case MT::Rate:
      p["session_id"] = uint();
      p["stars"] = sint();
      if (!up)
        p["ratee"] = str();
      break;
    case MT::AuthOk:
      p["user_id"] = str();
      p["balance_s"] = sint();
      p["native_language"] = str();
      p["learning_language"] = str();
      p["funnel_variant"] = "B";
      break;
    case MT::Roster:
      p["language"] = str();
      p["role"] = "STUDENT";
      p["users"] = json::array({random_value(rng)});
      break;
    case MT::CardState:
      p["session_id"] = uint();
      p["card_index"] = uint();
      p["card_count"] = uint();
      p["role"] = "TEACHER";
      p["content"] = str();
      p["prompt"] = str();
      p["lesson_id"] = str();
      p["peer"] = str();
      break;
    case MT::Error:
      p["code"] = str();
      p["detail"] = str();
      p["ref_seq"] = uint();
      break;
    }
  e.payload = std::move(p);
  return e;
}

} // namespace tandem::test
