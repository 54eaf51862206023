#pragma once

#include "tandem/platform.hpp"
#include "tandem/protocol.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tandem {

using ConnectionId = std::uint64_t;

struct Outbound
{
  ConnectionId to = 0;
  std::string frame;
};

/// What the transport must do after one hub call: send `frames` in order,
/// then close every connection in `closed`.
struct Effects
{
  std::vector<Outbound> frames;
  std::vector<ConnectionId> closed;

  void append(Effects&& other);
};

struct HubConfig
{
  /// Silence longer than this is treated as transport loss.
  Seconds heartbeat_timeout{30};
};

/// Transport-independent signaling endpoint. Feeds client frames into the
/// platform and routes the resulting envelopes, including opaque RTC relays
/// between the two participants of a live session.
///
/// Each connection is in one of two states. Unauthenticated connections can
/// only ever receive AUTH_OK or ERROR. Every accepted client frame yields
/// either a state change or at least one outbound envelope. Client seq must
/// strictly increase per connection; server seq does likewise.
class SignalingHub
{
public:
  SignalingHub(Platform& platform, HubConfig cfg = {});
  SignalingHub(const SignalingHub&) = delete;
  SignalingHub& operator=(const SignalingHub&) = delete;

  ConnectionId connect(Timestamp now);
  Effects receive(ConnectionId conn, std::string_view frame, Timestamp now);
  /// Transport loss or close; a live session of the user ends as DISCONNECT.
  Effects disconnect(ConnectionId conn, Timestamp now);
  /// Invitation expiry, balance exhaustion and heartbeat timeouts.
  Effects tick(Timestamp now);

  std::optional<UserId> user_of(ConnectionId conn) const;
  std::optional<ConnectionId> connection_of(const UserId& user) const;
  std::size_t connection_count() const;

private:
  struct Connection
  {
    ConnectionId id = 0;
    std::optional<UserId> user;
    std::optional<std::uint64_t> last_seq;
    std::uint64_t out_seq = 0;
    Timestamp last_seen{};
  };

  void handle(Effects& fx, Connection& c, const Envelope& env, Timestamp now);
  void relay(Effects& fx, const UserId& user, const Envelope& env);
  void send(Effects& fx, ConnectionId conn, MessageType type, json payload);
  void send_raw(Effects& fx, ConnectionId conn, const Envelope& env);
  void send_user(Effects& fx, const UserId& user, MessageType type, json payload);
  void drop_locked(Effects& fx, ConnectionId conn, Timestamp now);
  void invitation_result(Effects& fx, const Invitation& inv);
  void session_ended(Effects& fx, const SessionSummary& s, Timestamp now);
  void card_state(Effects& fx, SessionId id);

  Platform& platform_;
  HubConfig cfg_;
  mutable std::mutex mutex_;
  std::map<ConnectionId, Connection> conns_;
  std::map<UserId, ConnectionId> by_user_;
  ConnectionId next_conn_ = 1;
};

} // namespace tandem
