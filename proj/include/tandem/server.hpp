#pragma once

#include "tandem/signaling.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace tandem {

struct ServerOptions
{
  std::string host = "127.0.0.1";
  /// 0 picks an ephemeral port; see WsServer::port().
  std::uint16_t port = 8443;
  /// Source of `now` for the hub; the system clock unless overridden.
  std::function<Timestamp()> clock;
};

/// "host:port" -> (host, port). Throws ConfigInvalid.
std::pair<std::string, std::uint16_t> parse_listen(const std::string& text);

/// WebSocket transport for a SignalingHub: one text message per envelope.
/// Runs on a single thread, so hub calls never overlap and each
/// connection's outbound frames leave in the order the hub produced them.
class WsServer
{
public:
  /// Binds and listens immediately; throws StorageFailure if that fails.
  WsServer(SignalingHub& hub, ServerOptions opts);
  ~WsServer();
  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  std::uint16_t port() const noexcept;
  /// Serves until stop(); ticks the hub once per second.
  void run();
  /// Safe from any thread.
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace tandem
