#include "tandem/server.hpp"

#include "tandem/error.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <charconv>
#include <deque>
#include <map>

namespace tandem {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

std::pair<std::string, std::uint16_t> parse_listen(const std::string& text)
{
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    fail(Errc::ConfigInvalid, "listen address must be host:port, got '" + text + "'");
  const std::string host = text.substr(0, colon);
  unsigned port = 0;
  const char* first = text.data() + colon + 1;
  const char* last = text.data() + text.size();
  const auto [end, ec] = std::from_chars(first, last, port);
  if (ec != std::errc{} || end != last || port > 65535)
    fail(Errc::ConfigInvalid, "bad port in '" + text + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

namespace {

constexpr std::size_t kMaxMessage = 1 << 20;

} // namespace

struct WsServer::Impl
{
  class Peer;

  Impl(SignalingHub& h, ServerOptions o) : hub(h), opts(std::move(o)), acceptor(ioc), timer(ioc) {}

  Timestamp now() const
  {
    if (opts.clock)
      return opts.clock();
    return std::chrono::floor<Seconds>(std::chrono::system_clock::now());
  }

  void apply(Effects fx);
  void lost(ConnectionId id);
  void accept();
  void schedule_tick();

  // Declared first so it outlives every handler that references this Impl.
  net::io_context ioc{1};
  SignalingHub& hub;
  ServerOptions opts;
  tcp::acceptor acceptor;
  net::steady_timer timer;
  std::map<ConnectionId, std::weak_ptr<Peer>> peers;
};

class WsServer::Impl::Peer : public std::enable_shared_from_this<Peer>
{
public:
  Peer(tcp::socket socket, Impl& impl) : ws_(std::move(socket)), impl_(impl) {}

  void start()
  {
    ws_.read_message_max(kMaxMessage);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (!ec)
        self->on_open();
    });
  }

  void queue(std::string frame)
  {
    outbox_.push_back(std::move(frame));
    if (outbox_.size() == 1)
      write();
  }

  // The hub has already forgotten this connection; flush, then close.
  void close_after_flush()
  {
    closing_ = true;
    if (outbox_.empty())
      close();
  }

private:
  void on_open()
  {
    id_ = impl_.hub.connect(impl_.now());
    impl_.peers[id_] = weak_from_this();
    read();
  }

  void read()
  {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec)
  {
    if (ec)
      {
        impl_.lost(id_);
        return;
      }
    std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    if (!closing_)
      impl_.apply(impl_.hub.receive(id_, text, impl_.now()));
    read();
  }

  void write()
  {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->on_write(ec);
                    });
  }

  void on_write(beast::error_code ec)
  {
    if (ec)
      {
        impl_.lost(id_);
        return;
      }
    outbox_.pop_front();
    if (!outbox_.empty())
      write();
    else if (closing_)
      close();
  }

  void close()
  {
    ws_.async_close(websocket::close_code::normal,
                    [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  Impl& impl_;
  ConnectionId id_ = 0;
  bool closing_ = false;
};

void WsServer::Impl::apply(Effects fx)
{
  for (Outbound& o : fx.frames)
    if (const auto it = peers.find(o.to); it != peers.end())
      if (const auto peer = it->second.lock())
        peer->queue(std::move(o.frame));
  for (ConnectionId c : fx.closed)
    if (const auto it = peers.find(c); it != peers.end())
      {
        if (const auto peer = it->second.lock())
          peer->close_after_flush();
        peers.erase(it);
      }
}

void WsServer::Impl::lost(ConnectionId id)
{
  // Connections the hub already closed are no longer in the map.
  if (peers.erase(id) != 0)
    apply(hub.disconnect(id, now()));
}

void WsServer::Impl::accept()
{
  acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
    if (ec)
      return;
    std::make_shared<Peer>(std::move(socket), *this)->start();
    accept();
  });
}

void WsServer::Impl::schedule_tick()
{
  timer.expires_after(std::chrono::seconds{1});
  timer.async_wait([this](beast::error_code ec) {
    if (ec)
      return;
    apply(hub.tick(now()));
    schedule_tick();
  });
}

WsServer::WsServer(SignalingHub& hub, ServerOptions opts)
    : impl_(std::make_unique<Impl>(hub, std::move(opts)))
{
  beast::error_code ec;
  const auto addr = net::ip::make_address(impl_->opts.host, ec);
  if (ec)
    fail(Errc::ConfigInvalid, "bad listen host '" + impl_->opts.host + "'");
  const tcp::endpoint ep{addr, impl_->opts.port};
  auto& a = impl_->acceptor;
  a.open(ep.protocol(), ec);
  if (!ec)
    a.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec)
    a.bind(ep, ec);
  if (!ec)
    a.listen(net::socket_base::max_listen_connections, ec);
  if (ec)
    fail(Errc::StorageFailure, "cannot listen on " + impl_->opts.host + ":"
                                   + std::to_string(impl_->opts.port) + ": " + ec.message());
}

WsServer::~WsServer() = default;

std::uint16_t WsServer::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }

void WsServer::run()
{
  impl_->accept();
  impl_->schedule_tick();
  impl_->ioc.run();
}

void WsServer::stop() { impl_->ioc.stop(); }

} // namespace tandem
