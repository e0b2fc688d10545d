// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/service.hpp"

#include <sys/socket.h>

#include <cerrno>
#include <condition_variable>
#include <mutex>
#include <random>
#include <thread>

#include "dprt/error.hpp"
#include "dprt/websocket.hpp"
#include "json.hpp"
#include "net.hpp"

namespace dprt {

namespace {

using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

enum class Command : std::uint8_t
{
  Stop = 0,
  Render = 1,
  KeepAlive = 2
};

Bytes encodeCommand(Command cmd, const CameraUpdateMessage *cam = nullptr)
{
  Bytes out;
  ByteWriter w(out);
  w.u8(static_cast<std::uint8_t>(cmd));
  if (cam) {
    for (const Vec3 *v : {&cam->position, &cam->viewDir, &cam->up}) {
      w.f64(v->x);
      w.f64(v->y);
      w.f64(v->z);
    }
    w.f64(cam->fovY);
    w.u32(cam->requestWidth);
    w.u32(cam->requestHeight);
  }
  return out;
}

std::pair<Command, CameraUpdateMessage> decodeCommand(ByteView data)
{
  ByteReader r(data);
  const auto cmd = static_cast<Command>(r.u8());
  CameraUpdateMessage cam;
  if (cmd == Command::Render) {
    for (Vec3 *v : {&cam.position, &cam.viewDir, &cam.up}) {
      v->x = r.f64();
      v->y = r.f64();
      v->z = r.f64();
    }
    cam.fovY = r.f64();
    cam.requestWidth = r.u32();
    cam.requestHeight = r.u32();
  }
  return {cmd, cam};
}

// Returns 0 on EOF, -1 on timeout; throws on error.
ssize_t recvSome(int fd, std::uint8_t *buf, size_t n, Clock::time_point deadline)
{
  if (!net::waitReadable(fd, deadline))
    return -1;
  for (;;) {
    const ssize_t got = ::recv(fd, buf, n, 0);
    if (got >= 0)
      return got;
    if (errno == EINTR)
      continue;
    if (errno == ECONNRESET)
      return 0;
    throw TransportError("recv failed: errno " + std::to_string(errno));
  }
}

// Reads an HTTP head through the blank line. Bytes past it go to `rest`.
std::optional<std::string> readHead(int fd, Clock::time_point deadline, Bytes &rest)
{
  std::string head;
  std::uint8_t buf[1024];
  while (head.size() < 16384) {
    const ssize_t n = recvSome(fd, buf, sizeof buf, deadline);
    if (n <= 0)
      return std::nullopt;
    head.append(reinterpret_cast<const char *>(buf), static_cast<size_t>(n));
    const size_t end = head.find("\r\n\r\n");
    if (end != std::string::npos) {
      rest.assign(head.begin() + static_cast<std::ptrdiff_t>(end + 4), head.end());
      head.resize(end + 4);
      return head;
    }
  }
  return std::nullopt;
}

// One accepted client connection, raw DPRT or WebSocket.
class ClientStream
{
 public:
  ClientStream(net::Socket sock, bool websocket)
      : m_sock(std::move(sock)), m_ws(websocket), m_parser(true)
  {}

  void send(const Message &msg)
  {
    const Bytes bytes = encodeMessage(msg);
    sendFrame(m_ws ? ws::encodeFrame(ws::Opcode::Binary, bytes) : bytes);
  }

  // Appends DPRT-stream bytes to `out`. False once the peer is gone.
  // Returns true with nothing appended on timeout.
  bool read(Bytes &out, Clock::time_point deadline)
  {
    if (!m_pending.empty()) {
      ingest(m_pending, out);
      m_pending.clear();
      if (m_closed)
        return false;
    }
    std::uint8_t buf[65536];
    const ssize_t n = recvSome(m_sock.fd(), buf, sizeof buf, deadline);
    if (n == 0)
      return false;
    if (n < 0)
      return true;
    ingest(ByteView(buf, static_cast<size_t>(n)), out);
    return !m_closed;
  }

  void setPending(Bytes b)
  {
    m_pending = std::move(b);
  }
  void shutdown()
  {
    m_sock.shutdown();
  }

 private:
  void sendFrame(ByteView bytes)
  {
    std::lock_guard lock(m_writeMutex);
    net::writeAll(m_sock.fd(), bytes);
  }

  void ingest(ByteView data, Bytes &out)
  {
    if (!m_ws) {
      out.insert(out.end(), data.begin(), data.end());
      return;
    }
    m_parser.feed(data);
    while (auto f = m_parser.next()) {
      switch (f->opcode) {
      case ws::Opcode::Ping:
        sendFrame(ws::encodeFrame(ws::Opcode::Pong, f->payload));
        break;
      case ws::Opcode::Close:
        try {
          sendFrame(ws::encodeFrame(ws::Opcode::Close, {}));
        } catch (const TransportError &) {
        }
        m_closed = true;
        return;
      case ws::Opcode::Pong:
        break;
      default:
        out.insert(out.end(), f->payload.begin(), f->payload.end());
      }
    }
  }

  net::Socket m_sock;
  bool m_ws;
  ws::FrameParser m_parser;
  Bytes m_pending;
  bool m_closed{false};
  std::mutex m_writeMutex;
};

// Tells raw DPRT clients from WebSocket upgrades by their first bytes. A
// client that stays silent is treated as raw.
std::unique_ptr<ClientStream> openStream(net::Socket sock, std::chrono::milliseconds detect)
{
  const auto deadline = Clock::now() + detect;
  char peek[4] = {};
  ssize_t have = 0;
  while (have < 4 && net::waitReadable(sock.fd(), deadline)) {
    const ssize_t n = ::recv(sock.fd(), peek, sizeof peek, MSG_PEEK);
    if (n < 0)
      return nullptr;
    if (n == 0)
      break; // closed before speaking; the session ends at once
    if (n == have)
      std::this_thread::sleep_for(1ms);
    have = n;
    if (std::string_view(peek, static_cast<size_t>(have)) != std::string_view("GET ", static_cast<size_t>(have)))
      break;
  }
  if (have < 4 || std::string_view(peek, 4) != "GET ")
    return std::make_unique<ClientStream>(std::move(sock), false);

  Bytes rest;
  auto head = readHead(sock.fd(), Clock::now() + 5s, rest);
  auto key = head ? ws::parseUpgradeRequest(*head) : std::nullopt;
  if (!key) {
    try {
      net::writeAll(sock.fd(), asBytes("HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n"));
    } catch (const TransportError &) {
    }
    return nullptr;
  }
  net::writeAll(sock.fd(), asBytes(ws::upgradeResponse(*key)));
  auto stream = std::make_unique<ClientStream>(std::move(sock), true);
  stream->setPending(std::move(rest));
  return stream;
}

void writeStats(std::ostream &os, std::uint32_t frame, const RenderStats &stats)
{
  for (const auto &r : stats.rounds) {
    nlohmann::json j = {{"frame", frame}, {"round", r.round}, {"raysTraced", r.raysTraced},
        {"bytesExchanged", r.bytesExchanged}, {"millis", r.millis}};
    os << j.dump() << '\n';
  }
  os.flush();
}

std::chrono::milliseconds keepAliveInterval(const Endpoint &ep)
{
  return std::max(std::chrono::milliseconds(50), ep.timeout() / 4);
}

struct SessionState
{
  std::mutex mutex;
  std::condition_variable cv;
  std::optional<CameraUpdateMessage> pending;
  std::uint64_t received{0};
  bool closed{false};
  std::optional<std::string> protocolError;
};

class Server
{
 public:
  Server(Endpoint &ep, const LocalWorld &world, const ServiceOptions &options)
      : m_ep(ep), m_world(world), m_opt(options)
  {}

  ServiceSummary run()
  {
    m_listener = net::listenTcp(m_opt.bindAddress, m_opt.port);
    if (m_opt.onListening)
      m_opt.onListening(net::localPort(m_listener));
    try {
      auto lastBroadcast = Clock::now();
      while (!stopRequested()) {
        net::Socket client = net::acceptUntil(m_listener, Clock::now() + 100ms);
        if (!client.valid()) {
          if (Clock::now() - lastBroadcast >= keepAliveInterval(m_ep)) {
            m_ep.broadcastFromRoot(encodeCommand(Command::KeepAlive));
            lastBroadcast = Clock::now();
          }
          continue;
        }
        auto stream = openStream(std::move(client), m_opt.detectTimeout);
        if (!stream)
          continue;
        ++m_summary.sessions;
        runSession(*stream);
        if (m_opt.once)
          break;
      }
    } catch (...) {
      try {
        m_ep.broadcastFromRoot(encodeCommand(Command::Stop));
      } catch (const Error &) {
      }
      throw;
    }
    m_ep.broadcastFromRoot(encodeCommand(Command::Stop));
    return m_summary;
  }

 private:
  bool stopRequested() const
  {
    return m_opt.stop && m_opt.stop->load();
  }

  void rejectBusy(std::atomic<bool> &active)
  {
    while (active.load()) {
      net::Socket extra = net::acceptUntil(m_listener, Clock::now() + 50ms);
      if (!extra.valid())
        continue;
      try {
        auto stream = openStream(std::move(extra), m_opt.detectTimeout);
        if (stream) {
          stream->send(ControlMessage{"busy", "another client is connected"});
          stream->shutdown();
        }
        ++m_busy;
      } catch (const Error &) {
      }
    }
  }

  void receive(ClientStream &stream, SessionState &st, const std::atomic<bool> &active)
  {
    MessageDecoder decoder;
    Bytes chunk;
    try {
      while (active.load()) {
        chunk.clear();
        const bool open = stream.read(chunk, Clock::now() + 100ms);
        if (!chunk.empty()) {
          decoder.feed(chunk);
          while (auto m = decoder.next()) {
            auto *cam = std::get_if<CameraUpdateMessage>(&*m);
            if (!cam)
              continue;
            std::uint64_t count = 0;
            {
              std::lock_guard lock(st.mutex);
              st.pending = *cam;
              count = ++st.received;
            }
            st.cv.notify_all();
            if (m_opt.onCameraUpdate)
              m_opt.onCameraUpdate(count);
          }
        }
        if (!open) {
          decoder.finish();
          break;
        }
      }
    } catch (const DecodeError &e) {
      std::lock_guard lock(st.mutex);
      st.protocolError = e.what();
    } catch (const Error &) {
    }
    {
      std::lock_guard lock(st.mutex);
      st.closed = true;
    }
    st.cv.notify_all();
  }

  void runSession(ClientStream &stream)
  {
    SessionState st;
    std::atomic<bool> active{true};
    std::thread receiver([&] { receive(stream, st, active); });
    std::thread busy([&] { rejectBusy(active); });

    std::uint32_t sequence = 0;
    std::exception_ptr fatal;
    try {
      for (;;) {
        std::optional<CameraUpdateMessage> cam;
        {
          std::unique_lock lock(st.mutex);
          const bool ready = st.cv.wait_for(lock, keepAliveInterval(m_ep),
              [&] { return st.pending || st.closed || stopRequested(); });
          if (!ready) {
            lock.unlock();
            m_ep.broadcastFromRoot(encodeCommand(Command::KeepAlive));
            continue;
          }
          if (st.protocolError) {
            const std::string err = *st.protocolError;
            lock.unlock();
            sendQuietly(stream, ControlMessage{"error", err});
            break;
          }
          if (!st.pending || stopRequested())
            break;
          cam = std::exchange(st.pending, std::nullopt);
        }

        try {
          cam->validate();
        } catch (const ValidationError &e) {
          sendQuietly(stream, ControlMessage{"error", e.what()});
          continue;
        }

        if (m_opt.beforeRender)
          m_opt.beforeRender(sequence + 1);
        m_ep.broadcastFromRoot(encodeCommand(Command::Render, &*cam));
        const auto t0 = Clock::now();
        RenderResult result;
        try {
          result = renderFrame(m_ep, m_world, cam->toCamera(), cam->requestWidth,
              cam->requestHeight, m_opt.render);
        } catch (const TransportError &e) {
          sendQuietly(stream, ControlMessage{"error", e.what()});
          throw;
        } catch (const Error &e) {
          sendQuietly(stream, ControlMessage{"error", e.what()});
          break;
        }
        const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        m_summary.renderSeconds += seconds;

        FrameMessage frame;
        frame.width = cam->requestWidth;
        frame.height = cam->requestHeight;
        frame.sequence = ++sequence;
        frame.renderMillis = static_cast<std::uint32_t>(seconds * 1000.0 + 0.5);
        frame.pixels = std::move(result.image->rgb);
        if (m_opt.statsLog)
          writeStats(*m_opt.statsLog, frame.sequence, result.stats);
        try {
          stream.send(frame);
        } catch (const TransportError &) {
          break; // client went away
        }
        ++m_summary.framesSent;
      }
    } catch (...) {
      fatal = std::current_exception();
    }

    active = false;
    stream.shutdown();
    receiver.join();
    busy.join();
    m_summary.updatesReceived += st.received;
    m_summary.busyRejections = m_busy.load();
    if (fatal)
      std::rethrow_exception(fatal);
  }

  static void sendQuietly(ClientStream &stream, const Message &msg)
  {
    try {
      stream.send(msg);
    } catch (const TransportError &) {
    }
  }

  Endpoint &m_ep;
  const LocalWorld &m_world;
  const ServiceOptions &m_opt;
  net::Socket m_listener;
  ServiceSummary m_summary;
  std::atomic<std::uint64_t> m_busy{0};
};

ServiceSummary followRoot(Endpoint &ep, const LocalWorld &world, const RenderOptions &opts)
{
  ServiceSummary summary;
  for (;;) {
    const auto [cmd, cam] = decodeCommand(ep.broadcastFromRoot({}));
    if (cmd == Command::Stop)
      break;
    if (cmd != Command::Render)
      continue;
    try {
      renderFrame(ep, world, cam.toCamera(), cam.requestWidth, cam.requestHeight, opts);
      ++summary.framesSent;
    } catch (const TransportError &) {
      throw;
    } catch (const Error &) {
      // Rank 0 saw the same failure and reports it to the client.
    }
  }
  return summary;
}

} // namespace

ServiceSummary serveSession(Endpoint &ep, const LocalWorld &world,
    const ServiceOptions &options)
{
  if (!ep.isRoot())
    return followRoot(ep, world, options.render);
  return Server(ep, world, options).run();
}

// ---------------------------------------------------------------------------

struct ServiceClient::Impl
{
  net::Socket sock;
  bool websocket{false};
  ws::FrameParser parser{false};
  MessageDecoder decoder;
  std::mt19937 rng{std::random_device{}()};
  bool closed{false};

  void writeStream(ByteView bytes)
  {
    if (!websocket) {
      net::writeAll(sock.fd(), bytes);
      return;
    }
    std::array<std::uint8_t, 4> mask{};
    for (auto &m : mask)
      m = static_cast<std::uint8_t>(rng());
    net::writeAll(sock.fd(), ws::encodeFrame(ws::Opcode::Binary, bytes, mask));
  }

  void ingest(ByteView data)
  {
    if (!websocket) {
      decoder.feed(data);
      return;
    }
    parser.feed(data);
    while (auto f = parser.next()) {
      if (f->opcode == ws::Opcode::Close) {
        closed = true;
        return;
      }
      if (f->opcode == ws::Opcode::Binary || f->opcode == ws::Opcode::Continuation
          || f->opcode == ws::Opcode::Text)
        decoder.feed(f->payload);
    }
  }
};

ServiceClient::ServiceClient(std::unique_ptr<Impl> impl) : m_impl(std::move(impl)) {}
ServiceClient::ServiceClient(ServiceClient &&) noexcept = default;
ServiceClient &ServiceClient::operator=(ServiceClient &&) noexcept = default;
ServiceClient::~ServiceClient() = default;

ServiceClient ServiceClient::connect(const std::string &host, std::uint16_t port,
    bool websocket, std::chrono::milliseconds timeout)
{
  auto impl = std::make_unique<Impl>();
  const auto deadline = Clock::now() + timeout;
  impl->sock = net::connectTcpRetry(host, port, deadline);
  impl->websocket = websocket;
  if (websocket) {
    std::array<std::uint8_t, 16> nonce{};
    for (auto &b : nonce)
      b = static_cast<std::uint8_t>(impl->rng());
    // base64 of 16 bytes without pulling in another encoder.
    static constexpr char kAlphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string key;
    for (size_t i = 0; i < 15; i += 3) {
      const std::uint32_t v = (nonce[i] << 16) | (nonce[i + 1] << 8) | nonce[i + 2];
      for (int s = 18; s >= 0; s -= 6)
        key += kAlphabet[(v >> s) & 63];
    }
    key += kAlphabet[nonce[15] >> 2];
    key += kAlphabet[(nonce[15] & 3) << 4];
    key += "==";
    net::writeAll(impl->sock.fd(),
        asBytes(ws::upgradeRequest(host + ":" + std::to_string(port), "/", key)));
    Bytes rest;
    auto head = readHead(impl->sock.fd(), deadline, rest);
    if (!head || !ws::checkUpgradeResponse(*head, key))
      throw ProtocolError("websocket upgrade rejected");
    impl->ingest(rest);
  }
  return ServiceClient(std::move(impl));
}

void ServiceClient::send(const Message &msg)
{
  m_impl->writeStream(encodeMessage(msg));
}

void ServiceClient::sendRaw(ByteView bytes)
{
  m_impl->writeStream(bytes);
}

std::optional<Message> ServiceClient::receive(std::chrono::milliseconds timeout)
{
  const auto deadline = Clock::now() + timeout;
  std::uint8_t buf[65536];
  for (;;) {
    if (auto m = m_impl->decoder.next())
      return m;
    if (m_impl->closed || !m_impl->sock.valid())
      return std::nullopt;
    const ssize_t n = recvSome(m_impl->sock.fd(), buf, sizeof buf, deadline);
    if (n < 0)
      return std::nullopt;
    if (n == 0) {
      m_impl->closed = true;
      continue;
    }
    m_impl->ingest(ByteView(buf, static_cast<size_t>(n)));
  }
}

void ServiceClient::close()
{
  if (!m_impl || !m_impl->sock.valid())
    return;
  if (m_impl->websocket) {
    try {
      std::array<std::uint8_t, 4> mask{1, 2, 3, 4};
      net::writeAll(m_impl->sock.fd(), ws::encodeFrame(ws::Opcode::Close, {}, mask));
    } catch (const TransportError &) {
    }
  }
  m_impl->sock.close();
}

} // namespace dprt
