#include "glfd/server.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace glfd {

namespace {

using Clock = std::chrono::steady_clock;

struct Client {
  std::string inbox;
  std::string outbox;
};

void send_line(Client& c, const json& msg) { c.outbox += msg.dump() + "\n"; }

// Flushes as much of the outbox as the socket takes; false on a dead peer.
bool flush(int fd, Client& c) {
  while (!c.outbox.empty()) {
    const ssize_t n = ::send(fd, c.outbox.data(), c.outbox.size(), MSG_NOSIGNAL);
    if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK;
    c.outbox.erase(0, static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

void serve(Session& session, const ServerOptions& options) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(static_cast<uint16_t>(options.port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listener, 8) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listener);
    throw std::runtime_error("bind/listen: " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  ::fcntl(listener, F_SETFL, O_NONBLOCK);
  if (options.on_listening) options.on_listening(ntohs(addr.sin_port));

  std::ofstream log;
  if (options.log_path) log.open(*options.log_path, std::ios::app);

  std::map<int, Client> clients;
  std::optional<std::pair<int, json>> pending_pose;
  const auto pose_period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(1.0 / options.pose_rate_hz));
  Clock::time_point last_pose = Clock::now() - pose_period;

  auto dispatch = [&](int fd, const json& msg) {
    if (log.is_open()) log << msg.dump() << '\n' << std::flush;
    const Outgoing out = session.handle_message(msg);
    if (auto it = clients.find(fd); it != clients.end()) {
      for (const auto& r : out.replies) send_line(it->second, r);
    }
    for (const auto& b : out.broadcasts) {
      for (auto& [cfd, c] : clients) send_line(c, b);
    }
  };
  auto flush_pose = [&] {
    if (!pending_pose) return;
    auto [fd, msg] = std::move(*pending_pose);
    pending_pose.reset();
    last_pose = Clock::now();
    dispatch(fd, msg);
  };

  while (!(options.stop && options.stop->load())) {
    std::vector<pollfd> fds{{listener, POLLIN, 0}};
    for (const auto& [fd, c] : clients) {
      fds.push_back({fd, static_cast<short>(POLLIN | (c.outbox.empty() ? 0 : POLLOUT)), 0});
    }
    int timeout_ms = 50;
    if (pending_pose) {
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(last_pose + pose_period - Clock::now());
      timeout_ms = std::max<int>(0, std::min<int>(timeout_ms, static_cast<int>(wait.count())));
    }
    if (::poll(fds.data(), fds.size(), timeout_ms) < 0 && errno != EINTR) {
      throw std::runtime_error(std::string("poll: ") + std::strerror(errno));
    }

    if (fds[0].revents & POLLIN) {
      for (int fd; (fd = ::accept(listener, nullptr, nullptr)) >= 0;) {
        ::fcntl(fd, F_SETFL, O_NONBLOCK);
        clients.emplace(fd, Client{});
      }
    }
    std::vector<int> dead;
    for (std::size_t k = 1; k < fds.size(); ++k) {
      const int fd = fds[k].fd;
      if (!clients.count(fd)) continue;
      if (fds[k].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[65536];
        const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0 && !(n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK))) {
          dead.push_back(fd);
          continue;
        }
        if (n > 0) clients[fd].inbox.append(buf, static_cast<std::size_t>(n));
        for (std::size_t pos; clients.count(fd) && (pos = clients[fd].inbox.find('\n')) != std::string::npos;) {
          const std::string line = clients[fd].inbox.substr(0, pos);
          clients[fd].inbox.erase(0, pos + 1);
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          json msg;
          try {
            msg = json::parse(line);
          } catch (const json::parse_error& e) {
            send_line(clients[fd], error_message("bad_request", std::string("malformed JSON: ") + e.what()));
            continue;
          }
          if (msg.is_object() && msg.value("type", "") == "pose") {
            pending_pose.emplace(fd, std::move(msg));  // coalesce to the latest
          } else {
            flush_pose();  // keep message order for anything but raw pose rate
            dispatch(fd, msg);
          }
        }
      }
    }
    if (pending_pose && Clock::now() >= last_pose + pose_period) flush_pose();
    for (auto& [fd, c] : clients) {
      if (!flush(fd, c)) dead.push_back(fd);
    }
    for (int fd : dead) {
      if (clients.erase(fd)) ::close(fd);
      if (pending_pose && pending_pose->first == fd) pending_pose.reset();
    }
  }
  for (auto& [fd, c] : clients) ::close(fd);
  ::close(listener);
}

}  // namespace glfd
