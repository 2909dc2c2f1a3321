#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>

#include "glfd/session_service.hpp"

namespace glfd {

struct ServerOptions {
  /// 0 picks a free port; on_listening receives the bound one.
  int port = 0;
  /// Pose messages arriving faster than this are coalesced to the latest.
  double pose_rate_hz = 60.0;
  /// Every message handed to the session is appended here, one per line,
  /// so a session can be replayed exactly.
  std::optional<std::filesystem::path> log_path;
  const std::atomic<bool>* stop = nullptr;
  std::function<void(int)> on_listening;
};

/// Newline-delimited JSON over TCP, single thread, any number of clients.
/// Returns when *stop becomes true. Throws std::runtime_error on socket
/// setup failure.
void serve(Session& session, const ServerOptions& options);

}  // namespace glfd
