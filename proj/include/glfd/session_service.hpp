#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "glfd/cdmp.hpp"
#include "glfd/guidance.hpp"
#include "glfd/io.hpp"
#include "glfd/region_planner.hpp"
#include "glfd/reproduction.hpp"

namespace glfd {

struct SessionConfig {
  GuidanceParams guidance;
  CDMPParams cdmp;
  /// max_step defaults to 1.5 * region epsilon when left unset.
  std::optional<ReproductionParams> reproduction;
  double rollout_dt = 0.01;
  /// Demos, models and reproductions are written below this directory when
  /// set (demos/, models/, reproductions/).
  std::optional<std::filesystem::path> store_dir;
};

/// Messages produced by one handled message: replies go to the sender,
/// broadcasts to every connected client.
struct Outgoing {
  std::vector<json> replies;
  std::vector<json> broadcasts;
};

struct StoredReproduction {
  std::string demo;
  TaskTrajectory target;
  Reproduction result;
};

/// Environment, region and classification cache that guidance reads. A new
/// snapshot replaces the old one whole.
struct SessionSnapshot {
  Environment env;
  Region region;
  std::shared_ptr<const VoxelClassifier> classifier;
};

/// Single-demonstrator session. handle_message is the only writer and must
/// be called from one thread at a time; snapshot() may be read concurrently.
class Session {
 public:
  Session(Workspace workspace, Environment env, Region region, SessionConfig config = {});

  Outgoing handle_message(const json& msg);
  /// Parses one protocol line; malformed JSON yields a bad_request error.
  Outgoing handle_line(const std::string& line);

  std::shared_ptr<const SessionSnapshot> snapshot() const;
  const Workspace& workspace() const { return ws_; }
  bool recording() const { return recording_.has_value(); }

  const std::map<std::string, TaskTrajectory>& demos() const { return demos_; }
  const std::map<std::string, CDMPModel>& models() const { return models_; }
  const std::map<std::string, StoredReproduction>& reproductions() const { return reproductions_; }

 private:
  Outgoing on_pose(const json& msg);
  Outgoing on_record_start();
  Outgoing on_record_stop(const json& msg);
  Outgoing on_add_object(const json& msg);
  Outgoing on_remove_object(const json& msg);
  Outgoing on_run_pipeline(const json& msg);
  Outgoing on_get_region() const;
  Outgoing on_get_frame_full();

  Outgoing swap_environment(Environment env);
  void store(const std::string& kind, const std::string& name, const json& doc) const;

  Workspace ws_;
  SessionConfig config_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const SessionSnapshot> snapshot_;

  std::optional<TaskTrajectory> recording_;
  std::optional<GuidanceFrame> last_frame_;
  std::optional<ToolPose> last_tool_;
  std::map<std::string, TaskTrajectory> demos_;
  std::map<std::string, CDMPModel> models_;
  std::map<std::string, StoredReproduction> reproductions_;
};

/// Error message as sent on the wire.
json error_message(const std::string& code, const std::string& message);

}  // namespace glfd
