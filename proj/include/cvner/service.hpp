#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace cvner {

/// HTTP API over a directory of bootstrap projects (one subdirectory each).
///
///   POST /projects                               create (201)
///   GET  /projects                               list
///   GET  /projects/{id}                          inspect
///   POST /projects/{id}/stages/{stage}           seed-annotate | train (202) | model-annotate | finalize
///   GET  /projects/{id}/jobs/{job}               training job status
///   GET  /projects/{id}/queue/next?pass=N        next pending review item
///   POST /projects/{id}/sections/{sid}/review    submit a review
///   POST /projects/{id}/predictions              upload predictions (JSON lines)
///   GET  /projects/{id}/metrics?against=SPLIT    score uploaded predictions
///   GET  /projects/{id}/export                   finalized gold dataset
///
/// Errors: {"error": {"code", "message", "context"}} with 404, 409 or 422.
class Service {
 public:
  /// Reopens every project found under `data_root` by replaying its log.
  explicit Service(std::filesystem::path data_root);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void mount(httplib::Server& server);

  /// Blocks until background training jobs have finished.
  void wait_for_jobs();

  const std::filesystem::path& data_root() const { return root_; }

  struct Slot;

 private:
  std::shared_ptr<Slot> find(const std::string& id) const;

  std::filesystem::path root_;
  mutable std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<Slot>> projects_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
};

/// Runs a server until the process is stopped. Returns non-zero when the
/// address cannot be bound.
int run_server(const std::filesystem::path& data_root, const std::string& host, int port);

}  // namespace cvner
