#pragma once

#include "devmetrics/collector.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace devmetrics {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t threads = 64;
  int keep_alive_timeout_s = 2;  // idle keep-alive connections hold a worker this long
  std::optional<std::filesystem::path> ui_dir;  // served under /ui
  std::string registration_token;               // empty: registration is open
  std::string allow_origin;                     // CORS origin for the dashboard, empty: none
};

/// HTTP/1.1 front end for a Collector:
///   POST /api/v1/agents/register        {code_name, full_name} -> Registration
///   POST /api/v1/events:batch           [envelope...]          -> SubmitReceipt
///   GET  /api/v1/events?cursor=&limit=&install_guid=&event_type=&from=&to=
///   GET  /api/v1/health
///   GET  /api/v1/analytics/over-time?from=&to=&event_type=&install_guid=
///   GET  /api/v1/analytics/breakdown?dimension=&from=&to=
class CollectorServer {
 public:
  CollectorServer(Collector& collector, ServerOptions options);
  ~CollectorServer();
  CollectorServer(const CollectorServer&) = delete;
  CollectorServer& operator=(const CollectorServer&) = delete;

  /// Binds the listening socket; returns the bound port.
  int bind();
  /// Serves until stop(); bind() first.
  void run();
  /// bind() + run() on a background thread.
  int start();
  void stop();

  int port() const { return port_; }

 private:
  void install_routes();

  Collector& collector_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace devmetrics
