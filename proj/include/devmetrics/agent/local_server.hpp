#pragma once

#include "devmetrics/agent/buffer.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace devmetrics::agent {

struct LocalServerOptions {
  std::string host = "127.0.0.1";
  int port = 8081;  // 0 picks a free port
  std::string allow_origin;
};

/// Local endpoint the review UI talks to:
///   GET  /local/events?keyword=&application=&from=&to=&state=  -> {events: [...]}
///   POST /local/submit      {ids: [...]}                       -> SubmitReceipt + {events: [...]}
///   GET  /local/collection                                     -> {active}
///   POST /local/collection  {active: bool}                     -> {active}
/// Collection itself is driven by the owner, which polls collecting().
class LocalAgentServer {
 public:
  LocalAgentServer(LocalBuffer& buffer, Transport& transport, Credentials auth, LocalServerOptions options);
  ~LocalAgentServer();
  LocalAgentServer(const LocalAgentServer&) = delete;
  LocalAgentServer& operator=(const LocalAgentServer&) = delete;

  int start();
  void stop();
  int port() const { return port_; }

  bool collecting() const { return collecting_.load(); }
  void set_collecting(bool on) { collecting_.store(on); }

 private:
  LocalBuffer& buffer_;
  Transport& transport_;
  Credentials auth_;
  LocalServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> collecting_{true};
  std::mutex submit_mu_;
  int port_ = -1;
};

ReviewFilter review_filter_from_query(const std::map<std::string, std::string>& params);

}  // namespace devmetrics::agent
