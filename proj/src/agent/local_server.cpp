#include "devmetrics/agent/local_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace devmetrics::agent {
namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  send_json(res, status, Json{{"error", kind}, {"message", message}});
}

}  // namespace

ReviewFilter review_filter_from_query(const std::map<std::string, std::string>& params) {
  ReviewFilter f;
  auto get = [&](const char* name) -> std::optional<std::string> {
    auto it = params.find(name);
    if (it == params.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  f.keyword = get("keyword");
  f.application = get("application");
  if (auto v = get("from")) {
    f.from = parse_instant_or_date(*v);
    if (!f.from) throw std::invalid_argument("bad 'from': " + *v);
  }
  if (auto v = get("to")) {
    f.to = parse_instant_or_date(*v);
    if (!f.to) throw std::invalid_argument("bad 'to': " + *v);
  }
  if (auto v = get("state")) {
    f.state = parse_event_state(*v);
    if (!f.state) throw std::invalid_argument("state must be pending or submitted");
  }
  return f;
}

LocalAgentServer::LocalAgentServer(LocalBuffer& buffer, Transport& transport, Credentials auth,
                                   LocalServerOptions options)
    : buffer_(buffer),
      transport_(transport),
      auth_(std::move(auth)),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.set_keep_alive_timeout(2);

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const BufferError& e) {
      send_error(res, 400, "BufferError", e.what());
    } catch (const TransportError& e) {
      send_error(res, 502, "TransportError", e.what());
    } catch (const UnauthorizedError& e) {
      send_error(res, 502, "Unauthorized", e.what());
    } catch (const RequestError& e) {
      send_error(res, 502, "CollectorError", e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  });

  if (!options_.allow_origin.empty()) {
    s.set_default_headers({{"Access-Control-Allow-Origin", options_.allow_origin},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
    s.Options(R"(/local/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  s.Get("/local/events", [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params(req.params.begin(), req.params.end());
    Json events = Json::array();
    for (const auto& e : buffer_.list(review_filter_from_query(params))) events.push_back(to_json(e));
    send_json(res, 200, Json{{"events", std::move(events)}});
  });

  s.Post("/local/submit", [this](const httplib::Request& req, httplib::Response& res) {
    const auto ids = Json::parse(req.body).at("ids").get<std::vector<std::string>>();
    if (ids.empty()) return send_error(res, 400, "BadRequest", "no ids selected");
    std::lock_guard lock(submit_mu_);
    auto body = to_json(buffer_.submit_selected(ids, transport_, auth_));
    Json events = Json::array();
    for (const auto& id : ids) events.push_back(to_json(*buffer_.get(id)));
    body["events"] = std::move(events);
    send_json(res, 200, body);
  });

  s.Get("/local/collection", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, Json{{"active", collecting()}});
  });

  s.Post("/local/collection", [this](const httplib::Request& req, httplib::Response& res) {
    set_collecting(Json::parse(req.body).at("active").get<bool>());
    send_json(res, 200, Json{{"active", collecting()}});
  });
}

LocalAgentServer::~LocalAgentServer() { stop(); }

int LocalAgentServer::start() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ < 0) throw std::runtime_error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void LocalAgentServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace devmetrics::agent
