#include "devmetrics/http_server.hpp"

#include "devmetrics/analytics.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace devmetrics {
namespace {

constexpr std::size_t kMaxBodyBytes = 64u << 20;
constexpr std::size_t kDefaultPullLimit = 1000;

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  send_json(res, status, Json{{"error", kind}, {"message", message}});
}

Credentials credentials_of(const httplib::Request& req) {
  return {req.get_header_value(kInstallGuidHeader), req.get_header_value(kSecretKeyHeader)};
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  auto v = req.get_param_value(name);
  if (v.empty()) return std::nullopt;
  return v;
}

int status_for(const StoreError& e) {
  switch (e.code()) {
    case StoreError::Code::StorageFull: return 507;
    case StoreError::Code::BadCursor: return 400;
    default: return 500;
  }
}

std::string_view name_of(StoreError::Code c) {
  switch (c) {
    case StoreError::Code::StorageFull: return "StorageFull";
    case StoreError::Code::CorruptPartition: return "CorruptPartition";
    case StoreError::Code::BadCursor: return "BadCursor";
    case StoreError::Code::Io: return "IoError";
  }
  return "StoreError";
}

std::optional<TimeRange> range_of(const httplib::Request& req, bool required) {
  const auto from = param(req, "from");
  const auto to = param(req, "to");
  if (!from && !to && !required) return std::nullopt;
  if (!from || !to) throw AnalyticsError("both 'from' and 'to' are required");
  const auto f = parse_instant_or_date(*from);
  const auto t = parse_instant_or_date(*to);
  if (!f || !t) throw AnalyticsError("from/to must be ISO-8601 instants or dates");
  return TimeRange{*f, *t};
}

}  // namespace

CollectorServer::CollectorServer(Collector& collector, ServerOptions options)
    : collector_(collector), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  const std::size_t threads = options_.threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  server_->set_payload_max_length(kMaxBodyBytes);
  server_->set_keep_alive_max_count(100000);
  server_->set_keep_alive_timeout(options_.keep_alive_timeout_s);
  install_routes();
}

CollectorServer::~CollectorServer() { stop(); }

void CollectorServer::install_routes() {
  auto& s = *server_;

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const CollectorError& e) {
      switch (e.code()) {
        case CollectorError::Code::Unauthorized: send_error(res, 401, "Unauthorized", e.what()); break;
        case CollectorError::Code::BatchTooLarge: send_error(res, 413, "BatchTooLarge", e.what()); break;
        case CollectorError::Code::EmptyBatch: send_error(res, 400, "EmptyBatch", e.what()); break;
      }
    } catch (const StoreError& e) {
      send_error(res, status_for(e), name_of(e.code()), e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
      send_error(res, 500, "Internal", e.what());
    }
  });

  if (!options_.allow_origin.empty()) {
    s.set_default_headers({{"Access-Control-Allow-Origin", options_.allow_origin},
                           {"Access-Control-Allow-Headers", "Content-Type, X-Secret-Key, X-Install-Guid"}});
    s.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  s.Post("/api/v1/agents/register", [this](const httplib::Request& req, httplib::Response& res) {
    if (!options_.registration_token.empty() &&
        !constant_time_equal(req.get_header_value(kRegistrationTokenHeader), options_.registration_token)) {
      return send_error(res, 401, "Unauthorized", "registration token required");
    }
    const auto body = Json::parse(req.body);
    const auto r = collector_.register_agent(body.at("code_name").get<std::string>(),
                                             body.value("full_name", std::string{}));
    send_json(res, 200, to_json(r));
  });

  s.Post("/api/v1/events:batch", [this](const httplib::Request& req, httplib::Response& res) {
    const auto auth = credentials_of(req);
    if (!collector_.is_agent(auth)) return send_error(res, 401, "Unauthorized", "unknown agent credentials");
    const auto body = parse_wire_json(req.body);
    if (!body.is_array()) return send_error(res, 400, "BadRequest", "body must be a JSON array of envelopes");
    if (body.size() > kMaxBatchSize) return send_error(res, 413, "BatchTooLarge", "batch exceeds 1000 elements");
    const std::vector<Json> batch(body.begin(), body.end());
    send_json(res, 200, to_json(collector_.submit_events(auth, batch)));
  });

  s.Get("/api/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
    const auto auth = credentials_of(req);
    if (!collector_.is_reader(auth)) return send_error(res, 401, "Unauthorized", "reader credentials required");
    std::size_t limit = kDefaultPullLimit;
    if (auto l = param(req, "limit")) limit = std::stoul(*l);
    if (limit == 0 || limit > kMaxScanLimit) return send_error(res, 400, "BadRequest", "limit must be in 1..10000");
    const auto filter = filter_from_query(param(req, "install_guid"), param(req, "event_type"), param(req, "from"),
                                          param(req, "to"));
    const auto page = collector_.pull_events(auth, Cursor::decode(param(req, "cursor").value_or("")), limit, filter);
    Json records = Json::array();
    for (const auto& r : page.records) records.push_back(to_json(r));
    send_json(res, 200, Json{{"records", std::move(records)}, {"next_cursor", page.next.encode()}});
  });

  s.Get("/api/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, to_json(collector_.health()));
  });

  s.Get("/api/v1/analytics/over-time", [this](const httplib::Request& req, httplib::Response& res) {
    if (!collector_.is_reader(credentials_of(req))) {
      return send_error(res, 401, "Unauthorized", "reader credentials required");
    }
    try {
      ScanFilter f;
      f.event_type = param(req, "event_type");
      f.install_guid = param(req, "install_guid");
      send_json(res, 200, to_json(events_over_time(collector_.store(), *range_of(req, true), f)));
    } catch (const AnalyticsError& e) {
      send_error(res, 400, "BadRange", e.what());
    }
  });

  s.Get("/api/v1/analytics/breakdown", [this](const httplib::Request& req, httplib::Response& res) {
    if (!collector_.is_reader(credentials_of(req))) {
      return send_error(res, 401, "Unauthorized", "reader credentials required");
    }
    const auto dim = parse_dimension(param(req, "dimension").value_or(""));
    if (!dim || *dim == Dimension::day) {
      return send_error(res, 400, "BadRequest", "dimension must be event_type, application or host");
    }
    try {
      send_json(res, 200, to_json(breakdown(collector_.store(), *dim, range_of(req, false))));
    } catch (const AnalyticsError& e) {
      send_error(res, 400, "BadRange", e.what());
    }
  });

  if (options_.ui_dir) s.set_mount_point("/ui", options_.ui_dir->string());

  s.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
}

int CollectorServer::bind() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ < 0) throw std::runtime_error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  return port_;
}

void CollectorServer::run() { server_->listen_after_bind(); }

int CollectorServer::start() {
  const int port = bind();
  thread_ = std::thread([this] { run(); });
  server_->wait_until_ready();
  return port;
}

void CollectorServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace devmetrics
