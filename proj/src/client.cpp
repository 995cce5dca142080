#include "devmetrics/client.hpp"

#include <httplib.h>

namespace devmetrics {
namespace {

httplib::Headers auth_headers(const Credentials& c) {
  return {{kInstallGuidHeader, c.install_guid}, {kSecretKeyHeader, c.secret_key}};
}

std::string error_message(const httplib::Response& res) {
  try {
    return Json::parse(res.body).value("message", res.body);
  } catch (const Json::exception&) {
    return res.body;
  }
}

// 200 -> parsed body; everything else mapped onto the client error classes.
Json checked(const httplib::Result& result, const std::string& what) {
  if (!result) throw TransportError(what + ": " + httplib::to_string(result.error()));
  const auto& res = *result;
  if (res.status == 200) {
    try {
      return Json::parse(res.body);
    } catch (const Json::exception& e) {
      throw TransportError(what + ": unreadable response: " + e.what());
    }
  }
  if (res.status == 401) throw UnauthorizedError(what + ": " + error_message(res));
  if (res.status >= 400 && res.status < 500) throw RequestError(res.status, what + ": " + error_message(res));
  throw TransportError(what + ": HTTP " + std::to_string(res.status) + " " + error_message(res));
}

std::string filter_params(const Cursor* cursor, std::size_t limit, const ScanFilter& f) {
  std::vector<std::pair<std::string, std::string>> p;
  if (cursor) p.emplace_back("cursor", cursor->encode());
  p.emplace_back("limit", std::to_string(limit));
  if (f.install_guid) p.emplace_back("install_guid", *f.install_guid);
  if (f.event_type) p.emplace_back("event_type", *f.event_type);
  if (f.from) p.emplace_back("from", format_instant(*f.from));
  if (f.to) p.emplace_back("to", format_instant(*f.to));
  return query_string(p);
}

}  // namespace

std::string query_string(const std::vector<std::pair<std::string, std::string>>& params) {
  std::string q;
  for (const auto& [k, v] : params) {
    if (v.empty()) continue;
    q += q.empty() ? '?' : '&';
    q += k + "=" + httplib::detail::encode_query_param(v);
  }
  return q;
}

CollectorClient::CollectorClient(const std::string& base_url, std::chrono::milliseconds timeout)
    : http_(std::make_unique<httplib::Client>(base_url)) {
  if (!http_->is_valid()) throw std::invalid_argument("unsupported server URL: " + base_url);
  http_->set_keep_alive(true);
  http_->set_connection_timeout(timeout);
  http_->set_read_timeout(timeout);
  http_->set_write_timeout(timeout);
}

CollectorClient::~CollectorClient() = default;

Registration CollectorClient::register_agent(const std::string& code_name, const std::string& full_name,
                                             const std::string& registration_token) {
  httplib::Headers headers;
  if (!registration_token.empty()) headers.emplace(kRegistrationTokenHeader, registration_token);
  const Json body = {{"code_name", code_name}, {"full_name", full_name}};
  return registration_from_json(
      checked(http_->Post("/api/v1/agents/register", headers, body.dump(), "application/json"), "register"));
}

SubmitReceipt CollectorClient::submit(const Credentials& auth, const std::vector<Json>& batch) {
  std::string body = "[";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i) body.push_back(',');
    body += batch[i].dump();
  }
  body.push_back(']');
  const auto j = checked(http_->Post("/api/v1/events:batch", auth_headers(auth), body, "application/json"), "submit");
  try {
    return receipt_from_json(j);
  } catch (const std::exception& e) {
    throw TransportError(std::string("submit: malformed receipt: ") + e.what());
  }
}

std::string CollectorClient::pull_raw(const Credentials& reader, const std::string& cursor_token, std::size_t limit,
                                      const ScanFilter& filter) {
  std::string path = "/api/v1/events" + filter_params(nullptr, limit, filter);
  if (!cursor_token.empty()) path += "&cursor=" + cursor_token;
  auto result = http_->Get(path, auth_headers(reader));
  checked(result, "pull");
  return result->body;
}

ScanPage CollectorClient::pull(const Credentials& reader, const Cursor& from, std::size_t limit,
                               const ScanFilter& filter) {
  const auto j = Json::parse(pull_raw(reader, from.encode(), limit, filter));
  ScanPage page;
  for (const auto& r : j.at("records")) page.records.push_back(stored_record_from_json(r));
  page.next = Cursor::decode(j.at("next_cursor").get<std::string>());
  return page;
}

Json CollectorClient::get_json(const std::string& path, const Credentials* auth) {
  return checked(auth ? http_->Get(path, auth_headers(*auth)) : http_->Get(path), path);
}

Health CollectorClient::health() {
  const auto j = get_json("/api/v1/health", nullptr);
  return Health{j.at("version").get<std::string>(), j.at("partition_count").get<std::size_t>(),
                j.at("uptime_s").get<double>()};
}

Json CollectorClient::over_time(const Credentials& reader, const std::string& from, const std::string& to,
                                const std::string& event_type) {
  return get_json("/api/v1/analytics/over-time" +
                      query_string({{"from", from}, {"to", to}, {"event_type", event_type}}),
                  &reader);
}

Json CollectorClient::breakdown(const Credentials& reader, const std::string& dimension, const std::string& from,
                                const std::string& to) {
  return get_json("/api/v1/analytics/breakdown" +
                      query_string({{"dimension", dimension}, {"from", from}, {"to", to}}),
                  &reader);
}

}  // namespace devmetrics
