#include "devmetrics/protocol.hpp"

#include "devmetrics/uuid.hpp"

namespace devmetrics {

Credentials reader_credentials_from_seed(std::string_view seed) {
  const std::string s(seed);
  return {derived_uuid("devmetrics-reader-id:" + s), derived_uuid("devmetrics-reader-key:" + s)};
}

Json to_json(const Registration& r) {
  return Json{{"code_name", r.agent.code_name},
              {"full_name", r.agent.full_name},
              {"secret_key", r.agent.secret_key},
              {"install_guid", r.agent.install_guid},
              {"created_at", format_instant(r.created_at)}};
}

Registration registration_from_json(const Json& j) {
  Registration r;
  r.agent.code_name = j.at("code_name").get<std::string>();
  r.agent.full_name = j.at("full_name").get<std::string>();
  r.agent.secret_key = j.at("secret_key").get<std::string>();
  r.agent.install_guid = j.at("install_guid").get<std::string>();
  const auto t = parse_instant(j.at("created_at").get<std::string>());
  if (!t) throw std::invalid_argument("registration: bad created_at");
  r.created_at = *t;
  return r;
}

Json to_json(const SubmitReceipt& r) {
  Json rejected = Json::array();
  for (const auto& el : r.rejected) {
    Json errs = Json::array();
    for (const auto& e : el.errors) errs.push_back(to_json(e));
    rejected.push_back({{"index", el.index}, {"errors", errs}});
  }
  return Json{{"accepted", r.accepted}, {"duplicates", r.duplicates}, {"rejected", rejected}};
}

namespace {

ErrorKind error_kind_from(std::string_view s) {
  for (auto k : {ErrorKind::MissingField, ErrorKind::BadTimestamp, ErrorKind::BadUuid, ErrorKind::PayloadTooLarge,
                 ErrorKind::MissingReservedKey, ErrorKind::UnknownTopLevelField, ErrorKind::InvalidField,
                 ErrorKind::CredentialMismatch}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown error kind: " + std::string(s));
}

}  // namespace

SubmitReceipt receipt_from_json(const Json& j) {
  SubmitReceipt r;
  r.accepted = j.at("accepted").get<std::size_t>();
  r.duplicates = j.at("duplicates").get<std::size_t>();
  for (const auto& el : j.at("rejected")) {
    RejectedElement re;
    re.index = el.at("index").get<std::size_t>();
    for (const auto& e : el.at("errors")) {
      re.errors.push_back(ValidationError{error_kind_from(e.at("kind").get<std::string>()),
                                          e.at("path").get<std::string>(), e.value("message", "")});
    }
    r.rejected.push_back(std::move(re));
  }
  return r;
}

StoredRecord stored_record_from_json(const Json& j) {
  auto v = validate_envelope(j.at("envelope"));
  if (!v) throw std::invalid_argument("stored record carries an invalid envelope");
  StoredRecord r;
  r.envelope = std::move(v).envelope();
  const auto received = parse_instant(j.at("received_at").get<std::string>());
  const auto day = parse_day(j.at("partition").at("day").get<std::string>());
  if (!received || !day) throw std::invalid_argument("stored record: bad instant");
  r.received_at = *received;
  r.partition = PartitionKey{*day, j.at("partition").at("install_guid").get<std::string>()};
  r.seq = j.at("seq").get<std::uint64_t>();
  r.document = canonical_bytes(r.envelope);
  return r;
}

Json to_json(const Health& h) {
  return Json{{"version", h.version}, {"partition_count", h.partition_count}, {"uptime_s", h.uptime_s}};
}

ScanFilter filter_from_query(const std::optional<std::string>& install_guid,
                             const std::optional<std::string>& event_type, const std::optional<std::string>& from,
                             const std::optional<std::string>& to) {
  ScanFilter f;
  f.install_guid = install_guid;
  f.event_type = event_type;
  if (from) {
    f.from = parse_instant_or_date(*from);
    if (!f.from) throw std::invalid_argument("bad 'from' instant: " + *from);
  }
  if (to) {
    f.to = parse_instant_or_date(*to);
    if (!f.to) throw std::invalid_argument("bad 'to' instant: " + *to);
  }
  return f;
}

}  // namespace devmetrics
