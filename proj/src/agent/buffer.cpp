#include "devmetrics/agent/buffer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace devmetrics::agent {
namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool any_string_leaf_contains(const Json& node, const std::string& needle_lower) {
  if (node.is_string()) return lowercase(node.get_ref<const std::string&>()).find(needle_lower) != std::string::npos;
  if (node.is_structured()) {
    return std::any_of(node.begin(), node.end(),
                       [&](const Json& child) { return any_string_leaf_contains(child, needle_lower); });
  }
  return false;
}

ValidationError error_from_json(const Json& j) {
  ValidationError e{ErrorKind::InvalidField, j.value("path", ""), j.value("message", "")};
  const auto kind = j.value("kind", "");
  for (auto k : {ErrorKind::MissingField, ErrorKind::BadTimestamp, ErrorKind::BadUuid, ErrorKind::PayloadTooLarge,
                 ErrorKind::MissingReservedKey, ErrorKind::UnknownTopLevelField, ErrorKind::InvalidField,
                 ErrorKind::CredentialMismatch}) {
    if (to_string(k) == kind) e.kind = k;
  }
  return e;
}

}  // namespace

std::string_view to_string(EventState s) { return s == EventState::pending ? "pending" : "submitted"; }

std::optional<EventState> parse_event_state(std::string_view s) {
  if (s == "pending") return EventState::pending;
  if (s == "submitted") return EventState::submitted;
  return std::nullopt;
}

Json to_json(const LocalEvent& e) {
  Json errors = Json::array();
  for (const auto& err : e.last_error) errors.push_back(to_json(err));
  return Json{{"event_id", e.event_id()},
              {"event_type", e.envelope.event_type()},
              {"timestamp", format_instant(e.envelope.timestamp)},
              {"state", to_string(e.state)},
              {"created_at", format_instant(e.created_at)},
              {"submitted_at", e.submitted_at ? Json(format_instant(*e.submitted_at)) : Json(nullptr)},
              {"errors", errors},
              {"envelope", to_json(e.envelope)}};
}

bool ReviewFilter::matches(const LocalEvent& e) const {
  if (state && e.state != *state) return false;
  if (from && e.envelope.timestamp < *from) return false;
  if (to && e.envelope.timestamp >= *to) return false;
  if (application) {
    auto it = e.envelope.metrics.find("application");
    if (it == e.envelope.metrics.end() || !it->is_string() || it->get_ref<const std::string&>() != *application) {
      return false;
    }
  }
  if (keyword && !any_string_leaf_contains(e.envelope.metrics, lowercase(*keyword))) return false;
  return true;
}

LocalBuffer::LocalBuffer(BufferOptions options) : options_(std::move(options)) {
  if (options_.path.has_parent_path()) std::filesystem::create_directories(options_.path.parent_path());
  replay();
  out_.open(options_.path, std::ios::app | std::ios::binary);
  if (!out_) throw BufferError(BufferError::Code::Io, "cannot open buffer " + options_.path.string());
}

void LocalBuffer::replay() {
  std::ifstream in(options_.path, std::ios::binary);
  if (!in) return;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t offset = 0;
  while (offset < content.size()) {
    const auto nl = content.find('\n', offset);
    if (nl == std::string::npos) {
      // torn tail: the operation never completed
      std::filesystem::resize_file(options_.path, offset);
      break;
    }
    const auto line = Json::parse(content.begin() + static_cast<std::ptrdiff_t>(offset),
                                  content.begin() + static_cast<std::ptrdiff_t>(nl));
    offset = nl + 1;
    const auto op = line.at("op").get<std::string>();
    if (op == "record") {
      auto v = validate_envelope(line.at("envelope"));
      if (!v) throw BufferError(BufferError::Code::Io, "buffer holds an invalid envelope");
      LocalEvent ev;
      ev.envelope = std::move(v).envelope();
      ev.created_at = parse_instant(line.at("created_at").get<std::string>()).value_or(Instant{});
      order_.push_back(ev.event_id());
      events_.emplace(ev.event_id(), std::move(ev));
      ++pending_;
    } else {
      auto it = events_.find(line.at("event_id").get<std::string>());
      if (it == events_.end()) continue;
      if (op == "submitted" && it->second.state == EventState::pending) {
        it->second.state = EventState::submitted;
        it->second.submitted_at = parse_instant(line.at("at").get<std::string>());
        it->second.last_error.clear();
        --pending_;
      } else if (op == "rejected") {
        it->second.last_error.clear();
        for (const auto& e : line.at("errors")) it->second.last_error.push_back(error_from_json(e));
      }
    }
  }
}

void LocalBuffer::journal(const Json& line) {
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw BufferError(BufferError::Code::Io, "cannot write buffer " + options_.path.string());
}

LocalEvent LocalBuffer::record(const MetricEnvelope& e) {
  std::lock_guard lock(mu_);
  if (events_.count(e.event_id()) != 0) {
    throw BufferError(BufferError::Code::Duplicate, "event " + e.event_id() + " already recorded");
  }
  if (pending_ >= options_.max_pending) {
    throw BufferError(BufferError::Code::BufferFull, "pending buffer is full; submit before recording more");
  }
  LocalEvent ev{e, EventState::pending, now_instant(), std::nullopt, {}};
  journal({{"op", "record"}, {"created_at", format_instant(ev.created_at)}, {"envelope", to_json(e)}});
  order_.push_back(ev.event_id());
  ++pending_;
  return events_.emplace(ev.event_id(), std::move(ev)).first->second;
}

bool LocalBuffer::contains(const std::string& event_id) const {
  std::lock_guard lock(mu_);
  return events_.count(event_id) != 0;
}

std::optional<LocalEvent> LocalBuffer::get(const std::string& event_id) const {
  std::lock_guard lock(mu_);
  auto it = events_.find(event_id);
  if (it == events_.end()) return std::nullopt;
  return it->second;
}

std::vector<LocalEvent> LocalBuffer::list(const ReviewFilter& filter) const {
  std::lock_guard lock(mu_);
  std::vector<LocalEvent> out;
  for (const auto& id : order_) {
    const auto& ev = events_.at(id);
    if (filter.matches(ev)) out.push_back(ev);
  }
  return out;
}

std::vector<std::string> LocalBuffer::pending_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& id : order_) {
    if (events_.at(id).state == EventState::pending) out.push_back(id);
  }
  return out;
}

std::size_t LocalBuffer::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

SubmitReceipt LocalBuffer::submit_selected(const std::vector<std::string>& event_ids, Transport& transport,
                                           const Credentials& auth) {
  std::vector<Json> docs;
  {
    std::lock_guard lock(mu_);
    std::set<std::string> seen;
    for (const auto& id : event_ids) {
      auto it = events_.find(id);
      if (it == events_.end()) throw BufferError(BufferError::Code::UnknownEvent, "unknown event " + id);
      if (it->second.state != EventState::pending || !seen.insert(id).second) {
        throw BufferError(BufferError::Code::NotPending, "event " + id + " is not pending");
      }
      docs.push_back(to_json(it->second.envelope));
    }
  }

  // Transfer runs without the lock so recording continues meanwhile.
  std::vector<SubmitReceipt> receipts;
  for (std::size_t begin = 0; begin < docs.size(); begin += kMaxBatchSize) {
    const auto end = std::min(docs.size(), begin + kMaxBatchSize);
    receipts.push_back(transport.submit(auth, std::vector<Json>(docs.begin() + static_cast<std::ptrdiff_t>(begin),
                                                                docs.begin() + static_cast<std::ptrdiff_t>(end))));
    if (receipts.back().total() != end - begin) throw TransportError("receipt does not cover the batch");
  }

  SubmitReceipt combined;
  std::map<std::size_t, std::vector<ValidationError>> rejected;
  for (std::size_t chunk = 0; chunk < receipts.size(); ++chunk) {
    combined.accepted += receipts[chunk].accepted;
    combined.duplicates += receipts[chunk].duplicates;
    for (auto& r : receipts[chunk].rejected) {
      const std::size_t index = chunk * kMaxBatchSize + r.index;
      rejected[index] = r.errors;
      combined.rejected.push_back({index, std::move(r.errors)});
    }
  }

  std::lock_guard lock(mu_);
  const auto at = now_instant();
  for (std::size_t i = 0; i < event_ids.size(); ++i) {
    auto& ev = events_.at(event_ids[i]);
    if (auto r = rejected.find(i); r != rejected.end()) {
      Json errors = Json::array();
      for (const auto& e : r->second) errors.push_back(to_json(e));
      journal({{"op", "rejected"}, {"event_id", ev.event_id()}, {"errors", errors}});
      ev.last_error = r->second;
    } else if (ev.state == EventState::pending) {
      journal({{"op", "submitted"}, {"event_id", ev.event_id()}, {"at", format_instant(at)}});
      ev.state = EventState::submitted;
      ev.submitted_at = at;
      ev.last_error.clear();
      --pending_;
    }
  }
  return combined;
}

}  // namespace devmetrics::agent
