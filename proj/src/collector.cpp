#include "devmetrics/collector.hpp"

#include "devmetrics/uuid.hpp"

#include <spdlog/spdlog.h>

#include <fstream>

namespace devmetrics {

namespace fs = std::filesystem;

bool constant_time_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

namespace {

std::string load_or_create_seed(const fs::path& dir) {
  const fs::path path = dir / "reader.seed";
  if (std::ifstream in(path); in) {
    std::string seed;
    std::getline(in, seed);
    if (!seed.empty()) return seed;
  }
  const std::string seed = random_uuid();
  {
    std::ofstream out(path, std::ios::trunc);
    out << seed << '\n';
  }
  fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write);
  spdlog::info("generated reader seed in {}", path.string());
  return seed;
}

}  // namespace

Collector::Collector(CollectorOptions options)
    : registrations_path_(options.store.directory / "registrations.jsonl"), store_(options.store) {
  reader_ = reader_credentials_from_seed(options.reader_seed.empty() ? load_or_create_seed(options.store.directory)
                                                                     : options.reader_seed);
  load_registrations();
}

void Collector::load_registrations() {
  std::ifstream in(registrations_path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto r = registration_from_json(Json::parse(line));
      secrets_by_guid_[r.agent.install_guid] = r.agent.secret_key;
    } catch (const std::exception& e) {
      // A torn final line from a crash during registration; the agent never got its reply.
      spdlog::warn("skipping unreadable registration line: {}", e.what());
    }
  }
}

Registration Collector::register_agent(const std::string& code_name, const std::string& full_name) {
  return persist(Registration{{code_name, full_name, random_uuid(), random_uuid()}, now_instant()});
}

Registration Collector::enroll(const AgentDescriptor& agent) { return persist(Registration{agent, now_instant()}); }

Registration Collector::persist(Registration r) {
  // Reuse the envelope rules for the descriptor.
  const Json probe = {{"timestamp", format_instant(r.created_at)},
                      {"agent", to_json(MetricEnvelope{r.created_at, r.agent, {}})["agent"]},
                      {"metrics", {{"event_id", "x"}, {"event_type", "x"}}}};
  if (auto v = validate_envelope(probe); !v) throw std::invalid_argument(v.errors().front().message);

  std::unique_lock lock(registrations_mu_);
  if (secrets_by_guid_.count(r.agent.install_guid) != 0) {
    throw std::invalid_argument("install_guid already registered");
  }
  {
    std::ofstream out(registrations_path_, std::ios::app);
    out << to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw StoreError(StoreError::Code::Io, "cannot persist registration");
  }
  secrets_by_guid_[r.agent.install_guid] = r.agent.secret_key;
  spdlog::info("registered agent {} install {}", r.agent.code_name, r.agent.install_guid);
  return r;
}

bool Collector::is_agent(const Credentials& c) const {
  std::shared_lock lock(registrations_mu_);
  auto it = secrets_by_guid_.find(c.install_guid);
  return it != secrets_by_guid_.end() && constant_time_equal(it->second, c.secret_key);
}

bool Collector::is_reader(const Credentials& c) const {
  return constant_time_equal(c.install_guid, reader_.install_guid) &&
         constant_time_equal(c.secret_key, reader_.secret_key);
}

SubmitReceipt Collector::submit_events(const Credentials& auth, const std::vector<Json>& batch, Instant received_at) {
  if (!is_agent(auth)) throw CollectorError(CollectorError::Code::Unauthorized, "unknown agent credentials");
  if (batch.empty()) throw CollectorError(CollectorError::Code::EmptyBatch, "batch is empty");
  if (batch.size() > kMaxBatchSize) {
    throw CollectorError(CollectorError::Code::BatchTooLarge, "batch exceeds 1000 elements");
  }

  SubmitReceipt receipt;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto v = validate_envelope(batch[i]);
    if (!v) {
      receipt.rejected.push_back({i, v.errors()});
      continue;
    }
    const auto& agent = v.envelope().agent;
    if (agent.install_guid != auth.install_guid || !constant_time_equal(agent.secret_key, auth.secret_key)) {
      receipt.rejected.push_back(
          {i, {{ErrorKind::CredentialMismatch, "agent", "agent identity does not match request credentials"}}});
      continue;
    }
    const auto result = store_.append(v.envelope(), received_at);
    (result.status == AppendStatus::fresh ? receipt.accepted : receipt.duplicates)++;
  }
  return receipt;
}

ScanPage Collector::pull_events(const Credentials& reader, const Cursor& from, std::size_t limit,
                                const ScanFilter& filter) const {
  if (!is_reader(reader)) throw CollectorError(CollectorError::Code::Unauthorized, "reader credentials required");
  return store_.scan(from, limit, filter);
}

Health Collector::health() const {
  const std::chrono::duration<double> up = std::chrono::steady_clock::now() - started_;
  return Health{DEVMETRICS_VERSION, store_.partition_count(), up.count()};
}

}  // namespace devmetrics
