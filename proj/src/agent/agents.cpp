#include "devmetrics/agent/agents.hpp"

#include "devmetrics/process.hpp"
#include "devmetrics/uuid.hpp"

#include <cmath>
#include <random>

namespace devmetrics::agent {
namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  for (;;) {
    const auto pos = s.find(sep, begin);
    out.emplace_back(s.substr(begin, pos == std::string_view::npos ? std::string_view::npos : pos - begin));
    if (pos == std::string_view::npos) return out;
    begin = pos + 1;
  }
}

std::size_t parse_count(std::string_view s) {
  if (s == "-") return 0;  // binary file
  return static_cast<std::size_t>(std::stoull(std::string(s)));
}

ProcessResult git(const std::filesystem::path& repo, std::vector<std::string> args) {
  args.insert(args.begin(), {"git", "-C", repo.string()});
  return run_process(args);
}

}  // namespace

std::vector<CommitInfo> read_git_log(const std::filesystem::path& repo, std::optional<Instant> since) {
  if (!std::filesystem::is_directory(repo)) throw NotARepository(repo.string() + " is not a directory");
  if (git(repo, {"rev-parse", "--is-inside-work-tree"}).exit_code != 0) {
    throw NotARepository(repo.string() + " is not a git working copy");
  }
  if (git(repo, {"rev-parse", "--verify", "--quiet", "HEAD"}).exit_code != 0) return {};

  // Each commit starts with \x1e; header fields end with \x1f, the last one
  // after the raw body, followed by --numstat lines.
  const auto log = git(repo, {"-c", "core.quotepath=off", "log", "--reverse", "--numstat", "--no-renames",
                              "--format=%x1e%H%x1f%an%x1f%ae%x1f%at%x1f%B%x1f"});
  if (log.exit_code != 0) throw std::runtime_error("git log failed in " + repo.string());

  std::vector<CommitInfo> commits;
  for (const auto& chunk : split(log.out, '\x1e')) {
    if (chunk.empty()) continue;
    const auto fields = split(chunk, '\x1f');
    if (fields.size() < 6) throw std::runtime_error("unexpected git log output");
    CommitInfo c;
    c.id = fields[0];
    c.author = fields[1];
    c.author_email = fields[2];
    c.authored_at = Instant{std::chrono::seconds{std::stoll(fields[3])}};
    std::string_view body = fields[4];
    while (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    c.message_length = body.size();
    for (const auto& line : split(fields[5], '\n')) {
      if (line.empty()) continue;
      const auto cols = split(line, '\t');
      if (cols.size() < 3) continue;
      ++c.files_changed;
      c.insertions += parse_count(cols[0]);
      c.deletions += parse_count(cols[1]);
    }
    if (since && c.authored_at < *since) continue;
    commits.push_back(std::move(c));
  }
  return commits;
}

MetricEnvelope commit_envelope(const CommitInfo& c, const AgentDescriptor& agent, const std::filesystem::path& repo) {
  MetricEnvelope e;
  e.timestamp = c.authored_at;
  e.agent = agent;
  e.metrics = Json{{"event_id", c.id},
                   {"event_type", "vcs-commit"},
                   {"commit_id", c.id},
                   {"author", c.author},
                   {"author_email", c.author_email},
                   {"message_length", c.message_length},
                   {"files_changed", c.files_changed},
                   {"insertions", c.insertions},
                   {"deletions", c.deletions},
                   {"repository", std::filesystem::absolute(repo).lexically_normal().string()}};
  return e;
}

std::size_t run_vcs_agent(LocalBuffer& buffer, const AgentDescriptor& agent, const std::filesystem::path& repo,
                          std::optional<Instant> since) {
  std::size_t recorded = 0;
  for (const auto& c : read_git_log(repo, since)) {
    if (buffer.contains(c.id)) continue;
    buffer.record(commit_envelope(c, agent, repo));
    ++recorded;
  }
  return recorded;
}

std::size_t SyntheticProfile::events_per_agent() const {
  return static_cast<std::size_t>(std::floor(rate * duration_s + 1e-9));
}

std::vector<AgentDescriptor> synthetic_agents(const SyntheticProfile& p) {
  std::vector<AgentDescriptor> out;
  for (std::size_t i = 0; i < p.agents; ++i) {
    const auto tag = std::to_string(p.seed) + ":" + std::to_string(i);
    out.push_back({"synthetic", "Synthetic load agent " + std::to_string(i), derived_uuid("synthetic-secret:" + tag),
                   derived_uuid("synthetic-agent:" + tag)});
  }
  return out;
}

std::vector<MetricEnvelope> synthetic_events(const SyntheticProfile& p, std::size_t agent_index,
                                             const AgentDescriptor& agent) {
  std::mt19937_64 rng(p.seed * 0x9E3779B97F4A7C15ULL + agent_index + 1);
  const auto n = p.events_per_agent();
  std::vector<MetricEnvelope> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    MetricEnvelope e;
    e.agent = agent;
    e.timestamp = p.start + std::chrono::milliseconds{static_cast<std::int64_t>(std::llround(k * 1000.0 / p.rate))};
    const auto type = kSyntheticEventTypes[rng() % kSyntheticEventTypes.size()];
    e.metrics = Json{{"event_id", derived_uuid("synthetic-event:" + std::to_string(p.seed) + ":" +
                                               std::to_string(agent_index) + ":" + std::to_string(k))},
                     {"event_type", type}};
    if (type == "activity") {
      static constexpr std::array<const char*, 4> apps{"editor", "browser", "terminal", "ide"};
      e.metrics["application"] = apps[rng() % apps.size()];
      e.metrics["event_duration"] = static_cast<std::int64_t>(rng() % 3600);
    } else if (type == "size") {
      e.metrics["file"] = "src/module" + std::to_string(rng() % 50) + ".cpp";
      e.metrics["loc"] = static_cast<std::int64_t>(rng() % 5000);
    } else {
      e.metrics["severity"] = static_cast<std::int64_t>(rng() % 5);
      e.metrics["open"] = (rng() & 1) == 1;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<MetricEnvelope> run_synthetic_agent(const SyntheticProfile& p, std::span<const AgentDescriptor> agents) {
  if (p.agents == 0 || !(p.rate > 0) || !(p.duration_s > 0)) {
    throw std::invalid_argument("synthetic profile needs agents, rate and duration > 0");
  }
  std::vector<AgentDescriptor> derived;
  if (agents.empty()) {
    derived = synthetic_agents(p);
    agents = derived;
  }
  if (agents.size() != p.agents) throw std::invalid_argument("agent list does not match profile.agents");
  std::vector<MetricEnvelope> out;
  out.reserve(p.agents * p.events_per_agent());
  for (std::size_t i = 0; i < p.agents; ++i) {
    auto events = synthetic_events(p, i, agents[i]);
    std::move(events.begin(), events.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace devmetrics::agent
