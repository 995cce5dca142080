#pragma once

// Reference agents: a git history puller and a deterministic load generator.

#include "devmetrics/agent/buffer.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace devmetrics::agent {

class NotARepository : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommitInfo {
  std::string id;
  std::string author;
  std::string author_email;
  Instant authored_at{};
  std::size_t message_length = 0;  // bytes, trailing newlines excluded
  std::size_t files_changed = 0;
  std::size_t insertions = 0;      // binary files count as 0
  std::size_t deletions = 0;
};

/// Commits reachable from HEAD, oldest first; `since` keeps commits authored
/// at or after it. An empty repository has no commits.
std::vector<CommitInfo> read_git_log(const std::filesystem::path& repo, std::optional<Instant> since = {});

MetricEnvelope commit_envelope(const CommitInfo& c, const AgentDescriptor& agent,
                               const std::filesystem::path& repo);

/// Records one "vcs-commit" event per commit not already in the buffer and
/// returns how many were recorded.
std::size_t run_vcs_agent(LocalBuffer& buffer, const AgentDescriptor& agent, const std::filesystem::path& repo,
                          std::optional<Instant> since = {});

struct SyntheticProfile {
  std::size_t agents = 1;
  double rate = 1;         // events per second per agent
  double duration_s = 1;
  std::uint64_t seed = 0;
  Instant start = Instant{std::chrono::sys_days{std::chrono::year{2016} / 11 / 15}};

  std::size_t events_per_agent() const;
};

inline constexpr std::array<std::string_view, 3> kSyntheticEventTypes{"activity", "size", "defect"};

/// Agent identities derived from the seed; secrets are placeholders to be
/// replaced by real registrations.
std::vector<AgentDescriptor> synthetic_agents(const SyntheticProfile& p);

/// agents x floor(rate x duration) envelopes, agent-major, each agent's
/// events spaced 1/rate apart from profile.start. Uses synthetic_agents(p)
/// when `agents` is empty; otherwise it must hold p.agents entries.
std::vector<MetricEnvelope> run_synthetic_agent(const SyntheticProfile& p,
                                                std::span<const AgentDescriptor> agents = {});

/// The events of one agent only; run_synthetic_agent concatenates these.
std::vector<MetricEnvelope> synthetic_events(const SyntheticProfile& p, std::size_t agent_index,
                                             const AgentDescriptor& agent);

}  // namespace devmetrics::agent
