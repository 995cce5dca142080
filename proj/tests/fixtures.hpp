#pragma once

// Fault-injecting transport and a git fixture builder shared by the agent
// tests and the acceptance suite.

#include "devmetrics/client.hpp"
#include "devmetrics/collector.hpp"
#include "devmetrics/process.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace devmetrics::testing {

/// In-process transport with a scripted fault per call.
class ScriptedTransport : public Transport {
 public:
  enum class Fault {
    none,
    drop_request,   // connection lost before the collector sees the batch
    drop_response,  // batch stored, response lost
    corrupt_first,  // first element mangled in flight so the collector rejects it
  };

  explicit ScriptedTransport(Collector& collector) : collector_(collector) {}

  void script(std::initializer_list<Fault> faults) { faults_.insert(faults_.end(), faults); }
  void script(Fault f) { faults_.push_back(f); }

  SubmitReceipt submit(const Credentials& auth, const std::vector<Json>& batch) override {
    ++calls;
    const Fault f = faults_.empty() ? Fault::none : faults_.front();
    if (!faults_.empty()) faults_.pop_front();
    if (f == Fault::drop_request) throw TransportError("scripted: request dropped");
    auto sent = batch;
    if (f == Fault::corrupt_first && !sent.empty()) sent[0]["timestamp"] = "not a timestamp";
    auto receipt = collector_.submit_events(auth, sent);
    if (f == Fault::drop_response) throw TransportError("scripted: response dropped");
    return receipt;
  }

  std::size_t calls = 0;

 private:
  Collector& collector_;
  std::deque<Fault> faults_;
};

struct FixtureCommit {
  std::map<std::string, std::string> files;  // path -> full content
  std::string message;
};

inline std::string git_checked(const std::filesystem::path& repo, std::vector<std::string> args) {
  args.insert(args.begin(), {"git", "-C", repo.string(), "-c", "user.name=Fixture Author", "-c",
                             "user.email=fixture@example.com", "-c", "commit.gpgsign=false"});
  auto r = run_process(args);
  if (r.exit_code != 0) throw std::runtime_error("git fixture command failed: " + args[3]);
  return r.out;
}

inline void git_init(const std::filesystem::path& repo) {
  std::filesystem::create_directories(repo);
  git_checked(repo, {"init", "-q"});
}

inline constexpr std::int64_t kFixtureEpoch = 1479168000;  // 2016-11-15T00:00:00Z

/// Builds the commits in order and returns their ids. Commit i is authored
/// at 2016-11-15T00:00:00Z + i hours.
inline std::vector<std::string> build_git_fixture(const std::filesystem::path& repo,
                                                  const std::vector<FixtureCommit>& commits) {
  git_init(repo);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < commits.size(); ++i) {
    for (const auto& [path, content] : commits[i].files) {
      const auto full = repo / path;
      std::filesystem::create_directories(full.parent_path());
      std::ofstream(full, std::ios::binary | std::ios::trunc) << content;
      git_checked(repo, {"add", path});
    }
    const auto date = "@" + std::to_string(kFixtureEpoch + 3600 * i) + " +0000";
    git_checked(repo, {"commit", "-q", "--allow-empty", "-m", commits[i].message, "--date", date});
    auto head = git_checked(repo, {"rev-parse", "HEAD"});
    while (!head.empty() && head.back() == '\n') head.pop_back();
    ids.push_back(head);
  }
  return ids;
}

}  // namespace devmetrics::testing
