#include "devmetrics/http_server.hpp"
#include "devmetrics/process.hpp"

#include "fixtures.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace devmetrics;
using namespace devmetrics::testing;

namespace {

struct Cli {
  TempDir dir;
  std::filesystem::path config = dir / "devmetrics.conf";

  void write_config(const std::map<std::string, std::string>& settings) {
    std::ofstream out(config, std::ios::trunc);
    for (const auto& [k, v] : settings) out << k << " = " << Json(v).dump() << "\n";
  }

  ProcessResult operator()(std::vector<std::string> args) const {
    args.insert(args.begin(), {DEVMETRICS_CLI, "--config", config.string()});
    return run_process(args);
  }
};

/// Replaces values that legitimately differ between runs.
Json normalized(Json j) {
  static const std::set<std::string> volatile_keys{"created_at", "submitted_at", "uptime_s", "out"};
  if (j.is_object()) {
    for (auto& [k, v] : j.items()) {
      if (volatile_keys.count(k) && !v.is_null()) {
        v = "<" + k + ">";
      } else {
        v = normalized(v);
      }
    }
  } else if (j.is_array()) {
    for (auto& v : j) v = normalized(v);
  }
  return j;
}

void check_golden(const std::string& name, const std::string& output) {
  const auto path = std::filesystem::path(DEVMETRICS_GOLDEN_DIR) / (name + ".json");
  const auto got = normalized(Json::parse(output));
  if (std::getenv("DEVMETRICS_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(path, std::ios::trunc) << got.dump(2) << "\n";
  }
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing golden file " << path);
  const auto expected = Json::parse(in);
  CHECK_MESSAGE(got == expected, name << ":\n" << got.dump(2));
}

void write_file(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("cli exit codes and golden output") {
  Cli cli;
  Collector collector({{cli.dir / "collector"}, "golden-seed"});
  CollectorServer server(collector, {"127.0.0.1", 0, 8});
  const auto url = "http://127.0.0.1:" + std::to_string(server.start());
  const auto reg = collector.register_agent("cli-agent", "CLI agent");
  cli.write_config({{"server-url", url},
                    {"buffer", (cli.dir / "buffer.jsonl").string()},
                    {"sink", (cli.dir / "unified.db").string()},
                    {"install-guid", reg.agent.install_guid},
                    {"secret-key", reg.agent.secret_key},
                    {"code-name", reg.agent.code_name},
                    {"full-name", reg.agent.full_name},
                    {"reader-seed", "golden-seed"}});

  write_file(cli.dir / "listing.json", kListingDocument);
  auto r = cli({"agent", "record", (cli.dir / "listing.json").string()});
  CHECK(r.exit_code == 0);
  CHECK(r.out == "1 events recorded\n");

  r = cli({"agent", "list", "--keyword", "stackoverflow", "--json"});
  CHECK(r.exit_code == 0);
  check_golden("agent_list_keyword", r.out);
  CHECK(Json::parse(r.out)["events"].size() == 1);
  CHECK(cli({"agent", "list", "--keyword", "stackoverflow", "--json"}).out == r.out);

  r = cli({"agent", "list", "--keyword", "nothing-matches", "--json"});
  CHECK(Json::parse(r.out) == Json::parse(R"({"events": []})"));

  write_file(cli.dir / "browsing.map", R"({"table": "browsing", "source_event_type": "web-browsing", "columns": [
      {"name": "duration_s", "path": "metrics.event_duration", "type": "integer", "required": true},
      {"name": "host", "path": "metrics.host.host_name", "type": "string"}]})");
  r = cli({"unify", "--mapping", (cli.dir / "browsing.map").string(), "--once"});
  CHECK(r.exit_code == 0);
  CHECK(r.out == "0 rows\n");
  r = cli({"unify", "--mapping", (cli.dir / "browsing.map").string(), "--once", "--json"});
  check_golden("unify_empty", r.out);

  // The listing carries its own credentials, not this agent's: partial rejection.
  r = cli({"agent", "submit", "--all-pending", "--json"});
  CHECK(r.exit_code == 3);
  check_golden("submit_rejected", r.out);

  r = cli({"analytics", "over-time", "--from", "2016-11-14", "--to", "2016-11-17", "--json"});
  CHECK(r.exit_code == 0);
  check_golden("over_time_empty", r.out);

  r = cli({"health", "--json"});
  CHECK(r.exit_code == 0);
  check_golden("health", r.out);

  r = cli({"export", "--table", "browsing", "--format", "csv", "--out", (cli.dir / "b.csv").string(), "--json"});
  CHECK(r.exit_code == 0);
  check_golden("export_empty", r.out);

  SUBCASE("invalid input") {
    CHECK(cli({"agent", "list", "--state", "bogus"}).exit_code == 2);
    CHECK(cli({"agent", "submit"}).exit_code == 2);
    CHECK(cli({"export", "--table", "browsing", "--format", "xlsx", "--out", "x"}).exit_code == 2);
    CHECK(cli({"export", "--table", "nope", "--out", (cli.dir / "x.csv").string()}).exit_code == 2);
    CHECK(cli({"no-such-command"}).exit_code == 2);
    write_file(cli.dir / "bad.map", R"({"table": "Bad Name", "source_event_type": "x", "columns": []})");
    CHECK(cli({"unify", "--mapping", (cli.dir / "bad.map").string()}).exit_code == 2);
    CHECK(cli({"agent", "run", "vcs", "--repo", cli.dir.path().string()}).exit_code == 2);
  }
  SUBCASE("unauthorized") {
    CHECK(cli({"--reader-seed", "wrong", "analytics", "breakdown", "--dimension", "host"}).exit_code == 4);
  }
  SUBCASE("transport") {
    CHECK(cli({"--server-url", "http://127.0.0.1:1", "health"}).exit_code == 5);
    const auto pending = cli({"agent", "list", "--state", "pending", "--json"});
    CHECK(cli({"--server-url", "http://127.0.0.1:1", "agent", "submit", "--all-pending"}).exit_code == 5);
    CHECK(cli({"agent", "list", "--state", "pending", "--json"}).out == pending.out);
  }
  SUBCASE("storage") {
    CHECK(cli({"--max-pending", "1", "agent", "run", "synthetic", "--rate", "1", "--duration", "2"}).exit_code == 6);
  }
  SUBCASE("flags beat environment beats config") {
    ::setenv("DEVMETRICS_SERVER_URL", "http://127.0.0.1:1", 1);
    CHECK(cli({"health"}).exit_code == 5);
    CHECK(cli({"--server-url", url, "health"}).exit_code == 0);
    ::unsetenv("DEVMETRICS_SERVER_URL");
    CHECK(cli({"health"}).exit_code == 0);
  }
}

TEST_CASE("cli end to end with a git repository") {
  Cli cli;
  Collector collector({{cli.dir / "collector"}, "seed"});
  CollectorServer server(collector, {"127.0.0.1", 0, 8});
  const auto url = "http://127.0.0.1:" + std::to_string(server.start());
  const auto ids = build_git_fixture(cli.dir / "repo", {{{{"a.txt", "1\n"}}, "one"}, {{{"a.txt", "2\n"}}, "two"}});
  cli.write_config({{"server-url", url},
                    {"buffer", (cli.dir / "buffer.jsonl").string()},
                    {"sink", (cli.dir / "unified.db").string()},
                    {"reader-seed", "seed"}});
  auto r = cli({"register", "--code-name", "vcs-git"});
  REQUIRE(r.exit_code == 0);
  { std::ofstream(cli.config, std::ios::app) << r.out; }

  CHECK(cli({"agent", "run", "vcs", "--repo", (cli.dir / "repo").string()}).out == "2 events recorded\n");
  CHECK(cli({"agent", "run", "vcs", "--repo", (cli.dir / "repo").string()}).out == "0 events recorded\n");
  r = cli({"agent", "submit", "--all-pending"});
  CHECK(r.exit_code == 0);
  CHECK(r.out == "accepted 2, duplicates 0, rejected 0\n");

  write_file(cli.dir / "commits.map", R"({"table": "commits", "source_event_type": "vcs-commit", "columns": [
      {"name": "commit_id", "path": "metrics.commit_id", "type": "string", "required": true},
      {"name": "at", "path": "timestamp", "type": "timestamp", "required": true}]})");
  CHECK(cli({"unify", "--mapping", (cli.dir / "commits.map").string(), "--once"}).out == "2 rows\n");
  r = cli({"export", "--table", "commits", "--format", "csv", "--out", (cli.dir / "commits.csv").string()});
  CHECK(r.exit_code == 0);
  std::ifstream in(cli.dir / "commits.csv");
  const std::string csv((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(csv.rfind("commit_id,at\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  r = cli({"load-test", "--agents", "2", "--rate", "5", "--duration", "1", "--seed", "3", "--json"});
  CHECK(r.exit_code == 0);
  const auto report = Json::parse(r.out);
  CHECK(report["attempted"] == 10);
  CHECK(report["accepted"] == 10);
  CHECK(report["latency_ms"].contains("p99"));
}
