// devmetrics: one binary for every stage from agent to exported table.
//
// Global settings come from flags, then DEVMETRICS_* environment variables,
// then the --config file (key = value lines, keys are the long option names).
// Exit codes: 0 ok, 1 general failure, 2 invalid input, 3 partial rejection,
// 4 unauthorized, 5 transport, 6 storage.

#include "devmetrics/agent/agents.hpp"
#include "devmetrics/agent/local_server.hpp"
#include "devmetrics/analytics.hpp"
#include "devmetrics/export.hpp"
#include "devmetrics/http_server.hpp"
#include "devmetrics/load_test.hpp"
#include "devmetrics/unify/unifier.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace dm = devmetrics;
using dm::Json;

namespace {

enum Exit : int {
  kOk = 0,
  kGeneral = 1,
  kInvalidInput = 2,
  kPartialRejection = 3,
  kUnauthorized = 4,
  kTransport = 5,
  kStorage = 6,
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string server_url = "http://127.0.0.1:8080";
  std::string data_dir = "devmetrics-data";
  std::string buffer = "agent-buffer.jsonl";
  std::string sink = "unified.db";
  std::string install_guid;
  std::string secret_key;
  std::string code_name = "devmetrics-agent";
  std::string full_name = "devmetrics agent";
  std::string reader_seed;
  std::string reader_install_guid;
  std::string reader_secret_key;
  std::string registration_token;
  std::string log_level = "warn";
  std::size_t max_pending = 100'000;
  bool json = false;

  // Relative paths resolve against the working directory.
  void resolve() {
    for (auto* p : {&data_dir, &buffer, &sink}) *p = std::filesystem::absolute(*p).lexically_normal().string();
  }

  dm::AgentDescriptor agent() const {
    if (install_guid.empty() || secret_key.empty()) {
      throw UsageError("agent credentials missing: set install-guid and secret-key (see `devmetrics register`)");
    }
    return {code_name, full_name, secret_key, install_guid};
  }

  dm::Credentials agent_credentials() const {
    const auto a = agent();
    return {a.install_guid, a.secret_key};
  }

  dm::Credentials reader() const {
    if (!reader_install_guid.empty() || !reader_secret_key.empty()) return {reader_install_guid, reader_secret_key};
    if (!reader_seed.empty()) return dm::reader_credentials_from_seed(reader_seed);
    throw UsageError("reader credentials missing: set reader-seed or reader-install-guid/reader-secret-key");
  }

  dm::agent::LocalBuffer open_buffer() const { return dm::agent::LocalBuffer({buffer, max_pending}); }
};

std::optional<dm::Instant> instant_arg(const std::string& value, const char* name) {
  if (value.empty()) return std::nullopt;
  auto t = dm::parse_instant_or_date(value);
  if (!t) throw UsageError(std::string("--") + name + " must be an ISO-8601 instant or date");
  return t;
}

void print_json(const Json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<std::string> split_ids(const std::vector<std::string>& raw) {
  std::vector<std::string> ids;
  for (const auto& chunk : raw) {
    std::stringstream ss(chunk);
    std::string id;
    while (std::getline(ss, id, ',')) {
      if (!id.empty()) ids.push_back(id);
    }
  }
  return ids;
}

/// Blocks SIGINT/SIGTERM for every thread started afterwards so the caller
/// can wait for them synchronously.
sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

/// True once a stop signal arrived, waiting at most `timeout`.
bool wait_for_stop(const sigset_t& set, std::chrono::milliseconds timeout) {
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  timespec ts{static_cast<time_t>(secs.count()),
              static_cast<long>(std::chrono::duration_cast<std::chrono::nanoseconds>(timeout - secs).count())};
  return sigtimedwait(&set, nullptr, &ts) > 0;
}

std::string receipt_line(const dm::SubmitReceipt& r) {
  return "accepted " + std::to_string(r.accepted) + ", duplicates " + std::to_string(r.duplicates) + ", rejected " +
         std::to_string(r.rejected.size());
}

// ---------------------------------------------------------------- commands

int cmd_serve(const Settings& s, const std::string& host, int port, std::uint64_t max_bytes, bool sync,
              std::size_t threads, const std::string& ui_dir, const std::string& allow_origin) {
  const auto signals = block_stop_signals();
  dm::Collector collector({{s.data_dir, max_bytes, sync}, s.reader_seed});
  dm::ServerOptions options;
  options.host = host;
  options.port = port;
  options.threads = threads;
  options.registration_token = s.registration_token;
  options.allow_origin = allow_origin;
  if (!ui_dir.empty()) options.ui_dir = std::filesystem::absolute(ui_dir);
  dm::CollectorServer server(collector, options);
  const int bound = server.start();
  const auto reader = collector.reader_credentials();
  std::cout << "listening on " << host << ":" << bound << "\n"
            << "reader-install-guid = " << Json(reader.install_guid).dump() << "\n"
            << "reader-secret-key = " << Json(reader.secret_key).dump() << std::endl;
  while (!wait_for_stop(signals, std::chrono::hours{1})) {
  }
  server.stop();
  return kOk;
}

int cmd_register(const Settings& s) {
  dm::CollectorClient client(s.server_url);
  const auto r = client.register_agent(s.code_name, s.full_name, s.registration_token);
  if (s.json) {
    print_json(dm::to_json(r));
  } else {
    // config file lines; quoted so values with spaces survive
    std::cout << "install-guid = " << Json(r.agent.install_guid).dump() << "\n"
              << "secret-key = " << Json(r.agent.secret_key).dump() << "\n"
              << "code-name = " << Json(r.agent.code_name).dump() << "\n"
              << "full-name = " << Json(r.agent.full_name).dump() << "\n";
  }
  return kOk;
}

int cmd_agent_record(const Settings& s, const std::vector<std::string>& files) {
  auto buffer = s.open_buffer();
  std::vector<dm::MetricEnvelope> envelopes;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw UsageError("cannot read " + file);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto doc = dm::parse_wire_json(text);
    if (!doc.is_array()) doc = Json::array({doc});
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto v = dm::validate_envelope(doc[i]);
      if (!v) {
        for (const auto& e : v.errors()) {
          std::cerr << file << "[" << i << "]: " << dm::to_string(e.kind) << " " << e.path << ": " << e.message << "\n";
        }
        return kInvalidInput;
      }
      envelopes.push_back(std::move(v).envelope());
    }
  }
  for (const auto& e : envelopes) buffer.record(e);
  if (s.json) {
    print_json({{"recorded", envelopes.size()}});
  } else {
    std::cout << envelopes.size() << " events recorded\n";
  }
  return kOk;
}

int cmd_agent_run_vcs(const Settings& s, const std::string& repo, const std::string& since) {
  auto buffer = s.open_buffer();
  const auto n = dm::agent::run_vcs_agent(buffer, s.agent(), repo, instant_arg(since, "since"));
  if (s.json) {
    print_json({{"recorded", n}});
  } else {
    std::cout << n << " events recorded\n";
  }
  return kOk;
}

int cmd_agent_run_synthetic(const Settings& s, double rate, double duration, std::uint64_t seed) {
  auto buffer = s.open_buffer();
  dm::agent::SyntheticProfile p;
  p.agents = 1;
  p.rate = rate;
  p.duration_s = duration;
  p.seed = seed;
  const std::vector<dm::AgentDescriptor> agents{s.agent()};
  std::size_t n = 0;
  for (const auto& e : dm::agent::run_synthetic_agent(p, agents)) {
    if (buffer.contains(e.event_id())) continue;
    buffer.record(e);
    ++n;
  }
  if (s.json) {
    print_json({{"recorded", n}});
  } else {
    std::cout << n << " events recorded\n";
  }
  return kOk;
}

int cmd_agent_list(const Settings& s, const std::map<std::string, std::string>& query) {
  const auto buffer = s.open_buffer();
  dm::agent::ReviewFilter filter;
  try {
    filter = dm::agent::review_filter_from_query(query);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto events = buffer.list(filter);
  if (s.json) {
    Json arr = Json::array();
    for (const auto& e : events) arr.push_back(dm::agent::to_json(e));
    print_json({{"events", arr}});
    return kOk;
  }
  for (const auto& e : events) {
    const auto& m = e.envelope.metrics;
    const auto app = m.contains("application") && m["application"].is_string() ? m["application"].get<std::string>()
                                                                                 : std::string("-");
    std::cout << e.event_id() << "  " << dm::agent::to_string(e.state) << "  " << dm::format_instant(e.envelope.timestamp)
              << "  " << e.envelope.event_type() << "  " << app << "\n";
  }
  std::cout << events.size() << " events\n";
  return kOk;
}

int cmd_agent_submit(const Settings& s, const std::vector<std::string>& raw_ids, bool all_pending) {
  auto buffer = s.open_buffer();
  auto ids = all_pending ? buffer.pending_ids() : split_ids(raw_ids);
  if (!all_pending && ids.empty()) throw UsageError("nothing selected: pass --ids or --all-pending");
  dm::SubmitReceipt receipt;
  if (!ids.empty()) {
    dm::CollectorClient client(s.server_url);
    receipt = buffer.submit_selected(ids, client, s.agent_credentials());
  }
  if (s.json) {
    auto j = dm::to_json(receipt);
    for (auto& r : j["rejected"]) r["event_id"] = ids.at(r["index"].get<std::size_t>());
    print_json(j);
  } else {
    std::cout << receipt_line(receipt) << "\n";
    for (const auto& r : receipt.rejected) {
      for (const auto& e : r.errors) {
        std::cout << ids[r.index] << ": " << dm::to_string(e.kind) << " " << e.path << ": " << e.message << "\n";
      }
    }
  }
  return receipt.rejected.empty() ? kOk : kPartialRejection;
}

int cmd_agent_serve(const Settings& s, const std::string& host, int port, const std::string& allow_origin,
                    const std::string& repo, double interval_s) {
  const auto signals = block_stop_signals();
  auto buffer = s.open_buffer();
  dm::CollectorClient client(s.server_url);
  dm::agent::LocalAgentServer server(buffer, client, s.agent_credentials(), {host, port, allow_origin});
  const int bound = server.start();
  std::cout << "local agent endpoint on " << host << ":" << bound << std::endl;
  const auto agent = s.agent();
  const auto interval = std::chrono::milliseconds{static_cast<std::int64_t>(interval_s * 1000)};
  do {
    if (!repo.empty() && server.collecting()) {
      try {
        for (const auto& c : dm::agent::read_git_log(repo)) {
          // collection stopped mid-poll: the rest of this poll is discarded
          if (!server.collecting()) break;
          if (!buffer.contains(c.id)) buffer.record(dm::agent::commit_envelope(c, agent, repo));
        }
      } catch (const std::exception& e) {
        spdlog::warn("vcs poll failed: {}", e.what());
      }
    }
  } while (!wait_for_stop(signals, interval));
  server.stop();
  return kOk;
}

int cmd_unify(const Settings& s, const std::string& mapping_file, bool follow, std::size_t batch, double interval_s) {
  const auto mapping = dm::unify::load_mapping(mapping_file);
  dm::CollectorClient client(s.server_url);
  dm::unify::HttpSource source(client, s.reader());
  dm::unify::SqliteSink sink(s.sink);
  std::optional<sigset_t> signals;
  if (follow) signals = block_stop_signals();

  sink.create_table(mapping);
  const auto before = sink.load_checkpoint(mapping.table).value_or(dm::unify::UnifyCheckpoint{mapping.table, "", 0, 0, 0});
  auto report = [&](const dm::unify::UnifyCheckpoint& from, const dm::unify::UnifyCheckpoint& to) {
    const auto rows = to.rows_emitted - from.rows_emitted;
    const auto quarantined = to.quarantined - from.quarantined;
    if (s.json) {
      print_json({{"table", mapping.table},
                  {"rows", rows},
                  {"quarantined", quarantined},
                  {"skipped", to.skipped - from.skipped},
                  {"total_rows", to.rows_emitted},
                  {"total_quarantined", to.quarantined}});
    } else {
      std::cout << rows << " rows";
      if (quarantined) std::cout << ", " << quarantined << " quarantined";
      std::cout << std::endl;
    }
  };
  auto last = before;
  do {
    const auto now = dm::unify::run_unify(mapping, source, sink, {batch, 0});
    if (!follow || now.rows_emitted != last.rows_emitted || now.quarantined != last.quarantined) report(last, now);
    last = now;
  } while (follow && !wait_for_stop(*signals, std::chrono::milliseconds{static_cast<std::int64_t>(interval_s * 1000)}));
  return kOk;
}

int cmd_export(const Settings& s, const std::string& table, const std::string& format, const std::string& out,
               const std::string& relation) {
  const auto f = dm::exporter::parse_format(format);
  if (!f) throw UsageError("--format must be csv or arff");
  dm::unify::SqliteSink sink(s.sink);
  dm::exporter::ExportRequest request{table, *f, out, std::nullopt};
  if (!relation.empty()) request.relation = relation;
  const auto rows = dm::exporter::export_table(sink, request);
  if (s.json) {
    print_json({{"table", table}, {"format", format}, {"out", std::filesystem::absolute(out).string()}, {"rows", rows}});
  } else {
    std::cout << rows << " rows written to " << out << "\n";
  }
  return kOk;
}

int cmd_load_test(const Settings& s, std::size_t agents, double rate, double duration, std::uint64_t seed,
                  std::size_t batch, bool max_rate) {
  dm::LoadTestOptions o;
  o.url = s.server_url;
  o.profile.agents = agents;
  o.profile.rate = rate;
  o.profile.duration_s = duration;
  o.profile.seed = seed;
  o.batch = batch;
  o.max_rate = max_rate;
  o.registration_token = s.registration_token;
  const auto r = dm::run_load_test(o);
  if (s.json) {
    print_json(dm::to_json(r));
  } else {
    std::printf(
        "attempted %zu\naccepted %zu\nduplicates %zu\nrejected %zu\noverload rejected %zu\nrequests %zu\n"
        "elapsed %.3f s\nthroughput %.1f accepted/s\nlatency p50 %.2f ms, p95 %.2f ms, p99 %.2f ms\n",
        r.attempted, r.accepted, r.duplicates, r.rejected, r.overload_rejected, r.requests, r.elapsed_s, r.throughput,
        r.latency_p50_ms, r.latency_p95_ms, r.latency_p99_ms);
  }
  return r.rejected == 0 && r.overload_rejected == 0 ? kOk : kPartialRejection;
}

int cmd_health(const Settings& s) {
  dm::CollectorClient client(s.server_url);
  const auto h = client.health();
  if (s.json) {
    print_json(dm::to_json(h));
  } else {
    std::cout << "version " << h.version << "\npartitions " << h.partition_count << "\nuptime " << h.uptime_s << " s\n";
  }
  return kOk;
}

void print_series(const Settings& s, const Json& series) {
  if (s.json) return print_json(series);
  for (const auto& b : series["buckets"]) {
    std::cout << b["label"].get<std::string>() << "  " << b["count"] << "  " << b["total_duration_s"] << "\n";
  }
}

int cmd_over_time(const Settings& s, const std::string& from, const std::string& to, const std::string& event_type) {
  dm::CollectorClient client(s.server_url);
  print_series(s, client.over_time(s.reader(), from, to, event_type));
  return kOk;
}

int cmd_breakdown(const Settings& s, const std::string& dimension, const std::string& from, const std::string& to) {
  dm::CollectorClient client(s.server_url);
  print_series(s, client.breakdown(s.reader(), dimension, from, to));
  return kOk;
}

/// Applies the config file as option defaults, so environment variables and
/// flags, which CLI11 resolves during parse, both take precedence over it.
void load_config_defaults(CLI::App& app, int argc, char** argv) {
  std::string file;
  if (const char* env = std::getenv("DEVMETRICS_CONFIG")) file = env;
  for (int i = 1; i < argc; ++i) {
    const std::string_view arg = argv[i];
    if (arg == "--config" && i + 1 < argc) file = argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) file = std::string(arg.substr(9));
  }
  if (file.empty()) return;
  for (const auto& item : CLI::ConfigINI().from_file(file)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    auto* opt = item.parents.empty() ? app.get_option_no_throw("--" + item.name) : nullptr;
    if (opt == nullptr || !opt->get_configurable()) {
      throw CLI::ConfigError(file + ": unknown setting '" + item.fullname() + "'");
    }
    std::string value;
    for (const auto& v : item.inputs) value += (value.empty() ? "" : " ") + v;
    opt->default_val(value);
  }
}

int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << "error: " << kind << ": " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Software metrics collection: agents, collector, unifier, exporter"};
  app.set_version_flag("--version", std::string(DEVMETRICS_VERSION));
  std::string config_file;
  app.add_option("--config", config_file, "Settings file (key = value)")
      ->envname("DEVMETRICS_CONFIG")
      ->configurable(false);
  app.require_subcommand(1);
  app.fallthrough();

  Settings s;
  auto setting = [&](const char* name, std::string& target, const char* env, const char* help) {
    app.add_option(name, target, help)->envname(env)->capture_default_str();
  };
  setting("--server-url", s.server_url, "DEVMETRICS_SERVER_URL", "Collector base URL");
  setting("--data-dir", s.data_dir, "DEVMETRICS_DATA_DIR", "Collector data directory");
  setting("--buffer", s.buffer, "DEVMETRICS_BUFFER", "Agent buffer file");
  setting("--sink", s.sink, "DEVMETRICS_SINK", "Unified tables database file");
  setting("--install-guid", s.install_guid, "DEVMETRICS_INSTALL_GUID", "Agent install GUID");
  setting("--secret-key", s.secret_key, "DEVMETRICS_SECRET_KEY", "Agent secret key");
  setting("--code-name", s.code_name, "DEVMETRICS_CODE_NAME", "Agent code name");
  setting("--full-name", s.full_name, "DEVMETRICS_FULL_NAME", "Agent full name");
  setting("--reader-seed", s.reader_seed, "DEVMETRICS_READER_SEED", "Seed for reader credentials");
  setting("--reader-install-guid", s.reader_install_guid, "DEVMETRICS_READER_INSTALL_GUID", "Reader install GUID");
  setting("--reader-secret-key", s.reader_secret_key, "DEVMETRICS_READER_SECRET_KEY", "Reader secret key");
  setting("--registration-token", s.registration_token, "DEVMETRICS_REGISTRATION_TOKEN", "Shared registration token");
  setting("--log-level", s.log_level, "DEVMETRICS_LOG_LEVEL", "trace|debug|info|warn|error|off");
  app.add_option("--max-pending", s.max_pending, "Agent buffer cap")->envname("DEVMETRICS_MAX_PENDING");
  app.add_flag("--json", s.json, "Machine-readable output")->configurable(false);

  std::function<int()> run;

  auto* serve = app.add_subcommand("serve", "Run the collector");
  std::string host = "127.0.0.1", ui_dir, allow_origin;
  int port = 8080;
  std::uint64_t max_bytes = 0;
  bool sync = false;
  std::size_t threads = 64;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve->add_option("--max-bytes", max_bytes, "Storage cap, 0 = unlimited");
  serve->add_flag("--sync", sync, "fsync every append");
  serve->add_option("--threads", threads, "Worker threads; keep above the number of concurrent agents")
      ->capture_default_str();
  serve->add_option("--ui-dir", ui_dir, "Static dashboard files served under /ui");
  serve->add_option("--allow-origin", allow_origin, "CORS origin for browser clients");
  serve->callback([&] { run = [&] { return cmd_serve(s, host, port, max_bytes, sync, threads, ui_dir, allow_origin); }; });

  auto* reg = app.add_subcommand("register", "Register this agent with the collector");
  reg->callback([&] { run = [&] { return cmd_register(s); }; });

  auto* health = app.add_subcommand("health", "Collector health");
  health->callback([&] { run = [&] { return cmd_health(s); }; });

  auto* agent = app.add_subcommand("agent", "Local agent operations");
  agent->require_subcommand(1);
  agent->fallthrough();

  auto* agent_run = agent->add_subcommand("run", "Collect events into the local buffer");
  agent_run->require_subcommand(1);
  agent_run->fallthrough();
  auto* vcs = agent_run->add_subcommand("vcs", "Record git commits");
  std::string repo = ".", since;
  vcs->add_option("--repo", repo, "Working copy")->capture_default_str();
  vcs->add_option("--since", since, "Only commits authored at or after this instant");
  vcs->callback([&] { run = [&] { return cmd_agent_run_vcs(s, repo, since); }; });
  auto* synthetic = agent_run->add_subcommand("synthetic", "Record a deterministic synthetic stream");
  double rate = 1, duration = 10;
  std::uint64_t seed = 0;
  synthetic->add_option("--rate", rate, "Events per second")->required();
  synthetic->add_option("--duration", duration, "Seconds of simulated activity")->required();
  synthetic->add_option("--seed", seed)->capture_default_str();
  synthetic->callback([&] { run = [&] { return cmd_agent_run_synthetic(s, rate, duration, seed); }; });

  auto* record = agent->add_subcommand("record", "Record envelope documents from JSON files");
  std::vector<std::string> files;
  record->add_option("files", files, "Files holding one envelope or an array of envelopes")->required();
  record->callback([&] { run = [&] { return cmd_agent_record(s, files); }; });

  auto* list = agent->add_subcommand("list", "Review buffered events");
  std::map<std::string, std::string> query;
  for (const char* key : {"keyword", "application", "from", "to", "state"}) {
    list->add_option(std::string("--") + key, query[key]);
  }
  list->callback([&] { run = [&] { return cmd_agent_list(s, query); }; });

  auto* submit = agent->add_subcommand("submit", "Send selected events to the collector");
  std::vector<std::string> ids;
  bool all_pending = false;
  auto* ids_opt = submit->add_option("--ids", ids, "Event ids, comma separated or repeated");
  submit->add_flag("--all-pending", all_pending)->excludes(ids_opt);
  submit->callback([&] { run = [&] { return cmd_agent_submit(s, ids, all_pending); }; });

  auto* agent_serve = agent->add_subcommand("serve", "Local endpoint for the review UI");
  std::string local_host = "127.0.0.1", local_origin, watch_repo;
  int local_port = 8081;
  double poll = 30;
  agent_serve->add_option("--host", local_host)->capture_default_str();
  agent_serve->add_option("--port", local_port)->capture_default_str();
  agent_serve->add_option("--allow-origin", local_origin);
  agent_serve->add_option("--repo", watch_repo, "Poll this git working copy while collection is on");
  agent_serve->add_option("--interval", poll, "Poll interval in seconds")->capture_default_str();
  agent_serve->callback(
      [&] { run = [&] { return cmd_agent_serve(s, local_host, local_port, local_origin, watch_repo, poll); }; });

  auto* unify = app.add_subcommand("unify", "Project raw documents into a table");
  std::string mapping;
  bool once = false, follow = false;
  std::size_t batch = 1000;
  double interval = 5;
  unify->add_option("--mapping", mapping, "Mapping file")->required()->check(CLI::ExistingFile);
  auto* once_flag = unify->add_flag("--once", once, "Drain what is available and exit (default)");
  unify->add_flag("--follow", follow, "Keep pulling until interrupted")->excludes(once_flag);
  unify->add_option("--batch", batch, "Records per pull")->capture_default_str();
  unify->add_option("--interval", interval, "Seconds between pulls with --follow")->capture_default_str();
  unify->callback([&] { run = [&] { return cmd_unify(s, mapping, follow, batch, interval); }; });

  auto* exp = app.add_subcommand("export", "Write a unified table to a file");
  std::string table, format = "csv", out, relation;
  exp->add_option("--table", table)->required();
  exp->add_option("--format", format, "csv or arff")->capture_default_str();
  exp->add_option("--out", out)->required();
  exp->add_option("--relation", relation, "ARFF relation name (default: table)");
  exp->callback([&] { run = [&] { return cmd_export(s, table, format, out, relation); }; });

  auto* load = app.add_subcommand("load-test", "Drive synthetic agents against the collector");
  std::size_t load_agents = 1, load_batch = 1;
  double load_rate = 1, load_duration = 1;
  std::uint64_t load_seed = 0;
  bool max_rate = false;
  load->add_option("--agents", load_agents)->required();
  load->add_option("--rate", load_rate, "Events per second per agent")->required();
  load->add_option("--duration", load_duration, "Seconds")->required();
  load->add_option("--seed", load_seed)->capture_default_str();
  load->add_option("--batch", load_batch, "Envelopes per request")->capture_default_str();
  load->add_flag("--max-rate", max_rate, "Send back to back instead of on schedule");
  load->callback([&] {
    run = [&] { return cmd_load_test(s, load_agents, load_rate, load_duration, load_seed, load_batch, max_rate); };
  });

  auto* analytics = app.add_subcommand("analytics", "Dashboard queries");
  analytics->require_subcommand(1);
  analytics->fallthrough();
  auto* over_time = analytics->add_subcommand("over-time", "Events per UTC day");
  std::string from, to, event_type, dimension;
  over_time->add_option("--from", from)->required();
  over_time->add_option("--to", to)->required();
  over_time->add_option("--event-type", event_type);
  over_time->callback([&] { run = [&] { return cmd_over_time(s, from, to, event_type); }; });
  auto* breakdown = analytics->add_subcommand("breakdown", "Events per event_type, application or host");
  breakdown->add_option("--dimension", dimension)->required();
  breakdown->add_option("--from", from);
  breakdown->add_option("--to", to);
  breakdown->callback([&] { run = [&] { return cmd_breakdown(s, dimension, from, to); }; });

  try {
    load_config_defaults(app, argc, argv);
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidInput;
  }

  spdlog::set_level(spdlog::level::from_str(s.log_level));
  try {
    s.resolve();
    return run ? run() : kInvalidInput;
  } catch (const UsageError& e) {
    return report_error("invalid input", e, kInvalidInput);
  } catch (const dm::unify::BadMapping& e) {
    return report_error("bad mapping", e, kInvalidInput);
  } catch (const dm::agent::NotARepository& e) {
    return report_error("not a repository", e, kInvalidInput);
  } catch (const dm::agent::BufferError& e) {
    const bool storage = e.code() == dm::agent::BufferError::Code::BufferFull ||
                         e.code() == dm::agent::BufferError::Code::Io;
    return report_error("buffer", e, storage ? kStorage : kInvalidInput);
  } catch (const dm::UnauthorizedError& e) {
    return report_error("unauthorized", e, kUnauthorized);
  } catch (const dm::TransportError& e) {
    return report_error("transport", e, kTransport);
  } catch (const dm::RequestError& e) {
    return report_error("request refused", e, kInvalidInput);
  } catch (const dm::StoreError& e) {
    return report_error("storage", e, kStorage);
  } catch (const dm::unify::SinkError& e) {
    const bool missing = e.code() == dm::unify::SinkError::Code::UnknownTable;
    return report_error("sink", e, missing ? kInvalidInput : kStorage);
  } catch (const dm::exporter::IoError& e) {
    return report_error("io", e, kStorage);
  } catch (const std::invalid_argument& e) {
    return report_error("invalid input", e, kInvalidInput);
  } catch (const std::exception& e) {
    return report_error("failed", e, kGeneral);
  }
}
