#include "devmetrics/unify/sink.hpp"

#include <sqlite3.h>

namespace devmetrics::unify {
namespace {

class Statement {
 public:
  Statement(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), static_cast<int>(sql.size()), &stmt_, nullptr) != SQLITE_OK) {
      throw SinkError(SinkError::Code::SinkUnavailable, std::string("sqlite prepare: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  void bind(int i, const std::string& s) {
    sqlite3_bind_text(stmt_, i, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
  }
  void bind(int i, std::int64_t v) { sqlite3_bind_int64(stmt_, i, v); }
  void bind(int i, double v) { sqlite3_bind_double(stmt_, i, v); }
  void bind_null(int i) { sqlite3_bind_null(stmt_, i); }

  void bind(int i, const Value& v) {
    if (is_null(v)) return bind_null(i);
    if (auto* s = std::get_if<std::string>(&v)) return bind(i, *s);
    if (auto* n = std::get_if<std::int64_t>(&v)) return bind(i, *n);
    if (auto* d = std::get_if<double>(&v)) return bind(i, *d);
    if (auto* b = std::get_if<bool>(&v)) return bind(i, static_cast<std::int64_t>(*b ? 1 : 0));
    return bind(i, format_instant(std::get<Instant>(v)));
  }

  /// True while rows are available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw SinkError(SinkError::Code::SinkUnavailable, std::string("sqlite step: ") + sqlite3_errmsg(db_));
  }

  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  bool null_at(int i) const { return sqlite3_column_type(stmt_, i) == SQLITE_NULL; }
  std::string text(int i) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, i));
    return p == nullptr ? std::string{} : std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i)));
  }
  std::int64_t int64(int i) const { return sqlite3_column_int64(stmt_, i); }
  double real(int i) const { return sqlite3_column_double(stmt_, i); }

  Value value(int i, ColumnType type) const {
    if (null_at(i)) return {};
    switch (type) {
      case ColumnType::string: return text(i);
      case ColumnType::integer: return int64(i);
      case ColumnType::real: return real(i);
      case ColumnType::boolean: return int64(i) != 0;
      case ColumnType::timestamp: return parse_instant(text(i)).value_or(Instant{});
    }
    return {};
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

std::string_view sql_type(ColumnType t) {
  switch (t) {
    case ColumnType::integer:
    case ColumnType::boolean: return "INTEGER";
    case ColumnType::real: return "REAL";
    default: return "TEXT";
  }
}

std::string sql_name(std::string_view identifier) { return "\"" + std::string(identifier) + "\""; }

}  // namespace

SqliteSink::SqliteSink(const std::filesystem::path& file) {
  if (file.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
  }
  if (sqlite3_open_v2(file.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw SinkError(SinkError::Code::SinkUnavailable, "cannot open sink " + file.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 10'000);
  exec("PRAGMA journal_mode=WAL");
  exec("PRAGMA synchronous=NORMAL");
  exec("CREATE TABLE IF NOT EXISTS _tables (name TEXT PRIMARY KEY, mapping TEXT NOT NULL)");
  exec("CREATE TABLE IF NOT EXISTS _checkpoints (mapping TEXT PRIMARY KEY, cursor TEXT NOT NULL, "
       "rows_emitted INTEGER NOT NULL, quarantined INTEGER NOT NULL, skipped INTEGER NOT NULL)");
}

SqliteSink::~SqliteSink() { sqlite3_close(db_); }

void SqliteSink::exec(const std::string& sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw SinkError(SinkError::Code::SinkUnavailable, "sqlite: " + msg);
  }
}

std::optional<MappingSpec> SqliteSink::mapping_of(const std::string& table) const {
  Statement st(db_, "SELECT mapping FROM _tables WHERE name = ?");
  st.bind(1, table);
  if (!st.step()) return std::nullopt;
  return mapping_from_json(Json::parse(st.text(0)));
}

void SqliteSink::create_table(const MappingSpec& m) {
  check_mapping(m);
  std::lock_guard lock(mu_);
  exec("BEGIN IMMEDIATE");
  try {
    if (auto existing = mapping_of(m.table)) {
      if (*existing != m) {
        throw SinkError(SinkError::Code::SchemaConflict, "table " + m.table + " exists with a different mapping");
      }
      exec("COMMIT");
      return;
    }
    std::string ddl = "CREATE TABLE " + sql_name(m.table) + " (install_guid TEXT NOT NULL, event_id TEXT NOT NULL";
    for (const auto& c : m.columns) ddl += ", " + sql_name(c.name) + " " + std::string(sql_type(c.type));
    ddl += ", PRIMARY KEY (install_guid, event_id))";
    exec(ddl);
    exec("CREATE TABLE " + sql_name(m.table + "__quarantine") +
         " (install_guid TEXT NOT NULL, event_id TEXT NOT NULL, path TEXT NOT NULL, reason TEXT NOT NULL, "
         "document TEXT NOT NULL, PRIMARY KEY (install_guid, event_id))");
    Statement st(db_, "INSERT INTO _tables (name, mapping) VALUES (?, ?)");
    st.bind(1, m.table);
    st.bind(2, canonical_json(to_json(m)));
    st.step();
    exec("COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
}

void SqliteSink::write_rows(const MappingSpec& m, const std::vector<Row>& rows) {
  if (rows.empty()) return;
  std::string sql = "INSERT INTO " + sql_name(m.table) + " (install_guid, event_id";
  std::string placeholders = "?, ?";
  std::string updates;
  for (const auto& c : m.columns) {
    sql += ", " + sql_name(c.name);
    placeholders += ", ?";
    updates += (updates.empty() ? "" : ", ") + sql_name(c.name) + " = excluded." + sql_name(c.name);
  }
  sql += ") VALUES (" + placeholders + ") ON CONFLICT (install_guid, event_id) DO ";
  sql += updates.empty() ? "NOTHING" : "UPDATE SET " + updates;
  Statement st(db_, sql);
  for (const auto& r : rows) {
    if (r.values.size() != m.columns.size()) throw std::invalid_argument("row width does not match table " + m.table);
    st.bind(1, r.install_guid);
    st.bind(2, r.event_id);
    for (std::size_t i = 0; i < r.values.size(); ++i) st.bind(static_cast<int>(i) + 3, r.values[i]);
    st.step();
    st.reset();
  }
}

void SqliteSink::write_quarantine(const std::string& table, const std::vector<QuarantineEntry>& entries) {
  if (entries.empty()) return;
  Statement st(db_, "INSERT INTO " + sql_name(table + "__quarantine") +
                        " (install_guid, event_id, path, reason, document) VALUES (?, ?, ?, ?, ?) "
                        "ON CONFLICT (install_guid, event_id) DO UPDATE SET path = excluded.path, "
                        "reason = excluded.reason, document = excluded.document");
  for (const auto& q : entries) {
    st.bind(1, q.install_guid);
    st.bind(2, q.event_id);
    st.bind(3, q.path);
    st.bind(4, q.reason);
    st.bind(5, q.document);
    st.step();
    st.reset();
  }
}

void SqliteSink::write_checkpoint(const UnifyCheckpoint& c) {
  Statement st(db_,
               "INSERT INTO _checkpoints (mapping, cursor, rows_emitted, quarantined, skipped) VALUES (?, ?, ?, ?, ?) "
               "ON CONFLICT (mapping) DO UPDATE SET cursor = excluded.cursor, rows_emitted = excluded.rows_emitted, "
               "quarantined = excluded.quarantined, skipped = excluded.skipped");
  st.bind(1, c.mapping);
  st.bind(2, c.cursor);
  st.bind(3, static_cast<std::int64_t>(c.rows_emitted));
  st.bind(4, static_cast<std::int64_t>(c.quarantined));
  st.bind(5, static_cast<std::int64_t>(c.skipped));
  st.step();
}

void SqliteSink::upsert_rows(const std::string& table, const std::vector<Row>& rows) {
  std::lock_guard lock(mu_);
  const auto m = mapping_of(table);
  if (!m) throw SinkError(SinkError::Code::UnknownTable, "no table " + table);
  exec("BEGIN IMMEDIATE");
  try {
    write_rows(*m, rows);
    exec("COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
}

void SqliteSink::commit(const std::string& table, const std::vector<Row>& rows,
                        const std::vector<QuarantineEntry>& quarantine, const UnifyCheckpoint& checkpoint) {
  std::lock_guard lock(mu_);
  const auto m = mapping_of(table);
  if (!m) throw SinkError(SinkError::Code::UnknownTable, "no table " + table);
  exec("BEGIN IMMEDIATE");
  try {
    write_rows(*m, rows);
    write_quarantine(table, quarantine);
    write_checkpoint(checkpoint);
    exec("COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
}

Table SqliteSink::read_table(const std::string& table) const {
  std::lock_guard lock(mu_);
  const auto m = mapping_of(table);
  if (!m) throw SinkError(SinkError::Code::UnknownTable, "no table " + table);
  Table out{m->table, m->columns, {}};
  std::string sql = "SELECT install_guid, event_id";
  for (const auto& c : m->columns) sql += ", " + sql_name(c.name);
  sql += " FROM " + sql_name(m->table) + " ORDER BY install_guid, event_id";
  Statement st(db_, sql);
  while (st.step()) {
    Row r{st.text(0), st.text(1), {}};
    for (std::size_t i = 0; i < m->columns.size(); ++i) r.values.push_back(st.value(static_cast<int>(i) + 2, m->columns[i].type));
    out.rows.push_back(std::move(r));
  }
  return out;
}

std::vector<QuarantineEntry> SqliteSink::read_quarantine(const std::string& table) const {
  std::lock_guard lock(mu_);
  if (!mapping_of(table)) throw SinkError(SinkError::Code::UnknownTable, "no table " + table);
  Statement st(db_, "SELECT install_guid, event_id, path, reason, document FROM " + sql_name(table + "__quarantine") +
                        " ORDER BY install_guid, event_id");
  std::vector<QuarantineEntry> out;
  while (st.step()) out.push_back({st.text(0), st.text(1), st.text(2), st.text(3), st.text(4)});
  return out;
}

std::vector<std::string> SqliteSink::tables() const {
  std::lock_guard lock(mu_);
  Statement st(db_, "SELECT name FROM _tables ORDER BY name");
  std::vector<std::string> out;
  while (st.step()) out.push_back(st.text(0));
  return out;
}

std::optional<UnifyCheckpoint> SqliteSink::load_checkpoint(const std::string& mapping) const {
  std::lock_guard lock(mu_);
  Statement st(db_, "SELECT cursor, rows_emitted, quarantined, skipped FROM _checkpoints WHERE mapping = ?");
  st.bind(1, mapping);
  if (!st.step()) return std::nullopt;
  return UnifyCheckpoint{mapping, st.text(0), static_cast<std::uint64_t>(st.int64(1)),
                         static_cast<std::uint64_t>(st.int64(2)), static_cast<std::uint64_t>(st.int64(3))};
}

}  // namespace devmetrics::unify
