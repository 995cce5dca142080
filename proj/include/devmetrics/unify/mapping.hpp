#pragma once

// Mapping from stored documents to relational rows.
//
// A mapping file is one JSON object:
//   {"table": "browsing", "source_event_type": "web-browsing",
//    "columns": [{"name": "duration_s", "path": "metrics.event_duration",
//                 "type": "integer", "required": true}, ...]}
// Paths address the envelope document (timestamp, agent, metrics) with
// dot-separated keys and [i] list indices.

#include "devmetrics/store.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace devmetrics::unify {

enum class ColumnType { string, integer, real, boolean, timestamp };

std::string_view to_string(ColumnType t);
std::optional<ColumnType> parse_column_type(std::string_view s);

class BadMapping : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PathStep {
  std::variant<std::string, std::size_t> step;  // object key or list index
  bool operator==(const PathStep&) const = default;
};

/// Throws BadMapping on a malformed path.
std::vector<PathStep> parse_path(std::string_view path);

/// Node addressed by `path`, or nullptr when any step is absent.
const Json* resolve_path(const Json& document, const std::vector<PathStep>& path);

struct ColumnSpec {
  std::string name;
  std::string path;
  ColumnType type = ColumnType::string;
  bool required = false;

  bool operator==(const ColumnSpec&) const = default;
};

struct MappingSpec {
  std::string table;
  std::string source_event_type;
  std::vector<ColumnSpec> columns;

  bool operator==(const MappingSpec&) const = default;
};

bool is_identifier(std::string_view s);

/// Throws BadMapping unless the table and column names are identifiers,
/// column names are unique and distinct from the key columns, and every
/// path parses.
void check_mapping(const MappingSpec& m);

MappingSpec mapping_from_json(const Json& j);  // validates
Json to_json(const MappingSpec& m);
MappingSpec load_mapping(const std::filesystem::path& file);

using Value = std::variant<std::monostate, std::string, std::int64_t, double, bool, Instant>;

bool is_null(const Value& v);
/// Rendered for humans and for keyword-free text formats; null is "".
std::string to_text(const Value& v);
Json to_json(const Value& v);

struct Row {
  std::string install_guid;
  std::string event_id;
  std::vector<Value> values;  // one per mapping column

  bool operator==(const Row&) const = default;
};

struct Table {
  std::string name;
  std::vector<ColumnSpec> columns;
  std::vector<Row> rows;  // ordered by (install_guid, event_id)

  bool operator==(const Table&) const = default;
};

struct Skip {};
struct Quarantine {
  std::string path;
  std::string reason;
};
using Projection = std::variant<Row, Skip, Quarantine>;

/// Pure function of the record's envelope and the mapping. Skip iff the
/// event type differs; a required column that is missing or of the wrong
/// type quarantines the document; an optional one becomes null.
Projection project(const StoredRecord& record, const MappingSpec& m);

/// Coerces a JSON value to `type`; nullopt on type mismatch.
std::optional<Value> coerce(const Json& v, ColumnType type);

}  // namespace devmetrics::unify
