#pragma once

// Independent reference implementations used as test oracles. None of
// these call into the unifier or exporter code they check.

#include "devmetrics/agent/buffer.hpp"
#include "devmetrics/store.hpp"
#include "devmetrics/unify/mapping.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

namespace devmetrics::testing {

using unify::ColumnSpec;
using unify::ColumnType;
using unify::MappingSpec;
using unify::Row;
using unify::Table;
using unify::Value;

// ---------------------------------------------------------------- projection

/// Walks `path` character by character; nullptr when absent.
inline const Json* oracle_resolve(const Json& doc, const std::string& path) {
  const Json* node = &doc;
  std::string key;
  std::size_t i = 0;
  auto take_key = [&]() -> bool {
    if (key.empty()) return true;
    if (!node->is_object() || !node->contains(key)) return false;
    node = &(*node)[key];
    key.clear();
    return true;
  };
  while (i < path.size()) {
    const char c = path[i];
    if (c == '.') {
      if (!take_key()) return nullptr;
      ++i;
    } else if (c == '[') {
      if (!take_key()) return nullptr;
      const auto close = path.find(']', i);
      const auto index = std::stoul(path.substr(i + 1, close - i - 1));
      if (!node->is_array() || index >= node->size()) return nullptr;
      node = &(*node)[index];
      i = close + 1;
    } else {
      key += c;
      ++i;
    }
  }
  if (!take_key()) return nullptr;
  return node;
}

inline std::optional<Value> oracle_coerce(const Json& v, ColumnType t) {
  if (t == ColumnType::string) {
    if (v.is_string()) return Value{v.get<std::string>()};
  } else if (t == ColumnType::integer) {
    if (v.is_number_unsigned() && v.get<std::uint64_t>() <= 9223372036854775807ULL) {
      return Value{static_cast<std::int64_t>(v.get<std::uint64_t>())};
    }
    if (v.is_number_integer() && !v.is_number_unsigned()) return Value{v.get<std::int64_t>()};
  } else if (t == ColumnType::real) {
    if (v.is_number()) return Value{v.get<double>()};
  } else if (t == ColumnType::boolean) {
    if (v.is_boolean()) return Value{v.get<bool>()};
    if (v.is_string() && (v.get<std::string>() == "true" || v.get<std::string>() == "false")) {
      return Value{v.get<std::string>() == "true"};
    }
  } else if (t == ColumnType::timestamp) {
    if (v.is_string()) {
      if (auto i = parse_instant(v.get<std::string>())) return Value{*i};
    }
  }
  return std::nullopt;
}

enum class OracleOutcome { row, skip, quarantine };

inline std::pair<OracleOutcome, Row> oracle_project(const StoredRecord& r, const MappingSpec& m) {
  const Json doc = Json::parse(r.document);  // canonical bytes as persisted
  if (doc["metrics"]["event_type"] != m.source_event_type) return {OracleOutcome::skip, {}};
  Row row{doc["agent"]["install_guid"], doc["metrics"]["event_id"], {}};
  for (const auto& c : m.columns) {
    const Json* node = oracle_resolve(doc, c.path);
    std::optional<Value> v;
    if (node != nullptr && !node->is_null()) v = oracle_coerce(*node, c.type);
    if (!v) {
      if (c.required) return {OracleOutcome::quarantine, {}};
      v = Value{};
    }
    row.values.push_back(*v);
  }
  return {OracleOutcome::row, row};
}

/// Full-store single-pass projection: the table a correct unifier must produce.
inline Table oracle_table(const Store& store, const MappingSpec& m, std::size_t* quarantined = nullptr) {
  std::map<std::pair<std::string, std::string>, Row> rows;
  std::size_t q = 0;
  store.for_each({}, [&](const StoredRecord& r) {
    auto [outcome, row] = oracle_project(r, m);
    if (outcome == OracleOutcome::row) rows[{row.install_guid, row.event_id}] = row;
    if (outcome == OracleOutcome::quarantine) ++q;
  });
  if (quarantined) *quarantined = q;
  Table t{m.table, m.columns, {}};
  for (auto& [_, row] : rows) t.rows.push_back(std::move(row));
  return t;
}

// ------------------------------------------------------------------ filters

// Independent filter predicate: explicit stack walk, ASCII folding by hand.
inline bool oracle_review_match(const agent::LocalEvent& e, const agent::ReviewFilter& f) {
  if (f.state && *f.state != e.state) return false;
  if (f.from && !(*f.from <= e.envelope.timestamp)) return false;
  if (f.to && !(e.envelope.timestamp < *f.to)) return false;
  if (f.application) {
    const auto& m = e.envelope.metrics;
    if (!m.contains("application") || !m["application"].is_string() || m["application"] != *f.application) {
      return false;
    }
  }
  if (f.keyword) {
    auto fold = [](std::string s) {
      for (auto& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      }
      return s;
    };
    const auto needle = fold(*f.keyword);
    std::vector<const Json*> stack{&e.envelope.metrics};
    bool hit = false;
    while (!stack.empty() && !hit) {
      const Json* node = stack.back();
      stack.pop_back();
      if (node->is_string()) {
        hit = fold(node->get<std::string>()).find(needle) != std::string::npos;
      } else if (node->is_object() || node->is_array()) {
        for (const auto& child : *node) stack.push_back(&child);
      }
    }
    if (!hit) return false;
  }
  return true;
}

/// Scan filter predicate written out field by field.
inline bool oracle_scan_match(const MetricEnvelope& e, const ScanFilter& f) {
  if (f.install_guid && e.agent.install_guid != *f.install_guid) return false;
  if (f.event_type && e.metrics["event_type"] != *f.event_type) return false;
  if (f.from && e.timestamp < *f.from) return false;
  if (f.to && !(e.timestamp < *f.to)) return false;
  return true;
}

// ----------------------------------------------------------- random inputs

inline const std::vector<std::string>& oracle_path_pool() {
  static const std::vector<std::string> pool{
      "metrics.a",      "metrics.b",    "metrics.c",       "metrics.o.x", "metrics.o.y[0]",
      "metrics.o.y[1]", "metrics.l[0]", "metrics.l[2]",    "timestamp",   "agent.code_name",
      "metrics.event_duration",         "metrics.missing", "metrics.o",   "metrics.event_type"};
  return pool;
}

inline Json random_leaf(std::mt19937_64& rng) {
  switch (rng() % 10) {
    case 0: return static_cast<std::int64_t>(rng() % 200001) - 100000;
    case 1: return static_cast<double>(static_cast<std::int64_t>(rng() % 20001) - 10000) / 8.0;
    case 2: return rng() % 2 == 0;
    case 3: return rng() % 2 ? "true" : "false";
    case 4: return format_instant(Instant{std::chrono::milliseconds{1479168000000LL + static_cast<std::int64_t>(rng() % 100000000)}});
    case 5: return nullptr;
    case 6: return std::uint64_t{18446744073709551615ULL};
    case 7: return "text, with \"quotes\"";
    default: return "s" + std::to_string(rng() % 1000);
  }
}

inline Json random_unify_metrics(std::mt19937_64& rng) {
  Json m = Json::object();
  for (const char* k : {"a", "b", "c"}) {
    if (rng() % 5 != 0) m[k] = random_leaf(rng);
  }
  if (rng() % 4 != 0) {
    Json o = Json::object();
    if (rng() % 3 != 0) o["x"] = random_leaf(rng);
    Json y = Json::array();
    for (std::uint64_t i = 0, n = rng() % 3; i < n; ++i) y.push_back(random_leaf(rng));
    o["y"] = y;
    m["o"] = o;
  }
  if (rng() % 2) {
    Json l = Json::array();
    for (std::uint64_t i = 0, n = rng() % 4; i < n; ++i) l.push_back(random_leaf(rng));
    m["l"] = l;
  }
  if (rng() % 2) m["event_duration"] = static_cast<std::int64_t>(rng() % 4000);
  return m;
}

inline MappingSpec random_mapping(std::mt19937_64& rng, const std::vector<std::string>& event_types) {
  MappingSpec m;
  m.table = "t" + std::to_string(rng() % 1000);
  m.source_event_type = event_types[rng() % event_types.size()];
  const auto& pool = oracle_path_pool();
  const std::size_t n = 1 + rng() % 5;
  for (std::size_t i = 0; i < n; ++i) {
    ColumnSpec c;
    c.name = "c" + std::to_string(i);
    c.path = pool[rng() % pool.size()];
    c.type = static_cast<ColumnType>(rng() % 5);
    c.required = rng() % 4 == 0;
    m.columns.push_back(c);
  }
  return m;
}

/// Table over all five column types with nulls and quoting edge cases.
inline Table random_table(std::mt19937_64& rng) {
  static const std::vector<std::string> nasty{"",          "plain",     "with,comma", "say \"hi\",ok", "line\nbreak",
                                              "cr\rhere",  " padded ",  "tab\there",  "?",            "%comment",
                                              "{brace}",   "it's",      "back\\slash", "ünïcødé",      "null",
                                              "'quoted'",  "trailing ", "\"",          ",",            "a b c"};
  Table t;
  t.name = "export_t";
  const std::size_t ncols = 1 + rng() % 6;
  for (std::size_t i = 0; i < ncols; ++i) {
    t.columns.push_back({"col_" + std::to_string(i), "metrics.x", static_cast<ColumnType>(rng() % 5), false});
  }
  const std::size_t nrows = rng() % 25;
  for (std::size_t r = 0; r < nrows; ++r) {
    Row row{"guid-" + std::to_string(r / 10), "e" + std::to_string(1000 + r), {}};
    for (const auto& c : t.columns) {
      if (rng() % 6 == 0) {
        row.values.emplace_back();
        continue;
      }
      switch (c.type) {
        case ColumnType::string:
          row.values.emplace_back(rng() % 2 ? nasty[rng() % nasty.size()]
                                            : nasty[rng() % nasty.size()] + nasty[rng() % nasty.size()]);
          break;
        case ColumnType::integer:
          row.values.emplace_back(static_cast<std::int64_t>(rng()) >> (rng() % 60));
          break;
        case ColumnType::real: {
          const double choices[] = {0.0, 1.5, -2.25, 1e-300, 1.7976931348623157e308, 0.1, 1800.0, 3.141592653589793};
          double d = rng() % 2 ? choices[rng() % 8] : std::ldexp(static_cast<double>(rng() % 100000000), -static_cast<int>(rng() % 40));
          row.values.emplace_back(d);
          break;
        }
        case ColumnType::boolean: row.values.emplace_back(rng() % 2 == 0); break;
        case ColumnType::timestamp:
          row.values.emplace_back(Instant{std::chrono::milliseconds{static_cast<std::int64_t>(rng() % 4102444800000ULL)}});
          break;
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------- CSV reader

/// Fields of one record; nullopt marks an unquoted empty field.
using CsvRecord = std::vector<std::optional<std::string>>;

/// RFC 4180 reader (LF or CRLF record ends). Throws on malformed input.
inline std::vector<CsvRecord> read_csv(const std::string& text) {
  std::vector<CsvRecord> records;
  CsvRecord record;
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (n == 0) return records;
  for (;;) {
    // one field
    if (i < n && text[i] == '"') {
      std::string value;
      ++i;
      for (;;) {
        if (i >= n) throw std::runtime_error("csv: unterminated quote");
        if (text[i] == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            value += '"';
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          value += text[i++];
        }
      }
      record.emplace_back(std::move(value));
    } else {
      std::string value;
      while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        if (text[i] == '"') throw std::runtime_error("csv: quote inside unquoted field");
        value += text[i++];
      }
      record.emplace_back(value.empty() ? std::nullopt : std::optional<std::string>(value));
    }
    if (i < n && text[i] == ',') {
      ++i;
      continue;
    }
    if (i < n && text[i] == '\r') ++i;
    if (i < n && text[i] != '\n') throw std::runtime_error("csv: garbage after field");
    records.push_back(std::move(record));
    record.clear();
    if (i >= n) throw std::runtime_error("csv: missing final line end");
    ++i;
    if (i == n) return records;
  }
}

inline Value csv_value(const std::optional<std::string>& field, ColumnType t) {
  if (!field) return Value{};
  const auto& s = *field;
  switch (t) {
    case ColumnType::string: return s;
    case ColumnType::integer: {
      std::size_t used = 0;
      const auto v = std::stoll(s, &used);
      if (used != s.size()) throw std::runtime_error("csv: bad integer " + s);
      return static_cast<std::int64_t>(v);
    }
    case ColumnType::real: {
      char* end = nullptr;
      const double d = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size()) throw std::runtime_error("csv: bad real " + s);
      return d;
    }
    case ColumnType::boolean:
      if (s == "true") return true;
      if (s == "false") return false;
      throw std::runtime_error("csv: bad boolean " + s);
    case ColumnType::timestamp: {
      auto v = parse_instant(s);
      if (!v) throw std::runtime_error("csv: bad timestamp " + s);
      return *v;
    }
  }
  return Value{};
}

// -------------------------------------------------------- ARFF grammar check

struct ArffAttribute {
  std::string name;
  std::string type;  // numeric | string | date | nominal
  std::vector<std::string> nominal;
  std::string date_format;
};

struct ArffFile {
  std::string relation;
  std::vector<ArffAttribute> attributes;
  std::vector<std::vector<std::optional<std::string>>> rows;  // nullopt is '?'
};

namespace arff_detail {

inline void skip_spaces(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

/// One token: quoted ('..' or "..", backslash escapes) or bare up to a
/// delimiter. Returns the token and whether it was quoted.
inline std::pair<std::string, bool> token(const std::string& s, std::size_t& i, const std::string& delims) {
  skip_spaces(s, i);
  if (i >= s.size()) throw std::runtime_error("arff: expected token");
  if (s[i] == '\'' || s[i] == '"') {
    const char q = s[i++];
    std::string out;
    while (true) {
      if (i >= s.size()) throw std::runtime_error("arff: unterminated quote");
      char c = s[i++];
      if (c == q) break;
      if (c == '\\') {
        if (i >= s.size()) throw std::runtime_error("arff: dangling escape");
        const char e = s[i++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 'r': out += '\r'; break;
          case 't': out += '\t'; break;
          case '\\':
          case '\'':
          case '"':
          case '%': out += e; break;
          default: throw std::runtime_error(std::string("arff: unknown escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return {out, true};
  }
  std::string out;
  while (i < s.size() && delims.find(s[i]) == std::string::npos && s[i] != ' ' && s[i] != '\t') {
    const char c = s[i];
    if (c == '\'' || c == '"' || c == '%' || c == '{' || c == '}' || c == '\\') {
      throw std::runtime_error(std::string("arff: special character in bare token: ") + c);
    }
    out += s[i++];
  }
  if (out.empty()) throw std::runtime_error("arff: empty bare token");
  return {out, false};
}

inline bool ieq(const std::string& a, const char* b) {
  if (a.size() != std::strlen(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != b[i]) return false;
  }
  return true;
}

}  // namespace arff_detail

/// Parses and type-checks an ARFF file; throws std::runtime_error on any
/// grammar or value violation.
inline ArffFile parse_arff(const std::string& text) {
  using namespace arff_detail;
  ArffFile f;
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string::npos) throw std::runtime_error("arff: missing final newline");
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  enum { header, attributes, data } section = header;
  static const std::regex number(R"(^[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$)");
  static const std::regex iso_ms(R"(^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$)");
  for (const auto& line : lines) {
    std::size_t i = 0;
    skip_spaces(line, i);
    if (i == line.size() || line[i] == '%') continue;
    if (section != data && line[i] == '@') {
      auto [kw, _] = token(line, i, "");
      if (ieq(kw, "@relation")) {
        if (section != header) throw std::runtime_error("arff: @relation after attributes");
        f.relation = token(line, i, "").first;
        section = attributes;
      } else if (ieq(kw, "@attribute")) {
        if (section != attributes) throw std::runtime_error("arff: @attribute before @relation");
        ArffAttribute a;
        a.name = token(line, i, "{").first;
        skip_spaces(line, i);
        if (i < line.size() && line[i] == '{') {
          a.type = "nominal";
          const auto close = line.find('}', i);
          if (close == std::string::npos) throw std::runtime_error("arff: unterminated nominal");
          std::string body = line.substr(i + 1, close - i - 1);
          std::size_t j = 0;
          while (j < body.size()) {
            a.nominal.push_back(token(body, j, ",").first);
            skip_spaces(body, j);
            if (j < body.size() && body[j] == ',') ++j;
          }
          i = close + 1;
        } else {
          auto t = token(line, i, "");
          if (ieq(t.first, "numeric") || ieq(t.first, "real") || ieq(t.first, "integer")) {
            a.type = "numeric";
          } else if (ieq(t.first, "string")) {
            a.type = "string";
          } else if (ieq(t.first, "date")) {
            a.type = "date";
            skip_spaces(line, i);
            if (i < line.size()) a.date_format = token(line, i, "").first;
          } else {
            throw std::runtime_error("arff: unknown attribute type " + t.first);
          }
        }
        skip_spaces(line, i);
        if (i != line.size()) throw std::runtime_error("arff: trailing text after attribute");
        f.attributes.push_back(std::move(a));
      } else if (ieq(kw, "@data")) {
        if (section != attributes || f.attributes.empty()) throw std::runtime_error("arff: @data misplaced");
        section = data;
      } else {
        throw std::runtime_error("arff: unknown declaration " + kw);
      }
      continue;
    }
    if (section != data) throw std::runtime_error("arff: data before @data");
    std::vector<std::optional<std::string>> row;
    for (std::size_t col = 0;; ++col) {
      if (col >= f.attributes.size()) throw std::runtime_error("arff: too many values");
      auto [value, quoted] = token(line, i, ",");
      const auto& a = f.attributes[col];
      if (!quoted && value == "?") {
        row.emplace_back();
      } else {
        if (a.type == "numeric" && (quoted || !std::regex_match(value, number))) {
          throw std::runtime_error("arff: bad numeric " + value);
        }
        if (a.type == "nominal" && std::find(a.nominal.begin(), a.nominal.end(), value) == a.nominal.end()) {
          throw std::runtime_error("arff: value outside nominal set " + value);
        }
        if (a.type == "date" && !std::regex_match(value, iso_ms)) throw std::runtime_error("arff: bad date " + value);
        row.emplace_back(value);
      }
      skip_spaces(line, i);
      if (i == line.size()) break;
      if (line[i] != ',') throw std::runtime_error("arff: expected comma");
      ++i;
    }
    if (row.size() != f.attributes.size()) throw std::runtime_error("arff: too few values");
    f.rows.push_back(std::move(row));
  }
  if (section != data) throw std::runtime_error("arff: no @data section");
  return f;
}

}  // namespace devmetrics::testing
