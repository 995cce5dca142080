#include "devmetrics/unify/mapping.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace devmetrics::unify {

std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::string: return "string";
    case ColumnType::integer: return "integer";
    case ColumnType::real: return "real";
    case ColumnType::boolean: return "boolean";
    case ColumnType::timestamp: return "timestamp";
  }
  return "string";
}

std::optional<ColumnType> parse_column_type(std::string_view s) {
  for (auto t : {ColumnType::string, ColumnType::integer, ColumnType::real, ColumnType::boolean,
                 ColumnType::timestamp}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::vector<PathStep> parse_path(std::string_view path) {
  if (path.empty()) throw BadMapping("empty path");
  std::vector<PathStep> steps;
  std::size_t i = 0;
  for (;;) {
    const auto key_end = path.find_first_of(".[]", i);
    const auto key = path.substr(i, key_end == std::string_view::npos ? std::string_view::npos : key_end - i);
    if (key.empty()) throw BadMapping("empty key in path '" + std::string(path) + "'");
    steps.push_back({std::string(key)});
    i = key_end;
    while (i != std::string_view::npos && path[i] == '[') {
      const auto close = path.find(']', i);
      if (close == std::string_view::npos || close == i + 1) throw BadMapping("bad index in '" + std::string(path) + "'");
      std::size_t index = 0;
      for (std::size_t k = i + 1; k < close; ++k) {
        if (path[k] < '0' || path[k] > '9' || index > 1'000'000'000) {
          throw BadMapping("bad index in '" + std::string(path) + "'");
        }
        index = index * 10 + static_cast<std::size_t>(path[k] - '0');
      }
      steps.push_back({index});
      i = close + 1 < path.size() ? close + 1 : std::string_view::npos;
    }
    if (i == std::string_view::npos) return steps;
    if (path[i] != '.' || i + 1 >= path.size()) throw BadMapping("bad path '" + std::string(path) + "'");
    ++i;
  }
}

const Json* resolve_path(const Json& document, const std::vector<PathStep>& path) {
  const Json* node = &document;
  for (const auto& s : path) {
    if (const auto* key = std::get_if<std::string>(&s.step)) {
      if (!node->is_object()) return nullptr;
      auto it = node->find(*key);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else {
      const auto index = std::get<std::size_t>(s.step);
      if (!node->is_array() || index >= node->size()) return nullptr;
      node = &(*node)[index];
    }
  }
  return node;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || s.size() > 63) return false;
  if (!(s[0] == '_' || (s[0] >= 'a' && s[0] <= 'z'))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return c == '_' || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); });
}

void check_mapping(const MappingSpec& m) {
  if (!is_identifier(m.table)) throw BadMapping("table name must match [a-z_][a-z0-9_]*: '" + m.table + "'");
  if (m.table.front() == '_' || m.table.find("__") != std::string::npos) {
    throw BadMapping("table names starting with '_' or containing '__' are reserved");
  }
  if (!is_event_type_token(m.source_event_type)) throw BadMapping("bad source_event_type");
  std::set<std::string> names{"install_guid", "event_id"};
  for (const auto& c : m.columns) {
    if (!is_identifier(c.name)) throw BadMapping("column name must match [a-z_][a-z0-9_]*: '" + c.name + "'");
    if (!names.insert(c.name).second) throw BadMapping("duplicate or reserved column name '" + c.name + "'");
    parse_path(c.path);
  }
}

MappingSpec mapping_from_json(const Json& j) {
  try {
    MappingSpec m;
    m.table = j.at("table").get<std::string>();
    m.source_event_type = j.at("source_event_type").get<std::string>();
    for (const auto& c : j.at("columns")) {
      ColumnSpec col;
      col.name = c.at("name").get<std::string>();
      col.path = c.at("path").get<std::string>();
      const auto type = parse_column_type(c.at("type").get<std::string>());
      if (!type) throw BadMapping("unknown column type '" + c.at("type").get<std::string>() + "'");
      col.type = *type;
      col.required = c.value("required", false);
      m.columns.push_back(std::move(col));
    }
    for (const auto& [key, _] : j.items()) {
      if (key != "table" && key != "source_event_type" && key != "columns") {
        throw BadMapping("unknown mapping field '" + key + "'");
      }
    }
    check_mapping(m);
    return m;
  } catch (const Json::exception& e) {
    throw BadMapping(std::string("malformed mapping: ") + e.what());
  }
}

Json to_json(const MappingSpec& m) {
  Json cols = Json::array();
  for (const auto& c : m.columns) {
    cols.push_back({{"name", c.name}, {"path", c.path}, {"type", to_string(c.type)}, {"required", c.required}});
  }
  return {{"table", m.table}, {"source_event_type", m.source_event_type}, {"columns", cols}};
}

MappingSpec load_mapping(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw BadMapping("cannot read mapping file " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return mapping_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw BadMapping(file.string() + ": " + e.what());
  }
}

bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

std::string to_text(const Value& v) {
  struct {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return Json(d).dump(); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(Instant t) const { return format_instant(t); }
  } visitor;
  return std::visit(visitor, v);
}

Json to_json(const Value& v) {
  struct {
    Json operator()(std::monostate) const { return nullptr; }
    Json operator()(const std::string& s) const { return s; }
    Json operator()(std::int64_t i) const { return i; }
    Json operator()(double d) const { return d; }
    Json operator()(bool b) const { return b; }
    Json operator()(Instant t) const { return format_instant(t); }
  } visitor;
  return std::visit(visitor, v);
}

std::optional<Value> coerce(const Json& v, ColumnType type) {
  switch (type) {
    case ColumnType::string:
      if (v.is_string()) return Value{v.get<std::string>()};
      return std::nullopt;
    case ColumnType::integer:
      if (v.is_number_integer() && v.is_number_unsigned() &&
          v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        return std::nullopt;
      }
      if (v.is_number_integer()) return Value{v.get<std::int64_t>()};
      return std::nullopt;
    case ColumnType::real:
      if (v.is_number_float()) return Value{v.get<double>()};
      if (v.is_number_unsigned()) return Value{static_cast<double>(v.get<std::uint64_t>())};
      if (v.is_number_integer()) return Value{static_cast<double>(v.get<std::int64_t>())};
      return std::nullopt;
    case ColumnType::boolean:
      if (v.is_boolean()) return Value{v.get<bool>()};
      if (v == "true") return Value{true};
      if (v == "false") return Value{false};
      return std::nullopt;
    case ColumnType::timestamp:
      if (v.is_string()) {
        if (auto t = parse_instant(v.get_ref<const std::string&>())) return Value{*t};
      }
      return std::nullopt;
  }
  return std::nullopt;
}

Projection project(const StoredRecord& record, const MappingSpec& m) {
  const auto& e = record.envelope;
  if (e.event_type() != m.source_event_type) return Skip{};
  const auto document = to_json(e);
  Row row{e.agent.install_guid, e.event_id(), {}};
  row.values.reserve(m.columns.size());
  for (const auto& c : m.columns) {
    const Json* node = resolve_path(document, parse_path(c.path));
    if (node == nullptr || node->is_null()) {
      if (c.required) return Quarantine{c.path, "missing required"};
      row.values.emplace_back();
      continue;
    }
    auto value = coerce(*node, c.type);
    if (!value) {
      if (c.required) return Quarantine{c.path, "type mismatch: expected " + std::string(to_string(c.type))};
      row.values.emplace_back();
      continue;
    }
    row.values.push_back(std::move(*value));
  }
  return row;
}

}  // namespace devmetrics::unify
