#include "devmetrics/export.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace devmetrics::exporter {
namespace {

std::string number_text(const unify::Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return Json(std::get<double>(v)).dump();
}

bool is_number(const unify::Value& v) {
  return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

std::string_view arff_type(unify::ColumnType t) {
  switch (t) {
    case unify::ColumnType::integer:
    case unify::ColumnType::real: return "numeric";
    case unify::ColumnType::boolean: return "{true,false}";
    case unify::ColumnType::timestamp: return "date";
    default: return "string";
  }
}

}  // namespace

std::optional<Format> parse_format(std::string_view s) {
  if (s == "csv") return Format::csv;
  if (s == "arff") return Format::arff;
  return std::nullopt;
}

std::string csv_field(const unify::Value& v) {
  if (unify::is_null(v)) return "";
  if (is_number(v)) return number_text(v);
  const auto text = unify::to_text(v);
  if (!text.empty() && text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void export_csv(const Table& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i].name;
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.values.size(); ++i) out << (i ? "," : "") << csv_field(row.values[i]);
    out << '\n';
  }
}

std::string export_csv(const Table& table) {
  std::ostringstream out;
  export_csv(table, out);
  return out.str();
}

std::string arff_token(std::string_view s) {
  const bool bare = !s.empty() && s != "?" &&
                    std::none_of(s.begin(), s.end(), [](unsigned char c) {
                      return c <= ' ' || c == ',' || c == '\'' || c == '"' || c == '\\' || c == '%' || c == '{' ||
                             c == '}' || c == 0x7f;
                    });
  if (bare) return std::string(s);
  std::string out = "'";
  for (char c : s) {
    switch (c) {
      case '\'': out += "\\'"; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "'";
}

void export_arff(const Table& table, std::ostream& out, const std::string& relation) {
  out << "@relation " << arff_token(relation) << '\n';
  for (const auto& c : table.columns) {
    out << "@attribute " << arff_token(c.name) << ' ' << arff_type(c.type);
    if (c.type == unify::ColumnType::timestamp) out << " \"" << kArffDateFormat << '"';
    out << '\n';
  }
  out << "@data\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.values.size(); ++i) {
      if (i) out << ',';
      const auto& v = row.values[i];
      if (unify::is_null(v)) {
        out << '?';
      } else if (is_number(v)) {
        out << number_text(v);
      } else {
        out << arff_token(unify::to_text(v));
      }
    }
    out << '\n';
  }
}

std::string export_arff(const Table& table, const std::string& relation) {
  std::ostringstream out;
  export_arff(table, out, relation);
  return out.str();
}

std::size_t export_table(const unify::Sink& sink, const ExportRequest& request) {
  const auto table = sink.read_table(request.table);
  auto tmp = request.out;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    if (request.format == Format::csv) {
      export_csv(table, out);
    } else {
      export_arff(table, out, request.relation.value_or(table.name));
    }
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, request.out, ec);
  if (ec) throw IoError("cannot move export into place at " + request.out.string() + ": " + ec.message());
  return table.rows.size();
}

}  // namespace devmetrics::exporter
