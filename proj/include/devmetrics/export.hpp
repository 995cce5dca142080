#pragma once

// Table exporters. Output is a pure function of the table: rows in key
// order, LF line endings, UTF-8. Key columns are not written.

#include "devmetrics/unify/sink.hpp"

#include <filesystem>
#include <ostream>
#include <stdexcept>

namespace devmetrics::exporter {

using unify::Table;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { csv, arff };

std::optional<Format> parse_format(std::string_view s);

/// RFC 4180 with LF line ends. Null is an empty field, the empty string is
/// "" so the two stay distinguishable.
void export_csv(const Table& table, std::ostream& out);
std::string export_csv(const Table& table);

inline constexpr const char* kArffDateFormat = "yyyy-MM-dd'T'HH:mm:ss.SSS'Z'";

/// Null is ?; values that would not survive as a bare token are wrapped in
/// single quotes with backslash escapes.
void export_arff(const Table& table, std::ostream& out, const std::string& relation);
std::string export_arff(const Table& table, const std::string& relation);

/// Quoting helpers, exposed for the CLI's table rendering.
std::string csv_field(const unify::Value& v);
std::string arff_token(std::string_view s);

struct ExportRequest {
  std::string table;
  Format format = Format::csv;
  std::filesystem::path out;
  std::optional<std::string> relation;  // arff only; defaults to the table name
};

/// Writes to a sibling temporary file and renames it into place. Returns
/// the number of data rows written.
std::size_t export_table(const unify::Sink& sink, const ExportRequest& request);

}  // namespace devmetrics::exporter
