#include "devmetrics/json.hpp"

namespace devmetrics {

Json parse_wire_json(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\n' || text[j] == '\r')) ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    cleaned.push_back(c);
  }
  return Json::parse(cleaned);
}

}  // namespace devmetrics
