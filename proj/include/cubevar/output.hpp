#pragma once

// Machine-readable result records. One record per computed value, emitted as
// JSON-lines (default) or CSV. Serialization is deterministic: keys keep
// insertion order and floats are printed with 17 significant digits, so a
// rerun with identical arguments is byte-identical and every double
// round-trips exactly.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cubevar {

using FieldValue = std::variant<std::int64_t, double, std::string, bool>;

struct OutputRecord {
  std::string command;
  std::vector<std::pair<std::string, FieldValue>> inputs;
  double value{};
  std::optional<double> error_bound;
  std::vector<std::pair<std::string, FieldValue>> metadata;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string field_to_json(const FieldValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return "\"" + json_escape(std::get<std::string>(v)) + "\"";
}

inline std::string map_to_json(const std::vector<std::pair<std::string, FieldValue>>& kv) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) out += ",";
    first = false;
    out += "\"" + json_escape(k) + "\":" + field_to_json(v);
  }
  out += "}";
  return out;
}

inline std::string csv_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace detail

inline std::string to_json_line(const OutputRecord& r) {
  std::string out = "{\"command\":\"" + detail::json_escape(r.command) + "\"";
  out += ",\"inputs\":" + detail::map_to_json(r.inputs);
  out += ",\"value\":" + detail::format_double(r.value);
  out += ",\"error_bound\":";
  out += r.error_bound ? detail::format_double(*r.error_bound) : std::string("null");
  out += ",\"metadata\":" + detail::map_to_json(r.metadata);
  out += "}";
  return out;
}

inline std::string csv_header() { return "command,inputs,value,error_bound,metadata"; }

inline std::string to_csv_line(const OutputRecord& r) {
  std::string out = detail::csv_escape(r.command);
  out += "," + detail::csv_escape(detail::map_to_json(r.inputs));
  out += "," + detail::format_double(r.value);
  out += ",";
  if (r.error_bound) out += detail::format_double(*r.error_bound);
  out += "," + detail::csv_escape(detail::map_to_json(r.metadata));
  return out;
}

}  // namespace cubevar
