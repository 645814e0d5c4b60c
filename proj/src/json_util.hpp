#pragma once

// Shared helpers for the JSON document readers (network, model, hardware).

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dmaccel/netir.hpp"

namespace dmaccel::detail {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline Json parse_json(std::string_view document) {
  try {
    return Json::parse(document);
  } catch (const Json::parse_error& e) {
    // nlohmann reports a 1-based byte offset; translate to line/column.
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, document.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (document[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + e.what(),
                     line, column);
  }
}

inline void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

inline std::int64_t as_int(const Json& value, const char* key, const std::string& where) {
  if (!value.is_number_integer())
    throw ParseError(where + ": '" + key + "' must be an integer");
  return value.get<std::int64_t>();
}

inline std::int64_t int_or(const Json& obj, const char* key, std::int64_t fallback,
                           const std::string& where) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_int(*it, key, where);
}

inline std::string string_or(const Json& obj, const char* key, std::string fallback,
                             const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw ParseError(where + ": '" + key + "' must be a string");
  return it->get<std::string>();
}

inline bool bool_or(const Json& obj, const char* key, bool fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw ParseError(where + ": '" + key + "' must be a boolean");
  return it->get<bool>();
}

TensorShape parse_shape(const Json& obj, const std::string& where);
OrderedJson shape_to_json(const TensorShape& shape);

/// Reads a "layers" array against a running input shape (needed to expand
/// "same" padding and to infer activation/pool channel counts).
std::vector<LayerSpec> parse_layers(const Json& layers, const TensorShape& input,
                                    const std::string& where);
OrderedJson layers_to_json(const std::vector<LayerSpec>& layers);

std::string read_file(const std::string& path);

/// Output shape of one layer given its input; throws ValidationError naming `index`.
TensorShape step_shape(std::size_t index, const LayerSpec& layer, const TensorShape& in);

}  // namespace dmaccel::detail
