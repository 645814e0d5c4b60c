#include "dmaccel/model.hpp"

#include <set>

#include <fmt/format.h>

#include "json_util.hpp"

namespace dmaccel {

std::size_t ModelSpec::shared_layers(std::size_t index) const {
  const auto& p = paths.at(index);
  return p.shares ? p.shares->layers : 0;
}

ModelSpec as_model(const NetworkSpec& net) {
  ModelSpec m;
  m.name = net.name;
  m.image_shape = net.input_shape;
  m.paths.push_back({net.name.empty() ? "main" : net.name, net, std::nullopt, true});
  return m;
}

void validate(const ModelSpec& model) {
  if (model.image_shape.height < 1 || model.image_shape.width < 1 ||
      model.image_shape.channels < 1)
    throw ValidationError("image shape " + to_string(model.image_shape) + " must be positive");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < model.paths.size(); ++i) {
    const auto& p = model.paths[i];
    if (p.name.empty()) throw ValidationError(fmt::format("path {} has no name", i));
    if (!seen.insert(p.name).second)
      throw ValidationError("duplicate path name '" + p.name + "'");
    try {
      validate(p.net);
    } catch (const ValidationError& e) {
      throw ValidationError("path '" + p.name + "': " + e.what());
    }
    if (!p.shares) continue;
    std::size_t owner = i;
    for (std::size_t j = 0; j < i; ++j)
      if (model.paths[j].name == p.shares->path) owner = j;
    if (owner == i)
      throw ValidationError("path '" + p.name + "' shares layers with unknown or later path '" +
                            p.shares->path + "'");
    const auto& q = model.paths[owner];
    const std::size_t n = p.shares->layers;
    if (n > p.net.layers.size() || n > q.net.layers.size())
      throw ValidationError("path '" + p.name + "' shares more layers than exist");
    if (q.net.input_shape != p.net.input_shape)
      throw ValidationError("path '" + p.name + "' shares layers with '" + q.name +
                            "' but their input shapes differ");
    for (std::size_t k = 0; k < n; ++k)
      if (!(p.net.layers[k] == q.net.layers[k]))
        throw ValidationError(
            fmt::format("path '{}' layer {} differs from the shared layer of '{}'", p.name, k,
                        q.name));
  }
}

ModelSpec parse_model(std::string_view document) {
  using namespace detail;
  const Json doc = parse_json(document);
  if (!doc.is_object()) throw ParseError("model document must be a JSON object");
  reject_unknown_keys(doc, {"name", "image_shape", "paths"}, "model");
  ModelSpec m;
  m.name = string_or(doc, "name", "", "model");
  m.image_shape = parse_shape(require(doc, "image_shape", "model"), "image_shape");
  const Json& paths = require(doc, "paths", "model");
  if (!paths.is_array()) throw ParseError("model: 'paths' must be an array");
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Json& obj = paths[i];
    const std::string at = fmt::format("path {}", i);
    if (!obj.is_object()) throw ParseError(at + ": path must be an object");
    reject_unknown_keys(obj, {"name", "input_shape", "layers", "shares", "rewrite"}, at);
    ModelPath p;
    p.name = string_or(obj, "name", "", at);
    const std::string where = p.name.empty() ? at : "path '" + p.name + "'";
    p.net.name = p.name;
    p.net.input_shape = parse_shape(require(obj, "input_shape", where), where + " input_shape");
    p.net.layers = parse_layers(require(obj, "layers", where), p.net.input_shape, where);
    p.rewritable = bool_or(obj, "rewrite", true, where);
    if (auto it = obj.find("shares"); it != obj.end()) {
      reject_unknown_keys(*it, {"path", "layers"}, where + " shares");
      p.shares = SharedPrefix{string_or(*it, "path", "", where),
                              static_cast<std::size_t>(as_int(require(*it, "layers", where),
                                                              "layers", where))};
    }
    m.paths.push_back(std::move(p));
  }
  validate(m);
  return m;
}

std::string serialize_model(const ModelSpec& model) {
  using namespace detail;
  OrderedJson doc;
  doc["name"] = model.name;
  doc["image_shape"] = shape_to_json(model.image_shape);
  OrderedJson paths = OrderedJson::array();
  for (const auto& p : model.paths) {
    OrderedJson j;
    j["name"] = p.name;
    j["input_shape"] = shape_to_json(p.net.input_shape);
    if (p.shares) {
      OrderedJson s;
      s["path"] = p.shares->path;
      s["layers"] = p.shares->layers;
      j["shares"] = s;
    }
    if (!p.rewritable) j["rewrite"] = false;
    j["layers"] = layers_to_json(p.net.layers);
    paths.push_back(std::move(j));
  }
  doc["paths"] = std::move(paths);
  return doc.dump(2) + "\n";
}

bool is_model_document(std::string_view document) {
  const auto doc = detail::parse_json(document);
  return doc.is_object() && doc.contains("paths");
}

ModelSpec load_workload(const std::string& path) {
  const std::string text = detail::read_file(path);
  if (is_model_document(text)) return parse_model(text);
  return as_model(parse_network(text));
}

}  // namespace dmaccel
