#include "dmaccel/netir.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json_util.hpp"

namespace dmaccel {

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : Error(what), line_(line), column_(column) {}

std::string to_string(const TensorShape& shape) {
  return fmt::format("{}x{}x{}", shape.channels, shape.height, shape.width);
}

LayerSpec LayerSpec::regular(std::int64_t ic, std::int64_t oc, int k, int dilation, int stride,
                             Padding pad) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.conv = k == 1 ? ConvKind::Pointwise : ConvKind::Regular;
  l.in_channels = ic;
  l.out_channels = oc;
  l.kernel_x = l.kernel_y = k;
  l.dilation = dilation;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec LayerSpec::depthwise(std::int64_t channels, int k, int dilation, int stride,
                               Padding pad) {
  LayerSpec l = regular(channels, channels, k, dilation, stride, pad);
  l.conv = ConvKind::Depthwise;
  return l;
}

LayerSpec LayerSpec::pointwise(std::int64_t ic, std::int64_t oc) { return regular(ic, oc, 1); }

LayerSpec LayerSpec::relu(std::int64_t channels) {
  LayerSpec l;
  l.kind = LayerKind::Activation;
  l.activation = ActivationKind::ReLU;
  l.in_channels = l.out_channels = channels;
  return l;
}

LayerSpec LayerSpec::quantize(std::int64_t channels) {
  LayerSpec l = relu(channels);
  l.activation = ActivationKind::Quantize;
  return l;
}

LayerSpec LayerSpec::max_pool(std::int64_t channels, int k, int stride, Padding pad) {
  LayerSpec l;
  l.kind = LayerKind::Pooling;
  l.in_channels = l.out_channels = channels;
  l.kernel_x = l.kernel_y = k;
  l.stride = stride;
  l.pad = pad;
  return l;
}

std::string_view kind_label(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerKind::Activation:
      return layer.activation == ActivationKind::ReLU ? "relu" : "quantize";
    case LayerKind::Pooling:
      return "pool";
    case LayerKind::Conv:
      break;
  }
  switch (layer.conv) {
    case ConvKind::Regular:
      return "regular";
    case ConvKind::Depthwise:
      return "depthwise";
    case ConvKind::Pointwise:
      return "pointwise";
  }
  return "?";
}

std::string describe(const LayerSpec& layer) {
  if (layer.kind == LayerKind::Activation) return std::string(kind_label(layer));
  std::string s = fmt::format("{} {}x{}", kind_label(layer), layer.kernel_y, layer.kernel_x);
  if (layer.is_conv()) s += fmt::format(" {}->{}", layer.in_channels, layer.out_channels);
  if (layer.dilation) s += fmt::format(" d={}", layer.dilation);
  if (layer.stride != 1) s += fmt::format(" s={}", layer.stride);
  return s;
}

std::optional<std::int64_t> conv_output_extent(std::int64_t input, int pad_before, int pad_after,
                                               int extent, int stride) {
  const std::int64_t padded = input + pad_before + pad_after;
  if (stride < 1 || extent < 1 || padded < extent) return std::nullopt;
  return (padded - extent) / stride + 1;
}

Padding same_padding(const TensorShape& input, int extent_y, int extent_x, int stride) {
  auto axis = [stride](std::int64_t in, int extent) {
    const std::int64_t out = (in + stride - 1) / stride;
    return static_cast<int>(std::max<std::int64_t>((out - 1) * stride + extent - in, 0));
  };
  const int ty = axis(input.height, extent_y);
  const int tx = axis(input.width, extent_x);
  return {ty / 2, ty - ty / 2, tx / 2, tx - tx / 2};
}

namespace detail {

[[noreturn]] static void fail(std::size_t index, const LayerSpec& layer, const std::string& what) {
  throw ValidationError(fmt::format("layer {} ({}): {}", index, describe(layer), what));
}

TensorShape step_shape(std::size_t index, const LayerSpec& layer, const TensorShape& in) {
  if (layer.in_channels < 1 || layer.out_channels < 1)
    fail(index, layer, "channel counts must be positive");
  if (layer.in_channels != in.channels)
    fail(index, layer,
         fmt::format("IC {} does not match the {} incoming channels", layer.in_channels,
                     in.channels));
  if (layer.kind == LayerKind::Activation) {
    if (layer.out_channels != layer.in_channels)
      fail(index, layer, "activation must preserve the channel count");
    return in;
  }
  if (layer.kernel_x < 1 || layer.kernel_y < 1) fail(index, layer, "kernel size must be positive");
  if (layer.dilation < 0) fail(index, layer, "dilation must be >= 0");
  if (layer.stride < 1) fail(index, layer, "stride must be >= 1");
  if (layer.pad.top < 0 || layer.pad.bottom < 0 || layer.pad.left < 0 || layer.pad.right < 0)
    fail(index, layer, "padding must be >= 0");
  if (layer.kind == LayerKind::Pooling) {
    if (layer.out_channels != layer.in_channels)
      fail(index, layer, "pooling must preserve the channel count");
    if (layer.dilation != 0) fail(index, layer, "pooling does not support dilation");
  } else {
    if (layer.conv == ConvKind::Depthwise && layer.in_channels != layer.out_channels)
      fail(index, layer, "depthwise requires IC == OC");
    if (layer.conv == ConvKind::Pointwise && (layer.kernel_x != 1 || layer.kernel_y != 1))
      fail(index, layer, "pointwise requires a 1x1 kernel");
  }
  auto h = conv_output_extent(in.height, layer.pad.top, layer.pad.bottom, layer.extent_y(),
                              layer.stride);
  auto w = conv_output_extent(in.width, layer.pad.left, layer.pad.right, layer.extent_x(),
                              layer.stride);
  if (!h || !w)
    fail(index, layer,
         fmt::format("kernel extent {}x{} exceeds the padded input {}", layer.extent_y(),
                     layer.extent_x(), to_string(in)));
  return {layer.out_channels, *h, *w};
}

}  // namespace detail

std::vector<TensorShape> infer_shapes(const NetworkSpec& net) {
  const TensorShape& in = net.input_shape;
  if (in.channels < 1 || in.height < 1 || in.width < 1)
    throw ValidationError("input shape " + to_string(in) + " must be positive in every field");
  std::vector<TensorShape> shapes{in};
  shapes.reserve(net.layers.size() + 1);
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    shapes.push_back(detail::step_shape(i, net.layers[i], shapes.back()));
  return shapes;
}

void validate(const NetworkSpec& net) { (void)infer_shapes(net); }

ReceptiveField receptive_field(const NetworkSpec& net) {
  validate(net);
  ReceptiveField rf;
  std::int64_t jump = 1;
  for (const auto& layer : net.layers) {
    if (layer.kind == LayerKind::Activation) continue;
    rf.x += (layer.extent_x() - 1) * jump;
    rf.y += (layer.extent_y() - 1) * jump;
    jump *= layer.stride;
  }
  return rf;
}

// ---------------------------------------------------------------------------
// JSON format
// ---------------------------------------------------------------------------

namespace detail {

TensorShape parse_shape(const Json& obj, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": shape must be an object {c,h,w}");
  reject_unknown_keys(obj, {"c", "h", "w"}, where);
  return {as_int(require(obj, "c", where), "c", where), as_int(require(obj, "h", where), "h", where),
          as_int(require(obj, "w", where), "w", where)};
}

OrderedJson shape_to_json(const TensorShape& shape) {
  OrderedJson j;
  j["c"] = shape.channels;
  j["h"] = shape.height;
  j["w"] = shape.width;
  return j;
}

std::vector<LayerSpec> parse_layers(const Json& layers, const TensorShape& input,
                                    const std::string& where) {
  if (!layers.is_array()) throw ParseError(where + ": 'layers' must be an array");
  std::vector<LayerSpec> out;
  TensorShape shape = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Json& obj = layers[i];
    const std::string at = fmt::format("{} layer {}", where, i);
    if (!obj.is_object()) throw ParseError(at + ": layer must be an object");
    reject_unknown_keys(obj, {"type", "ic", "oc", "kx", "ky", "dilation", "stride", "pad", "act"},
                        at);
    const std::string type = string_or(obj, "type", "", at);
    LayerSpec l;
    l.in_channels = int_or(obj, "ic", shape.channels, at);
    if (type == "conv" || type == "depthwise") {
      l.kind = LayerKind::Conv;
      l.in_channels = as_int(require(obj, "ic", at), "ic", at);
      l.out_channels = as_int(require(obj, "oc", at), "oc", at);
    } else if (type == "activation") {
      l.kind = LayerKind::Activation;
      l.out_channels = int_or(obj, "oc", l.in_channels, at);
      const std::string act = string_or(obj, "act", "relu", at);
      if (act == "relu")
        l.activation = ActivationKind::ReLU;
      else if (act == "quantize")
        l.activation = ActivationKind::Quantize;
      else
        throw ParseError(at + ": unknown activation '" + act + "'");
    } else if (type == "pool") {
      l.kind = LayerKind::Pooling;
      l.out_channels = int_or(obj, "oc", l.in_channels, at);
    } else {
      throw ParseError(at + ": unknown layer type '" + type + "'");
    }
    if (l.kind != LayerKind::Activation) {
      if (obj.contains("act")) throw ParseError(at + ": 'act' only applies to activation layers");
      l.kernel_x = static_cast<int>(as_int(require(obj, "kx", at), "kx", at));
      l.kernel_y = static_cast<int>(as_int(require(obj, "ky", at), "ky", at));
      l.dilation = static_cast<int>(int_or(obj, "dilation", 0, at));
      l.stride = static_cast<int>(int_or(obj, "stride", 1, at));
      if (l.kind == LayerKind::Conv) {
        if (type == "depthwise")
          l.conv = ConvKind::Depthwise;
        else
          l.conv = (l.kernel_x == 1 && l.kernel_y == 1) ? ConvKind::Pointwise : ConvKind::Regular;
      }
      if (auto it = obj.find("pad"); it != obj.end()) {
        if (it->is_string()) {
          if (it->get<std::string>() != "same")
            throw ParseError(at + ": 'pad' must be an integer, a 4-array or \"same\"");
          l.pad = same_padding(shape, l.extent_y(), l.extent_x(), std::max(l.stride, 1));
        } else if (it->is_array()) {
          if (it->size() != 4) throw ParseError(at + ": 'pad' array is [top, bottom, left, right]");
          l.pad = {static_cast<int>(as_int((*it)[0], "pad", at)),
                   static_cast<int>(as_int((*it)[1], "pad", at)),
                   static_cast<int>(as_int((*it)[2], "pad", at)),
                   static_cast<int>(as_int((*it)[3], "pad", at))};
        } else {
          l.pad = Padding::uniform(static_cast<int>(as_int(*it, "pad", at)));
        }
      }
    } else {
      for (const char* key : {"kx", "ky", "dilation", "stride", "pad"})
        if (obj.contains(key))
          throw ParseError(at + ": '" + key + "' does not apply to activation layers");
    }
    // Validate as we go so "same" padding of the next layer sees a real shape.
    shape = step_shape(i, l, shape);
    out.push_back(l);
  }
  return out;
}

OrderedJson layers_to_json(const std::vector<LayerSpec>& layers) {
  OrderedJson arr = OrderedJson::array();
  for (const auto& l : layers) {
    OrderedJson j;
    switch (l.kind) {
      case LayerKind::Conv:
        j["type"] = l.conv == ConvKind::Depthwise ? "depthwise" : "conv";
        break;
      case LayerKind::Activation:
        j["type"] = "activation";
        break;
      case LayerKind::Pooling:
        j["type"] = "pool";
        break;
    }
    j["ic"] = l.in_channels;
    j["oc"] = l.out_channels;
    if (l.kind == LayerKind::Activation) {
      j["act"] = l.activation == ActivationKind::ReLU ? "relu" : "quantize";
    } else {
      j["kx"] = l.kernel_x;
      j["ky"] = l.kernel_y;
      j["dilation"] = l.dilation;
      j["stride"] = l.stride;
      if (l.pad.symmetric())
        j["pad"] = l.pad.top;
      else
        j["pad"] = {l.pad.top, l.pad.bottom, l.pad.left, l.pad.right};
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

NetworkSpec parse_network(std::string_view document) {
  using namespace detail;
  const Json doc = parse_json(document);
  if (!doc.is_object()) throw ParseError("network document must be a JSON object");
  reject_unknown_keys(doc, {"name", "input_shape", "layers"}, "network");
  NetworkSpec net;
  net.name = string_or(doc, "name", "", "network");
  net.input_shape = parse_shape(require(doc, "input_shape", "network"), "input_shape");
  if (net.input_shape.channels < 1 || net.input_shape.height < 1 || net.input_shape.width < 1)
    throw ValidationError("input shape " + to_string(net.input_shape) +
                          " must be positive in every field");
  net.layers = parse_layers(require(doc, "layers", "network"), net.input_shape, "network");
  validate(net);
  return net;
}

NetworkSpec load_network(const std::string& path) { return parse_network(detail::read_file(path)); }

std::string serialize_network(const NetworkSpec& net) {
  using namespace detail;
  OrderedJson doc;
  doc["name"] = net.name;
  doc["input_shape"] = shape_to_json(net.input_shape);
  doc["layers"] = layers_to_json(net.layers);
  return doc.dump(2) + "\n";
}

}  // namespace dmaccel
