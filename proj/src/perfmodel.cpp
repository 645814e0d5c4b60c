#include "dmaccel/perfmodel.hpp"

#include <filesystem>

#include <fmt/format.h>

#include "json_util.hpp"

namespace dmaccel {

namespace {

constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

Bound classify(std::int64_t t_mem, std::int64_t t_comp) {
  if (t_mem > t_comp) return Bound::MemoryBound;
  if (t_comp > t_mem) return Bound::ComputeBound;
  return Bound::Balanced;
}

void finish(LayerTiming& t) {
  t.t_mem = std::max(t.t_mem_features, t.t_mem_weights);
  t.t_layer = std::max(t.t_mem, t.t_comp);
  t.bound = classify(t.t_mem, t.t_comp);
}

}  // namespace

void validate(const HardwareConfig& hw) {
  auto positive = [&](std::int64_t v, const char* what) {
    if (v < 1) throw ValidationError(fmt::format("hardware '{}': {} must be >= 1", hw.name, what));
  };
  positive(hw.pe_num, "pe_num");
  positive(hw.mac_pe, "mac_pe");
  positive(hw.bw_fm, "bw_fm");
  positive(hw.bw_w, "bw_w");
  positive(hw.on_h, "on_h");
  positive(hw.om_w, "om_w");
  positive(hw.max_kernel, "max_kernel");
  positive(hw.fm_memory_bytes, "fm_memory_bytes");
  positive(hw.w_memory_bytes, "w_memory_bytes");
  if (hw.in_h.has_value() != hw.in_w.has_value())
    throw ValidationError(fmt::format("hardware '{}': in_h and in_w go together", hw.name));
  if (hw.in_h && (*hw.in_h < hw.on_h || *hw.in_w < hw.om_w))
    throw ValidationError(
        fmt::format("hardware '{}': input block must cover the output block", hw.name));
  if (!(hw.clock_hz > 0))
    throw ValidationError(fmt::format("hardware '{}': clock_hz must be positive", hw.name));
  if (hw.aplpu_latency < 0)
    throw ValidationError(fmt::format("hardware '{}': aplpu_latency must be >= 0", hw.name));
}

HardwareConfig proposed_profile() {
  HardwareConfig hw;
  hw.name = "proposed";
  return hw;
}

HardwareConfig related_yu_profile() {
  HardwareConfig hw;
  hw.name = "related-yu";
  hw.pe_num = 64;
  hw.mac_pe = 8;
  hw.clock_hz = 200e6;
  return hw;
}

HardwareConfig hardware_profile(const std::string& name) {
  if (name == "proposed") return proposed_profile();
  if (name == "related-yu") return related_yu_profile();
  throw ValidationError("unknown hardware profile '" + name + "' (proposed, related-yu)");
}

HardwareConfig parse_hardware(std::string_view document) {
  using namespace detail;
  const Json doc = parse_json(document);
  if (!doc.is_object()) throw ParseError("hardware document must be a JSON object");
  const std::string where = "hardware";
  reject_unknown_keys(doc,
                      {"name", "pe_num", "mac_pe", "bw_fm", "bw_w", "in_h", "in_w", "on_h",
                       "om_w", "clock_hz", "fm_memory_bytes", "w_memory_bytes", "max_kernel",
                       "max_frame", "aplpu_latency", "weight_fetch"},
                      where);
  HardwareConfig hw;
  hw.name = string_or(doc, "name", "custom", where);
  hw.pe_num = int_or(doc, "pe_num", hw.pe_num, where);
  hw.mac_pe = int_or(doc, "mac_pe", hw.mac_pe, where);
  hw.bw_fm = int_or(doc, "bw_fm", hw.bw_fm, where);
  hw.bw_w = int_or(doc, "bw_w", hw.bw_w, where);
  if (doc.contains("in_h")) hw.in_h = as_int(doc["in_h"], "in_h", where);
  if (doc.contains("in_w")) hw.in_w = as_int(doc["in_w"], "in_w", where);
  hw.on_h = int_or(doc, "on_h", hw.on_h, where);
  hw.om_w = int_or(doc, "om_w", hw.om_w, where);
  if (auto it = doc.find("clock_hz"); it != doc.end()) {
    if (!it->is_number()) throw ParseError("hardware: 'clock_hz' must be a number");
    hw.clock_hz = it->get<double>();
  }
  hw.fm_memory_bytes = int_or(doc, "fm_memory_bytes", hw.fm_memory_bytes, where);
  hw.w_memory_bytes = int_or(doc, "w_memory_bytes", hw.w_memory_bytes, where);
  hw.max_kernel = static_cast<int>(int_or(doc, "max_kernel", hw.max_kernel, where));
  if (doc.contains("max_frame")) hw.max_frame = parse_shape(doc["max_frame"], "max_frame");
  hw.aplpu_latency = int_or(doc, "aplpu_latency", hw.aplpu_latency, where);
  const std::string fetch = string_or(doc, "weight_fetch", "once", where);
  if (fetch == "once")
    hw.weight_fetch = WeightFetch::OncePerLayer;
  else if (fetch == "per_block")
    hw.weight_fetch = WeightFetch::PerBlock;
  else
    throw ParseError("hardware: 'weight_fetch' must be \"once\" or \"per_block\"");
  validate(hw);
  return hw;
}

std::string serialize_hardware(const HardwareConfig& hw) {
  detail::OrderedJson j;
  j["name"] = hw.name;
  j["pe_num"] = hw.pe_num;
  j["mac_pe"] = hw.mac_pe;
  j["bw_fm"] = hw.bw_fm;
  j["bw_w"] = hw.bw_w;
  if (hw.in_h) j["in_h"] = *hw.in_h;
  if (hw.in_w) j["in_w"] = *hw.in_w;
  j["on_h"] = hw.on_h;
  j["om_w"] = hw.om_w;
  j["clock_hz"] = hw.clock_hz;
  j["fm_memory_bytes"] = hw.fm_memory_bytes;
  j["w_memory_bytes"] = hw.w_memory_bytes;
  j["max_kernel"] = hw.max_kernel;
  j["max_frame"] = detail::shape_to_json(hw.max_frame);
  j["aplpu_latency"] = hw.aplpu_latency;
  j["weight_fetch"] = hw.weight_fetch == WeightFetch::OncePerLayer ? "once" : "per_block";
  return j.dump(2) + "\n";
}

HardwareConfig resolve_hardware(const std::string& profile_or_path) {
  if (profile_or_path == "proposed" || profile_or_path == "related-yu")
    return hardware_profile(profile_or_path);
  if (!std::filesystem::exists(profile_or_path))
    throw ValidationError("'" + profile_or_path +
                          "' is neither a hardware profile (proposed, related-yu) nor a file");
  return parse_hardware(detail::read_file(profile_or_path));
}

BlockGeometry block_geometry(const LayerSpec& layer, const HardwareConfig& hw) {
  if (hw.in_h) return {*hw.in_h, *hw.in_w, hw.on_h, hw.om_w};
  return {(hw.on_h - 1) * layer.stride + layer.extent_y(),
          (hw.om_w - 1) * layer.stride + layer.extent_x(), hw.on_h, hw.om_w};
}

std::string_view to_string(Bound b) {
  switch (b) {
    case Bound::MemoryBound:
      return "memory";
    case Bound::ComputeBound:
      return "compute";
    case Bound::Balanced:
      return "balanced";
  }
  return "?";
}

LayerTiming regular_layer_times(const LayerSpec& layer, const HardwareConfig& hw) {
  if (!layer.is_regular())
    throw ContractError("regular timing model needs a regular or pointwise convolution, got " +
                        describe(layer));
  const auto g = block_geometry(layer, hw);
  const std::int64_t ic = layer.in_channels, oc = layer.out_channels, taps = layer.taps();
  const std::int64_t groups = ceil_div(oc, hw.pe_num);
  LayerTiming t;
  t.layer = layer;
  t.t_mem_features = ic * ceil_div(g.in_h * g.in_w, hw.bw_fm) * groups;
  t.t_mem_weights = ic * oc * ceil_div(taps, hw.bw_w);
  t.t_comp = taps * ic * ceil_div(g.on_h * g.om_w, hw.mac_pe) * groups;
  finish(t);
  return t;
}

LayerTiming depthwise_layer_times(const LayerSpec& layer, const HardwareConfig& hw) {
  if (!layer.is_depthwise())
    throw ContractError("depthwise timing model needs a depthwise convolution, got " +
                        describe(layer));
  const auto g = block_geometry(layer, hw);
  const std::int64_t oc = layer.out_channels, taps = layer.taps();
  LayerTiming t;
  t.layer = layer;
  t.t_mem_features = oc * ceil_div(g.in_h * g.in_w, hw.bw_fm);
  t.t_mem_weights = oc * ceil_div(taps, hw.bw_w);
  t.t_comp = taps * ceil_div(g.on_h * g.om_w, hw.mac_pe) * ceil_div(oc, hw.pe_num);
  finish(t);
  return t;
}

LayerTiming layer_times(const LayerSpec& layer, const HardwareConfig& hw) {
  if (layer.is_depthwise()) return depthwise_layer_times(layer, hw);
  if (layer.is_regular()) return regular_layer_times(layer, hw);
  LayerTiming t;
  t.layer = layer;
  t.t_comp = hw.aplpu_latency;
  finish(t);
  return t;
}

void check_supported(const NetworkSpec& net, const HardwareConfig& hw) {
  validate(hw);
  const auto& f = net.input_shape;
  if (f.height > hw.max_frame.height || f.width > hw.max_frame.width)
    throw ValidationError(fmt::format("frame {}x{} exceeds the {}x{} maximum of '{}'", f.height,
                                      f.width, hw.max_frame.height, hw.max_frame.width, hw.name));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.is_conv() && (l.kernel_x > hw.max_kernel || l.kernel_y > hw.max_kernel))
      throw ValidationError(fmt::format("layer {} ({}): kernel exceeds the {}x{} maximum of '{}'",
                                        i, describe(l), hw.max_kernel, hw.max_kernel, hw.name));
  }
}

namespace {

void append_path(TimingReport& report, const std::string& path, const NetworkSpec& net,
                 std::size_t first_counted, const HardwareConfig& hw) {
  check_supported(net, hw);
  const auto shapes = infer_shapes(net);
  for (std::size_t i = first_counted; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    LayerTimingRow row;
    row.path = path;
    row.layer = i;
    row.first = layer_times(l, hw);
    row.steady = row.first;
    if (l.is_conv() && hw.weight_fetch == WeightFetch::OncePerLayer) {
      row.steady.t_mem_weights = 0;
      finish(row.steady);
    }
    const auto& out = shapes[i + 1];
    row.blocks = ceil_div(out.height, hw.on_h) * ceil_div(out.width, hw.om_w);
    row.total = row.first.t_layer + (row.blocks - 1) * row.steady.t_layer;
    report.total_cycles += row.total;
    if (l.is_conv() && weight_count(l) > hw.w_memory_bytes)
      report.notes.push_back(fmt::format("{}layer {}: weights exceed the weight memory",
                                         path.empty() ? "" : path + " ", i));
    if (shapes[i].elements() > hw.fm_memory_bytes)
      report.notes.push_back(fmt::format("{}layer {}: input feature map exceeds the feature memory",
                                         path.empty() ? "" : path + " ", i));
    report.per_layer.push_back(std::move(row));
  }
}

void finish_report(TimingReport& report, const HardwareConfig& hw) {
  report.clock_hz = hw.clock_hz;
  report.fps = report.total_cycles > 0 ? hw.clock_hz / static_cast<double>(report.total_cycles) : 0;
  report.notes.insert(report.notes.begin(),
                      "fps counts accelerator cycles only; host post-processing is not modelled");
}

}  // namespace

TimingReport network_time(const NetworkSpec& net, const HardwareConfig& hw) {
  TimingReport r;
  append_path(r, "", net, 0, hw);
  finish_report(r, hw);
  return r;
}

TimingReport network_time(const NetworkSpec& net, const HardwareConfig& hw,
                          const TensorShape& frame) {
  if (frame.channels != net.input_shape.channels)
    throw ValidationError(fmt::format("frame {} has {} channels, network expects {}",
                                      to_string(frame), frame.channels,
                                      net.input_shape.channels));
  NetworkSpec rebased = net;
  rebased.input_shape = frame;
  return network_time(rebased, hw);
}

TimingReport network_time(const ModelSpec& model, const HardwareConfig& hw) {
  validate(model);
  const auto& img = model.image_shape;
  if (img.height > hw.max_frame.height || img.width > hw.max_frame.width)
    throw ValidationError(fmt::format("frame {}x{} exceeds the {}x{} maximum of '{}'", img.height,
                                      img.width, hw.max_frame.height, hw.max_frame.width,
                                      hw.name));
  TimingReport r;
  for (std::size_t i = 0; i < model.paths.size(); ++i)
    append_path(r, model.paths[i].name, model.paths[i].net, model.shared_layers(i), hw);
  finish_report(r, hw);
  return r;
}

CsvTable timing_table(const TimingReport& report) {
  CsvTable t;
  for (const auto& n : report.notes) t.comments.push_back(n);
  t.comments.push_back(fmt::format("clock_hz={} total_cycles={} fps={}",
                                   format_number(report.clock_hz), report.total_cycles,
                                   format_number(report.fps)));
  t.header = {"layer", "t_mem", "t_comp", "t_layer", "bound", "blocks", "total"};
  for (const auto& r : report.per_layer)
    t.rows.push_back({r.path.empty() ? std::to_string(r.layer) : fmt::format("{}:{}", r.path, r.layer),
                      std::to_string(r.first.t_mem), std::to_string(r.first.t_comp),
                      std::to_string(r.first.t_layer), std::string(to_string(r.first.bound)),
                      std::to_string(r.blocks), std::to_string(r.total)});
  t.rows.push_back({"total", "", "", "", "", "", std::to_string(report.total_cycles)});
  return t;
}

// ---------------------------------------------------------------------------
// Utilisation
// ---------------------------------------------------------------------------

Rational utilization(const UtilizationModel& model, ConvKind kind, int kernel_x, int kernel_y) {
  if (kernel_x < 1 || kernel_y < 1) throw ValidationError("kernel size must be >= 1");
  if (kind != ConvKind::Depthwise) return Rational(1);
  switch (model.design) {
    case Design::Liu:
      if (model.t_m < 1) throw ValidationError("T_m must be >= 1");
      return Rational(1, model.t_m);
    case Design::Su:
      return Rational(1, 2);
    case Design::Yu: {
      const std::int64_t alpha =
          model.alpha.value_or(ceil_div(kernel_x, 3) * ceil_div(kernel_y, 3));
      if (alpha < 1) throw ValidationError("alpha must be >= 1");
      return std::min(Rational(1), Rational(std::int64_t{kernel_x} * kernel_y, 9 * alpha));
    }
    case Design::Proposed:
      return Rational(1);
  }
  return Rational(1);
}

std::int64_t utilization_percent(const Rational& u) {
  const Rational scaled = u * 100 + Rational(1, 2);
  return scaled.numerator() / scaled.denominator();
}

// ---------------------------------------------------------------------------
// Comparison sweep
// ---------------------------------------------------------------------------

std::int64_t related_compute_time(ConvKind kind, int kernel_x, int kernel_y, std::int64_t ic,
                                  std::int64_t oc, const HardwareConfig& hw) {
  const std::int64_t tiled = ceil_div(kernel_x, 3) * ceil_div(kernel_y, 3) * 9;
  const std::int64_t per_block = ceil_div(hw.on_h * hw.om_w, hw.mac_pe) * ceil_div(oc, hw.pe_num);
  return kind == ConvKind::Depthwise ? tiled * per_block : tiled * ic * per_block;
}

std::vector<SweepPoint> comparison_sweep(const HardwareConfig& proposed,
                                         const HardwareConfig& related, ConvKind kind,
                                         int kernel_x, int kernel_y,
                                         std::span<const std::int64_t> channels) {
  if (channels.empty()) throw ValidationError("comparison sweep needs at least one channel count");
  validate(proposed);
  validate(related);
  std::vector<SweepPoint> out;
  for (auto c : channels) {
    if (c < 1) throw ValidationError("channel counts must be >= 1");
    LayerSpec l = kind == ConvKind::Depthwise ? LayerSpec::depthwise(c, 1)
                                              : LayerSpec::regular(c, c, 1);
    l.kernel_x = kernel_x;
    l.kernel_y = kernel_y;
    if (kind != ConvKind::Depthwise)
      l.conv = kernel_x == 1 && kernel_y == 1 ? ConvKind::Pointwise : ConvKind::Regular;
    out.push_back({c, layer_times(l, proposed).t_comp,
                   related_compute_time(kind, kernel_x, kernel_y, c, c, related)});
  }
  return out;
}

CsvTable sweep_table(std::span<const SweepPoint> sweep, ConvKind kind, int kernel_x,
                     int kernel_y) {
  CsvTable t;
  t.comments.push_back(fmt::format("kind={} kernel={}x{}",
                                   kind == ConvKind::Depthwise ? "depthwise" : "regular", kernel_y,
                                   kernel_x));
  t.comments.push_back(
      "t_related is approximate: proposed compute skeleton with 3x3-tiled kernel term");
  t.header = {"channels", "t_proposed", "t_related"};
  for (const auto& p : sweep)
    t.rows.push_back({std::to_string(p.channels), std::to_string(p.t_proposed),
                      std::to_string(p.t_related)});
  return t;
}

}  // namespace dmaccel
