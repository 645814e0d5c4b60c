#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dmaccel/costmodel.hpp"
#include "dmaccel/funcsim.hpp"
#include "dmaccel/model.hpp"
#include "dmaccel/netir.hpp"
#include "dmaccel/perfmodel.hpp"
#include "dmaccel/pipesim.hpp"

namespace dmaccel::cli {

namespace {

struct Globals {
  std::string hw = "proposed";
  std::string format = "csv";
  std::uint64_t seed = 1;
  std::string out;
};

using Workload = std::variant<NetworkSpec, ModelSpec>;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Workload load(const std::string& path) {
  const std::string doc = slurp(path);
  if (is_model_document(doc)) return parse_model(doc);
  return parse_network(doc);
}

ModelSpec to_model(const Workload& w) {
  if (const auto* net = std::get_if<NetworkSpec>(&w)) return as_model(*net);
  return std::get<ModelSpec>(w);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

std::int64_t to_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(fmt::format("{}: '{}' is not an integer", what, s));
  return v;
}

std::string render(const CsvTable& t, const Globals& g) {
  return g.format == "text" ? to_text(t) : to_csv(t);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
}

TensorShape parse_frame(const std::string& s, std::int64_t channels) {
  const auto p = split(s, 'x');
  if (p.size() == 2) return {channels, to_int(p[0], "--frame"), to_int(p[1], "--frame")};
  if (p.size() == 3)
    return {to_int(p[0], "--frame"), to_int(p[1], "--frame"), to_int(p[2], "--frame")};
  throw ValidationError("--frame must be HxW or CxHxW");
}

std::vector<RewriteRule> parse_rules(const std::string& s) {
  if (s.empty()) return default_rules();
  std::vector<RewriteRule> rules;
  for (const auto& item : split(s, ',')) {
    const auto p = split(item, ':');
    if (p.size() > 2) throw ValidationError("--rules items are N or N:DILATION");
    RewriteRule r = RewriteRule::for_cascade(static_cast<int>(to_int(p[0], "--rules")));
    if (p.size() == 2) r.dilation = static_cast<int>(to_int(p[1], "--rules"));
    rules.push_back(r);
  }
  return rules;
}

// kind:ic:oc:k[:dilation[:stride]]
LayerSpec parse_layer_spec(const std::string& s) {
  const auto p = split(s, ':');
  if (p.size() < 4 || p.size() > 6)
    throw ValidationError("--spec is KIND:IC:OC:K[:DILATION[:STRIDE]]");
  const std::int64_t ic = to_int(p[1], "--spec"), oc = to_int(p[2], "--spec");
  const int k = static_cast<int>(to_int(p[3], "--spec"));
  const int d = p.size() > 4 ? static_cast<int>(to_int(p[4], "--spec")) : 0;
  const int stride = p.size() > 5 ? static_cast<int>(to_int(p[5], "--spec")) : 1;
  if (p[0] == "regular") return LayerSpec::regular(ic, oc, k, d, stride);
  if (p[0] == "pointwise") {
    if (k != 1) throw ValidationError("pointwise layers have k = 1");
    return LayerSpec::pointwise(ic, oc);
  }
  if (p[0] == "depthwise") {
    if (ic != oc) throw ValidationError("depthwise requires IC == OC");
    return LayerSpec::depthwise(ic, k, d, stride);
  }
  throw ValidationError("--spec kind must be regular, depthwise or pointwise");
}

std::vector<std::int64_t> parse_channels(const std::string& s) {
  std::vector<std::int64_t> out;
  if (s.find(':') != std::string::npos) {
    const auto p = split(s, ':');
    if (p.size() != 3) throw ValidationError("--channels range is LO:HI:STEP");
    const auto lo = to_int(p[0], "--channels"), hi = to_int(p[1], "--channels"),
               step = to_int(p[2], "--channels");
    if (step < 1) throw ValidationError("--channels step must be >= 1");
    for (auto c = lo; c <= hi; c += step) out.push_back(c);
  } else if (!s.empty()) {
    for (const auto& item : split(s, ',')) out.push_back(to_int(item, "--channels"));
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_report_cost(const Globals& g, const std::string& path, int bytes_per_weight,
                    std::ostream& out) {
  const Workload w = load(path);
  const CostReport r = std::holds_alternative<NetworkSpec>(w)
                           ? cost_report(std::get<NetworkSpec>(w), bytes_per_weight)
                           : cost_report(std::get<ModelSpec>(w), bytes_per_weight);
  emit(render(cost_table(r), g), g.out, out);
  return kOk;
}

TimingReport time_workload(const Workload& w, const HardwareConfig& hw,
                           const std::optional<TensorShape>& frame) {
  if (const auto* net = std::get_if<NetworkSpec>(&w))
    return frame ? network_time(*net, hw, *frame) : network_time(*net, hw);
  if (frame) throw ValidationError("--frame applies to single networks, not multi-path models");
  return network_time(std::get<ModelSpec>(w), hw);
}

int cmd_report_time(const Globals& g, const std::string& path, const std::string& frame_arg,
                    bool ddc, const std::string& rules_arg, std::ostream& out) {
  const HardwareConfig hw = resolve_hardware(g.hw);
  const Workload w = load(path);
  std::optional<TensorShape> frame;
  if (!frame_arg.empty()) {
    const std::int64_t c = std::holds_alternative<NetworkSpec>(w)
                               ? std::get<NetworkSpec>(w).input_shape.channels
                               : 3;
    frame = parse_frame(frame_arg, c);
  }
  const TimingReport base = time_workload(w, hw, frame);
  if (!ddc) {
    emit(render(timing_table(base), g), g.out, out);
    return kOk;
  }

  const auto rules = parse_rules(rules_arg);
  Workload rewritten;
  if (const auto* net = std::get_if<NetworkSpec>(&w))
    rewritten = ddc_rewrite(*net, rules);
  else
    rewritten = ddc_rewrite(std::get<ModelSpec>(w), rules);
  const TimingReport after = time_workload(rewritten, hw, frame);

  const double ratio = base.total_cycles == 0
                           ? 1.0
                           : static_cast<double>(after.total_cycles) / base.total_cycles;
  CsvTable t;
  t.comments = base.notes;
  t.comments.push_back(fmt::format("hw={} clock_hz={}", hw.name, format_number(hw.clock_hz)));
  t.comments.push_back(
      fmt::format("ddc/baseline cycle ratio {:.4f} (reference figure 0.83)", ratio));
  t.header = {"network", "total_cycles", "fps"};
  t.rows.push_back({"baseline", std::to_string(base.total_cycles), format_number(base.fps)});
  t.rows.push_back({"ddc", std::to_string(after.total_cycles), format_number(after.fps)});
  t.rows.push_back({"ratio", format_number(ratio), "0.83"});
  emit(render(t, g), g.out, out);
  return after.total_cycles < base.total_cycles ? kOk : kFailedVerdict;
}

int cmd_compare(const Globals& g, std::vector<std::string> kinds, std::vector<int> kernels,
                const std::string& channels_arg, const std::string& related_arg,
                std::ostream& out) {
  const HardwareConfig proposed = resolve_hardware(g.hw);
  const HardwareConfig related = resolve_hardware(related_arg);
  const auto channels = parse_channels(channels_arg);
  if (kinds.empty()) kinds = {"regular", "depthwise"};
  if (kernels.empty()) kernels = {3, 5};
  CsvTable t;
  t.comments.push_back(fmt::format("proposed={} related={}", proposed.name, related.name));
  t.comments.push_back(
      "per-block compute cycles; t_related tiles kernels into 3x3 pieces and is approximate");
  t.header = {"kind", "kernel", "channels", "t_proposed", "t_related"};
  for (const auto& kind_name : kinds) {
    ConvKind kind;
    if (kind_name == "regular")
      kind = ConvKind::Regular;
    else if (kind_name == "depthwise")
      kind = ConvKind::Depthwise;
    else
      throw ValidationError("--kind must be regular or depthwise");
    for (int k : kernels) {
      for (const auto& p : comparison_sweep(proposed, related, kind, k, k, channels))
        t.rows.push_back({kind_name, fmt::format("{}x{}", k, k), std::to_string(p.channels),
                          std::to_string(p.t_proposed), std::to_string(p.t_related)});
    }
  }
  emit(render(t, g), g.out, out);
  return kOk;
}

int cmd_simulate(const Globals& g, const std::string& path, const std::string& path_name,
                 std::optional<std::size_t> layer_index, const std::string& spec,
                 std::int64_t blocks, std::ostream& out) {
  const HardwareConfig hw = resolve_hardware(g.hw);
  LayerSpec layer;
  if (!spec.empty()) {
    if (!path.empty() || layer_index) throw ValidationError("use either --spec or NET --layer");
    layer = parse_layer_spec(spec);
  } else {
    if (path.empty() || !layer_index) throw ValidationError("simulate needs NET --layer I or --spec");
    const ModelSpec m = to_model(load(path));
    const ModelPath* chosen = &m.paths.front();
    if (!path_name.empty()) {
      chosen = nullptr;
      for (const auto& p : m.paths)
        if (p.name == path_name) chosen = &p;
      if (!chosen) throw ValidationError("no path named '" + path_name + "'");
    }
    if (*layer_index >= chosen->net.layers.size())
      throw ValidationError(fmt::format("layer {} out of range ({} layers)", *layer_index,
                                        chosen->net.layers.size()));
    layer = chosen->net.layers[*layer_index];
    if (!layer.is_conv())
      throw ValidationError(fmt::format("layer {} ({}) is not a convolution", *layer_index,
                                        describe(layer)));
  }
  const PipelineTrace trace = simulate(layer, hw, blocks);
  const ConsistencyVerdict v = check_against_analytical(trace, layer_times(layer, hw));
  std::string text = render(trace_table(trace), g);
  text += (g.format == "text" ? "" : "# ") + std::string("verdict ") + v.message + "\n";
  emit(text, g.out, out);
  return v.pass ? kOk : kFailedVerdict;
}

std::string pct_change(double before, double after) {
  if (before == 0) return "";
  return fmt::format("{:+.1f}%", 100.0 * (after - before) / before);
}

int cmd_rewrite(const Globals& g, const std::string& path, const std::string& rules_arg,
                bool no_pointwise, std::ostream& out, std::ostream& err) {
  auto rules = parse_rules(rules_arg);
  if (no_pointwise)
    for (auto& r : rules) r.insert_pointwise = false;
  const Workload w = load(path);
  ModelSpec before = to_model(w), after;
  std::string doc;
  if (const auto* net = std::get_if<NetworkSpec>(&w)) {
    const NetworkSpec r = ddc_rewrite(*net, rules);
    after = as_model(r);
    doc = serialize_network(r);
  } else {
    after = ddc_rewrite(std::get<ModelSpec>(w), rules);
    doc = serialize_model(after);
  }
  const CostReport cb = cost_report(before), ca = cost_report(after);
  CsvTable t;
  t.header = {"metric", "before", "after", "change"};
  const double mb = to_double(cb.total_macs_per_input_pixel);
  const double ma = to_double(ca.total_macs_per_input_pixel);
  t.rows.push_back({"macs_per_input_pixel", format_number(mb), format_number(ma), pct_change(mb, ma)});
  t.rows.push_back({"weight_bytes", std::to_string(cb.total_weight_bytes),
                    std::to_string(ca.total_weight_bytes),
                    pct_change(static_cast<double>(cb.total_weight_bytes),
                               static_cast<double>(ca.total_weight_bytes))});
  for (std::size_t i = 0; i < before.paths.size(); ++i) {
    const auto rb = receptive_field(before.paths[i].net);
    const auto ra = receptive_field(after.paths[i].net);
    t.rows.push_back({"rf:" + before.paths[i].name, fmt::format("{}x{}", rb.y, rb.x),
                      fmt::format("{}x{}", ra.y, ra.x), rb == ra ? "same" : "changed"});
  }
  const std::string report = render(t, g);
  if (g.out.empty()) {
    out << doc;
    err << report;
  } else {
    emit(doc, g.out, out);
    out << report;
  }
  return kOk;
}

int cmd_check(const Globals& g, const std::string& path, const std::string& fault_arg,
              std::ostream& out) {
  const HardwareConfig hw = resolve_hardware(g.hw);
  const Workload w = load(path);
  const auto* net = std::get_if<NetworkSpec>(&w);
  if (!net) throw ValidationError("check runs single networks, not multi-path models");
  std::optional<FaultInjection> fault;
  if (!fault_arg.empty()) {
    const auto p = split(fault_arg, ',');
    if (p.size() != 4) throw ValidationError("--inject-fault is LAYER,C,Y,X");
    fault = FaultInjection{static_cast<std::size_t>(to_int(p[0], "--inject-fault")),
                           to_int(p[1], "--inject-fault"), to_int(p[2], "--inject-fault"),
                           to_int(p[3], "--inject-fault"), 1};
  }
  const QuantTensor input = random_tensor(net->input_shape, g.seed);
  const auto params = random_params(*net, g.seed + 0x9E3779B97F4A7C15ULL);
  const NetworkCheck r = check_network(input, *net, params, hw, fault ? &*fault : nullptr);
  if (!g.out.empty()) write_tensor(g.out, r.output);
  if (r.pass) {
    out << fmt::format("pass: oracle and blocked orders agree on all {} layers (seed {})\n",
                       r.layers_compared, g.seed);
    return kOk;
  }
  out << "FAIL: "
      << (r.first_mismatch ? "first mismatch at " + to_string(*r.first_mismatch)
                           : std::string("final outputs differ"))
      << fmt::format(" (seed {})\n", g.seed);
  return kFailedVerdict;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Performance model, pipeline simulator and int8 reference for a dual-mode CNN "
               "accelerator"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--hw", g.hw, "hardware profile (proposed, related-yu) or JSON file");
  app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"csv", "text"}));
  app.add_option("--seed", g.seed, "seed for generated tensors");
  app.add_option("--out", g.out, "output path");

  std::string net_path;
  int bytes_per_weight = 1;
  auto* cost = app.add_subcommand("report-cost", "MACs per input pixel and weight bytes per layer");
  cost->add_option("net", net_path, "network or model file")->required();
  cost->add_option("--bytes-per-weight", bytes_per_weight, "bytes per stored weight");

  std::string frame, rules;
  bool ddc = false;
  auto* time = app.add_subcommand("report-time", "per-layer cycles and frame rate");
  time->add_option("net", net_path, "network or model file")->required();
  time->add_option("--frame", frame, "re-base a network on an HxW or CxHxW frame");
  time->add_flag("--ddc", ddc, "also time the DDC-rewritten workload and print the cycle ratio");
  time->add_option("--rules", rules, "cascade lengths for --ddc, e.g. 1,2,3 or 2:1");

  std::vector<std::string> kinds;
  std::vector<int> kernels;
  std::string channels = "32:512:32", related = "related-yu";
  auto* compare = app.add_subcommand("compare", "compute-time sweep against the related design");
  compare->add_option("--kind", kinds, "regular and/or depthwise (default both)");
  compare->add_option("--kernel", kernels, "square kernel sizes (default 3 5)");
  compare->add_option("--channels", channels, "LO:HI:STEP or a comma list");
  compare->add_option("--related", related, "related design profile or JSON file");

  std::string path_name, spec;
  std::optional<std::size_t> layer_index;
  std::int64_t blocks = 1;
  auto* sim = app.add_subcommand("simulate", "pipeline trace of one convolution layer");
  sim->add_option("net", net_path, "network or model file");
  sim->add_option("--layer", layer_index, "layer index within the network or path");
  sim->add_option("--path", path_name, "model path name (default: first path)");
  sim->add_option("--spec", spec, "inline layer KIND:IC:OC:K[:DILATION[:STRIDE]]");
  sim->add_option("--blocks", blocks, "spatial blocks to simulate")->check(CLI::PositiveNumber);

  bool no_pointwise = false;
  auto* rewrite = app.add_subcommand("rewrite", "replace 3x3 cascades with DDC layers");
  rewrite->add_option("net", net_path, "network or model file")->required();
  rewrite->add_option("--rules", rules, "cascade lengths, e.g. 2,3 (default) or 1,2,3");
  rewrite->add_flag("--no-pointwise", no_pointwise, "omit the 1x1 after each DDC layer");

  std::string fault;
  auto* check = app.add_subcommand("check", "oracle vs blocked int8 execution with seeded data");
  check->add_option("net", net_path, "network file")->required();
  check->add_option("--inject-fault", fault, "corrupt the blocked path at LAYER,C,Y,X");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*cost) return cmd_report_cost(g, net_path, bytes_per_weight, out);
    if (*time) return cmd_report_time(g, net_path, frame, ddc, rules, out);
    if (*compare) return cmd_compare(g, kinds, kernels, channels, related, out);
    if (*sim) return cmd_simulate(g, net_path, path_name, layer_index, spec, blocks, out);
    if (*rewrite) return cmd_rewrite(g, net_path, rules, no_pointwise, out, err);
    if (*check) return cmd_check(g, net_path, fault, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what();
    if (e.line() > 0) err << " (line " << e.line() << ", column " << e.column() << ")";
    err << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}

}  // namespace dmaccel::cli
