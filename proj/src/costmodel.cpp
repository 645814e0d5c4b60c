#include "dmaccel/costmodel.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace dmaccel {

std::int64_t weight_count(const LayerSpec& layer) {
  if (!layer.is_conv()) return 0;
  const std::int64_t taps = layer.taps();
  return layer.is_depthwise() ? taps * layer.out_channels
                              : taps * layer.in_channels * layer.out_channels;
}

std::int64_t macs_per_output_pixel(const LayerSpec& layer) { return weight_count(layer); }

namespace {

void append_path(CostReport& report, const std::string& path, const NetworkSpec& net,
                 std::size_t first_counted, std::int64_t norm_pixels) {
  const auto shapes = infer_shapes(net);
  for (std::size_t i = first_counted; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    LayerCost c;
    c.path = path;
    c.layer = i;
    c.spec = l;
    c.macs = macs_per_output_pixel(l) * shapes[i + 1].pixels();
    c.macs_per_input_pixel = Rational(c.macs, norm_pixels);
    c.weight_count = weight_count(l);
    c.weight_bytes = c.weight_count * report.bytes_per_weight;
    report.total_macs += c.macs;
    report.total_macs_per_input_pixel += c.macs_per_input_pixel;
    report.total_weight_count += c.weight_count;
    report.total_weight_bytes += c.weight_bytes;
    report.per_layer.push_back(std::move(c));
  }
}

}  // namespace

CostReport cost_report(const NetworkSpec& net, int bytes_per_weight) {
  if (bytes_per_weight < 1) throw ValidationError("bytes per weight must be >= 1");
  CostReport r;
  r.bytes_per_weight = bytes_per_weight;
  append_path(r, "", net, 0, net.input_shape.pixels());
  return r;
}

CostReport cost_report(const ModelSpec& model, int bytes_per_weight) {
  if (bytes_per_weight < 1) throw ValidationError("bytes per weight must be >= 1");
  validate(model);
  CostReport r;
  r.bytes_per_weight = bytes_per_weight;
  for (std::size_t i = 0; i < model.paths.size(); ++i)
    append_path(r, model.paths[i].name, model.paths[i].net, model.shared_layers(i),
                model.image_shape.pixels());
  return r;
}

CostReport macs_per_input_pixel(const NetworkSpec& net) { return cost_report(net, 1); }

CostReport model_size_bytes(const NetworkSpec& net, int bytes_per_weight) {
  return cost_report(net, bytes_per_weight);
}

CsvTable cost_table(const CostReport& report) {
  CsvTable t;
  t.comments.push_back(fmt::format("bytes_per_weight={}", report.bytes_per_weight));
  t.header = {"layer", "kind", "kx",  "ky", "dilation", "ic", "oc", "macs_per_input_pixel",
              "weight_bytes"};
  for (const auto& c : report.per_layer) {
    const auto& l = c.spec;
    const bool spatial = l.kind != LayerKind::Activation;
    t.rows.push_back({c.path.empty() ? std::to_string(c.layer)
                                     : fmt::format("{}:{}", c.path, c.layer),
                      std::string(kind_label(l)), spatial ? std::to_string(l.kernel_x) : "",
                      spatial ? std::to_string(l.kernel_y) : "",
                      spatial ? std::to_string(l.dilation) : "", std::to_string(l.in_channels),
                      std::to_string(l.out_channels),
                      format_number(to_double(c.macs_per_input_pixel)),
                      std::to_string(c.weight_bytes)});
  }
  t.rows.push_back({"total", "", "", "", "", "", "",
                    format_number(to_double(report.total_macs_per_input_pixel)),
                    std::to_string(report.total_weight_bytes)});
  return t;
}

// ---------------------------------------------------------------------------
// DDC rewrite
// ---------------------------------------------------------------------------

std::vector<RewriteRule> default_rules() {
  return {RewriteRule::for_cascade(2), RewriteRule::for_cascade(3)};
}

namespace {

bool cascadable(const LayerSpec& l) {
  return l.is_conv() && l.conv == ConvKind::Regular && l.kernel_x == 3 && l.kernel_y == 3 &&
         l.dilation == 0 && l.stride == 1;
}

const RewriteRule* find_rule(std::span<const RewriteRule> rules, std::size_t length) {
  for (const auto& r : rules)
    if (static_cast<std::size_t>(r.cascade_length) == length) return &r;
  return nullptr;
}

void check_rules(std::span<const RewriteRule> rules) {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (rules[i].cascade_length < 1 || rules[i].dilation < 0)
      throw RewriteError(fmt::format("rule {}: cascade length must be >= 1 and dilation >= 0", i));
    for (std::size_t j = i + 1; j < rules.size(); ++j)
      if (rules[i].cascade_length == rules[j].cascade_length)
        throw RewriteError(fmt::format("rules {} and {} both match cascades of length {}", i, j,
                                       rules[i].cascade_length));
  }
}

}  // namespace

NetworkSpec ddc_rewrite(const NetworkSpec& net, std::span<const RewriteRule> rules) {
  check_rules(rules);
  validate(net);
  NetworkSpec out{net.name, net.input_shape, {}};
  const auto& layers = net.layers;
  std::size_t i = 0;
  while (i < layers.size()) {
    if (!cascadable(layers[i])) {
      out.layers.push_back(layers[i++]);
      continue;
    }
    // Maximal run: convs, possibly separated by activations.
    std::vector<std::size_t> convs{i};
    std::size_t j = i + 1;
    while (true) {
      std::size_t k = j;
      while (k < layers.size() && layers[k].kind == LayerKind::Activation) ++k;
      if (k < layers.size() && cascadable(layers[k])) {
        convs.push_back(k);
        j = k + 1;
      } else {
        break;
      }
    }
    const std::size_t run_end = convs.back() + 1;
    const RewriteRule* rule = find_rule(rules, convs.size());
    if (!rule) {
      for (std::size_t k = i; k < run_end; ++k) out.layers.push_back(layers[k]);
      i = run_end;
      continue;
    }
    const LayerSpec& first = layers[convs.front()];
    const LayerSpec& last = layers[convs.back()];
    Padding pad;
    for (auto c : convs) {
      pad.top += layers[c].pad.top;
      pad.bottom += layers[c].pad.bottom;
      pad.left += layers[c].pad.left;
      pad.right += layers[c].pad.right;
    }
    LayerSpec act = LayerSpec::relu(first.in_channels);
    for (std::size_t k = i; k < run_end; ++k)
      if (layers[k].kind == LayerKind::Activation) {
        act = layers[k];
        act.in_channels = act.out_channels = first.in_channels;
        break;
      }
    out.layers.push_back(LayerSpec::depthwise(first.in_channels, 3, rule->dilation, 1, pad));
    out.layers.push_back(act);
    if (rule->insert_pointwise) {
      out.layers.push_back(LayerSpec::pointwise(first.in_channels, last.out_channels));
    } else if (first.in_channels != last.out_channels) {
      throw RewriteError(fmt::format(
          "layers {}..{}: a rule without a pointwise layer needs a channel-preserving cascade "
          "({} -> {})",
          i, run_end - 1, first.in_channels, last.out_channels));
    }
    i = run_end;
  }
  validate(out);
  return out;
}

ModelSpec ddc_rewrite(const ModelSpec& model, std::span<const RewriteRule> rules) {
  check_rules(rules);
  validate(model);
  ModelSpec out = model;
  for (auto& p : out.paths)
    if (p.rewritable) p.net = ddc_rewrite(p.net, rules);
  for (auto& p : out.paths) {
    if (!p.shares) continue;
    const auto owner = std::find_if(out.paths.begin(), out.paths.end(),
                                    [&](const ModelPath& q) { return q.name == p.shares->path; });
    std::size_t common = 0;
    const std::size_t limit = std::min({p.shares->layers, p.net.layers.size(),
                                        owner->net.layers.size()});
    while (common < limit && p.net.layers[common] == owner->net.layers[common]) ++common;
    if (common == 0)
      p.shares.reset();
    else
      p.shares->layers = common;
  }
  validate(out);
  return out;
}

}  // namespace dmaccel
