#pragma once

// Workload metrics (MACs per input pixel, weight bytes) and the DDC rewrite,
// which replaces a cascade of stride-1 regular 3x3 convolutions with a single
// dilated depthwise 3x3, an activation, and a pointwise 1x1.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "dmaccel/csv.hpp"
#include "dmaccel/model.hpp"
#include "dmaccel/netir.hpp"

namespace dmaccel {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

struct LayerCost {
  std::string path;  // empty for plain networks
  std::size_t layer = 0;
  LayerSpec spec;
  std::int64_t macs = 0;  // over the whole layer output
  Rational macs_per_input_pixel{0};
  std::int64_t weight_count = 0;
  std::int64_t weight_bytes = 0;
};

struct CostReport {
  std::vector<LayerCost> per_layer;
  std::int64_t total_macs = 0;
  Rational total_macs_per_input_pixel{0};
  std::int64_t total_weight_count = 0;
  std::int64_t total_weight_bytes = 0;
  int bytes_per_weight = 1;
};

/// Convolution weights: X*Y*IC*OC for regular layers, X*Y*OC for depthwise.
/// Biases are not counted. Activation and pooling layers carry none.
std::int64_t weight_count(const LayerSpec& layer);

/// Multiply-accumulates for one output pixel across all output channels.
/// Only the X*Y real taps count; dilation gaps are free.
std::int64_t macs_per_output_pixel(const LayerSpec& layer);

/// Normalised by the network input resolution (h*w), not per-layer resolution.
CostReport macs_per_input_pixel(const NetworkSpec& net);
CostReport model_size_bytes(const NetworkSpec& net, int bytes_per_weight = 1);

/// Both metrics at once; for models, layers shared between paths count once
/// and every path is normalised by the model's image resolution.
CostReport cost_report(const NetworkSpec& net, int bytes_per_weight = 1);
CostReport cost_report(const ModelSpec& model, int bytes_per_weight = 1);

/// Columns: layer,kind,kx,ky,dilation,ic,oc,macs_per_input_pixel,weight_bytes
/// followed by a `total` row.
CsvTable cost_table(const CostReport& report);

class RewriteError : public Error {
 public:
  using Error::Error;
};

struct RewriteRule {
  int cascade_length = 2;
  int dilation = 1;  // gaps between taps; receptive-field preservation needs n - 1
  bool insert_pointwise = true;

  /// The receptive-field preserving rule for a cascade of n layers.
  static RewriteRule for_cascade(int n) { return {n, n - 1, true}; }
};

/// Rules for two- and three-layer cascades.
std::vector<RewriteRule> default_rules();

/// Replaces every maximal run of stride-1 regular 3x3 convolutions (activations
/// between them are absorbed) whose length matches a rule. Runs with no
/// matching rule pass through unchanged. Two rules with the same cascade
/// length are ambiguous and raise RewriteError.
NetworkSpec ddc_rewrite(const NetworkSpec& net, std::span<const RewriteRule> rules);

/// Rewrites every rewritable path; shared prefixes shrink to the layers that
/// are still identical afterwards.
ModelSpec ddc_rewrite(const ModelSpec& model, std::span<const RewriteRule> rules);

}  // namespace dmaccel
