#pragma once

// Analytical timing model of the dual-mode accelerator.
//
// Per spatial block, a layer costs max(T_M, T_C) cycles where, for regular
// (and pointwise) convolutions
//
//   T_M = max(IC * ceil(IN*IM / BW_FM) * ceil(OC / PE_num),
//             IC * OC * ceil(X*Y / BW_W))
//   T_C = X*Y * IC * ceil(ON*OM / MAC_PE) * ceil(OC / PE_num)
//
// and for depthwise convolutions (IC == OC)
//
//   T_M = max(OC * ceil(IN*IM / BW_FM), OC * ceil(X*Y / BW_W))
//   T_C = X*Y * ceil(ON*OM / MAC_PE) * ceil(OC / PE_num)
//
// IN x IM / ON x OM are the input / output block sizes. Only the X*Y real taps
// enter T_C, so dilation changes memory time (through the block halo) but
// never compute time.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmaccel/costmodel.hpp"
#include "dmaccel/csv.hpp"
#include "dmaccel/model.hpp"
#include "dmaccel/netir.hpp"

namespace dmaccel {

/// How weights are charged when a layer spans several spatial blocks.
enum class WeightFetch {
  PerBlock,      // every block pays the full T_M, weight term included
  OncePerLayer,  // first block pays the weight term; later blocks stream features only
};

struct HardwareConfig {
  std::string name = "custom";
  std::int64_t pe_num = 8;   // convolution cores
  std::int64_t mac_pe = 64;  // parallel MACs per core
  std::int64_t bw_fm = 16;   // feature-map words per cycle
  std::int64_t bw_w = 16;    // weight words per cycle
  std::optional<std::int64_t> in_h;  // input block; derived from the output
  std::optional<std::int64_t> in_w;  // block and the kernel extent when unset
  std::int64_t on_h = 16;
  std::int64_t om_w = 16;
  double clock_hz = 400e6;
  std::int64_t fm_memory_bytes = 4096 * 1024;
  std::int64_t w_memory_bytes = 2048 * 1024;
  int max_kernel = 7;           // largest supported X, Y (taps)
  TensorShape max_frame{3, 480, 640};
  std::int64_t aplpu_latency = 0;  // cycles per block for activation/pool layers
  WeightFetch weight_fetch = WeightFetch::OncePerLayer;

  std::int64_t macs_per_cycle() const { return pe_num * mac_pe; }
  bool operator==(const HardwareConfig&) const = default;
};

void validate(const HardwareConfig& hw);

/// PE_num=8, MAC_PE=64 (512 MACs/cycle), 400 MHz, 4 MiB feature / 2 MiB weight memory.
HardwareConfig proposed_profile();
/// Comparison setup for the intra-kernel-parallel design: PE_num=64, MAC_PE=8.
HardwareConfig related_yu_profile();
/// "proposed" or "related-yu"; throws ValidationError otherwise.
HardwareConfig hardware_profile(const std::string& name);
HardwareConfig parse_hardware(std::string_view document);
std::string serialize_hardware(const HardwareConfig& hw);
/// Profile name or path to a JSON hardware file.
HardwareConfig resolve_hardware(const std::string& profile_or_path);

struct BlockGeometry {
  std::int64_t in_h, in_w, on_h, om_w;
};

/// Input block = explicit IN/IM, or (ON-1)*stride + extent (the output block
/// plus the dilated kernel halo).
BlockGeometry block_geometry(const LayerSpec& layer, const HardwareConfig& hw);

enum class Bound { MemoryBound, ComputeBound, Balanced };
std::string_view to_string(Bound b);

struct LayerTiming {
  LayerSpec layer;
  std::int64_t t_mem_features = 0;
  std::int64_t t_mem_weights = 0;
  std::int64_t t_mem = 0;  // max of the two transfer terms
  std::int64_t t_comp = 0;
  std::int64_t t_layer = 0;  // max(t_mem, t_comp)
  Bound bound = Bound::Balanced;
};

LayerTiming regular_layer_times(const LayerSpec& layer, const HardwareConfig& hw);
LayerTiming depthwise_layer_times(const LayerSpec& layer, const HardwareConfig& hw);
/// Dispatches on the layer kind; activation and pooling cost aplpu_latency.
LayerTiming layer_times(const LayerSpec& layer, const HardwareConfig& hw);

struct LayerTimingRow {
  std::string path;
  std::size_t layer = 0;
  LayerTiming first;   // first spatial block
  LayerTiming steady;  // every later block (== first under PerBlock)
  std::int64_t blocks = 0;
  std::int64_t total = 0;
};

struct TimingReport {
  std::vector<LayerTimingRow> per_layer;
  std::int64_t total_cycles = 0;
  double clock_hz = 0;
  double fps = 0;  // accelerator cycles only
  std::vector<std::string> notes;
};

/// Kernel sizes and frame size within the configured limits.
void check_supported(const NetworkSpec& net, const HardwareConfig& hw);

TimingReport network_time(const NetworkSpec& net, const HardwareConfig& hw);
/// Re-bases the network on a different frame (same channel count).
TimingReport network_time(const NetworkSpec& net, const HardwareConfig& hw,
                          const TensorShape& frame);
TimingReport network_time(const ModelSpec& model, const HardwareConfig& hw);

/// Columns: layer,t_mem,t_comp,t_layer,bound,blocks,total plus a total row.
CsvTable timing_table(const TimingReport& report);

// ---------------------------------------------------------------------------
// MAC utilisation of related designs
// ---------------------------------------------------------------------------

enum class Design { Liu, Su, Yu, Proposed };

struct UtilizationModel {
  Design design = Design::Proposed;
  std::int64_t t_m = 8;               // Liu: output channels computed in parallel
  std::optional<std::int64_t> alpha;  // Yu: 3x3 tiles per kernel; ceil(X/3)*ceil(Y/3) if unset
};

/// Fraction of MAC units doing useful work in the ideal case.
Rational utilization(const UtilizationModel& model, ConvKind kind, int kernel_x, int kernel_y);

/// Whole-percent rounding used when reporting utilisation (12.5% -> 13%).
std::int64_t utilization_percent(const Rational& u);

// ---------------------------------------------------------------------------
// Compute-time comparison against the intra-kernel-parallel design
// ---------------------------------------------------------------------------

struct SweepPoint {
  std::int64_t channels = 0;
  std::int64_t t_proposed = 0;
  std::int64_t t_related = 0;
};

/// T_C of the related design: the proposed compute skeleton with X*Y replaced
/// by ceil(X/3)*ceil(Y/3)*9, i.e. kernels tiled into 3x3 pieces. Approximate.
std::int64_t related_compute_time(ConvKind kind, int kernel_x, int kernel_y, std::int64_t ic,
                                  std::int64_t oc, const HardwareConfig& hw);

/// Per-block compute time with IC == OC == channels for every sweep point.
std::vector<SweepPoint> comparison_sweep(const HardwareConfig& proposed,
                                         const HardwareConfig& related, ConvKind kind,
                                         int kernel_x, int kernel_y,
                                         std::span<const std::int64_t> channels);

/// Columns: channels,t_proposed,t_related; comments flag the related model as approximate.
CsvTable sweep_table(std::span<const SweepPoint> sweep, ConvKind kind, int kernel_x,
                     int kernel_y);

}  // namespace dmaccel
