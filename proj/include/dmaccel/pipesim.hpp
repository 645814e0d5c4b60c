#pragma once

// Event-level model of the transfer / multiply / accumulate / ReLU pipeline.
//
// Work is split into passes; each pass streams `slots` work units through the
// four stages, one unit per period T:
//
//   regular:   one pass per (output group of PE_num channels, spatial block),
//              one slot per input channel; ReLU runs once per pass
//              -> (IC + 3) T per pass
//   depthwise: one pass per spatial block, one slot per chunk of PE_num
//              channels; every chunk gets its own ReLU
//              -> (ceil(OC / PE_num) + 3) T per pass
//
// T is the per-slot share of the binding resource: the larger of feature
// transfer, weight transfer and MAC work over the layer, divided by the slot
// count of one block. When channel counts divide evenly this equals the
// per-slot maximum of those three terms. T may be fractional; event
// boundaries are placed at ceil(k * T).

#include <cstdint>
#include <string>
#include <vector>

#include "dmaccel/costmodel.hpp"
#include "dmaccel/csv.hpp"
#include "dmaccel/netir.hpp"
#include "dmaccel/perfmodel.hpp"

namespace dmaccel {

enum class Stage { Transfer, Multiply, Accumulate, ReLU };
std::string_view to_string(Stage s);

struct ChunkId {
  std::int64_t group = 0;          // output-channel group (regular); 0 for depthwise
  std::int64_t block = 0;          // spatial block
  std::int64_t first_channel = 0;  // input channel (regular) or first channel of the chunk
  std::int64_t last_channel = 0;   // inclusive
  std::int64_t slot = 0;           // position within the pass; -1 for the pass-level ReLU
  bool operator==(const ChunkId&) const = default;
};

std::string to_string(const ChunkId& c);

struct StageEvent {
  Stage stage = Stage::Transfer;
  ChunkId chunk;
  std::int64_t start_cycle = 0;
  std::int64_t end_cycle = 0;
};

struct PipelineTrace {
  LayerSpec layer;
  ConvKind mode = ConvKind::Regular;
  Rational period{1};  // T, in cycles
  std::int64_t passes = 0;
  std::int64_t slots_per_pass = 0;
  std::int64_t blocks = 1;
  std::int64_t total_cycles = 0;
  std::vector<StageEvent> events;  // ordered by start cycle

  /// Cycle of the k-th period boundary: ceil(k * T).
  std::int64_t boundary(std::int64_t k) const;
};

/// Period for a layer, from the same quantities as the analytical model.
Rational pipeline_period(const LayerSpec& layer, const HardwareConfig& hw);

PipelineTrace simulate_regular(const LayerSpec& layer, const HardwareConfig& hw,
                               std::int64_t blocks = 1);
PipelineTrace simulate_depthwise(const LayerSpec& layer, const HardwareConfig& hw,
                                 std::int64_t blocks = 1);
/// Dispatches on the layer kind.
PipelineTrace simulate(const LayerSpec& layer, const HardwareConfig& hw, std::int64_t blocks = 1);

struct ConsistencyVerdict {
  bool pass = false;
  std::int64_t analytical = 0;    // t_layer * blocks
  std::int64_t simulated = 0;     // trace total
  std::int64_t fill_overhead = 0; // 3 T per pass, rounded up
  std::int64_t slack = 0;         // simulated - analytical
  std::string message;
};

/// analytical <= simulated <= analytical + 3 T * passes. Throws ContractError
/// when the trace and the timing were computed for different layers.
ConsistencyVerdict check_against_analytical(const PipelineTrace& trace, const LayerTiming& timing);

/// Header comment with mode, T and totals, then stage,chunk,start,end rows.
CsvTable trace_table(const PipelineTrace& trace);

}  // namespace dmaccel
