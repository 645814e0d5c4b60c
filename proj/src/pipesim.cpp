#include "dmaccel/pipesim.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace dmaccel {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t ceil_rational(const Rational& r) {
  const auto q = r.numerator() / r.denominator();
  return q * r.denominator() < r.numerator() ? q + 1 : q;
}

std::string period_string(const Rational& r) {
  return r.denominator() == 1 ? std::to_string(r.numerator())
                              : fmt::format("{}/{}", r.numerator(), r.denominator());
}

std::int64_t slots_per_block(const LayerSpec& layer, const HardwareConfig& hw) {
  if (layer.is_depthwise()) return ceil_div(layer.out_channels, hw.pe_num);
  return ceil_div(layer.out_channels, hw.pe_num) * layer.in_channels;
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Transfer:
      return "transfer";
    case Stage::Multiply:
      return "multiply";
    case Stage::Accumulate:
      return "accumulate";
    case Stage::ReLU:
      return "relu";
  }
  return "?";
}

std::string to_string(const ChunkId& c) {
  if (c.slot < 0)
    return fmt::format("g{}.b{}.oc{}-{}", c.group, c.block, c.first_channel, c.last_channel);
  if (c.first_channel == c.last_channel && c.group >= 0)
    return fmt::format("g{}.b{}.ic{}", c.group, c.block, c.first_channel);
  return fmt::format("b{}.ch{}-{}", c.block, c.first_channel, c.last_channel);
}

std::int64_t PipelineTrace::boundary(std::int64_t k) const { return ceil_rational(period * k); }

Rational pipeline_period(const LayerSpec& layer, const HardwareConfig& hw) {
  const LayerTiming t = layer_times(layer, hw);
  return Rational(t.t_layer, slots_per_block(layer, hw));
}

namespace {

void sort_events(PipelineTrace& trace) {
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const StageEvent& a, const StageEvent& b) {
                     return a.start_cycle < b.start_cycle;
                   });
}

}  // namespace

PipelineTrace simulate_regular(const LayerSpec& layer, const HardwareConfig& hw,
                               std::int64_t blocks) {
  if (!layer.is_regular())
    throw ContractError("regular pipeline needs a regular or pointwise convolution, got " +
                        describe(layer));
  if (blocks < 1) throw ContractError("block count must be >= 1");
  validate(hw);
  PipelineTrace tr;
  tr.layer = layer;
  tr.mode = ConvKind::Regular;
  tr.period = pipeline_period(layer, hw);
  tr.blocks = blocks;
  const std::int64_t groups = ceil_div(layer.out_channels, hw.pe_num);
  const std::int64_t ic = layer.in_channels;
  tr.slots_per_pass = ic;
  tr.passes = groups * blocks;
  tr.events.reserve(static_cast<std::size_t>(tr.passes * (3 * ic + 1)));
  std::int64_t pass = 0;
  for (std::int64_t g = 0; g < groups; ++g) {
    const std::int64_t oc_first = g * hw.pe_num;
    const std::int64_t oc_last = std::min(layer.out_channels, oc_first + hw.pe_num) - 1;
    for (std::int64_t b = 0; b < blocks; ++b, ++pass) {
      const std::int64_t base = pass * (ic + 3);
      for (std::int64_t i = 0; i < ic; ++i) {
        const ChunkId id{g, b, i, i, i};
        tr.events.push_back({Stage::Transfer, id, tr.boundary(base + i), tr.boundary(base + i + 1)});
        tr.events.push_back(
            {Stage::Multiply, id, tr.boundary(base + i + 1), tr.boundary(base + i + 2)});
        tr.events.push_back(
            {Stage::Accumulate, id, tr.boundary(base + i + 2), tr.boundary(base + i + 3)});
      }
      tr.events.push_back({Stage::ReLU, ChunkId{g, b, oc_first, oc_last, -1},
                           tr.boundary(base + ic + 2), tr.boundary(base + ic + 3)});
    }
  }
  tr.total_cycles = tr.boundary(tr.passes * (ic + 3));
  sort_events(tr);
  return tr;
}

PipelineTrace simulate_depthwise(const LayerSpec& layer, const HardwareConfig& hw,
                                 std::int64_t blocks) {
  if (!layer.is_depthwise())
    throw ContractError("depthwise pipeline needs a depthwise convolution, got " +
                        describe(layer));
  if (blocks < 1) throw ContractError("block count must be >= 1");
  validate(hw);
  PipelineTrace tr;
  tr.layer = layer;
  tr.mode = ConvKind::Depthwise;
  tr.period = pipeline_period(layer, hw);
  tr.blocks = blocks;
  const std::int64_t chunks = ceil_div(layer.out_channels, hw.pe_num);
  tr.slots_per_pass = chunks;
  tr.passes = blocks;
  tr.events.reserve(static_cast<std::size_t>(blocks * chunks * 4));
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::int64_t base = b * (chunks + 3);
    for (std::int64_t k = 0; k < chunks; ++k) {
      const std::int64_t first = k * hw.pe_num;
      const ChunkId id{-1, b, first, std::min(layer.out_channels, first + hw.pe_num) - 1, k};
      const Stage stages[] = {Stage::Transfer, Stage::Multiply, Stage::Accumulate, Stage::ReLU};
      for (std::int64_t s = 0; s < 4; ++s)
        tr.events.push_back(
            {stages[s], id, tr.boundary(base + k + s), tr.boundary(base + k + s + 1)});
    }
  }
  tr.total_cycles = tr.boundary(tr.passes * (chunks + 3));
  sort_events(tr);
  return tr;
}

PipelineTrace simulate(const LayerSpec& layer, const HardwareConfig& hw, std::int64_t blocks) {
  if (layer.is_depthwise()) return simulate_depthwise(layer, hw, blocks);
  return simulate_regular(layer, hw, blocks);
}

ConsistencyVerdict check_against_analytical(const PipelineTrace& trace,
                                            const LayerTiming& timing) {
  if (!(trace.layer == timing.layer))
    throw ContractError("trace (" + describe(trace.layer) + ") and timing (" +
                        describe(timing.layer) + ") describe different layers");
  ConsistencyVerdict v;
  v.analytical = timing.t_layer * trace.blocks;
  v.simulated = trace.total_cycles;
  v.fill_overhead = ceil_rational(trace.period * (3 * trace.passes));
  v.slack = v.simulated - v.analytical;
  v.pass = v.analytical <= v.simulated && v.simulated <= v.analytical + v.fill_overhead;
  v.message = fmt::format("{}: analytical {} <= simulated {} <= {} (slack {}, fill bound {})",
                          v.pass ? "consistent" : "INCONSISTENT", v.analytical, v.simulated,
                          v.analytical + v.fill_overhead, v.slack, v.fill_overhead);
  return v;
}

CsvTable trace_table(const PipelineTrace& trace) {
  CsvTable t;
  t.comments.push_back(fmt::format(
      "mode={} T={} passes={} slots_per_pass={} blocks={} total_cycles={}",
      trace.mode == ConvKind::Depthwise ? "depthwise" : "regular", period_string(trace.period),
      trace.passes, trace.slots_per_pass, trace.blocks, trace.total_cycles));
  t.header = {"stage", "chunk", "start", "end"};
  for (const auto& e : trace.events)
    t.rows.push_back({std::string(to_string(e.stage)), to_string(e.chunk),
                      std::to_string(e.start_cycle), std::to_string(e.end_cycle)});
  return t;
}

}  // namespace dmaccel
