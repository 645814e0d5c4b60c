#include <gtest/gtest.h>

#include <map>
#include <random>
#include <tuple>

#include "dmaccel/pipesim.hpp"
#include "support.hpp"

using namespace dmaccel;

namespace {

// Hardware where every term divides evenly, so T is an integer.
HardwareConfig even_hw() {
  HardwareConfig hw = proposed_profile();
  hw.in_h = 18;
  hw.in_w = 18;
  return hw;
}

std::int64_t count(const PipelineTrace& t, Stage s) {
  std::int64_t n = 0;
  for (const auto& e : t.events) n += e.stage == s;
  return n;
}

// Independent replay: per chunk, stages in order; per stage, no overlap.
void expect_well_formed(const PipelineTrace& t) {
  std::int64_t last_end = 0;
  std::map<Stage, std::vector<std::pair<std::int64_t, std::int64_t>>> by_stage;
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::map<Stage, StageEvent>> by_chunk;
  std::int64_t prev_start = 0;
  for (const auto& e : t.events) {
    EXPECT_LT(e.start_cycle, e.end_cycle);
    EXPECT_GE(e.start_cycle, prev_start);
    prev_start = e.start_cycle;
    last_end = std::max(last_end, e.end_cycle);
    by_stage[e.stage].push_back({e.start_cycle, e.end_cycle});
    if (e.chunk.slot >= 0)
      by_chunk[{e.chunk.group, e.chunk.block, e.chunk.slot}][e.stage] = e;
  }
  EXPECT_EQ(last_end, t.total_cycles);
  for (auto& [stage, spans] : by_stage) {
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
      EXPECT_LE(spans[i - 1].second, spans[i].first) << to_string(stage);
  }
  for (const auto& [id, stages] : by_chunk) {
    EXPECT_LE(stages.at(Stage::Transfer).end_cycle, stages.at(Stage::Multiply).start_cycle);
    EXPECT_LE(stages.at(Stage::Multiply).end_cycle, stages.at(Stage::Accumulate).start_cycle);
    if (stages.count(Stage::ReLU)) {
      EXPECT_LE(stages.at(Stage::Accumulate).end_cycle, stages.at(Stage::ReLU).start_cycle);
    }
  }
}

}  // namespace

TEST(Regular, FourChannelsTakeSevenPeriods) {
  const auto hw = even_hw();
  const auto t = simulate_regular(LayerSpec::regular(4, 8, 3), hw);
  ASSERT_EQ(t.period.denominator(), 1);
  const std::int64_t T = t.period.numerator();
  EXPECT_EQ(t.total_cycles, 7 * T);
  EXPECT_EQ(count(t, Stage::Transfer), 4);
  EXPECT_EQ(count(t, Stage::Multiply), 4);
  EXPECT_EQ(count(t, Stage::Accumulate), 4);
  EXPECT_EQ(count(t, Stage::ReLU), 1);
  for (const auto& e : t.events)
    if (e.stage == Stage::ReLU) {
      EXPECT_EQ(e.start_cycle, 6 * T);
      EXPECT_EQ(e.end_cycle, 7 * T);
    }
  expect_well_formed(t);
}

TEST(Regular, SingleChannel) {
  const auto t = simulate_regular(LayerSpec::regular(1, 8, 3), even_hw());
  EXPECT_EQ(t.total_cycles, t.boundary(4));
}

TEST(Regular, EightGroupsBackToBack) {
  const auto t = simulate_regular(LayerSpec::regular(32, 64, 3), even_hw());
  EXPECT_EQ(t.passes, 8);
  EXPECT_EQ(t.total_cycles, t.boundary(8 * 35));
  // Equal to the per-slot maximum when channels divide evenly: 9 * ceil(256/64).
  EXPECT_EQ(t.period, Rational(36));
  expect_well_formed(t);
}

TEST(Regular, RejectsDepthwise) {
  EXPECT_THROW(simulate_regular(LayerSpec::depthwise(8, 3), even_hw()), ContractError);
  EXPECT_THROW(simulate_depthwise(LayerSpec::regular(8, 8, 3), even_hw()), ContractError);
}

TEST(Depthwise, TwoChunksTakeFivePeriods) {
  const auto hw = even_hw();
  const auto t = simulate_depthwise(LayerSpec::depthwise(2 * hw.pe_num, 3), hw);
  const std::int64_t T = t.period.numerator();
  ASSERT_EQ(t.period.denominator(), 1);
  EXPECT_EQ(t.total_cycles, 5 * T);
  std::vector<std::int64_t> ends;
  for (const auto& e : t.events) ends.push_back(e.end_cycle);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  EXPECT_EQ(ends, (std::vector<std::int64_t>{T, 2 * T, 3 * T, 4 * T, 5 * T}));
  expect_well_formed(t);
}

TEST(Depthwise, OneChunkAndEightChunks) {
  const auto hw = even_hw();
  const auto one = simulate_depthwise(LayerSpec::depthwise(hw.pe_num, 3), hw);
  EXPECT_EQ(one.total_cycles, one.boundary(4));
  const auto eight = simulate_depthwise(LayerSpec::depthwise(64, 3), hw);
  EXPECT_EQ(eight.total_cycles, eight.boundary(11));
  expect_well_formed(eight);
}

TEST(Modes, SingleChannelSchedulesMatch) {
  const auto hw = even_hw();
  const auto reg = simulate_regular(LayerSpec::regular(1, hw.pe_num, 3), hw);
  const auto dw = simulate_depthwise(LayerSpec::depthwise(hw.pe_num, 3), hw);
  EXPECT_EQ(reg.total_cycles, reg.boundary(4));
  EXPECT_EQ(dw.total_cycles, dw.boundary(4));
  EXPECT_EQ(reg.passes * (reg.slots_per_pass + 3), dw.passes * (dw.slots_per_pass + 3));
}

TEST(Consistency, SingleChannelSlackIsFill) {
  const auto hw = even_hw();
  const LayerSpec l = LayerSpec::regular(1, 8, 3);
  const auto t = simulate(l, hw);
  const auto v = check_against_analytical(t, layer_times(l, hw));
  EXPECT_TRUE(v.pass);
  EXPECT_EQ(v.slack, t.boundary(3));
  EXPECT_EQ(v.slack, v.fill_overhead);
}

TEST(Consistency, DepthwiseExample) {
  const auto hw = even_hw();
  const LayerSpec l = LayerSpec::depthwise(32, 3);
  const auto t = simulate(l, hw);
  const auto v = check_against_analytical(t, layer_times(l, hw));
  EXPECT_TRUE(v.pass);
  EXPECT_EQ(v.analytical, 672);
  EXPECT_EQ(t.period, Rational(168));
  EXPECT_EQ(v.slack, 3 * 168);
}

TEST(Consistency, MismatchedLayersAreAContractError) {
  const auto hw = even_hw();
  const auto t = simulate(LayerSpec::depthwise(32, 3), hw);
  EXPECT_THROW(check_against_analytical(t, layer_times(LayerSpec::depthwise(16, 3), hw)),
               ContractError);
}

TEST(Consistency, RandomConfigurations) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 300; ++i) {
    const auto hw = support::random_hardware(rng);
    const auto l = support::random_timing_layer(rng);
    const auto blocks = support::uniform(rng, 1, 3);
    const auto t = simulate(l, hw, blocks);
    const auto v = check_against_analytical(t, layer_times(l, hw));
    EXPECT_TRUE(v.pass) << describe(l) << " " << v.message;
  }
}

TEST(Consistency, UnevenChannelsStillBounded) {
  // Weight transfer binds and ceil(OC/PE) * IC slots do not divide it: T = 22.5.
  HardwareConfig hw = proposed_profile();
  hw.pe_num = 3;
  hw.bw_w = 1;
  hw.mac_pe = 256;
  hw.bw_fm = 1024;
  const LayerSpec l = LayerSpec::regular(50, 5, 3);
  const auto t = simulate(l, hw, 2);
  EXPECT_EQ(t.period, Rational(45, 2));
  EXPECT_TRUE(check_against_analytical(t, layer_times(l, hw)).pass);
  expect_well_formed(t);
}

TEST(Trace, WellFormedOnRandomLayers) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 60; ++i) {
    auto hw = support::random_hardware(rng);
    auto l = support::random_timing_layer(rng);
    l.in_channels = std::min<std::int64_t>(l.in_channels, 24);
    if (l.is_depthwise()) l.out_channels = l.in_channels;
    expect_well_formed(simulate(l, hw, support::uniform(rng, 1, 2)));
  }
}

TEST(Trace, TableParsesBack) {
  const auto t = simulate(LayerSpec::depthwise(16, 3), even_hw());
  const auto table = trace_table(t);
  const auto back = parse_csv(to_csv(table));
  EXPECT_EQ(back.rows, table.rows);
  EXPECT_EQ(back.comments, table.comments);
  EXPECT_EQ(back.rows.size(), t.events.size());
}
