#include <gtest/gtest.h>

#include <random>

#include "dmaccel/costmodel.hpp"
#include "support.hpp"

using namespace dmaccel;

namespace {

NetworkSpec single(const LayerSpec& l, TensorShape in) { return {"single", in, {l}}; }

NetworkSpec cascade(int n, std::int64_t c, std::int64_t side = 16) {
  NetworkSpec net{"cascade", {c, side, side}, {}};
  for (int i = 0; i < n; ++i) {
    net.layers.push_back(LayerSpec::regular(c, c, 3, 0, 1, Padding::uniform(1)));
    net.layers.push_back(LayerSpec::relu(c));
  }
  return net;
}

}  // namespace

TEST(Cost, RegularThreeByThree) {
  const auto r = cost_report(single(LayerSpec::regular(32, 64, 3, 0, 1, Padding::uniform(1)), {32, 20, 20}));
  EXPECT_EQ(r.total_macs_per_input_pixel, Rational(18432));
  EXPECT_EQ(r.total_weight_bytes, 18432);
}

TEST(Cost, DepthwiseIgnoresDilation) {
  for (int d = 0; d <= 3; ++d) {
    const auto r = cost_report(single(LayerSpec::depthwise(64, 3, d, 1, Padding::uniform(d + 1)), {64, 20, 20}));
    EXPECT_EQ(r.total_macs_per_input_pixel, Rational(576)) << d;
    EXPECT_EQ(r.total_weight_bytes, 576) << d;
  }
}

TEST(Cost, DepthwiseFiveByFiveBytes) {
  EXPECT_EQ(model_size_bytes(single(LayerSpec::depthwise(16, 5, 0, 1, Padding::uniform(2)), {16, 8, 8}))
                .total_weight_bytes,
            400);
}

TEST(Cost, BytesPerWeightScales) {
  const auto net = single(LayerSpec::regular(32, 64, 3, 0, 1, Padding::uniform(1)), {32, 8, 8});
  EXPECT_EQ(cost_report(net, 4).total_weight_bytes, 4 * 18432);
  EXPECT_THROW(cost_report(net, 0), ValidationError);
}

TEST(Cost, NormalisedByNetworkInput) {
  NetworkSpec net{"", {8, 16, 16},
                  {LayerSpec::regular(8, 8, 3, 0, 2, Padding::uniform(1)),
                   LayerSpec::regular(8, 8, 3, 0, 1, Padding::uniform(1))}};
  const auto r = cost_report(net);
  // Both layers produce 8x8 outputs against a 16x16 input.
  EXPECT_EQ(r.per_layer[0].macs_per_input_pixel, Rational(576, 4));
  EXPECT_EQ(r.total_macs_per_input_pixel, Rational(576, 2));
}

TEST(Cost, DoublingOutputChannelsDoublesCost) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    auto c = support::random_conv_case(rng);
    if (c.layer.is_depthwise()) continue;
    auto twice = c.layer;
    twice.out_channels *= 2;
    const auto a = cost_report(single(c.layer, c.input));
    const auto b = cost_report(single(twice, c.input));
    EXPECT_EQ(b.total_macs, 2 * a.total_macs);
    EXPECT_EQ(b.total_weight_bytes, 2 * a.total_weight_bytes);
  }
}

TEST(Cost, DilationInvariance) {
  for (int k : {3, 5, 7})
    for (int d = 0; d <= 2; ++d) {
      const int half = (k + (k - 1) * d - 1) / 2;
      const auto r = cost_report(single(LayerSpec::regular(4, 6, k, d, 1, Padding::uniform(half)), {4, 24, 24}));
      EXPECT_EQ(r.total_macs_per_input_pixel, Rational(k * k * 24));
      EXPECT_EQ(r.total_weight_bytes, k * k * 24);
    }
}

TEST(Cost, TableRoundTripsThroughCsv) {
  const auto net = load_network(support::config_path("mobilenet_v1_025.json"));
  const auto table = cost_table(cost_report(net));
  const auto back = parse_csv(to_csv(table));
  EXPECT_EQ(back.header, table.header);
  EXPECT_EQ(back.rows, table.rows);
  EXPECT_EQ(back.at(back.rows.size() - 1, "layer"), "total");
}

// Reconstructed SSH context module, three pyramid levels (strides 8, 16, 32):
// per level 18432 + 9216 + 3 * 2304 = 34560 weights, 34560 * (1/64 + 1/256 +
// 1/1024) = 708.75 MACs per input pixel. DDC: 2624 + 1600 + 1600 = 5824.
TEST(ContextModule, Totals) {
  const auto cm = load_workload(support::config_path("context_module.json"));
  const auto r = cost_report(cm);
  EXPECT_EQ(r.total_macs_per_input_pixel, Rational(2835, 4));
  EXPECT_EQ(r.total_weight_bytes, 103680);

  const auto rules = std::vector<RewriteRule>{RewriteRule::for_cascade(1), RewriteRule::for_cascade(2),
                                              RewriteRule::for_cascade(3)};
  const auto ddc = ddc_rewrite(cm, rules);
  const auto rd = cost_report(ddc);
  EXPECT_EQ(rd.total_macs_per_input_pixel, Rational(1911, 16));
  EXPECT_EQ(rd.total_weight_bytes, 17472);
  EXPECT_EQ(ddc, load_workload(support::config_path("context_module_ddc.json")));
}

TEST(ContextModule, SharedTrunkCountedOnce) {
  const auto cm = load_workload(support::config_path("context_module.json"));
  ASSERT_EQ(cm.paths[2].name, "l8_ctx7");
  EXPECT_EQ(cm.shared_layers(2), 2u);
  const auto r = cost_report(cm);
  std::int64_t l8 = 0;
  for (const auto& c : r.per_layer)
    if (c.path.rfind("l8_", 0) == 0) l8 += c.weight_count;
  EXPECT_EQ(l8, 34560);
}

TEST(WholeNetwork, Totals) {
  const auto net = load_workload(support::config_path("retinaface_mnet025.json"));
  const auto r = cost_report(net);
  EXPECT_EQ(r.total_weight_bytes, 419824);
  EXPECT_EQ(r.total_macs_per_input_pixel, Rational(19163, 8));
}

TEST(Rewrite, TwoCascade) {
  const auto net = cascade(2, 16);
  const auto out = ddc_rewrite(net, default_rules());
  ASSERT_EQ(out.layers.size(), 4u);
  EXPECT_EQ(out.layers[0], LayerSpec::depthwise(16, 3, 1, 1, Padding::uniform(2)));
  EXPECT_EQ(out.layers[1], LayerSpec::relu(16));
  EXPECT_EQ(out.layers[2], LayerSpec::pointwise(16, 16));
  EXPECT_EQ(out.layers[3], LayerSpec::relu(16));
  EXPECT_EQ(receptive_field(net), (ReceptiveField{5, 5}));
  EXPECT_EQ(receptive_field(out), (ReceptiveField{5, 5}));
  EXPECT_EQ(infer_shapes(out).back(), infer_shapes(net).back());
}

TEST(Rewrite, ThreeCascadeMacs) {
  const auto net = cascade(3, 64);
  const auto out = ddc_rewrite(net, default_rules());
  EXPECT_EQ(out.layers[0].dilation, 2);
  EXPECT_EQ(cost_report(net).total_macs_per_input_pixel, Rational(110592));
  EXPECT_EQ(cost_report(out).total_macs_per_input_pixel, Rational(4672));
}

TEST(Rewrite, NoCascadeIsUnchanged) {
  const auto net = load_network(support::config_path("mobilenet_v1_025.json"));
  EXPECT_EQ(ddc_rewrite(net, default_rules()), net);
}

TEST(Rewrite, UnmatchedLengthPassesThrough) {
  const auto net = cascade(4, 8);
  EXPECT_EQ(ddc_rewrite(net, default_rules()), net);
}

TEST(Rewrite, DuplicateRulesAreAmbiguous) {
  std::vector<RewriteRule> rules{RewriteRule::for_cascade(2), {2, 2, true}};
  EXPECT_THROW(ddc_rewrite(cascade(2, 8), rules), RewriteError);
}

TEST(Rewrite, WithoutPointwise) {
  std::vector<RewriteRule> rules{{2, 1, false}};
  const auto out = ddc_rewrite(cascade(2, 8), rules);
  ASSERT_EQ(out.layers.size(), 3u);
  EXPECT_TRUE(out.layers[0].is_depthwise());

  NetworkSpec widening{"", {8, 16, 16},
                       {LayerSpec::regular(8, 16, 3, 0, 1, Padding::uniform(1)),
                        LayerSpec::regular(16, 16, 3, 0, 1, Padding::uniform(1))}};
  EXPECT_THROW(ddc_rewrite(widening, rules), RewriteError);
}

TEST(Rewrite, KeepsInteriorActivationKind) {
  NetworkSpec net{"", {8, 16, 16},
                  {LayerSpec::regular(8, 8, 3, 0, 1, Padding::uniform(1)), LayerSpec::quantize(8),
                   LayerSpec::regular(8, 8, 3, 0, 1, Padding::uniform(1))}};
  const auto out = ddc_rewrite(net, default_rules());
  ASSERT_EQ(out.layers.size(), 3u);
  EXPECT_EQ(out.layers[1].activation, ActivationKind::Quantize);
}

TEST(Rewrite, StridedOrDilatedLayersBreakRuns) {
  NetworkSpec net{"", {8, 32, 32},
                  {LayerSpec::regular(8, 8, 3, 0, 1, Padding::uniform(1)),
                   LayerSpec::regular(8, 8, 3, 0, 2, Padding::uniform(1)),
                   LayerSpec::regular(8, 8, 3, 1, 1, Padding::uniform(2))}};
  EXPECT_EQ(ddc_rewrite(net, default_rules()), net);
}

TEST(Rewrite, RandomNetsPreserveFieldAndShrink) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto net = support::random_cascade_net(rng);
    const auto out = ddc_rewrite(net, default_rules());
    EXPECT_EQ(receptive_field(out), receptive_field(net));
    EXPECT_EQ(infer_shapes(out).back(), infer_shapes(net).back());
    const auto a = cost_report(net), b = cost_report(out);
    EXPECT_LT(b.total_macs_per_input_pixel, a.total_macs_per_input_pixel);
    EXPECT_LT(b.total_weight_bytes, a.total_weight_bytes);
  }
}
