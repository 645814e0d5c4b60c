#pragma once

// Seeded generators shared by the unit suites and the acceptance binary.

#include <cstdint>
#include <random>
#include <string>

#include "dmaccel/costmodel.hpp"
#include "dmaccel/netir.hpp"
#include "dmaccel/perfmodel.hpp"

namespace dmaccel::support {

inline std::string config_path(const std::string& name) {
  return std::string(DMACCEL_CONFIG_DIR) + "/" + name;
}

inline int pick(std::mt19937_64& rng, std::initializer_list<int> values) {
  std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
  return *(values.begin() + d(rng));
}

inline std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Random convolution for the timing/pipeline checks.
inline LayerSpec random_timing_layer(std::mt19937_64& rng) {
  const bool dw = rng() & 1;
  const int k = pick(rng, {1, 3, 5, 7});
  const int d = k == 1 ? 0 : pick(rng, {0, 1, 2});
  const int s = pick(rng, {1, 2});
  if (dw) return LayerSpec::depthwise(uniform(rng, 1, 160), k, d, s);
  LayerSpec l = LayerSpec::regular(uniform(rng, 1, 96), uniform(rng, 1, 160), k, d, s);
  if (k == 1) l.conv = ConvKind::Pointwise;
  return l;
}

inline HardwareConfig random_hardware(std::mt19937_64& rng) {
  HardwareConfig hw;
  hw.name = "random";
  hw.pe_num = uniform(rng, 1, 64);
  hw.mac_pe = uniform(rng, 1, 128);
  hw.bw_fm = uniform(rng, 1, 64);
  hw.bw_w = uniform(rng, 1, 64);
  hw.on_h = uniform(rng, 1, 32);
  hw.om_w = uniform(rng, 1, 32);
  if (rng() % 4 == 0) {
    hw.in_h = hw.on_h * 2 + 6 + uniform(rng, 0, 8);
    hw.in_w = hw.om_w * 2 + 6 + uniform(rng, 0, 8);
  }
  return hw;
}

/// Random convolution plus an input it fits, within the functional-test
/// domain: X, Y in {1,3,5,7}, d in {0,1,2}, stride in {1,2}, channels <= 32,
/// spatial <= 16x16.
struct ConvCase {
  LayerSpec layer;
  TensorShape input;
};

inline ConvCase random_conv_case(std::mt19937_64& rng) {
  while (true) {
    ConvCase c;
    LayerSpec& l = c.layer;
    l.kind = LayerKind::Conv;
    l.conv = (rng() & 1) ? ConvKind::Depthwise : ConvKind::Regular;
    l.kernel_x = pick(rng, {1, 3, 5, 7});
    l.kernel_y = pick(rng, {1, 3, 5, 7});
    l.dilation = pick(rng, {0, 1, 2});
    l.stride = pick(rng, {1, 2});
    l.in_channels = uniform(rng, 1, 32);
    l.out_channels = l.conv == ConvKind::Depthwise ? l.in_channels : uniform(rng, 1, 32);
    if (l.conv == ConvKind::Regular && l.kernel_x == 1 && l.kernel_y == 1)
      l.conv = ConvKind::Pointwise;
    l.pad = {static_cast<int>(uniform(rng, 0, l.extent_y() / 2)),
             static_cast<int>(uniform(rng, 0, l.extent_y() / 2)),
             static_cast<int>(uniform(rng, 0, l.extent_x() / 2)),
             static_cast<int>(uniform(rng, 0, l.extent_x() / 2))};
    c.input = {l.in_channels, uniform(rng, 1, 16), uniform(rng, 1, 16)};
    if (c.input.height + l.pad.top + l.pad.bottom >= l.extent_y() &&
        c.input.width + l.pad.left + l.pad.right >= l.extent_x())
      return c;
  }
}

inline HardwareConfig random_blocking(std::mt19937_64& rng) {
  HardwareConfig hw;
  hw.pe_num = uniform(rng, 1, 12);
  hw.on_h = uniform(rng, 1, 8);
  hw.om_w = uniform(rng, 1, 8);
  return hw;
}

/// Sequential net made of 3x3 cascades of length 2 or 3 separated by layers
/// that cannot join a cascade. Adjacent cascade channel counts stay within a
/// factor of two of each other.
inline NetworkSpec random_cascade_net(std::mt19937_64& rng) {
  NetworkSpec net;
  net.name = "random";
  std::int64_t c = pick(rng, {2, 4, 8, 16, 32});
  const std::int64_t side = pick(rng, {16, 24, 32, 48});
  net.input_shape = {c, side, side};
  auto next_channels = [&](std::int64_t from) {
    return std::max<std::int64_t>(2, from * pick(rng, {1, 2}) / pick(rng, {1, 2}));
  };
  std::int64_t h = side;
  const int segments = static_cast<int>(uniform(rng, 1, 4));
  for (int s = 0; s < segments; ++s) {
    const int n = pick(rng, {2, 3});
    for (int i = 0; i < n; ++i) {
      const std::int64_t oc = next_channels(c);
      net.layers.push_back(LayerSpec::regular(c, oc, 3, 0, 1, Padding::uniform(1)));
      c = oc;
      if (rng() & 1) net.layers.push_back(LayerSpec::relu(c));
    }
    switch (uniform(rng, 0, 3)) {
      case 0: {
        const std::int64_t oc = next_channels(c);
        net.layers.push_back(LayerSpec::pointwise(c, oc));
        c = oc;
        break;
      }
      case 1: {
        const int k = pick(rng, {3, 5});
        net.layers.push_back(LayerSpec::depthwise(c, k, 0, 1, Padding::uniform((k - 1) / 2)));
        break;
      }
      case 2:
        if (h >= 8) {
          net.layers.push_back(LayerSpec::max_pool(c, 2, 2));
          h /= 2;
        } else {
          net.layers.push_back(LayerSpec::pointwise(c, c));
        }
        break;
      default:
        net.layers.push_back(LayerSpec::regular(c, c, 3, 0, 2, Padding::uniform(1)));
        h = (h + 1) / 2;
        break;
    }
  }
  return net;
}

}  // namespace dmaccel::support
