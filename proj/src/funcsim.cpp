#include "dmaccel/funcsim.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <random>

#include <fmt/format.h>

namespace dmaccel {

QuantTensor::QuantTensor(TensorShape s, int exponent)
    : shape(s), data(static_cast<std::size_t>(s.elements()), 0), scale_exponent(exponent) {}

AccTensor::AccTensor(TensorShape s, int exponent)
    : shape(s), data(static_cast<std::size_t>(s.elements()), 0), scale_exponent(exponent) {}

QuantWeights weights_for(const LayerSpec& layer, int scale_exponent) {
  if (!layer.is_conv()) throw ContractError("weights requested for " + describe(layer));
  QuantWeights w;
  w.layout = layer.is_depthwise() ? WeightLayout::Depthwise : WeightLayout::Regular;
  w.out_channels = layer.out_channels;
  w.in_channels = layer.is_depthwise() ? 1 : layer.in_channels;
  w.kernel_x = layer.kernel_x;
  w.kernel_y = layer.kernel_y;
  w.data.assign(static_cast<std::size_t>(w.out_channels * w.in_channels * w.kernel_x * w.kernel_y),
                0);
  w.scale_exponent = scale_exponent;
  return w;
}

namespace {

TensorShape conv_output_shape(const TensorShape& in, const LayerSpec& layer) {
  const auto oh = conv_output_extent(in.height, layer.pad.top, layer.pad.bottom, layer.extent_y(),
                                     layer.stride);
  const auto ow = conv_output_extent(in.width, layer.pad.left, layer.pad.right, layer.extent_x(),
                                     layer.stride);
  if (!oh || !ow)
    throw ContractError(fmt::format("{} does not fit a {} input", describe(layer), to_string(in)));
  return {layer.out_channels, *oh, *ow};
}

std::int32_t narrow_acc(std::int64_t v) {
  if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max())
    throw ContractError("accumulator overflow");
  return static_cast<std::int32_t>(v);
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

void check_conv_operands(const QuantTensor& input, const QuantWeights& weights,
                         const LayerSpec& layer) {
  if (!layer.is_conv()) throw ContractError("not a convolution: " + describe(layer));
  if (input.data.size() != static_cast<std::size_t>(input.shape.elements()))
    throw ContractError("tensor data length does not match its shape");
  if (input.shape.channels != layer.in_channels)
    throw ContractError(fmt::format("{} expects {} input channels, tensor has {}",
                                    describe(layer), layer.in_channels, input.shape.channels));
  const QuantWeights expect = weights_for(layer);
  if (weights.layout != expect.layout || weights.out_channels != expect.out_channels ||
      weights.in_channels != expect.in_channels || weights.kernel_x != expect.kernel_x ||
      weights.kernel_y != expect.kernel_y || weights.data.size() != expect.data.size())
    throw ContractError("weight layout does not match " + describe(layer));
  if (weights.bias && weights.bias->size() != static_cast<std::size_t>(layer.out_channels))
    throw ContractError("bias length does not match the output channel count");
  conv_output_shape(input.shape, layer);
}

AccTensor conv_oracle(const QuantTensor& input, const QuantWeights& weights,
                      const LayerSpec& layer) {
  check_conv_operands(input, weights, layer);
  AccTensor out(conv_output_shape(input.shape, layer),
                input.scale_exponent + weights.scale_exponent);
  const bool dw = layer.is_depthwise();
  const int step = layer.dilation + 1;
  for (std::int64_t oc = 0; oc < out.shape.channels; ++oc)
    for (std::int64_t oy = 0; oy < out.shape.height; ++oy)
      for (std::int64_t ox = 0; ox < out.shape.width; ++ox) {
        std::int64_t acc = weights.bias ? (*weights.bias)[static_cast<std::size_t>(oc)] : 0;
        const std::int64_t ic_begin = dw ? oc : 0;
        const std::int64_t ic_end = dw ? oc + 1 : layer.in_channels;
        for (std::int64_t ic = ic_begin; ic < ic_end; ++ic)
          for (int ky = 0; ky < layer.kernel_y; ++ky)
            for (int kx = 0; kx < layer.kernel_x; ++kx) {
              const std::int64_t iy = oy * layer.stride - layer.pad.top + ky * step;
              const std::int64_t ix = ox * layer.stride - layer.pad.left + kx * step;
              if (iy < 0 || ix < 0 || iy >= input.shape.height || ix >= input.shape.width) continue;
              acc += std::int64_t{input.at(ic, iy, ix)} * weights.at(oc, dw ? 0 : ic, ky, kx);
            }
        out.at(oc, oy, ox) = narrow_acc(acc);
      }
  return out;
}

AccTensor conv_blocked(const QuantTensor& input, const QuantWeights& weights,
                       const LayerSpec& layer, const HardwareConfig& hw,
                       const FaultInjection* fault) {
  check_conv_operands(input, weights, layer);
  validate(hw);
  AccTensor out(conv_output_shape(input.shape, layer),
                input.scale_exponent + weights.scale_exponent);
  const bool dw = layer.is_depthwise();
  const int step = layer.dilation + 1;
  const std::int64_t s = layer.stride;
  const std::int64_t on = hw.on_h, om = hw.om_w;
  const std::int64_t need_h = (on - 1) * s + layer.extent_y();
  const std::int64_t need_w = (om - 1) * s + layer.extent_x();
  const std::int64_t in_h = hw.in_h.value_or(need_h);
  const std::int64_t in_w = hw.in_w.value_or(need_w);
  if (in_h < need_h || in_w < need_w)
    throw ContractError(fmt::format("input block {}x{} too small for {} (needs {}x{})", in_h, in_w,
                                    describe(layer), need_h, need_w));

  const std::int64_t pe = hw.pe_num;
  const std::int64_t groups = ceil_div(layer.out_channels, pe);
  const std::int64_t rows = ceil_div(out.shape.height, on);
  const std::int64_t cols = ceil_div(out.shape.width, om);

  std::vector<std::int8_t> buf(static_cast<std::size_t>(in_h * in_w));
  std::vector<std::int64_t> psum(static_cast<std::size_t>(pe * on * om));

  // Stage one input channel's halo'd block into the IN x IM buffer.
  auto load = [&](std::int64_t ic, std::int64_t iy0, std::int64_t ix0) {
    for (std::int64_t r = 0; r < in_h; ++r)
      for (std::int64_t c = 0; c < in_w; ++c) {
        const std::int64_t iy = iy0 + r, ix = ix0 + c;
        const bool inside =
            iy >= 0 && ix >= 0 && iy < input.shape.height && ix < input.shape.width;
        buf[static_cast<std::size_t>(r * in_w + c)] = inside ? input.at(ic, iy, ix) : 0;
      }
  };

  for (std::int64_t g = 0; g < groups; ++g) {
    const std::int64_t oc0 = g * pe;
    const std::int64_t lanes = std::min(pe, layer.out_channels - oc0);
    for (std::int64_t br = 0; br < rows; ++br)
      for (std::int64_t bc = 0; bc < cols; ++bc) {
        const std::int64_t oy0 = br * on, ox0 = bc * om;
        const std::int64_t bh = std::min(on, out.shape.height - oy0);
        const std::int64_t bw = std::min(om, out.shape.width - ox0);
        const std::int64_t iy0 = oy0 * s - layer.pad.top;
        const std::int64_t ix0 = ox0 * s - layer.pad.left;
        for (std::int64_t p = 0; p < lanes; ++p) {
          const std::int64_t b = weights.bias ? (*weights.bias)[static_cast<std::size_t>(oc0 + p)] : 0;
          std::fill_n(psum.begin() + p * on * om, on * om, b);
        }

        auto mac = [&](std::int64_t p, std::int64_t wic) {
          const std::int64_t oc = oc0 + p;
          std::int64_t* acc = psum.data() + p * on * om;
          for (int ky = 0; ky < layer.kernel_y; ++ky)
            for (int kx = 0; kx < layer.kernel_x; ++kx) {
              const std::int64_t w = weights.at(oc, wic, ky, kx);
              if (w == 0) continue;
              for (std::int64_t y = 0; y < bh; ++y) {
                const std::int8_t* row = buf.data() + (y * s + ky * step) * in_w + kx * step;
                for (std::int64_t x = 0; x < bw; ++x) acc[y * om + x] += w * row[x * s];
              }
            }
        };

        if (dw) {
          for (std::int64_t p = 0; p < lanes; ++p) {
            load(oc0 + p, iy0, ix0);
            mac(p, 0);
          }
        } else {
          for (std::int64_t ic = 0; ic < layer.in_channels; ++ic) {
            load(ic, iy0, ix0);
            for (std::int64_t p = 0; p < lanes; ++p) mac(p, ic);
          }
        }

        for (std::int64_t p = 0; p < lanes; ++p)
          for (std::int64_t y = 0; y < bh; ++y)
            for (std::int64_t x = 0; x < bw; ++x) {
              std::int64_t v = psum[static_cast<std::size_t>(p * on * om + y * om + x)];
              if (fault && fault->channel == oc0 + p && fault->y == oy0 + y && fault->x == ox0 + x)
                v += fault->delta;
              out.at(oc0 + p, oy0 + y, ox0 + x) = narrow_acc(v);
            }
      }
  }
  return out;
}

std::int8_t requantize_value(std::int64_t acc, int shift) {
  std::int64_t q;
  if (shift > 0) {
    if (shift >= 62) return 0;
    const std::int64_t mag = acc < 0 ? -acc : acc;
    const std::int64_t r = (mag + (std::int64_t{1} << (shift - 1))) >> shift;
    q = acc < 0 ? -r : r;
  } else if (shift < 0) {
    if (acc == 0) return 0;
    if (-shift >= 16) return acc < 0 ? -128 : 127;
    q = acc * (std::int64_t{1} << -shift);
  } else {
    q = acc;
  }
  return static_cast<std::int8_t>(std::clamp<std::int64_t>(q, -128, 127));
}

namespace {

QuantTensor requantize_impl(const AccTensor& acc, int out_exp, bool relu) {
  QuantTensor out(acc.shape, out_exp);
  const int shift = out_exp - acc.scale_exponent;
  for (std::size_t i = 0; i < acc.data.size(); ++i) {
    const std::int64_t v = relu ? std::max<std::int32_t>(acc.data[i], 0) : acc.data[i];
    out.data[i] = requantize_value(v, shift);
  }
  return out;
}

}  // namespace

QuantTensor relu_quantize(const AccTensor& acc, int out_scale_exponent) {
  return requantize_impl(acc, out_scale_exponent, true);
}

QuantTensor requantize(const AccTensor& acc, int out_scale_exponent) {
  return requantize_impl(acc, out_scale_exponent, false);
}

AccTensor widen(const QuantTensor& t) {
  AccTensor a(t.shape, t.scale_exponent);
  std::copy(t.data.begin(), t.data.end(), a.data.begin());
  return a;
}

QuantTensor max_pool(const QuantTensor& input, const LayerSpec& layer) {
  if (layer.kind != LayerKind::Pooling) throw ContractError("not a pooling layer: " + describe(layer));
  const TensorShape os = conv_output_shape(input.shape, layer);
  QuantTensor out({input.shape.channels, os.height, os.width}, input.scale_exponent);
  const int step = layer.dilation + 1;
  for (std::int64_t c = 0; c < out.shape.channels; ++c)
    for (std::int64_t oy = 0; oy < out.shape.height; ++oy)
      for (std::int64_t ox = 0; ox < out.shape.width; ++ox) {
        int m = -128;
        for (int ky = 0; ky < layer.kernel_y; ++ky)
          for (int kx = 0; kx < layer.kernel_x; ++kx) {
            const std::int64_t iy = oy * layer.stride - layer.pad.top + ky * step;
            const std::int64_t ix = ox * layer.stride - layer.pad.left + kx * step;
            if (iy < 0 || ix < 0 || iy >= input.shape.height || ix >= input.shape.width) continue;
            m = std::max<int>(m, input.at(c, iy, ix));
          }
        out.at(c, oy, ox) = static_cast<std::int8_t>(m);
      }
  return out;
}

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

namespace {

QuantTensor execute(const QuantTensor& input, const NetworkSpec& net,
                    std::span<const LayerParams> params, const HardwareConfig& hw,
                    ExecutionOrder order, const FaultInjection* fault,
                    std::vector<AccTensor>* record) {
  validate(net);
  if (params.size() != net.layers.size())
    throw ValidationError(fmt::format("{} layer parameter sets for {} layers", params.size(),
                                      net.layers.size()));
  if (input.shape != net.input_shape)
    throw ContractError(fmt::format("input tensor {} does not match the network input {}",
                                    to_string(input.shape), to_string(net.input_shape)));

  QuantTensor cur = input;
  std::optional<AccTensor> pending;
  std::size_t pending_layer = 0;

  auto out_exponent = [&](std::size_t i, const char* why) {
    if (!params[i].out_scale_exponent)
      throw ValidationError(fmt::format("layer {} ({}): {} needs out_scale_exponent", i,
                                        describe(net.layers[i]), why));
    return *params[i].out_scale_exponent;
  };
  auto flush = [&] {
    if (!pending) return;
    cur = requantize(*pending, out_exponent(pending_layer, "a convolution without activation"));
    pending.reset();
  };

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        flush();
        if (!params[i].weights)
          throw ValidationError(fmt::format("layer {} ({}): no weights", i, describe(l)));
        const FaultInjection* f = fault && fault->layer == i ? fault : nullptr;
        pending = order == ExecutionOrder::Oracle ? conv_oracle(cur, *params[i].weights, l)
                                                  : conv_blocked(cur, *params[i].weights, l, hw, f);
        pending_layer = i;
        if (record) record->push_back(*pending);
        break;
      }
      case LayerKind::Activation: {
        const AccTensor acc = pending ? *pending : widen(cur);
        const int e = out_exponent(i, "an activation");
        cur = l.activation == ActivationKind::ReLU ? relu_quantize(acc, e) : requantize(acc, e);
        pending.reset();
        if (record) record->push_back(widen(cur));
        break;
      }
      case LayerKind::Pooling:
        flush();
        cur = max_pool(cur, l);
        if (record) record->push_back(widen(cur));
        break;
    }
  }
  flush();
  return cur;
}

}  // namespace

QuantTensor run_network(const QuantTensor& input, const NetworkSpec& net,
                        std::span<const LayerParams> params, const HardwareConfig& hw,
                        ExecutionOrder order, const FaultInjection* fault) {
  return execute(input, net, params, hw, order, fault, nullptr);
}

std::string to_string(const Mismatch& m) {
  return fmt::format("layer {} channel {} y {} x {}: oracle {} blocked {}", m.layer, m.channel, m.y,
                     m.x, m.oracle, m.blocked);
}

NetworkCheck check_network(const QuantTensor& input, const NetworkSpec& net,
                           std::span<const LayerParams> params, const HardwareConfig& hw,
                           const FaultInjection* fault) {
  std::vector<AccTensor> ref, blk;
  NetworkCheck result;
  result.output = execute(input, net, params, hw, ExecutionOrder::Oracle, nullptr, &ref);
  const QuantTensor blocked_out =
      execute(input, net, params, hw, ExecutionOrder::Blocked, fault, &blk);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ++result.layers_compared;
    const AccTensor& a = ref[i];
    const AccTensor& b = blk[i];
    for (std::int64_t c = 0; c < a.shape.channels; ++c)
      for (std::int64_t y = 0; y < a.shape.height; ++y)
        for (std::int64_t x = 0; x < a.shape.width; ++x)
          if (a.at(c, y, x) != b.at(c, y, x)) {
            result.first_mismatch = Mismatch{i, c, y, x, a.at(c, y, x), b.at(c, y, x)};
            return result;
          }
  }
  result.pass = blocked_out == result.output;
  return result;
}

// ---------------------------------------------------------------------------
// Random operands
// ---------------------------------------------------------------------------

QuantTensor random_tensor(const TensorShape& shape, std::uint64_t seed, int scale_exponent) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(-128, 127);
  QuantTensor t(shape, scale_exponent);
  for (auto& v : t.data) v = static_cast<std::int8_t>(dist(rng));
  return t;
}

QuantWeights random_weights(const LayerSpec& layer, std::uint64_t seed, int scale_exponent) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(-128, 127);
  QuantWeights w = weights_for(layer, scale_exponent);
  for (auto& v : w.data) v = static_cast<std::int8_t>(dist(rng));
  return w;
}

std::vector<LayerParams> random_params(const NetworkSpec& net, std::uint64_t seed) {
  std::vector<LayerParams> params(net.layers.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.is_conv()) {
      params[i].weights = random_weights(l, rng());
      const std::int64_t fanin = l.is_depthwise() ? l.taps() : l.taps() * l.in_channels;
      // Products of two int8 values span ~14 bits; sums of `fanin` of them
      // grow by about half a bit per doubling.
      const int growth = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(fanin)) + 1) / 2;
      params[i].out_scale_exponent = 7 + growth;
    } else if (l.kind == LayerKind::Activation) {
      params[i].out_scale_exponent = 0;
    }
  }
  // Exponents above are relative shifts; turn them into absolute exponents
  // by walking the network from an input exponent of 0.
  int exp = 0;
  std::optional<int> pending;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.is_conv()) {
      if (pending) exp = *pending;
      const int shift = *params[i].out_scale_exponent;
      pending = exp + shift;
      params[i].out_scale_exponent = *pending;
    } else if (l.kind == LayerKind::Activation) {
      const int e = pending.value_or(exp);
      params[i].out_scale_exponent = e;
      exp = e;
      pending.reset();
    } else if (pending) {
      exp = *pending;
      pending.reset();
    }
  }
  return params;
}

}  // namespace dmaccel
