#pragma once

// Bit-exact int8 functional reference.
//
// Tensors are channels-first int8 with a power-of-two scale (value =
// q * 2^scale_exponent). Convolutions accumulate exactly into int32; the
// activation stage requantizes with round-half-away-from-zero and saturates
// to [-128, 127]. Padding is zero for convolutions and -128 for max pooling.
//
// conv_oracle is the naive loop nest. conv_blocked follows the accelerator's
// order: output-channel group, spatial block (staged through an IN x IM
// input buffer), then input channel, with PE_num output blocks accumulated
// side by side. Depthwise layers skip the input-channel level.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmaccel/netir.hpp"
#include "dmaccel/perfmodel.hpp"

namespace dmaccel {

struct QuantTensor {
  TensorShape shape;
  std::vector<std::int8_t> data;  // channels-first
  int scale_exponent = 0;

  QuantTensor() = default;
  QuantTensor(TensorShape s, int exponent = 0);

  std::int8_t& at(std::int64_t c, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>((c * shape.height + y) * shape.width + x)];
  }
  std::int8_t at(std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((c * shape.height + y) * shape.width + x)];
  }
  bool operator==(const QuantTensor&) const = default;
};

struct AccTensor {
  TensorShape shape;
  std::vector<std::int32_t> data;
  int scale_exponent = 0;  // input exponent + weight exponent

  AccTensor() = default;
  AccTensor(TensorShape s, int exponent = 0);

  std::int32_t& at(std::int64_t c, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>((c * shape.height + y) * shape.width + x)];
  }
  std::int32_t at(std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((c * shape.height + y) * shape.width + x)];
  }
  bool operator==(const AccTensor&) const = default;
};

enum class WeightLayout {
  Regular,    // [OC][IC][Y][X]
  Depthwise,  // [OC][Y][X]
};

struct QuantWeights {
  WeightLayout layout = WeightLayout::Regular;
  std::int64_t out_channels = 1;
  std::int64_t in_channels = 1;  // 1 for depthwise
  int kernel_x = 1;
  int kernel_y = 1;
  std::vector<std::int8_t> data;
  int scale_exponent = 0;
  std::optional<std::vector<std::int32_t>> bias;  // per output channel, accumulator scale

  std::int8_t at(std::int64_t oc, std::int64_t ic, int ky, int kx) const {
    return data[static_cast<std::size_t>(((oc * in_channels + ic) * kernel_y + ky) * kernel_x +
                                         kx)];
  }
  bool operator==(const QuantWeights&) const = default;
};

/// Zero-filled weights with the layout of a convolution layer.
QuantWeights weights_for(const LayerSpec& layer, int scale_exponent = 0);

/// Throws ContractError unless the tensor, weights and layer agree.
void check_conv_operands(const QuantTensor& input, const QuantWeights& weights,
                         const LayerSpec& layer);

AccTensor conv_oracle(const QuantTensor& input, const QuantWeights& weights,
                      const LayerSpec& layer);

/// Adds `delta` to one accumulator of the blocked path. Test fixture only.
struct FaultInjection {
  std::size_t layer = 0;  // used by run_network / check_network
  std::int64_t channel = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;
  std::int32_t delta = 1;
};

AccTensor conv_blocked(const QuantTensor& input, const QuantWeights& weights,
                       const LayerSpec& layer, const HardwareConfig& hw,
                       const FaultInjection* fault = nullptr);

/// Round-half-away-from-zero shift right by `shift` (left when negative),
/// saturated to int8.
std::int8_t requantize_value(std::int64_t acc, int shift);

/// ReLU then requantize to out_scale_exponent.
QuantTensor relu_quantize(const AccTensor& acc, int out_scale_exponent);
/// Requantize only.
QuantTensor requantize(const AccTensor& acc, int out_scale_exponent);

AccTensor widen(const QuantTensor& t);

/// Max pooling; padded positions read as -128.
QuantTensor max_pool(const QuantTensor& input, const LayerSpec& layer);

struct LayerParams {
  std::optional<QuantWeights> weights;     // conv layers
  std::optional<int> out_scale_exponent;   // activations; convs not followed by one
};

enum class ExecutionOrder { Oracle, Blocked };

/// Sequential execution. A convolution's accumulators feed the following
/// activation directly; a convolution with no activation after it is
/// requantized to its own out_scale_exponent.
QuantTensor run_network(const QuantTensor& input, const NetworkSpec& net,
                        std::span<const LayerParams> params, const HardwareConfig& hw,
                        ExecutionOrder order, const FaultInjection* fault = nullptr);

struct Mismatch {
  std::size_t layer = 0;
  std::int64_t channel = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;
  std::int64_t oracle = 0;
  std::int64_t blocked = 0;
};

std::string to_string(const Mismatch& m);

struct NetworkCheck {
  bool pass = false;
  std::optional<Mismatch> first_mismatch;
  std::size_t layers_compared = 0;
  QuantTensor output;  // oracle-order result
};

/// Runs both orders and compares every layer's output (accumulators for
/// convolutions, int8 values otherwise).
NetworkCheck check_network(const QuantTensor& input, const NetworkSpec& net,
                           std::span<const LayerParams> params, const HardwareConfig& hw,
                           const FaultInjection* fault = nullptr);

QuantTensor random_tensor(const TensorShape& shape, std::uint64_t seed, int scale_exponent = 0);
QuantWeights random_weights(const LayerSpec& layer, std::uint64_t seed, int scale_exponent = 0);

/// Seeded weights for every conv and an output exponent for every layer that
/// needs one, chosen so typical activations stay inside int8.
std::vector<LayerParams> random_params(const NetworkSpec& net, std::uint64_t seed);

// ---------------------------------------------------------------------------
// QT8 container: "QT8\0", u32 LE c, h, w, int8 data, trailing int8 exponent
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_tensor(const QuantTensor& t);
QuantTensor decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const std::string& path, const QuantTensor& t);
QuantTensor read_tensor(const std::string& path);

/// Weights go in the same container (c = OC, h = IC*Y, w = X; h = Y for
/// depthwise) plus a "<path>.layout" text sidecar.
void write_weights(const std::string& path, const QuantWeights& w);
QuantWeights read_weights(const std::string& path);

}  // namespace dmaccel
