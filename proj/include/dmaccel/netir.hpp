#pragma once

// Network intermediate representation: layer descriptions, shape inference,
// receptive-field composition and the JSON network description format.
//
// Dilation convention: `dilation` is the number of zero gaps inserted between
// neighbouring kernel taps, so a kernel of X taps spans X + (X-1)*dilation
// pixels and dilation 0 is a dense kernel. Frameworks that use the
// "dilation 1 == dense" convention map to this one as d_here = d_framework - 1.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dmaccel {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed document. Carries the 1-based line/column of the failure when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A well-formed description that violates a network invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An operation was handed an argument outside its contract (e.g. a depthwise
/// layer passed to the regular-convolution timing model).
class ContractError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct TensorShape {
  std::int64_t channels = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;

  std::int64_t pixels() const { return height * width; }
  std::int64_t elements() const { return channels * height * width; }
  bool operator==(const TensorShape&) const = default;
};

std::string to_string(const TensorShape& shape);

enum class LayerKind { Conv, Activation, Pooling };

/// Pointwise is a regular 1x1 convolution; the label is kept for reporting only.
enum class ConvKind { Regular, Depthwise, Pointwise };

enum class ActivationKind { ReLU, Quantize };

struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  static Padding uniform(int p) { return {p, p, p, p}; }
  bool symmetric() const { return top == bottom && top == left && top == right; }
  bool operator==(const Padding&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  ConvKind conv = ConvKind::Regular;
  ActivationKind activation = ActivationKind::ReLU;
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  int kernel_x = 1;
  int kernel_y = 1;
  int dilation = 0;
  int stride = 1;
  Padding pad;

  bool is_conv() const { return kind == LayerKind::Conv; }
  bool is_depthwise() const { return is_conv() && conv == ConvKind::Depthwise; }
  /// Regular or pointwise: every output channel accumulates over all inputs.
  bool is_regular() const { return is_conv() && conv != ConvKind::Depthwise; }

  int extent_x() const { return kernel_x + (kernel_x - 1) * dilation; }
  int extent_y() const { return kernel_y + (kernel_y - 1) * dilation; }
  int taps() const { return kernel_x * kernel_y; }

  bool operator==(const LayerSpec&) const = default;

  static LayerSpec regular(std::int64_t ic, std::int64_t oc, int k, int dilation = 0,
                           int stride = 1, Padding pad = {});
  static LayerSpec depthwise(std::int64_t channels, int k, int dilation = 0, int stride = 1,
                             Padding pad = {});
  static LayerSpec pointwise(std::int64_t ic, std::int64_t oc);
  static LayerSpec relu(std::int64_t channels);
  static LayerSpec quantize(std::int64_t channels);
  static LayerSpec max_pool(std::int64_t channels, int k, int stride, Padding pad = {});
};

std::string describe(const LayerSpec& layer);
std::string_view kind_label(const LayerSpec& layer);

struct NetworkSpec {
  std::string name;
  TensorShape input_shape;
  std::vector<LayerSpec> layers;

  bool operator==(const NetworkSpec&) const = default;
};

struct ReceptiveField {
  std::int64_t x = 1;
  std::int64_t y = 1;
  bool operator==(const ReceptiveField&) const = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Output spatial extent along one axis, or nullopt when the (dilated) kernel
/// does not fit inside the padded input.
std::optional<std::int64_t> conv_output_extent(std::int64_t input, int pad_before, int pad_after,
                                               int extent, int stride);

/// Padding that keeps ceil(input / stride) outputs; the odd pixel goes after.
Padding same_padding(const TensorShape& input, int extent_y, int extent_x, int stride);

/// Shapes at every layer boundary: result[0] is the input, result[i+1] the
/// output of layer i. Throws ValidationError naming the offending layer.
std::vector<TensorShape> infer_shapes(const NetworkSpec& net);

/// Checks every invariant (positive fields, channel chaining, depthwise
/// IC == OC, kernels fitting the padded input). Throws ValidationError.
void validate(const NetworkSpec& net);

/// Receptive field of one output pixel of the last layer, per axis.
ReceptiveField receptive_field(const NetworkSpec& net);

/// Parses and validates a network description document (JSON).
NetworkSpec parse_network(std::string_view document);
NetworkSpec load_network(const std::string& path);

/// Inverse of parse_network; padding is written in expanded form.
std::string serialize_network(const NetworkSpec& net);

}  // namespace dmaccel
