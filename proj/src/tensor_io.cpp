#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "dmaccel/funcsim.hpp"

namespace dmaccel {

namespace {

constexpr char kMagic[4] = {'Q', 'T', '8', '\0'};
constexpr std::size_t kHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[at + i]} << (8 * i);
  return v;
}

std::uint32_t checked_dim(std::int64_t v) {
  if (v < 0 || v > 0xFFFFFFFFLL) throw ContractError("tensor dimension out of range");
  return static_cast<std::uint32_t>(v);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const QuantTensor& t) {
  if (t.data.size() != static_cast<std::size_t>(t.shape.elements()))
    throw ContractError("tensor data length does not match its shape");
  if (t.scale_exponent < -128 || t.scale_exponent > 127)
    throw ContractError("scale exponent does not fit in a signed byte");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, checked_dim(t.shape.channels));
  put_u32(out, checked_dim(t.shape.height));
  put_u32(out, checked_dim(t.shape.width));
  for (auto v : t.data) out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(t.scale_exponent)));
  return out;
}

QuantTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeader + 1 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ParseError("not a QT8 tensor");
  const TensorShape s{get_u32(bytes, 4), get_u32(bytes, 8), get_u32(bytes, 12)};
  const auto n = static_cast<std::size_t>(s.elements());
  if (bytes.size() != kHeader + n + 1)
    throw ParseError(fmt::format("QT8 tensor {} needs {} bytes, file has {}", to_string(s),
                                 kHeader + n + 1, bytes.size()));
  QuantTensor t(s, static_cast<std::int8_t>(bytes.back()));
  for (std::size_t i = 0; i < n; ++i) t.data[i] = static_cast<std::int8_t>(bytes[kHeader + i]);
  return t;
}

void write_tensor(const std::string& path, const QuantTensor& t) {
  write_bytes(path, encode_tensor(t));
}

QuantTensor read_tensor(const std::string& path) { return decode_tensor(read_bytes(path)); }

void write_weights(const std::string& path, const QuantWeights& w) {
  if (w.bias) throw ContractError("bias is not stored in weight files");
  const bool dw = w.layout == WeightLayout::Depthwise;
  QuantTensor t({w.out_channels, (dw ? 1 : w.in_channels) * w.kernel_y, w.kernel_x},
                w.scale_exponent);
  if (t.data.size() != w.data.size()) throw ContractError("weight data length does not match");
  t.data = w.data;
  write_tensor(path, t);
  std::ofstream side(path + ".layout");
  if (!side) throw ValidationError("cannot write " + path + ".layout");
  side << "layout " << (dw ? "depthwise" : "regular") << "\n"
       << "oc " << w.out_channels << "\n"
       << "ic " << w.in_channels << "\n"
       << "ky " << w.kernel_y << "\n"
       << "kx " << w.kernel_x << "\n";
}

QuantWeights read_weights(const std::string& path) {
  const QuantTensor t = read_tensor(path);
  std::ifstream side(path + ".layout");
  if (!side) throw ValidationError("missing layout descriptor " + path + ".layout");
  QuantWeights w;
  std::string key, layout;
  std::size_t line = 0;
  for (std::string text; std::getline(side, text);) {
    ++line;
    if (text.empty()) continue;
    std::istringstream ls(text);
    ls >> key;
    if (key == "layout") {
      ls >> layout;
    } else if (key == "oc") {
      ls >> w.out_channels;
    } else if (key == "ic") {
      ls >> w.in_channels;
    } else if (key == "ky") {
      ls >> w.kernel_y;
    } else if (key == "kx") {
      ls >> w.kernel_x;
    } else {
      throw ParseError("unknown layout key '" + key + "'", line, 1);
    }
    if (ls.fail()) throw ParseError("bad value for '" + key + "'", line, 1);
  }
  if (layout == "regular")
    w.layout = WeightLayout::Regular;
  else if (layout == "depthwise")
    w.layout = WeightLayout::Depthwise;
  else
    throw ParseError("layout must be regular or depthwise");
  const bool dw = w.layout == WeightLayout::Depthwise;
  if (t.shape != TensorShape{w.out_channels, (dw ? 1 : w.in_channels) * w.kernel_y, w.kernel_x})
    throw ParseError("weight container shape does not match its layout descriptor");
  w.data = t.data;
  w.scale_exponent = t.scale_exponent;
  return w;
}

}  // namespace dmaccel
