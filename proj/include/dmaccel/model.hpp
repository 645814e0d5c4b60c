#pragma once

// Multi-path workloads for cost and timing accounting.
//
// A NetworkSpec is strictly sequential. Detection heads such as the
// face-detector context module branch and merge, so whole-model accounting
// uses a ModelSpec: a set of sequential paths, each with its own input shape,
// all normalised against one image resolution. A path may declare that its
// first `layers` layers are the same physical layers as another path's (a
// shared trunk), in which case they are counted once.
//
// Data flow between paths (concatenation, upsample-add) carries no MACs or
// weights and is not modelled.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmaccel/netir.hpp"

namespace dmaccel {

struct SharedPrefix {
  std::string path;        // name of an earlier path
  std::size_t layers = 0;  // leading layers identical to (and shared with) that path
  bool operator==(const SharedPrefix&) const = default;
};

struct ModelPath {
  std::string name;
  NetworkSpec net;
  std::optional<SharedPrefix> shares;
  bool rewritable = true;  // whether DDC rewrite rules may touch this path
  bool operator==(const ModelPath&) const = default;
};

struct ModelSpec {
  std::string name;
  TensorShape image_shape;
  std::vector<ModelPath> paths;
  bool operator==(const ModelSpec&) const = default;

  /// Number of leading layers of path `index` counted by an earlier path.
  std::size_t shared_layers(std::size_t index) const;
};

/// Wraps a sequential network as a one-path model normalised by its own input.
ModelSpec as_model(const NetworkSpec& net);

void validate(const ModelSpec& model);

ModelSpec parse_model(std::string_view document);
std::string serialize_model(const ModelSpec& model);

/// A network or model document; `model` documents carry a "paths" key.
bool is_model_document(std::string_view document);

/// Loads either kind of document as a model.
ModelSpec load_workload(const std::string& path);

}  // namespace dmaccel
