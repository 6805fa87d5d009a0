#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "peddet/ops.hpp"

namespace peddet {

enum class LayerKind { Input, SepConv, AvgPool, Concat, FuseTap, Head };

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Input;
  std::vector<std::string> inputs;
  int line_no = 0;

  // input
  int in_channels = 3, in_h = 320, in_w = 320;
  // sepconv
  int filters = 0;
  int kernel = 3;
  int stride = 1;
  Activation act = Activation::Relu;
  // avgpool
  int window = 2;
  int pool_stride = 2;
  // fuse-tap: repeated 2x2 mean pooling down to this spatial extent
  int fuse_to = 0;
  // head
  int grids = 5;
};

struct LayerShape {
  int c = 0, h = 0, w = 0;
};

/// One learnable tensor of the model, in deterministic graph order.
struct ParamDesc {
  std::string name;  // "<layer>.dw" | "<layer>.pw" | "<layer>.b"
  int n = 1, c = 1, h = 1, w = 1;
  bool is_bias = false;
  Eigen::Index size() const {
    return static_cast<Eigen::Index>(n) * c * h * w;
  }
};

/// Validated layer topology: acyclic by construction (every input refers
/// to an earlier line), exactly one input and one head layer, all spatial
/// arithmetic closed.
struct ModelGraph {
  std::vector<LayerSpec> layers;
  std::vector<LayerShape> shapes;  // per layer, filled by validation
  std::unordered_map<std::string, int> index;
  int input_layer = -1;
  int head_layer = -1;

  int input_channels() const { return layers[input_layer].in_channels; }
  int input_h() const { return layers[input_layer].in_h; }
  int input_w() const { return layers[input_layer].in_w; }
  int head_grid_size() const { return shapes[head_layer].h; }
  int grid_count() const { return layers[head_layer].grids; }
  int downsample_factor() const { return input_w() / head_grid_size(); }

  int layer_input_index(int layer, int which) const {
    return index.at(layers[layer].inputs[which]);
  }

  /// Learnable tensors in graph order.
  std::vector<ParamDesc> param_descs() const;
  long param_count() const;
};

/// Parses the line-based network config format:
///   id kind key=value ... inputs=a,b
/// with '#' comments. Throws ParseError (with the line number) on
/// malformed lines and ValidationError (naming the layer) on structural
/// problems.
ModelGraph parse_model_config(const std::string& text);

/// Reads a config file and parses it.
ModelGraph load_model_config(const std::string& path);

}  // namespace peddet
