#include "peddet/graph.hpp"

#include <fstream>
#include <sstream>

#include "peddet/error.hpp"

namespace peddet {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& v, const std::string& key, int line_no) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": value of '" + key +
                     "' is not an integer: '" + v + "'");
  }
}

Activation parse_act(const std::string& v, int line_no) {
  if (v == "relu") return Activation::Relu;
  if (v == "sigmoid") return Activation::Sigmoid;
  if (v == "none") return Activation::None;
  throw ParseError("line " + std::to_string(line_no) +
                   ": unknown activation '" + v + "'");
}

[[noreturn]] void fail_layer(const LayerSpec& layer, const std::string& what) {
  throw ValidationError("layer '" + layer.id + "' (line " +
                        std::to_string(layer.line_no) + "): " + what);
}

void check_arity(const LayerSpec& layer, size_t want_min, size_t want_max) {
  if (layer.inputs.size() < want_min || layer.inputs.size() > want_max) {
    fail_layer(layer, "expected " +
                          (want_min == want_max
                               ? std::to_string(want_min)
                               : "at least " + std::to_string(want_min)) +
                          " input(s), got " +
                          std::to_string(layer.inputs.size()));
  }
}

LayerShape infer_shape(const LayerSpec& layer,
                       const std::vector<LayerShape>& in) {
  switch (layer.kind) {
    case LayerKind::Input:
      return {layer.in_channels, layer.in_h, layer.in_w};
    case LayerKind::SepConv: {
      if (layer.kernel != 1 && layer.kernel != 3 && layer.kernel != 5) {
        fail_layer(layer, "kernel must be one of 1, 3, 5");
      }
      if (layer.stride != 1 && layer.stride != 2) {
        fail_layer(layer, "stride must be 1 or 2");
      }
      if (layer.filters < 1) fail_layer(layer, "filters must be >= 1");
      return {layer.filters, conv_out_extent(in[0].h, layer.stride),
              conv_out_extent(in[0].w, layer.stride)};
    }
    case LayerKind::AvgPool: {
      if (layer.window != layer.pool_stride) {
        fail_layer(layer, "avgpool window must equal stride");
      }
      if (in[0].h % layer.pool_stride != 0 || in[0].w % layer.pool_stride != 0) {
        fail_layer(layer, "spatial extents " + std::to_string(in[0].h) + "x" +
                              std::to_string(in[0].w) +
                              " not divisible by pool stride " +
                              std::to_string(layer.pool_stride));
      }
      return {in[0].c, in[0].h / layer.pool_stride, in[0].w / layer.pool_stride};
    }
    case LayerKind::Concat: {
      int c = 0;
      for (const LayerShape& s : in) {
        if (s.h != in[0].h || s.w != in[0].w) {
          fail_layer(layer, "concat inputs disagree on spatial extents (" +
                                std::to_string(s.h) + "x" + std::to_string(s.w) +
                                " vs " + std::to_string(in[0].h) + "x" +
                                std::to_string(in[0].w) + ")");
        }
        c += s.c;
      }
      return {c, in[0].h, in[0].w};
    }
    case LayerKind::FuseTap: {
      if (layer.fuse_to < 1) fail_layer(layer, "missing or bad 'to' extent");
      if (in[0].h != in[0].w) {
        fail_layer(layer, "fuse-tap input must be square, got " +
                              std::to_string(in[0].h) + "x" +
                              std::to_string(in[0].w));
      }
      int e = in[0].h;
      while (e > layer.fuse_to && e % 2 == 0) e /= 2;
      if (e != layer.fuse_to) {
        fail_layer(layer, "cannot reach extent " + std::to_string(layer.fuse_to) +
                              " from " + std::to_string(in[0].h) +
                              " by repeated 2x2 pooling");
      }
      return {in[0].c, layer.fuse_to, layer.fuse_to};
    }
    case LayerKind::Head: {
      if (layer.grids < 1) fail_layer(layer, "grids must be >= 1");
      if (in[0].h != in[0].w) {
        fail_layer(layer, "head input must be square, got " +
                              std::to_string(in[0].h) + "x" +
                              std::to_string(in[0].w));
      }
      return {6 * layer.grids, in[0].h, in[0].w};
    }
  }
  fail_layer(layer, "unhandled layer kind");
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Input: return "input";
    case LayerKind::SepConv: return "sepconv";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Concat: return "concat";
    case LayerKind::FuseTap: return "fuse-tap";
    case LayerKind::Head: return "head";
  }
  return "?";
}

std::vector<ParamDesc> ModelGraph::param_descs() const {
  std::vector<ParamDesc> out;
  for (int li = 0; li < static_cast<int>(layers.size()); ++li) {
    const LayerSpec& layer = layers[li];
    if (layer.kind == LayerKind::SepConv) {
      const int c_in = shapes[index.at(layer.inputs[0])].c;
      out.push_back({layer.id + ".dw", c_in, 1, layer.kernel, layer.kernel, false});
      out.push_back({layer.id + ".pw", layer.filters, c_in, 1, 1, false});
      out.push_back({layer.id + ".b", layer.filters, 1, 1, 1, true});
    } else if (layer.kind == LayerKind::Head) {
      const int c_in = shapes[index.at(layer.inputs[0])].c;
      const int c_out = 6 * layer.grids;
      out.push_back({layer.id + ".pw", c_out, c_in, 1, 1, false});
      out.push_back({layer.id + ".b", c_out, 1, 1, 1, true});
    }
  }
  return out;
}

long ModelGraph::param_count() const {
  long total = 0;
  for (const ParamDesc& d : param_descs()) total += d.size();
  return total;
}

ModelGraph parse_model_config(const std::string& text) {
  ModelGraph graph;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream ls(line);
    std::string id, kind_str;
    if (!(ls >> id)) continue;  // blank or comment-only line
    if (!(ls >> kind_str)) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'id kind ...', got only '" + id + "'");
    }

    LayerSpec layer;
    layer.id = id;
    layer.line_no = line_no;
    if (kind_str == "input") layer.kind = LayerKind::Input;
    else if (kind_str == "sepconv") layer.kind = LayerKind::SepConv;
    else if (kind_str == "avgpool") layer.kind = LayerKind::AvgPool;
    else if (kind_str == "concat") layer.kind = LayerKind::Concat;
    else if (kind_str == "fuse-tap") layer.kind = LayerKind::FuseTap;
    else if (kind_str == "head") layer.kind = LayerKind::Head;
    else {
      throw ParseError("line " + std::to_string(line_no) +
                       ": unknown layer kind '" + kind_str + "'");
    }

    std::string kv;
    while (ls >> kv) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected key=value, got '" + kv + "'");
      }
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      if (key == "inputs") {
        for (const std::string& ref : split(value, ',')) {
          if (ref.empty()) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": empty input reference");
          }
          layer.inputs.push_back(ref);
        }
      } else if (key == "channels") layer.in_channels = parse_int(value, key, line_no);
      else if (key == "width") layer.in_w = parse_int(value, key, line_no);
      else if (key == "height") layer.in_h = parse_int(value, key, line_no);
      else if (key == "filters") layer.filters = parse_int(value, key, line_no);
      else if (key == "kernel") layer.kernel = parse_int(value, key, line_no);
      else if (key == "stride") layer.stride = layer.pool_stride = parse_int(value, key, line_no);
      else if (key == "window") layer.window = parse_int(value, key, line_no);
      else if (key == "act") layer.act = parse_act(value, line_no);
      else if (key == "to") layer.fuse_to = parse_int(value, key, line_no);
      else if (key == "grids") layer.grids = parse_int(value, key, line_no);
      else {
        throw ParseError("line " + std::to_string(line_no) + ": unknown key '" +
                         key + "'");
      }
    }
    graph.layers.push_back(std::move(layer));
  }

  // Structural validation + shape propagation, in file order. Forward or
  // self references are rejected, which also rules out cycles.
  for (int li = 0; li < static_cast<int>(graph.layers.size()); ++li) {
    const LayerSpec& layer = graph.layers[li];
    if (graph.index.count(layer.id)) {
      fail_layer(layer, "duplicate layer id");
    }
    if (layer.kind == LayerKind::Input) {
      check_arity(layer, 0, 0);
      if (graph.input_layer >= 0) fail_layer(layer, "second input layer");
      if (layer.in_channels < 1 || layer.in_h < 1 || layer.in_w < 1) {
        fail_layer(layer, "input extents must be >= 1");
      }
      graph.input_layer = li;
    } else {
      switch (layer.kind) {
        case LayerKind::Concat: check_arity(layer, 1, 64); break;
        default: check_arity(layer, 1, 1); break;
      }
      for (const std::string& ref : layer.inputs) {
        if (!graph.index.count(ref)) {
          fail_layer(layer, "input '" + ref +
                                "' does not refer to an earlier layer");
        }
      }
    }
    if (layer.kind == LayerKind::Head) {
      if (graph.head_layer >= 0) fail_layer(layer, "second head layer");
      graph.head_layer = li;
    }

    std::vector<LayerShape> in_shapes;
    for (const std::string& ref : layer.inputs) {
      in_shapes.push_back(graph.shapes[graph.index.at(ref)]);
    }
    graph.shapes.push_back(infer_shape(layer, in_shapes));
    graph.index.emplace(layer.id, li);
  }

  if (graph.head_layer < 0) throw ValidationError("no head layer");
  if (graph.input_layer < 0) throw ValidationError("no input layer");
  return graph;
}

ModelGraph load_model_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_model_config(buf.str());
}

}  // namespace peddet
