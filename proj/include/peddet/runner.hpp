#pragma once

#include <vector>

#include "peddet/graph.hpp"
#include "peddet/ops.hpp"
#include "peddet/ops_backward.hpp"
#include "peddet/params.hpp"

namespace peddet {

/// Per-layer activations kept alive for the backward pass.
template <typename Scalar>
struct Trace {
  std::vector<Tensor<Scalar>> out;     // one per layer
  std::vector<Tensor<Scalar>> dw_out;  // sepconv intermediate, else empty
};

namespace detail {

template <typename Scalar>
int fuse_stage_count(int from, int to) {
  int stages = 0;
  for (int e = from; e > to; e /= 2) ++stages;
  return stages;
}

}  // namespace detail

/// Runs the graph in layer order and returns the raw head tensor. Pure in
/// (graph, params, image); pass a Trace to keep activations for backward.
template <typename Scalar>
Tensor<Scalar> graph_forward(const ModelGraph& graph,
                             const ParamSet<Scalar>& params,
                             const Tensor<Scalar>& image,
                             Trace<Scalar>* trace = nullptr) {
  if (image.c() != graph.input_channels() || image.h() != graph.input_h() ||
      image.w() != graph.input_w()) {
    throw ShapeError("graph_forward: image " + image.shape_string() +
                     " does not match graph input " +
                     std::to_string(graph.input_channels()) + "x" +
                     std::to_string(graph.input_h()) + "x" +
                     std::to_string(graph.input_w()));
  }

  const int n_layers = static_cast<int>(graph.layers.size());
  std::vector<Tensor<Scalar>> outs(n_layers);
  if (trace) {
    trace->out.assign(n_layers, Tensor<Scalar>());
    trace->dw_out.assign(n_layers, Tensor<Scalar>());
  }

  for (int li = 0; li < n_layers; ++li) {
    const LayerSpec& layer = graph.layers[li];
    switch (layer.kind) {
      case LayerKind::Input:
        outs[li] = image;
        break;
      case LayerKind::SepConv: {
        const Tensor<Scalar>& x = outs[graph.layer_input_index(li, 0)];
        Tensor<Scalar> dw = depthwise_conv(x, params.at(layer.id + ".dw").value,
                                           layer.stride);
        Tensor<Scalar> y = apply_activation(
            pointwise_conv(dw, params.at(layer.id + ".pw").value,
                           params.at(layer.id + ".b").value),
            layer.act);
        if (trace) trace->dw_out[li] = std::move(dw);
        outs[li] = std::move(y);
        break;
      }
      case LayerKind::AvgPool:
        outs[li] = avg_pool(outs[graph.layer_input_index(li, 0)], layer.window,
                            layer.pool_stride);
        break;
      case LayerKind::Concat: {
        std::vector<const Tensor<Scalar>*> parts;
        for (size_t j = 0; j < layer.inputs.size(); ++j) {
          parts.push_back(&outs[graph.layer_input_index(li, static_cast<int>(j))]);
        }
        outs[li] = concat_channels(parts);
        break;
      }
      case LayerKind::FuseTap: {
        Tensor<Scalar> t = outs[graph.layer_input_index(li, 0)];
        while (t.h() > layer.fuse_to) t = avg_pool(t, 2, 2);
        outs[li] = std::move(t);
        break;
      }
      case LayerKind::Head: {
        const Tensor<Scalar>& x = outs[graph.layer_input_index(li, 0)];
        outs[li] = pointwise_conv(x, params.at(layer.id + ".pw").value,
                                  params.at(layer.id + ".b").value);
        break;
      }
    }
    if (trace) trace->out[li] = outs[li];
  }
  return outs[graph.head_layer];
}

/// Reverse pass: accumulates d(loss)/d(param) into each parameter's grad
/// buffer, given the gradient w.r.t. the raw head tensor. Needs the Trace
/// of the matching forward call.
template <typename Scalar>
void graph_backward(const ModelGraph& graph, ParamSet<Scalar>& params,
                    const Trace<Scalar>& trace, const Tensor<Scalar>& d_head) {
  const int n_layers = static_cast<int>(graph.layers.size());
  std::vector<Tensor<Scalar>> d_out(n_layers);

  auto accumulate = [](Tensor<Scalar>& slot, Tensor<Scalar>&& g) {
    if (slot.empty()) {
      slot = std::move(g);
    } else {
      slot.array() += g.array();
    }
  };
  accumulate(d_out[graph.head_layer], Tensor<Scalar>(d_head));

  for (int li = n_layers - 1; li >= 0; --li) {
    const LayerSpec& layer = graph.layers[li];
    if (d_out[li].empty()) continue;  // layer feeds nothing reachable
    const Tensor<Scalar>& up = d_out[li];
    switch (layer.kind) {
      case LayerKind::Input:
        break;  // gradients w.r.t. the image are not needed
      case LayerKind::SepConv: {
        const int src = graph.layer_input_index(li, 0);
        const Tensor<Scalar> d_act =
            activation_backward(layer.act, trace.out[li], up);
        auto pg = pointwise_conv_backward(trace.dw_out[li],
                                          params.at(layer.id + ".pw").value,
                                          d_act);
        params.at(layer.id + ".pw").grad.array() += pg.weights.array();
        params.at(layer.id + ".b").grad.array() += pg.bias.array();
        auto dg = depthwise_conv_backward(trace.out[src],
                                          params.at(layer.id + ".dw").value,
                                          layer.stride, pg.input);
        params.at(layer.id + ".dw").grad.array() += dg.kernels.array();
        accumulate(d_out[src], std::move(dg.input));
        break;
      }
      case LayerKind::AvgPool: {
        const int src = graph.layer_input_index(li, 0);
        accumulate(d_out[src],
                   avg_pool_backward(up, layer.window, layer.pool_stride,
                                     trace.out[src].h(), trace.out[src].w()));
        break;
      }
      case LayerKind::Concat: {
        std::vector<int> counts;
        for (size_t j = 0; j < layer.inputs.size(); ++j) {
          counts.push_back(
              trace.out[graph.layer_input_index(li, static_cast<int>(j))].c());
        }
        auto slices = concat_channels_backward(up, counts);
        for (size_t j = 0; j < slices.size(); ++j) {
          accumulate(d_out[graph.layer_input_index(li, static_cast<int>(j))],
                     std::move(slices[j]));
        }
        break;
      }
      case LayerKind::FuseTap: {
        const int src = graph.layer_input_index(li, 0);
        const int from = trace.out[src].h();
        const int stages = detail::fuse_stage_count<Scalar>(from, layer.fuse_to);
        Tensor<Scalar> g = up;
        int extent = layer.fuse_to;
        for (int s = 0; s < stages; ++s) {
          extent *= 2;
          g = avg_pool_backward(g, 2, 2, extent, extent);
        }
        accumulate(d_out[src], std::move(g));
        break;
      }
      case LayerKind::Head: {
        const int src = graph.layer_input_index(li, 0);
        auto pg = pointwise_conv_backward(trace.out[src],
                                          params.at(layer.id + ".pw").value, up);
        params.at(layer.id + ".pw").grad.array() += pg.weights.array();
        params.at(layer.id + ".b").grad.array() += pg.bias.array();
        accumulate(d_out[src], std::move(pg.input));
        break;
      }
    }
  }
}

}  // namespace peddet
