#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "peddet/graph.hpp"
#include "peddet/rng.hpp"
#include "peddet/tensor.hpp"

namespace peddet {

/// One learnable tensor with its gradient and momentum buffers.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  Tensor<Scalar> velocity;
  bool is_bias = false;  // biases are exempt from weight decay
};

template <typename Scalar>
struct ParamSet {
  std::vector<Parameter<Scalar>> params;
  std::unordered_map<std::string, int> index;

  Parameter<Scalar>& at(const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw ValidationError("no parameter named '" + name + "'");
    }
    return params[it->second];
  }
  const Parameter<Scalar>& at(const std::string& name) const {
    return const_cast<ParamSet*>(this)->at(name);
  }
  bool has(const std::string& name) const { return index.count(name) != 0; }

  void add(Parameter<Scalar> p) {
    index.emplace(p.name, static_cast<int>(params.size()));
    params.push_back(std::move(p));
  }

  void zero_grads() {
    for (auto& p : params) p.grad.array().setZero();
  }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
  }

  template <typename Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out;
    for (const auto& p : params) {
      out.add({p.name, p.value.template cast<Other>(),
               p.grad.template cast<Other>(), p.velocity.template cast<Other>(),
               p.is_bias});
    }
    return out;
  }
};

/// Draws every convolution weight from N(0, stddev^2) with a seeded
/// deterministic generator; biases start at zero. Same seed, same bits.
template <typename Scalar>
ParamSet<Scalar> init_params(const ModelGraph& graph, uint64_t seed,
                             double stddev = 0.2) {
  Rng rng(seed);
  ParamSet<Scalar> set;
  for (const ParamDesc& d : graph.param_descs()) {
    Parameter<Scalar> p;
    p.name = d.name;
    p.is_bias = d.is_bias;
    p.value = Tensor<Scalar>(d.n, d.c, d.h, d.w);
    if (!d.is_bias) {
      Scalar* v = p.value.data();
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        v[i] = static_cast<Scalar>(rng.gaussian(0.0, stddev));
      }
    }
    p.grad = Tensor<Scalar>(d.n, d.c, d.h, d.w);
    p.velocity = Tensor<Scalar>(d.n, d.c, d.h, d.w);
    set.add(std::move(p));
  }
  return set;
}

/// Checks that `set` holds exactly the tensors the graph expects, with
/// matching shapes. Throws ValidationError naming the first offender.
void check_params_match(const ModelGraph& graph, const ParamSet<float>& set);

/// PWTS v1 weights container: magic "PWTS", u8 version, u32 tensor count;
/// per tensor: u16 name length, name bytes, u8 ndim (= 4), u32 extents,
/// little-endian f32 data.
void save_weights(const ParamSet<float>& set, const std::string& path);
ParamSet<float> load_weights(const std::string& path);

/// PTEN v1 raw tensor file: magic "PTEN", u8 version = 1, u8 dtype = 0
/// (f32), u8 ndim = 4, four u32 little-endian extents, then the values.
void save_tensor(const TensorF& t, const std::string& path);
TensorF load_tensor(const std::string& path);

}  // namespace peddet
