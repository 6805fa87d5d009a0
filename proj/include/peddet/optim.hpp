#pragma once

#include "peddet/error.hpp"
#include "peddet/params.hpp"

namespace peddet {

struct OptimizerConfig {
  double learning_rate = 0.0001;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 16;

  void validate() const {
    if (learning_rate <= 0) throw ValidationError("learning rate must be > 0");
    if (momentum < 0 || momentum >= 1) {
      throw ValidationError("momentum must lie in [0,1)");
    }
    if (weight_decay < 0) throw ValidationError("weight decay must be >= 0");
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  }
};

/// One SGD-with-momentum update:
///   v <- momentum * v - lr * (grad + decay * value);  value <- value + v
/// Weight decay applies to convolution weights only, never biases.
/// Gradients are zeroed afterwards.
template <typename Scalar>
void sgd_step(ParamSet<Scalar>& params, const OptimizerConfig& cfg) {
  cfg.validate();
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar mu = static_cast<Scalar>(cfg.momentum);
  const Scalar wd = static_cast<Scalar>(cfg.weight_decay);
  for (auto& p : params.params) {
    auto& v = p.velocity.array();
    const Scalar decay = p.is_bias ? Scalar(0) : wd;
    v = mu * v - lr * (p.grad.array() + decay * p.value.array());
    p.value.array() += v;
    p.grad.array().setZero();
  }
}

}  // namespace peddet
