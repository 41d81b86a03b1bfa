//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <map>
#include <string>
#include <vector>

#include "erpflow/checkpoint.hpp"
#include "erpflow/tensor.hpp"

namespace erpflow::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int warmup_steps = 0;
  int decay_steps = 0;  // 0 keeps the rate flat after warmup
};

// Named parameters with Adam moments. Insertion order is the canonical
// parameter order used for serialization and gradient checks.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  bool has(const std::string& name) const;
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  int step() const { return step_; }

  // Learning rate the next adamw_step call will use: linear ramp over
  // warmup_steps, then linear decay hitting zero at decay_steps.
  double scheduled_lr(const AdamConfig& cfg) const;

  // Decoupled-weight-decay Adam with bias correction. Grads must cover
  // every parameter exactly.
  void adamw_step(const std::map<std::string, Tensor>& grads,
                  const AdamConfig& cfg);

  NamedTensors to_tensors() const;
  // Values only; moments reset, step zero.
  static ParamStore from_tensors(const NamedTensors& t);

 private:
  struct Slot {
    Tensor value;
    Tensor m;
    Tensor v;
  };
  std::map<std::string, Slot> slots_;
  std::vector<std::string> order_;
  int step_ = 0;
};

}  // namespace erpflow::ad
