//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace erpflow::ad {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  const auto [it, inserted] = slots_.emplace(name, Slot{});
  if (!inserted) throw std::invalid_argument("duplicate parameter " + name);
  it->second.m = Tensor(init.rows(), init.cols());
  it->second.v = Tensor(init.rows(), init.cols());
  it->second.value = std::move(init);
  order_.push_back(name);
  return it->second.value;
}

bool ParamStore::has(const std::string& name) const {
  return slots_.count(name) != 0;
}

Tensor& ParamStore::value(const std::string& name) {
  const auto it = slots_.find(name);
  if (it == slots_.end()) throw std::out_of_range("no parameter " + name);
  return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  const auto it = slots_.find(name);
  if (it == slots_.end()) throw std::out_of_range("no parameter " + name);
  return it->second.value;
}

double ParamStore::scheduled_lr(const AdamConfig& cfg) const {
  const int t = step_;
  if (cfg.warmup_steps > 0 && t < cfg.warmup_steps)
    return cfg.lr * static_cast<double>(t + 1) /
           static_cast<double>(cfg.warmup_steps);
  if (cfg.decay_steps > 0) {
    if (t >= cfg.decay_steps) return 0.0;
    const int span = std::max(1, cfg.decay_steps - cfg.warmup_steps);
    return cfg.lr * static_cast<double>(cfg.decay_steps - t) /
           static_cast<double>(span);
  }
  return cfg.lr;
}

void ParamStore::adamw_step(const std::map<std::string, Tensor>& grads,
                            const AdamConfig& cfg) {
  for (const auto& [name, g] : grads)
    if (!slots_.count(name))
      throw std::invalid_argument("gradient for unknown parameter " + name);
  const double lr = scheduled_lr(cfg);
  const int t = step_ + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const std::string& name : order_) {
    const auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("missing gradient for parameter " + name);
    const Tensor& g = git->second;
    Slot& slot = slots_.at(name);
    if (!g.same_shape(slot.value))
      throw std::invalid_argument("gradient shape mismatch for " + name);
    if (!g.all_finite())
      throw std::runtime_error("non-finite gradient for " + name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gv = g.raw()[i];
      double& m = slot.m.raw()[i];
      double& v = slot.v.raw()[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * gv;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * gv * gv;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      double& w = slot.value.raw()[i];
      w -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * w);
    }
  }
  ++step_;
}

NamedTensors ParamStore::to_tensors() const {
  NamedTensors out;
  out.items.reserve(order_.size());
  for (const std::string& name : order_)
    out.items.emplace_back(name, slots_.at(name).value);
  return out;
}

ParamStore ParamStore::from_tensors(const NamedTensors& t) {
  ParamStore store;
  for (const auto& [name, tensor] : t.items) store.add(name, tensor);
  return store;
}

}  // namespace erpflow::ad
