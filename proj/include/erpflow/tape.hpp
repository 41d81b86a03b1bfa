//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "erpflow/tensor.hpp"

namespace erpflow::ad {

using NodeId = int;

// Reverse-mode tape. Forward calls append nodes; backward() walks them in
// exact reverse order and accumulates gradients additively. One tape per
// example, single threaded.
class Tape {
 public:
  Tape() { nodes_.reserve(256); }

  // Differentiable leaf owning its value.
  NodeId input(Tensor value);
  // Non-differentiable leaf (masks, adjacency, targets).
  NodeId constant(Tensor value);
  // Differentiable leaf aliasing external storage, typically a parameter.
  // The storage must outlive the tape and stay unmodified until backward.
  NodeId param(const Tensor* value);

  NodeId matmul(NodeId a, NodeId b);     // A @ B
  NodeId matmul_nt(NodeId a, NodeId b);  // A @ B^T
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId a, double s);
  NodeId add_rowvec(NodeId m, NodeId v);  // broadcast 1 x c over rows
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta);  // per row, eps 1e-5
  // Gathers table rows; gradient scatters back into the table.
  NodeId embedding_rows(NodeId table, std::vector<int> ids);
  NodeId sum(NodeId a);   // 1 x 1
  NodeId mean(NodeId a);  // 1 x 1
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId slice_cols(NodeId a, int begin, int end);
  NodeId transpose(NodeId a);
  NodeId dropout(NodeId a, Tensor mask);  // mask applied as a constant factor
  // Replaces diagonal entries with `value` (used to bar self pairs before a
  // row softmax). Square input only.
  NodeId mask_diag(NodeId a, double value);
  NodeId append_zero_col(NodeId a);

  const Tensor& value(NodeId id) const;
  // Seeds d(root)/d(root) = 1 and sweeps. Root must be 1 x 1.
  void backward(NodeId root);
  // Zero tensor when the node never received gradient.
  Tensor grad(NodeId id) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool needs = false;
    std::function<void(Tape&, const Tensor&)> back;
  };

  const Tensor& val(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ref ? *n.ref : n.owned;
  }
  bool needs(NodeId id) const {
    return nodes_[static_cast<std::size_t>(id)].needs;
  }
  NodeId push(Tensor value, bool needs_grad,
              std::function<void(Tape&, const Tensor&)> back,
              const char* op_name);
  void accumulate(NodeId id, const Tensor& delta);

  std::vector<Node> nodes_;
};

// Inverted-scale dropout mask from the counter PRNG; the same
// (seed, layer_id, step) always yields the same mask. Rate in [0, 1).
Tensor dropout_mask(int rows, int cols, double rate, std::uint64_t seed,
                    std::uint64_t layer_id, std::uint64_t step);

}  // namespace erpflow::ad
