//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "erpflow/molgraph.hpp"
#include "erpflow/optim.hpp"
#include "erpflow/tape.hpp"

namespace erpflow::model {

struct ExpertConfig {
  int embed_dim = 32;
  int gnn_rounds = 3;
  int attn_layers = 2;
  int attn_heads = 4;
  int channels = 8;  // per direction; the per-pair flow bound
  double dropout_rate = 0.1;
  int max_atoms = 64;

  void validate() const;
};

// Forward-pass dropout context. Masks are keyed by (seed, site, step) so a
// fixed triple always reproduces the same pass.
struct DropoutPlan {
  bool enabled = false;
  double rate = 0.1;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

// One reaction model: embeddings -> message passing over the bond graph ->
// multi-head self-attention stack -> 16 pointer heads (8 bond-forming, 8
// bond-breaking) -> signed soft bond-change matrix.
class Expert {
 public:
  explicit Expert(ExpertConfig cfg);
  // Fresh parameters drawn deterministically from the seed.
  static Expert init(const ExpertConfig& cfg, std::uint64_t seed);

  const ExpertConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  // Atom representations, n x embed_dim.
  ad::Tensor encode(const chem::MolGraph& g,
                    const DropoutPlan& drop = {}) const;

  struct PointerWeights {
    std::vector<ad::Tensor> plus;   // channels, each n x n
    std::vector<ad::Tensor> minus;  // channels, each n x n
  };
  // Per-channel target probabilities. Each row softmax runs over the other
  // atoms plus a virtual no-flow slot, so entries lie in (0,1) and real
  // targets keep row mass below 1.
  PointerWeights pointer_scores(const chem::MolGraph& g,
                                const DropoutPlan& drop = {}) const;

  // Symmetric soft bond-change matrix with zero diagonal; |entries| bounded
  // by the channel count.
  ad::Tensor predict_soft_delta(const chem::MolGraph& g,
                                const DropoutPlan& drop = {}) const;

  chem::ElectronDelta predict_delta(const chem::MolGraph& g,
                                    const DropoutPlan& drop = {}) const;

  // Discretized delta applied to the reactants; empty when the result is
  // chemically invalid.
  std::optional<chem::MolGraph> predict_products(
      const chem::MolGraph& g, const DropoutPlan& drop = {}) const;

  // Squared error over unordered atom pairs with zero-filled truth.
  static double loss_value(const ad::Tensor& soft,
                           const chem::ElectronDelta& truth);
  double loss(const chem::Reaction& r, const DropoutPlan& drop = {}) const;

  // Round half away from zero, clamp to [-3, 3], drop zeros.
  static chem::ElectronDelta discretize(const ad::Tensor& soft);

  // One optimizer step on the mean batch loss. Training dropout masks are
  // keyed per example as (seed, site, step_base + index). Returns the mean
  // loss at the pre-step parameters.
  double train_step(const std::vector<const chem::Reaction*>& batch,
                    const ad::AdamConfig& adam, std::uint64_t dropout_seed,
                    std::uint64_t step_base);

  // Tape-building entry for gradient checks: appends the full loss graph
  // and reports parameter leaf ids.
  ad::NodeId loss_on_tape(
      ad::Tape& tape, const chem::Reaction& r, const DropoutPlan& drop,
      std::vector<std::pair<std::string, ad::NodeId>>* param_nodes) const;

  // Config header plus all parameter tensors in the checkpoint container.
  ad::NamedTensors to_tensors() const;
  static Expert from_tensors(const ad::NamedTensors& t);

  // Process-wide forward-pass instrumentation.
  static std::uint64_t forward_pass_count();
  static void reset_forward_pass_count();

 private:
  ad::NodeId soft_delta_on_tape(
      ad::Tape& tape, const chem::MolGraph& g, const DropoutPlan& drop,
      std::vector<std::pair<std::string, ad::NodeId>>* param_nodes) const;
  ad::NodeId encode_on_tape(
      ad::Tape& tape, const chem::MolGraph& g, const DropoutPlan& drop,
      std::vector<std::pair<std::string, ad::NodeId>>* param_nodes) const;

  ExpertConfig cfg_;
  ad::ParamStore params_;
};

}  // namespace erpflow::model
