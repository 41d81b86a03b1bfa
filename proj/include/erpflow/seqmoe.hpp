//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "erpflow/expert.hpp"
#include "erpflow/fingerprint.hpp"
#include "erpflow/molgraph.hpp"
#include "erpflow/optim.hpp"

namespace erpflow::moe {

struct FingerprintSpec {
  int radius = 2;
  int length = 2048;
};

struct SeqTrainConfig {
  int warmup_iters = 20;
  int n_experts = 40;
  int t_per_expert = 2;
  int max_total_iters = 80;
  int chief_iters = 100;
  // Consecutive experts that capture nothing before the chain stops.
  int stall_limit = 3;
  int batch_size = 32;
  std::uint64_t base_seed = 0;
  model::ExpertConfig expert;
  ad::AdamConfig adam;
  FingerprintSpec fingerprint;

  void validate() const;
};

// One specialized expert: parameter snapshot, the reactions it mastered, and
// the fingerprint centroid of those reactions used for routing.
struct ExpertRecord {
  int expert_id = 0;
  model::Expert params;
  std::vector<std::string> correct_ids;  // dataset order
  fp::Centroid centroid;
};

struct ExpertRegistry {
  model::Expert chief;
  std::vector<ExpertRecord> experts;
  FingerprintSpec fingerprint;
  // Ordered training provenance (seeds, hyperparameters, dataset digest).
  std::vector<std::pair<std::string, std::string>> manifest;
};

// Discretized-delta equality against the reaction's ground truth, dropout
// off.
bool predicts_correctly(const model::Expert& e, const chem::Reaction& r);

// Fraction of the dataset predicted correctly. Evaluated in parallel,
// merged by index.
double training_accuracy(const model::Expert& e,
                         const std::vector<chem::Reaction>& dataset);

// Fresh initialization followed by warmup_iters full-dataset epochs.
// Appends one mean-loss line per epoch to `log` when given.
model::Expert warmup(const std::vector<chem::Reaction>& dataset,
                     const SeqTrainConfig& cfg,
                     std::vector<std::string>* log = nullptr);

// The specialization chain: expert i trains on the remainder D_i for
// t_per_expert epochs; reactions it predicts correctly after every epoch
// form s_i, are recorded with a centroid, and leave the pool. Experts that
// capture nothing are dropped; stall_limit consecutive empty captures stop
// the chain. Appends per-epoch loss lines and one capture line per expert
// to `log` when given.
std::vector<ExpertRecord> train_sequential(
    model::Expert params, const std::vector<chem::Reaction>& dataset,
    const SeqTrainConfig& cfg, std::vector<std::string>* log = nullptr);

// Independent full-dataset model from a fresh initialization. Appends one
// mean-loss line per epoch to `log` when given.
model::Expert train_chief(const std::vector<chem::Reaction>& dataset,
                          const SeqTrainConfig& cfg,
                          std::vector<std::string>* log = nullptr);

// warmup -> train_sequential -> train_chief, assembled with a manifest.
ExpertRegistry train_registry(const std::vector<chem::Reaction>& dataset,
                              const SeqTrainConfig& cfg,
                              std::vector<std::string>* log = nullptr);

// Versioned binary container with a trailing checksum; lossless round trip.
void save_registry(const std::string& path, const ExpertRegistry& reg);
ExpertRegistry load_registry(const std::string& path);

}  // namespace erpflow::moe
