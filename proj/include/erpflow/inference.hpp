//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "erpflow/molgraph.hpp"
#include "erpflow/seqmoe.hpp"

namespace erpflow::infer {

// Candidate source, in default rank order.
enum class Tier { chief, selected, chief_drop, selected_drop };

const char* tier_name(Tier t);

// The chief tier always ranks first; the six strategies permute the
// remaining three tiers.
enum class RankStrategy {
  selected_chiefdrop_selecteddrop,  // default
  selected_selecteddrop_chiefdrop,
  chiefdrop_selected_selecteddrop,
  chiefdrop_selecteddrop_selected,
  selecteddrop_selected_chiefdrop,
  selecteddrop_chiefdrop_selected,
};

std::array<Tier, 4> tier_order(RankStrategy s);
// Comma-joined tier names, e.g. "chief,selected,chief_drop,selected_drop".
std::string rank_strategy_name(RankStrategy s);
RankStrategy rank_strategy_from_name(const std::string& name);

// One raw model output before merging. The product is empty when the
// discretized delta produced an invalid molecule.
struct Candidate {
  std::optional<chem::MolGraph> product;
  Tier tier = Tier::chief;
  std::optional<int> expert_id;        // selected tiers
  std::optional<double> similarity;    // selected tiers
  std::optional<std::uint64_t> seed;   // dropout tiers
};

struct RankedPrediction {
  chem::MolGraph product;
  std::string signature;
  Tier tier = Tier::chief;
  std::optional<int> expert_id;
  std::optional<double> similarity;
  std::optional<std::uint64_t> seed;
};

// Ordered, signature-deduplicated product list; earliest entry wins.
using PredictionList = std::vector<RankedPrediction>;

struct PredictOptions {
  int top_n = 2;
  int n_seeds = 5;
  double dropout_rate = 0.1;
  std::uint64_t base_seed = 0;
  RankStrategy strategy = RankStrategy::selected_chiefdrop_selecteddrop;
};

// Top-N stored experts by cosine similarity between the reactant
// fingerprint and each capture-set centroid, descending; ties fall to the
// smaller expert id. An empty registry yields an empty list.
std::vector<std::pair<const moe::ExpertRecord*, double>> select_experts(
    const chem::MolGraph& reactants, const moe::ExpertRegistry& registry,
    int top_n);

// One dropout forward pass per seed, outputs in seed-list order.
std::vector<std::pair<std::optional<chem::MolGraph>, std::uint64_t>>
mc_dropout_predict(const model::Expert& expert, const chem::MolGraph& reactants,
                   const std::vector<std::uint64_t>& seeds,
                   double dropout_rate);

// Orders candidates by (strategy tier rank, similarity desc, expert id,
// seed), drops invalid entries, and deduplicates by canonical signature
// keeping the earliest.
PredictionList rank_and_merge(
    const std::vector<Candidate>& chief_preds,
    const std::vector<Candidate>& selected_preds,
    const std::vector<Candidate>& chief_drop_preds,
    const std::vector<Candidate>& selected_drop_preds,
    RankStrategy strategy = RankStrategy::selected_chiefdrop_selecteddrop);

// Full pipeline: chief, Top-N selected experts, then dropout passes of each
// with seeds base_seed + {0..n_seeds-1}; 1 + N + n_seeds + N*n_seeds
// forward passes, merged by rank_and_merge.
PredictionList predict(const chem::MolGraph& reactants,
                       const moe::ExpertRegistry& registry,
                       const PredictOptions& options = {});

}  // namespace erpflow::infer
