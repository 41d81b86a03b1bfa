//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/inference.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "erpflow/fingerprint.hpp"

namespace erpflow::infer {

namespace {

int tier_rank(Tier t, RankStrategy s) {
  const std::array<Tier, 4> order = tier_order(s);
  for (int i = 0; i < 4; ++i) {
    if (order[static_cast<std::size_t>(i)] == t) return i;
  }
  return 4;
}

// Sort key shared by all tiers: chief fields fall back to neutral values so
// the comparison is total.
std::tuple<int, double, int, std::uint64_t> sort_key(const Candidate& c,
                                                     RankStrategy s) {
  return {tier_rank(c.tier, s), -c.similarity.value_or(2.0),
          c.expert_id.value_or(-1),
          c.seed.value_or(0)};
}

}  // namespace

const char* tier_name(Tier t) {
  switch (t) {
    case Tier::chief:
      return "chief";
    case Tier::selected:
      return "selected";
    case Tier::chief_drop:
      return "chief_drop";
    case Tier::selected_drop:
      return "selected_drop";
  }
  return "unknown";
}

std::array<Tier, 4> tier_order(RankStrategy s) {
  using enum Tier;
  switch (s) {
    case RankStrategy::selected_chiefdrop_selecteddrop:
      return {chief, selected, chief_drop, selected_drop};
    case RankStrategy::selected_selecteddrop_chiefdrop:
      return {chief, selected, selected_drop, chief_drop};
    case RankStrategy::chiefdrop_selected_selecteddrop:
      return {chief, chief_drop, selected, selected_drop};
    case RankStrategy::chiefdrop_selecteddrop_selected:
      return {chief, chief_drop, selected_drop, selected};
    case RankStrategy::selecteddrop_selected_chiefdrop:
      return {chief, selected_drop, selected, chief_drop};
    case RankStrategy::selecteddrop_chiefdrop_selected:
      return {chief, selected_drop, chief_drop, selected};
  }
  throw std::invalid_argument("unknown rank strategy");
}

std::string rank_strategy_name(RankStrategy s) {
  const std::array<Tier, 4> order = tier_order(s);
  std::string out;
  for (const Tier t : order) {
    if (!out.empty()) out += ',';
    out += tier_name(t);
  }
  return out;
}

RankStrategy rank_strategy_from_name(const std::string& name) {
  static constexpr RankStrategy all[] = {
      RankStrategy::selected_chiefdrop_selecteddrop,
      RankStrategy::selected_selecteddrop_chiefdrop,
      RankStrategy::chiefdrop_selected_selecteddrop,
      RankStrategy::chiefdrop_selecteddrop_selected,
      RankStrategy::selecteddrop_selected_chiefdrop,
      RankStrategy::selecteddrop_chiefdrop_selected,
  };
  for (const RankStrategy s : all) {
    if (rank_strategy_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown rank strategy: " + name);
}

std::vector<std::pair<const moe::ExpertRecord*, double>> select_experts(
    const chem::MolGraph& reactants, const moe::ExpertRegistry& registry,
    int top_n) {
  if (top_n < 1) throw std::invalid_argument("top_n must be positive");
  if (registry.experts.empty()) return {};

  const fp::Fingerprint probe = fp::morgan_fingerprint(
      reactants, registry.fingerprint.radius, registry.fingerprint.length);

  std::vector<std::pair<const moe::ExpertRecord*, double>> scored;
  scored.reserve(registry.experts.size());
  for (const moe::ExpertRecord& rec : registry.experts) {
    scored.emplace_back(&rec, fp::cosine_similarity(probe, rec.centroid));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first->expert_id < b.first->expert_id;
                   });
  if (scored.size() > static_cast<std::size_t>(top_n)) {
    scored.resize(static_cast<std::size_t>(top_n));
  }
  return scored;
}

std::vector<std::pair<std::optional<chem::MolGraph>, std::uint64_t>>
mc_dropout_predict(const model::Expert& expert, const chem::MolGraph& reactants,
                   const std::vector<std::uint64_t>& seeds,
                   double dropout_rate) {
  if (seeds.empty()) throw std::invalid_argument("seed list is empty");
  std::vector<std::pair<std::optional<chem::MolGraph>, std::uint64_t>> out;
  out.reserve(seeds.size());
  for (const std::uint64_t seed : seeds) {
    model::DropoutPlan plan;
    plan.enabled = dropout_rate > 0.0;
    plan.rate = dropout_rate;
    plan.seed = seed;
    out.emplace_back(expert.predict_products(reactants, plan), seed);
  }
  return out;
}

PredictionList rank_and_merge(const std::vector<Candidate>& chief_preds,
                              const std::vector<Candidate>& selected_preds,
                              const std::vector<Candidate>& chief_drop_preds,
                              const std::vector<Candidate>& selected_drop_preds,
                              RankStrategy strategy) {
  std::vector<Candidate> merged;
  merged.reserve(chief_preds.size() + selected_preds.size() +
                 chief_drop_preds.size() + selected_drop_preds.size());
  for (const auto* group :
       {&chief_preds, &selected_preds, &chief_drop_preds, &selected_drop_preds}) {
    for (const Candidate& c : *group) {
      if (c.product.has_value()) merged.push_back(c);
    }
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [strategy](const Candidate& a, const Candidate& b) {
                     return sort_key(a, strategy) < sort_key(b, strategy);
                   });

  PredictionList out;
  for (const Candidate& c : merged) {
    std::string signature = chem::canonical_signature(*c.product);
    const bool duplicate =
        std::any_of(out.begin(), out.end(), [&](const RankedPrediction& p) {
          return p.signature == signature;
        });
    if (duplicate) continue;
    out.push_back(RankedPrediction{*c.product, std::move(signature), c.tier,
                                   c.expert_id, c.similarity, c.seed});
  }
  return out;
}

PredictionList predict(const chem::MolGraph& reactants,
                       const moe::ExpertRegistry& registry,
                       const PredictOptions& options) {
  if (options.n_seeds < 0) throw std::invalid_argument("n_seeds is negative");
  if (!(options.dropout_rate >= 0.0 && options.dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }

  const auto selected = select_experts(reactants, registry, options.top_n);
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(options.n_seeds));
  for (int i = 0; i < options.n_seeds; ++i) {
    seeds.push_back(options.base_seed + static_cast<std::uint64_t>(i));
  }

  std::vector<Candidate> chief_preds;
  chief_preds.push_back(Candidate{registry.chief.predict_products(reactants),
                                  Tier::chief, std::nullopt, std::nullopt,
                                  std::nullopt});

  std::vector<Candidate> selected_preds;
  for (const auto& [rec, similarity] : selected) {
    selected_preds.push_back(Candidate{rec->params.predict_products(reactants),
                                       Tier::selected, rec->expert_id,
                                       similarity, std::nullopt});
  }

  std::vector<Candidate> chief_drop_preds;
  if (!seeds.empty()) {
    for (const auto& [product, seed] : mc_dropout_predict(
             registry.chief, reactants, seeds, options.dropout_rate)) {
      chief_drop_preds.push_back(Candidate{product, Tier::chief_drop,
                                           std::nullopt, std::nullopt, seed});
    }
  }

  std::vector<Candidate> selected_drop_preds;
  if (!seeds.empty()) {
    for (const auto& [rec, similarity] : selected) {
      for (const auto& [product, seed] : mc_dropout_predict(
               rec->params, reactants, seeds, options.dropout_rate)) {
        selected_drop_preds.push_back(Candidate{product, Tier::selected_drop,
                                                rec->expert_id, similarity,
                                                seed});
      }
    }
  }

  return rank_and_merge(chief_preds, selected_preds, chief_drop_preds,
                        selected_drop_preds, options.strategy);
}

}  // namespace erpflow::infer
