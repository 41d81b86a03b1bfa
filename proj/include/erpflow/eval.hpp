//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "erpflow/inference.hpp"
#include "erpflow/molgraph.hpp"
#include "erpflow/seqmoe.hpp"

namespace erpflow::eval {

// Ranked, signature-deduplicated predictions for one reaction.
struct ScoredList {
  std::vector<std::string> signatures;
};

inline constexpr int kTopKs[] = {1, 2, 3, 5, 10};

struct EvalReport {
  std::string subset = "all";
  std::map<int, double> topk;
  std::map<int, double> hitrate;
  double avg_l = 0.0;
  int n_reactions = 0;
  double latency_single_ms = 0.0;
  double latency_pipeline_ms = 0.0;
  bool adjustment_applied = false;
};

// Signature of the ground-truth product: the reaction's bond-change matrix
// applied to its own reactants. Throws when the truth does not apply
// cleanly.
std::string truth_signature(const chem::Reaction& r);

// Fraction of reactions whose truth appears within the first K entries.
// The optional reporting adjustment subtracts 0.003 (clamped at zero).
double topk_accuracy(const std::vector<ScoredList>& predictions,
                     const std::vector<std::string>& truths, int k,
                     bool subtract_adjustment = false);

// Mean over qualifying reactants (>= min_truths distinct truths) of
// |top-K intersection truth_set| / |truth_set|.
double hitrate_at_k(const std::vector<ScoredList>& predictions,
                    const std::vector<std::set<std::string>>& truth_sets,
                    int k, int min_truths = 2);

// Test reactions whose training-set pattern frequency falls below the
// threshold; unseen patterns always qualify.
std::vector<chem::Reaction> rare_subset(const std::vector<chem::Reaction>& train,
                                        const std::vector<chem::Reaction>& test,
                                        double threshold = 0.01);

double avg_list_length(const std::vector<ScoredList>& predictions);

struct GroupStats {
  double fraction = 0.0;
  double hitrate = 0.0;  // HitRate at K = group list length
};
// Histogram over prediction-list lengths.
std::map<int, GroupStats> groupwise_report(
    const std::vector<ScoredList>& predictions,
    const std::vector<std::set<std::string>>& truth_sets);

// Full pipeline over a test set, parallel over reactions, merged by index.
std::vector<ScoredList> predict_all(const moe::ExpertRegistry& registry,
                                    const std::vector<chem::MolGraph>& reactants,
                                    const infer::PredictOptions& options);

// Top-K sweep plus list-length stats; hitrate entries are filled only by
// add_hitrate.
EvalReport evaluate(const std::vector<ScoredList>& predictions,
                    const std::vector<std::string>& truths,
                    const std::string& subset = "all",
                    bool subtract_adjustment = false);

void add_hitrate(EvalReport& report, const std::vector<ScoredList>& predictions,
                 const std::vector<std::set<std::string>>& truth_sets,
                 int min_truths = 2);

struct LatencyStats {
  double single_mean_ms = 0.0;
  double single_stddev_ms = 0.0;
  double pipeline_mean_ms = 0.0;
  double pipeline_stddev_ms = 0.0;
  double passes_per_sample = 0.0;
};

// Wall-clock per sample: a chief-only single-pass prediction versus the
// full pipeline, after a discarded warm-up pass. Serial on purpose so pass
// counts and times stay comparable.
LatencyStats latency_benchmark(const moe::ExpertRegistry& registry,
                               const std::vector<chem::MolGraph>& samples,
                               int repetitions,
                               const infer::PredictOptions& options);

struct AblationRow {
  std::string label;
  EvalReport report;
};

// Component knockouts (chief only, experts only, dropout only, full) plus
// the six tier orders of the full pipeline, all on one test set.
std::vector<AblationRow> ablation_run(const moe::ExpertRegistry& registry,
                                      const std::vector<chem::Reaction>& test,
                                      const infer::PredictOptions& options);

// Human-readable key/value block.
std::string report_text(const EvalReport& report);
// One `metric,K,subset,value` line per entry; K empty for scalars.
std::string report_csv(const EvalReport& report);

}  // namespace erpflow::eval
