//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "erpflow/expert.hpp"
#include "erpflow/threading.hpp"

namespace erpflow::eval {

namespace {

double mean_of(const std::vector<double>& v) {
  double total = 0.0;
  for (const double x : v) total += x;
  return v.empty() ? 0.0 : total / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double total = 0.0;
  for (const double x : v) total += (x - mean) * (x - mean);
  return std::sqrt(total / static_cast<double>(v.size() - 1));
}

double time_call_ms(const std::function<void()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count();
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string truth_signature(const chem::Reaction& r) {
  const auto product = chem::apply_delta(r.reactants, chem::compute_delta(r));
  if (!product.has_value()) {
    throw chem::ReactionError("ground-truth delta does not apply cleanly: " +
                              r.id);
  }
  return chem::canonical_signature(*product);
}

double topk_accuracy(const std::vector<ScoredList>& predictions,
                     const std::vector<std::string>& truths, int k,
                     bool subtract_adjustment) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("predictions and truths differ in length");
  }
  if (predictions.empty()) throw std::invalid_argument("empty test set");

  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& sigs = predictions[i].signatures;
    const std::size_t limit =
        std::min(sigs.size(), static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < limit; ++j) {
      if (sigs[j] == truths[i]) {
        ++hits;
        break;
      }
    }
  }
  double value =
      static_cast<double>(hits) / static_cast<double>(predictions.size());
  if (subtract_adjustment) value = std::max(0.0, value - 0.003);
  return value;
}

double hitrate_at_k(const std::vector<ScoredList>& predictions,
                    const std::vector<std::set<std::string>>& truth_sets,
                    int k, int min_truths) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (predictions.size() != truth_sets.size()) {
    throw std::invalid_argument("predictions and truth sets differ in length");
  }
  double total = 0.0;
  std::size_t qualifying = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& truth = truth_sets[i];
    if (static_cast<int>(truth.size()) < min_truths) continue;
    ++qualifying;
    const auto& sigs = predictions[i].signatures;
    const std::size_t limit =
        std::min(sigs.size(), static_cast<std::size_t>(k));
    std::size_t found = 0;
    for (std::size_t j = 0; j < limit; ++j) {
      if (truth.count(sigs[j]) != 0) ++found;
    }
    total += static_cast<double>(found) / static_cast<double>(truth.size());
  }
  if (qualifying == 0) {
    throw std::invalid_argument("no reactant qualifies for hitrate");
  }
  return total / static_cast<double>(qualifying);
}

std::vector<chem::Reaction> rare_subset(const std::vector<chem::Reaction>& train,
                                        const std::vector<chem::Reaction>& test,
                                        double threshold) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  std::map<std::string, std::size_t> counts;
  for (const chem::Reaction& r : train) {
    ++counts[chem::pattern_signature(chem::compute_delta(r), r)];
  }
  std::vector<chem::Reaction> out;
  for (const chem::Reaction& r : test) {
    const auto it =
        counts.find(chem::pattern_signature(chem::compute_delta(r), r));
    const double freq =
        it == counts.end()
            ? 0.0
            : static_cast<double>(it->second) / static_cast<double>(train.size());
    if (freq == 0.0 || freq < threshold) out.push_back(r);
  }
  return out;
}

double avg_list_length(const std::vector<ScoredList>& predictions) {
  if (predictions.empty()) throw std::invalid_argument("empty test set");
  double total = 0.0;
  for (const ScoredList& p : predictions)
    total += static_cast<double>(p.signatures.size());
  return total / static_cast<double>(predictions.size());
}

std::map<int, GroupStats> groupwise_report(
    const std::vector<ScoredList>& predictions,
    const std::vector<std::set<std::string>>& truth_sets) {
  if (predictions.size() != truth_sets.size()) {
    throw std::invalid_argument("predictions and truth sets differ in length");
  }
  std::map<int, GroupStats> out;
  if (predictions.empty()) return out;

  std::map<int, std::pair<std::size_t, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto& g = groups[static_cast<int>(predictions[i].signatures.size())];
    ++g.first;
    if (!truth_sets[i].empty()) g.second.push_back(i);
  }
  for (const auto& [len, group] : groups) {
    GroupStats stats;
    stats.fraction = static_cast<double>(group.first) /
                     static_cast<double>(predictions.size());
    if (!group.second.empty() && len >= 1) {
      double total = 0.0;
      for (const std::size_t i : group.second) {
        const auto& sigs = predictions[i].signatures;
        std::size_t found = 0;
        for (const std::string& s : sigs) {
          if (truth_sets[i].count(s) != 0) ++found;
        }
        total += static_cast<double>(found) /
                 static_cast<double>(truth_sets[i].size());
      }
      stats.hitrate = total / static_cast<double>(group.second.size());
    }
    out[len] = stats;
  }
  return out;
}

std::vector<ScoredList> predict_all(const moe::ExpertRegistry& registry,
                                    const std::vector<chem::MolGraph>& reactants,
                                    const infer::PredictOptions& options) {
  std::vector<ScoredList> out(reactants.size());
  parallel_for(static_cast<int>(reactants.size()), [&](int i) {
    const infer::PredictionList preds =
        infer::predict(reactants[static_cast<std::size_t>(i)], registry, options);
    ScoredList& slot = out[static_cast<std::size_t>(i)];
    slot.signatures.reserve(preds.size());
    for (const infer::RankedPrediction& p : preds) {
      slot.signatures.push_back(p.signature);
    }
  });
  return out;
}

EvalReport evaluate(const std::vector<ScoredList>& predictions,
                    const std::vector<std::string>& truths,
                    const std::string& subset, bool subtract_adjustment) {
  EvalReport report;
  report.subset = subset;
  report.n_reactions = static_cast<int>(predictions.size());
  report.adjustment_applied = subtract_adjustment;
  for (const int k : kTopKs) {
    report.topk[k] = topk_accuracy(predictions, truths, k, subtract_adjustment);
  }
  report.avg_l = avg_list_length(predictions);
  return report;
}

void add_hitrate(EvalReport& report, const std::vector<ScoredList>& predictions,
                 const std::vector<std::set<std::string>>& truth_sets,
                 int min_truths) {
  for (const int k : kTopKs) {
    report.hitrate[k] = hitrate_at_k(predictions, truth_sets, k, min_truths);
  }
}

LatencyStats latency_benchmark(const moe::ExpertRegistry& registry,
                               const std::vector<chem::MolGraph>& samples,
                               int repetitions,
                               const infer::PredictOptions& options) {
  if (samples.empty()) throw std::invalid_argument("empty benchmark subset");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be positive");

  // Single-pass cost is one candidate's end-to-end prediction, not a bare
  // forward, so both paths pay the same per-candidate bookkeeping.
  const moe::ExpertRegistry chief_only{registry.chief, {},
                                       registry.fingerprint, {}};
  infer::PredictOptions single_options = options;
  single_options.n_seeds = 0;

  // Discarded warm-up.
  (void)infer::predict(samples.front(), chief_only, single_options);
  (void)infer::predict(samples.front(), registry, options);

  std::vector<double> single_times;
  std::vector<double> pipeline_times;
  single_times.reserve(samples.size() * static_cast<std::size_t>(repetitions));
  pipeline_times.reserve(single_times.capacity());

  model::Expert::reset_forward_pass_count();
  for (int rep = 0; rep < repetitions; ++rep) {
    for (const chem::MolGraph& g : samples) {
      pipeline_times.push_back(
          time_call_ms([&] { (void)infer::predict(g, registry, options); }));
    }
  }
  const double total_passes =
      static_cast<double>(model::Expert::forward_pass_count());

  for (int rep = 0; rep < repetitions; ++rep) {
    for (const chem::MolGraph& g : samples) {
      single_times.push_back(time_call_ms(
          [&] { (void)infer::predict(g, chief_only, single_options); }));
    }
  }

  LatencyStats stats;
  stats.single_mean_ms = mean_of(single_times);
  stats.single_stddev_ms = stddev_of(single_times, stats.single_mean_ms);
  stats.pipeline_mean_ms = mean_of(pipeline_times);
  stats.pipeline_stddev_ms = stddev_of(pipeline_times, stats.pipeline_mean_ms);
  stats.passes_per_sample = total_passes / static_cast<double>(pipeline_times.size());
  return stats;
}

std::vector<AblationRow> ablation_run(const moe::ExpertRegistry& registry,
                                      const std::vector<chem::Reaction>& test,
                                      const infer::PredictOptions& options) {
  if (test.empty()) throw std::invalid_argument("empty test set");

  std::vector<chem::MolGraph> reactants;
  std::vector<std::string> truths;
  reactants.reserve(test.size());
  truths.reserve(test.size());
  for (const chem::Reaction& r : test) {
    reactants.push_back(r.reactants);
    truths.push_back(truth_signature(r));
  }

  moe::ExpertRegistry chief_only{registry.chief, {}, registry.fingerprint, {}};

  const auto run = [&](const moe::ExpertRegistry& reg,
                       const infer::PredictOptions& opt,
                       const std::string& label) {
    return AblationRow{label,
                       evaluate(predict_all(reg, reactants, opt), truths, label)};
  };

  std::vector<AblationRow> rows;
  infer::PredictOptions opt = options;
  opt.n_seeds = 0;
  rows.push_back(run(chief_only, opt, "chief_only"));
  rows.push_back(run(registry, opt, "seq_moe_only"));
  opt.n_seeds = options.n_seeds;
  rows.push_back(run(chief_only, opt, "dropout_only"));
  rows.push_back(run(registry, opt, "full"));

  const infer::RankStrategy strategies[] = {
      infer::RankStrategy::selected_chiefdrop_selecteddrop,
      infer::RankStrategy::selected_selecteddrop_chiefdrop,
      infer::RankStrategy::chiefdrop_selected_selecteddrop,
      infer::RankStrategy::chiefdrop_selecteddrop_selected,
      infer::RankStrategy::selecteddrop_selected_chiefdrop,
      infer::RankStrategy::selecteddrop_chiefdrop_selected,
  };
  for (const infer::RankStrategy s : strategies) {
    infer::PredictOptions strat_opt = options;
    strat_opt.strategy = s;
    rows.push_back(
        run(registry, strat_opt, "full/" + infer::rank_strategy_name(s)));
  }
  return rows;
}

std::string report_text(const EvalReport& report) {
  std::string out;
  out += "subset: " + report.subset + "\n";
  out += "reactions: " + std::to_string(report.n_reactions) + "\n";
  for (const auto& [k, v] : report.topk) {
    out += "top-" + std::to_string(k) + ": " + format_value(v) + "\n";
  }
  for (const auto& [k, v] : report.hitrate) {
    out += "hitrate@" + std::to_string(k) + ": " + format_value(v) + "\n";
  }
  out += "avg_list_length: " + format_value(report.avg_l) + "\n";
  if (report.latency_single_ms > 0.0 || report.latency_pipeline_ms > 0.0) {
    out += "latency_single_ms: " + format_value(report.latency_single_ms) + "\n";
    out +=
        "latency_pipeline_ms: " + format_value(report.latency_pipeline_ms) + "\n";
  }
  out += std::string("adjustment_applied: ") +
         (report.adjustment_applied ? "true" : "false") + "\n";
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "metric,K,subset,value\n";
  for (const auto& [k, v] : report.topk) {
    out += "topk," + std::to_string(k) + "," + report.subset + "," +
           format_value(v) + "\n";
  }
  for (const auto& [k, v] : report.hitrate) {
    out += "hitrate," + std::to_string(k) + "," + report.subset + "," +
           format_value(v) + "\n";
  }
  out += "avg_l,," + report.subset + "," + format_value(report.avg_l) + "\n";
  out += "n_reactions,," + report.subset + "," +
         std::to_string(report.n_reactions) + "\n";
  if (report.latency_single_ms > 0.0 || report.latency_pipeline_ms > 0.0) {
    out += "latency_single_ms,," + report.subset + "," +
           format_value(report.latency_single_ms) + "\n";
    out += "latency_pipeline_ms,," + report.subset + "," +
           format_value(report.latency_pipeline_ms) + "\n";
  }
  out += "adjustment,," + report.subset + "," +
         std::string(report.adjustment_applied ? "1" : "0") + "\n";
  return out;
}

}  // namespace erpflow::eval
