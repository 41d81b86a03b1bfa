//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "erpflow/config.hpp"
#include "erpflow/datagen.hpp"
#include "erpflow/eval.hpp"
#include "erpflow/inference.hpp"
#include "erpflow/seqmoe.hpp"
#include "erpflow/smiles.hpp"

namespace {

using namespace erpflow;

// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 training
// failure.
constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kTrainingError = 3;

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct PredictFlags {
  std::string config_path;
  int top_n = 0;
  int n_seeds = 0;
  double dropout_rate = 0.0;
  std::uint64_t base_seed = 0;
  std::string strategy;
  CLI::Option* top_n_opt = nullptr;
  CLI::Option* n_seeds_opt = nullptr;
  CLI::Option* dropout_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* strategy_opt = nullptr;
};

void add_predict_flags(CLI::App* cmd, PredictFlags* f) {
  cmd->add_option("--config", f->config_path,
                  "Run config file; flags override its [predict] section");
  f->top_n_opt =
      cmd->add_option("--top-n", f->top_n, "Experts selected per reaction");
  f->n_seeds_opt =
      cmd->add_option("--n-seeds", f->n_seeds, "Dropout seeds per model");
  f->dropout_opt = cmd->add_option("--dropout-rate", f->dropout_rate,
                                   "Inference dropout rate");
  f->seed_opt = cmd->add_option("--seed", f->base_seed, "Base dropout seed");
  f->strategy_opt = cmd->add_option(
      "--strategy", f->strategy,
      "Tier order, e.g. chief,selected,chief_drop,selected_drop");
}

// Resolves the run config (file plus flag overrides). Throws ConfigError on
// bad input.
cfg::RunConfig resolve_run_config(const PredictFlags& f) {
  cfg::RunConfig rc;
  if (!f.config_path.empty()) {
    rc = cfg::run_config_from(cfg::Config::load(f.config_path));
  }
  if (f.top_n_opt->count() > 0) rc.predict.top_n = f.top_n;
  if (f.n_seeds_opt->count() > 0) rc.predict.n_seeds = f.n_seeds;
  if (f.dropout_opt->count() > 0) rc.predict.dropout_rate = f.dropout_rate;
  if (f.seed_opt->count() > 0) rc.predict.base_seed = f.base_seed;
  if (f.strategy_opt->count() > 0) {
    try {
      rc.predict.strategy = infer::rank_strategy_from_name(f.strategy);
    } catch (const std::exception&) {
      throw cfg::ConfigError("unknown rank strategy: " + f.strategy);
    }
  }
  return rc;
}

int run_gen_data(const std::string& spec_path, const std::string& out_dir) {
  gen::CorpusSpec spec;
  try {
    spec = cfg::corpus_spec_from(cfg::Config::load(spec_path));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  }
  try {
    const gen::Corpus corpus = gen::generate_corpus(spec);
    std::filesystem::create_directories(out_dir);
    gen::write_corpus(out_dir + "/train.txt", corpus.train);
    gen::write_corpus(out_dir + "/test.txt", corpus.test);
    gen::write_conflicts(out_dir + "/conflict.txt", corpus.conflict_test);

    cfg::Config manifest = cfg::to_config(spec);
    manifest.set("counts", "train", std::to_string(corpus.train.size()));
    manifest.set("counts", "test", std::to_string(corpus.test.size()));
    manifest.set("counts", "conflict_cases",
                 std::to_string(corpus.conflict_test.size()));
    std::ofstream mf(out_dir + "/manifest.cfg", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write manifest");
    mf << manifest.echo();

    std::cout << "wrote " << corpus.train.size() << " train, "
              << corpus.test.size() << " test, " << corpus.conflict_test.size()
              << " conflict cases to " << out_dir << "\n";
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

int run_train(const std::string& config_path, const std::string& train_file,
              const std::string& out_registry) {
  cfg::RunConfig rc;
  try {
    rc = cfg::run_config_from(cfg::Config::load(config_path));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  }
  std::vector<chem::Reaction> dataset;
  try {
    dataset = gen::read_corpus(train_file);
    if (dataset.empty()) throw chem::ReactionError("empty training file");
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
  try {
    std::vector<std::string> log;
    const moe::ExpertRegistry reg = moe::train_registry(dataset, rc.train, &log);
    for (const std::string& line : log) std::cout << line << "\n";
    moe::save_registry(out_registry, reg);
    std::cout << "experts stored: " << reg.experts.size() << "\n";
    std::cout << "training accuracy (chief): "
              << format4(moe::training_accuracy(reg.chief, dataset)) << "\n";
    std::cout << "registry written: " << out_registry << "\n";
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kTrainingError;
  }
}

std::string candidate_token(const infer::RankedPrediction& p, bool verbose) {
  std::string token = chem::write_smiles(p.product);
  if (!verbose) return token;
  token += "[" + std::string(infer::tier_name(p.tier));
  token += " " + (p.expert_id ? std::to_string(*p.expert_id) : std::string("-"));
  token += " " + (p.seed ? std::to_string(*p.seed) : std::string("-"));
  token += " " + (p.similarity ? format4(*p.similarity) : std::string("-"));
  token += "]";
  return token;
}

int run_predict(const std::string& registry_path, const std::string& input,
                const std::string& output, const PredictFlags& flags,
                bool verbose) {
  cfg::RunConfig rc;
  try {
    rc = resolve_run_config(flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  }
  try {
    const moe::ExpertRegistry reg = moe::load_registry(registry_path);
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + input);
    std::ofstream out(output, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file: " + output);

    std::string line;
    int lineno = 0;
    int predicted = 0;
    int skipped = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos || line[start] == '#') continue;
      try {
        const std::string id = std::to_string(lineno);
        chem::MolGraph reactants;
        if (line.find(">>") != std::string::npos) {
          reactants = chem::parse_reaction_line(line, id).reactants;
        } else {
          reactants = chem::parse_smiles(line);
        }
        const infer::PredictionList preds =
            infer::predict(reactants, reg, rc.predict);
        out << id << " ";
        if (preds.empty()) {
          out << "-";
        } else {
          for (std::size_t i = 0; i < preds.size(); ++i) {
            if (i > 0) out << "|";
            out << candidate_token(preds[i], verbose);
          }
        }
        out << "\n";
        ++predicted;
      } catch (const std::exception& e) {
        std::cerr << "line " << lineno << ": " << e.what() << "\n";
        ++skipped;
      }
    }
    std::cout << "predicted " << predicted << " reactions, skipped " << skipped
              << "\n";
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

// Appends `csv` to `sink`, dropping the header line when sink already has
// one.
void append_csv(std::string& sink, const std::string& csv) {
  if (sink.empty()) {
    sink = csv;
    return;
  }
  const std::size_t eol = csv.find('\n');
  sink += csv.substr(eol + 1);
}

int run_eval(const std::string& registry_path, const std::string& train_file,
             const std::string& test_file, const std::string& conflict_file,
             const std::string& out_text, const std::string& out_csv,
             const PredictFlags& flags, double rare_threshold_flag,
             CLI::Option* rare_opt, bool adjust_uspto_flag,
             CLI::Option* adjust_opt, int min_truths_flag,
             CLI::Option* min_truths_opt, bool ablation, int latency_reps) {
  cfg::RunConfig rc;
  try {
    rc = resolve_run_config(flags);
    if (rare_opt->count() > 0) rc.rare_threshold = rare_threshold_flag;
    if (adjust_opt->count() > 0) rc.adjust_uspto = adjust_uspto_flag;
    if (min_truths_opt->count() > 0) rc.hitrate_min_truths = min_truths_flag;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  }
  try {
    const moe::ExpertRegistry reg = moe::load_registry(registry_path);
    const std::vector<chem::Reaction> test = gen::read_corpus(test_file);
    if (test.empty()) throw chem::ReactionError("empty test file");

    std::vector<chem::MolGraph> reactants;
    std::vector<std::string> truths;
    std::vector<std::set<std::string>> truth_sets;
    for (const chem::Reaction& r : test) {
      reactants.push_back(r.reactants);
      truths.push_back(eval::truth_signature(r));
      truth_sets.push_back({truths.back()});
    }

    std::string text;
    std::string csv;
    const auto emit = [&](const eval::EvalReport& report) {
      text += eval::report_text(report) + "\n";
      append_csv(csv, eval::report_csv(report));
    };

    const std::vector<eval::ScoredList> preds =
        eval::predict_all(reg, reactants, rc.predict);
    eval::EvalReport all =
        eval::evaluate(preds, truths, "all", rc.adjust_uspto);

    if (latency_reps > 0) {
      std::vector<chem::MolGraph> samples(
          reactants.begin(),
          reactants.begin() + std::min<std::size_t>(reactants.size(), 8));
      const eval::LatencyStats stats =
          eval::latency_benchmark(reg, samples, latency_reps, rc.predict);
      all.latency_single_ms = stats.single_mean_ms;
      all.latency_pipeline_ms = stats.pipeline_mean_ms;
      text += "passes_per_sample: " + format4(stats.passes_per_sample) + "\n";
    }
    emit(all);

    // Length histogram over the full test set.
    const auto groups = eval::groupwise_report(preds, truth_sets);
    for (const auto& [len, stats] : groups) {
      text += "group length " + std::to_string(len) + ": fraction " +
              format4(stats.fraction) + ", hitrate " + format4(stats.hitrate) +
              "\n";
    }
    text += "\n";

    if (!train_file.empty()) {
      const std::vector<chem::Reaction> train = gen::read_corpus(train_file);
      const std::vector<chem::Reaction> rare =
          eval::rare_subset(train, test, rc.rare_threshold);
      if (!rare.empty()) {
        std::vector<chem::MolGraph> rare_reactants;
        std::vector<std::string> rare_truths;
        for (const chem::Reaction& r : rare) {
          rare_reactants.push_back(r.reactants);
          rare_truths.push_back(eval::truth_signature(r));
        }
        emit(eval::evaluate(eval::predict_all(reg, rare_reactants, rc.predict),
                            rare_truths, "rare", rc.adjust_uspto));
      } else {
        text += "rare subset empty at threshold " +
                format4(rc.rare_threshold) + "\n\n";
      }
    }

    if (!conflict_file.empty()) {
      const std::vector<gen::ConflictCase> cases =
          gen::read_conflicts(conflict_file);
      if (cases.empty()) throw chem::ReactionError("empty conflict file");
      std::vector<chem::MolGraph> conflict_reactants;
      std::vector<std::set<std::string>> conflict_truths;
      for (const gen::ConflictCase& c : cases) {
        conflict_reactants.push_back(c.reactants);
        std::set<std::string> sigs;
        for (const chem::Reaction& t : c.truths) {
          sigs.insert(chem::canonical_signature(t.product));
        }
        conflict_truths.push_back(std::move(sigs));
      }
      const std::vector<eval::ScoredList> conflict_preds =
          eval::predict_all(reg, conflict_reactants, rc.predict);
      eval::EvalReport conflict;
      conflict.subset = "conflict";
      conflict.n_reactions = static_cast<int>(cases.size());
      conflict.avg_l = eval::avg_list_length(conflict_preds);
      eval::add_hitrate(conflict, conflict_preds, conflict_truths,
                        rc.hitrate_min_truths);
      emit(conflict);
    }

    if (ablation) {
      for (const eval::AblationRow& row : eval::ablation_run(reg, test, rc.predict)) {
        emit(row.report);
      }
    }

    std::cout << text;
    if (!out_text.empty()) {
      std::ofstream f(out_text, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write report: " + out_text);
      f << text;
    }
    if (!out_csv.empty()) {
      std::ofstream f(out_csv, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write csv: " + out_csv);
      f << csv;
    }
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

int run_inspect(const std::string& registry_path) {
  try {
    const moe::ExpertRegistry reg = moe::load_registry(registry_path);
    std::cout << "experts: " << reg.experts.size() << "\n";
    std::cout << "fingerprint: radius " << reg.fingerprint.radius << ", length "
              << reg.fingerprint.length << "\n";
    for (const moe::ExpertRecord& e : reg.experts) {
      double norm2 = 0.0;
      for (const double v : e.centroid.values) norm2 += v * v;
      std::cout << "expert " << e.expert_id << ": captured "
                << e.correct_ids.size() << ", centroid_norm "
                << format4(std::sqrt(norm2)) << "\n";
    }
    std::cout << "manifest:\n";
    for (const auto& [k, v] : reg.manifest) {
      std::cout << "  " << k << " = " << v << "\n";
    }
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electron redistribution prediction engine"};
  app.require_subcommand(1);

  auto* gen_cmd = app.add_subcommand(
      "gen-data", "Generate a synthetic reaction corpus from a spec file");
  std::string spec_path;
  std::string out_dir;
  gen_cmd->add_option("--spec", spec_path, "Corpus spec config file")
      ->required();
  gen_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* train_cmd = app.add_subcommand(
      "train", "Train chief, expert chain, and routing registry");
  std::string train_config;
  std::string train_file;
  std::string out_registry;
  train_cmd->add_option("--config", train_config, "Run config file")
      ->required();
  train_cmd->add_option("--train", train_file, "Training reaction file")
      ->required();
  train_cmd->add_option("--out", out_registry, "Registry output path")
      ->required();

  auto* predict_cmd =
      app.add_subcommand("predict", "Predict ranked products per input line");
  std::string registry_path;
  std::string predict_input;
  std::string predict_output;
  bool verbose = false;
  PredictFlags predict_flags;
  predict_cmd->add_option("--registry", registry_path, "Registry file")
      ->required();
  predict_cmd
      ->add_option("--input", predict_input,
                   "Reactant SMILES or reaction lines, one per line")
      ->required();
  predict_cmd->add_option("--output", predict_output, "Prediction output file")
      ->required();
  predict_cmd->add_flag("--verbose", verbose,
                        "Append [tier expert seed similarity] per candidate");
  add_predict_flags(predict_cmd, &predict_flags);

  auto* eval_cmd = app.add_subcommand(
      "eval", "Score a registry on a test corpus and print reports");
  std::string eval_registry;
  std::string eval_train;
  std::string eval_test;
  std::string eval_conflict;
  std::string eval_out;
  std::string eval_csv;
  PredictFlags eval_flags;
  double rare_threshold = 0.01;
  bool adjust_uspto = false;
  int min_truths = 2;
  bool ablation = false;
  int latency_reps = 0;
  eval_cmd->add_option("--registry", eval_registry, "Registry file")
      ->required();
  eval_cmd->add_option("--test-file", eval_test, "Test reaction file")
      ->required();
  eval_cmd->add_option("--train-file", eval_train,
                       "Training file for rare-pattern frequencies");
  eval_cmd->add_option("--conflict", eval_conflict,
                       "Conflict case file for multi-selectivity hitrate");
  eval_cmd->add_option("--output", eval_out, "Text report path");
  eval_cmd->add_option("--csv", eval_csv, "CSV report path");
  CLI::Option* rare_opt = eval_cmd->add_option(
      "--rare-threshold", rare_threshold, "Rare-pattern frequency threshold");
  CLI::Option* adjust_opt = eval_cmd->add_flag(
      "--adjust-uspto", adjust_uspto,
      "Subtract the 0.3 point reporting adjustment from Top-K");
  CLI::Option* min_truths_opt = eval_cmd->add_option(
      "--min-truths", min_truths, "Minimum distinct truths for hitrate rows");
  eval_cmd->add_flag("--ablation", ablation,
                     "Add component knockouts and all six tier orders");
  eval_cmd->add_option("--latency-reps", latency_reps,
                       "Latency benchmark repetitions (0 disables)");
  add_predict_flags(eval_cmd, &eval_flags);

  auto* inspect_cmd =
      app.add_subcommand("inspect-registry", "Print registry contents");
  std::string inspect_path;
  inspect_cmd->add_option("--registry", inspect_path, "Registry file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  if (gen_cmd->parsed()) return run_gen_data(spec_path, out_dir);
  if (train_cmd->parsed()) {
    return run_train(train_config, train_file, out_registry);
  }
  if (predict_cmd->parsed()) {
    return run_predict(registry_path, predict_input, predict_output,
                       predict_flags, verbose);
  }
  if (eval_cmd->parsed()) {
    return run_eval(eval_registry, eval_train, eval_test, eval_conflict,
                    eval_out, eval_csv, eval_flags, rare_threshold, rare_opt,
                    adjust_uspto, adjust_opt, min_truths, min_truths_opt,
                    ablation, latency_reps);
  }
  if (inspect_cmd->parsed()) return run_inspect(inspect_path);
  return kUsageError;
}
