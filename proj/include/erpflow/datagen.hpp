//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "erpflow/molgraph.hpp"

namespace erpflow::gen {

// Built-in electron-flow templates over random alkyl scaffolds:
//   amination    R-Cl + H2N-    ->  R-NH2 + Cl       (majority pattern)
//   silylation   R-Cl + H3Si-   ->  R-SiH3 + Cl      (minority pattern)
//   addition     C=C + Br-Br    ->  BrC-CBr          (4-entry delta)
//   elimination  BrC-CBr        ->  C=C + Br-Br      (reverse)
inline constexpr const char* kTemplateNames[] = {"amination", "silylation",
                                                 "addition", "elimination"};

struct TemplateShare {
  std::string name;
  double share = 0.0;
};

struct CorpusSpec {
  std::vector<TemplateShare> templates;
  int total = 1000;
  // Fraction of substitution-family reactions whose reactants carry both
  // the amine and the silane partner, so either template could fire.
  double conflict_fraction = 0.0;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument: unknown or duplicate template name,
  // shares outside (0,1] or not summing to 1, total < 1, fractions out of
  // range.
  void validate() const;
};

// Four-template mix used by the bundled experiments.
CorpusSpec default_spec();

// One conflict-featured reactant paired with every template outcome it
// supports. Truth products are signature-distinct by construction.
struct ConflictCase {
  chem::MolGraph reactants;
  std::vector<chem::Reaction> truths;
};

struct Corpus {
  std::vector<chem::Reaction> train;
  std::vector<chem::Reaction> test;
  std::vector<ConflictCase> conflict_test;
};

// Deterministic under spec.seed; each reaction is a pure function of
// (seed, ordinal), so generation parallelizes over ordinals. Reaction ids
// are "<template>-<ordinal>" with "-x" appended on conflict-featured rows.
// Every emitted reaction is valence-checked and delta-roundtrips at
// generation time.
Corpus generate_corpus(const CorpusSpec& spec);

// Reaction file helpers; one reaction per line, '#' comments ignored.
void write_corpus(const std::string& path,
                  const std::vector<chem::Reaction>& reactions);
std::vector<chem::Reaction> read_corpus(const std::string& path);

// Conflict cases flatten one truth per line; consecutive lines sharing a
// reactant signature regroup into one case on read.
void write_conflicts(const std::string& path,
                     const std::vector<ConflictCase>& cases);
std::vector<ConflictCase> read_conflicts(const std::string& path);

}  // namespace erpflow::gen
