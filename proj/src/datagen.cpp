//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <utility>

#include "erpflow/hash.hpp"
#include "erpflow/rng.hpp"
#include "erpflow/threading.hpp"

namespace erpflow::gen {

namespace {

enum TemplateIdx : int {
  kAmination = 0,
  kSilylation = 1,
  kAddition = 2,
  kElimination = 3,
};

int template_index(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    if (name == kTemplateNames[i]) return i;
  }
  return -1;
}

chem::Atom carbon() { return chem::Atom{chem::Element::C, 0, 0, 0}; }

chem::Atom fragment_atom(chem::Element e, int explicit_h) {
  return chem::Atom{e, 0, explicit_h, 0};
}

// Random carbon skeleton: a chain, an optional ring closure, up to two
// methyl branches. Hydrogens and map indices are filled by the caller once
// the functional sites are attached.
chem::MolGraph skeleton(Rng& rng, int min_c, int max_c, bool allow_ring) {
  const int n = min_c + static_cast<int>(rng.below(
                            static_cast<std::uint64_t>(max_c - min_c + 1)));
  std::vector<chem::Atom> atoms(static_cast<std::size_t>(n), carbon());
  chem::MolGraph g(std::move(atoms));
  for (int i = 0; i + 1 < n; ++i) g.set_bond(i, i + 1, 1);
  if (allow_ring && n >= 4 && rng.bernoulli(0.25)) {
    const int ring = 3 + static_cast<int>(rng.below(
                             static_cast<std::uint64_t>(n - 2)));
    g.set_bond(0, ring - 1, 1);
  }
  for (int b = 0; b < 2; ++b) {
    if (!rng.bernoulli(0.3)) continue;
    const int pos = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (g.bond_order_sum(pos) > 2) continue;
    const int methyl = g.add_atom(carbon());
    g.set_bond(pos, methyl, 1);
  }
  return g;
}

void finish_graph(chem::MolGraph& g) {
  for (int i = 0; i < g.atom_count(); ++i) {
    chem::Atom& a = g.atom(i);
    if (a.element == chem::Element::C) {
      a.explicit_h = 4 - g.bond_order_sum(i);
    }
    a.map_index = i + 1;
  }
  if (const auto err = g.validity_error()) {
    throw std::logic_error("generated reactant invalid: " + *err);
  }
}

int pick_site(Rng& rng, const chem::MolGraph& g, int max_sum) {
  std::vector<int> eligible;
  for (int i = 0; i < g.atom_count(); ++i) {
    if (g.bond_order_sum(i) <= max_sum) eligible.push_back(i);
  }
  if (eligible.empty()) throw std::logic_error("no eligible site");
  return eligible[rng.below(eligible.size())];
}

std::pair<int, int> pick_adjacent_pair(Rng& rng, const chem::MolGraph& g) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < g.atom_count(); ++i) {
    for (int j = i + 1; j < g.atom_count(); ++j) {
      if (g.bond(i, j) == 1 && g.bond_order_sum(i) <= 3 &&
          g.bond_order_sum(j) <= 3) {
        pairs.emplace_back(i, j);
      }
    }
  }
  if (pairs.empty()) throw std::logic_error("no eligible bond pair");
  return pairs[rng.below(pairs.size())];
}

struct SubstitutionSites {
  int carbon = -1;
  int chloride = -1;
  int amine = -1;   // -1 when absent
  int silane = -1;  // -1 when absent
};

// Scaffold plus a C-Cl site and the requested coupling partners as free
// fragments.
chem::MolGraph substitution_reactant(Rng& rng, bool with_amine,
                                     bool with_silane,
                                     SubstitutionSites* sites) {
  chem::MolGraph g = skeleton(rng, 2, 6, true);
  sites->carbon = pick_site(rng, g, 3);
  sites->chloride = g.add_atom(fragment_atom(chem::Element::Cl, 0));
  g.set_bond(sites->carbon, sites->chloride, 1);
  if (with_amine) {
    sites->amine = g.add_atom(fragment_atom(chem::Element::N, 2));
  }
  if (with_silane) {
    sites->silane = g.add_atom(fragment_atom(chem::Element::Si, 3));
  }
  finish_graph(g);
  return g;
}

chem::ElectronDelta substitution_delta(const SubstitutionSites& sites,
                                       bool aminate) {
  chem::ElectronDelta d;
  d.set(sites.carbon, sites.chloride, -1);
  d.set(sites.carbon, aminate ? sites.amine : sites.silane, +1);
  return d;
}

// Giving one atom an extra hydrogen and hashing separates automorphism
// orbits: equal strings mean the two atoms are structural twins, so no
// graph function can tell them apart.
std::string marked_signature(chem::MolGraph g, int atom) {
  g.atom(atom).explicit_h += 1;
  return chem::canonical_signature(g);
}

chem::Reaction realize(const chem::MolGraph& reactants,
                       const chem::ElectronDelta& delta, std::string id) {
  const auto product = chem::apply_delta(reactants, delta);
  if (!product.has_value()) {
    throw std::logic_error("template delta does not apply: " + id);
  }
  chem::Reaction r = chem::make_reaction(reactants, *product, std::move(id));
  if (!(chem::compute_delta(r) == delta)) {
    throw std::logic_error("delta round-trip mismatch: " + r.id);
  }
  const auto again = chem::apply_delta(r.reactants, chem::compute_delta(r));
  if (!again.has_value()) {
    throw std::logic_error("recomputed delta does not apply: " + r.id);
  }
  for (int i = 0; i < r.product.atom_count(); ++i) {
    for (int j = 0; j < r.product.atom_count(); ++j) {
      if (again->bond(i, j) != r.product.bond(i, j)) {
        throw std::logic_error("product bond matrix mismatch: " + r.id);
      }
    }
  }
  return r;
}

struct Row {
  chem::Reaction reaction;
  std::vector<chem::Reaction> truths;  // filled on conflict rows
  bool conflict = false;
};

Row make_row(const CorpusSpec& spec, const std::vector<double>& cumulative,
             const std::vector<int>& template_ids, int ordinal) {
  Rng rng(mix64(mix64(spec.seed, 0xD0ULL), static_cast<std::uint64_t>(ordinal)));

  const double u = rng.real();
  std::size_t pick = 0;
  while (pick + 1 < cumulative.size() && u >= cumulative[pick]) ++pick;
  const int tmpl = template_ids[pick];

  const bool substitution = tmpl == kAmination || tmpl == kSilylation;
  const bool conflict = substitution && rng.bernoulli(spec.conflict_fraction);

  const std::string suffix =
      (conflict ? "-x-" : "-") + std::to_string(ordinal);

  Row row;
  row.conflict = conflict;
  switch (tmpl) {
    case kAmination:
    case kSilylation: {
      SubstitutionSites sites;
      const chem::MolGraph reactants = substitution_reactant(
          rng, conflict || tmpl == kAmination, conflict || tmpl == kSilylation,
          &sites);
      row.reaction =
          realize(reactants, substitution_delta(sites, tmpl == kAmination),
                  std::string(kTemplateNames[tmpl]) + suffix);
      if (conflict) {
        row.truths.push_back(realize(reactants, substitution_delta(sites, true),
                                     "amination-cx-" + std::to_string(ordinal)));
        row.truths.push_back(
            realize(reactants, substitution_delta(sites, false),
                    "silylation-cx-" + std::to_string(ordinal)));
        const std::string a = chem::canonical_signature(row.truths[0].product);
        const std::string b = chem::canonical_signature(row.truths[1].product);
        if (a == b) {
          throw std::logic_error("conflict truths collapse to one signature");
        }
      }
      break;
    }
    case kAddition: {
      // Bromine chloride adds across a terminal double bond, bromine to
      // the terminal carbon. Anchoring one end at degree 1 keeps the
      // regiochemistry a function of the graph and inside the model's
      // receptive field; skeletons without a terminal bond are rebuilt.
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 64) {
          throw std::logic_error("no terminal alkene site found");
        }
        chem::MolGraph g = skeleton(rng, 3, 6, true);
        std::vector<std::pair<int, int>> bonds;  // (terminal, inner)
        for (int i = 0; i < g.atom_count(); ++i) {
          for (int j = i + 1; j < g.atom_count(); ++j) {
            if (g.bond(i, j) != 1) continue;
            if (g.bond_order_sum(i) > 3 || g.bond_order_sum(j) > 3) continue;
            const bool ti = g.degree(i) == 1;
            const bool tj = g.degree(j) == 1;
            if (ti == tj) continue;
            bonds.emplace_back(ti ? i : j, ti ? j : i);
          }
        }
        if (bonds.empty()) continue;
        const auto [tc, ic] = bonds[rng.below(bonds.size())];
        g.set_bond(tc, ic, 2);
        const int br = g.add_atom(fragment_atom(chem::Element::Br, 0));
        const int cl = g.add_atom(fragment_atom(chem::Element::Cl, 0));
        g.set_bond(br, cl, 1);
        finish_graph(g);
        if (marked_signature(g, tc) == marked_signature(g, ic)) continue;
        chem::ElectronDelta d;
        d.set(tc, ic, -1);
        d.set(br, cl, -1);
        d.set(tc, br, +1);
        d.set(ic, cl, +1);
        row.reaction =
            realize(g, d, std::string(kTemplateNames[tmpl]) + suffix);
        break;
      }
      break;
    }
    case kElimination: {
      // Vicinal bromide plus chloride eliminate to the alkene and BrCl.
      // Mixed halogens keep every changed pair graph-determined even on a
      // symmetric backbone.
      chem::MolGraph g = skeleton(rng, 2, 6, true);
      const auto [c1, c2] = pick_adjacent_pair(rng, g);
      const int br = g.add_atom(fragment_atom(chem::Element::Br, 0));
      const int cl = g.add_atom(fragment_atom(chem::Element::Cl, 0));
      g.set_bond(c1, br, 1);
      g.set_bond(c2, cl, 1);
      finish_graph(g);
      chem::ElectronDelta d;
      d.set(c1, c2, +1);
      d.set(br, cl, +1);
      d.set(c1, br, -1);
      d.set(c2, cl, -1);
      row.reaction = realize(g, d, std::string(kTemplateNames[tmpl]) + suffix);
      break;
    }
    default:
      throw std::logic_error("unknown template index");
  }
  return row;
}

}  // namespace

void CorpusSpec::validate() const {
  if (templates.empty()) {
    throw std::invalid_argument("at least one template share is required");
  }
  double sum = 0.0;
  std::set<std::string> seen;
  for (const TemplateShare& t : templates) {
    if (template_index(t.name) < 0) {
      throw std::invalid_argument("unknown template: " + t.name);
    }
    if (!seen.insert(t.name).second) {
      throw std::invalid_argument("duplicate template: " + t.name);
    }
    if (!(t.share > 0.0 && t.share <= 1.0)) {
      throw std::invalid_argument("template share outside (0,1]: " + t.name);
    }
    sum += t.share;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("template shares must sum to 1");
  }
  if (total < 1) throw std::invalid_argument("total must be positive");
  if (conflict_fraction < 0.0 || conflict_fraction > 1.0) {
    throw std::invalid_argument("conflict fraction outside [0,1]");
  }
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw std::invalid_argument("test fraction outside [0,1)");
  }
}

CorpusSpec default_spec() {
  CorpusSpec spec;
  spec.templates = {{"amination", 0.72},
                    {"silylation", 0.08},
                    {"addition", 0.10},
                    {"elimination", 0.10}};
  return spec;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();

  std::vector<double> cumulative;
  std::vector<int> template_ids;
  double running = 0.0;
  for (const TemplateShare& t : spec.templates) {
    running += t.share;
    cumulative.push_back(running);
    template_ids.push_back(template_index(t.name));
  }
  cumulative.back() = 1.0;

  std::vector<Row> rows(static_cast<std::size_t>(spec.total));
  parallel_for(spec.total, [&](int i) {
    rows[static_cast<std::size_t>(i)] =
        make_row(spec, cumulative, template_ids, i);
  });

  std::vector<int> order(static_cast<std::size_t>(spec.total));
  for (int i = 0; i < spec.total; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng split_rng(mix64(spec.seed, 0x51ULL));
  split_rng.shuffle(order);
  const int n_test = static_cast<int>(
      std::lround(static_cast<double>(spec.total) * spec.test_fraction));
  std::vector<bool> in_test(static_cast<std::size_t>(spec.total), false);
  for (int i = 0; i < n_test; ++i) {
    in_test[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  }

  Corpus corpus;
  std::set<std::string> conflict_seen;
  for (int i = 0; i < spec.total; ++i) {
    Row& row = rows[static_cast<std::size_t>(i)];
    if (row.conflict) {
      const std::string sig = chem::canonical_signature(row.reaction.reactants);
      if (conflict_seen.insert(sig).second) {
        corpus.conflict_test.push_back(
            ConflictCase{row.reaction.reactants, std::move(row.truths)});
      }
    }
    (in_test[static_cast<std::size_t>(i)] ? corpus.test : corpus.train)
        .push_back(std::move(row.reaction));
  }
  return corpus;
}

void write_corpus(const std::string& path,
                  const std::vector<chem::Reaction>& reactions) {
  chem::write_reaction_file(path, reactions);
}

std::vector<chem::Reaction> read_corpus(const std::string& path) {
  return chem::read_reaction_file(path);
}

void write_conflicts(const std::string& path,
                     const std::vector<ConflictCase>& cases) {
  std::vector<chem::Reaction> flat;
  for (const ConflictCase& c : cases) {
    for (const chem::Reaction& r : c.truths) flat.push_back(r);
  }
  chem::write_reaction_file(path, flat);
}

std::vector<ConflictCase> read_conflicts(const std::string& path) {
  const std::vector<chem::Reaction> flat = chem::read_reaction_file(path);
  std::vector<ConflictCase> cases;
  std::string last_sig;
  for (const chem::Reaction& r : flat) {
    const std::string sig = chem::canonical_signature(r.reactants);
    if (cases.empty() || sig != last_sig) {
      cases.push_back(ConflictCase{r.reactants, {}});
      last_sig = sig;
    }
    cases.back().truths.push_back(r);
  }
  return cases;
}

}  // namespace erpflow::gen
