//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "erpflow/molgraph.hpp"
#include "erpflow/smiles.hpp"
#include "test_util.hpp"

using namespace erpflow;
using namespace erpflow::chem;

TEST_CASE("bond matrix is symmetric with zero diagonal") {
  MolGraph g(std::vector<Atom>(3));
  g.set_bond(0, 2, 2);
  CHECK(g.bond(0, 2) == 2);
  CHECK(g.bond(2, 0) == 2);
  CHECK(g.bond(1, 1) == 0);
  CHECK_THROWS_AS(g.set_bond(1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.set_bond(0, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(g.set_bond(0, 3, 1), std::out_of_range);
}

TEST_CASE("degree and bond order sum") {
  MolGraph g = parse_smiles("C(=O)O");
  CHECK(g.bond_order_sum(0) == 3);
  CHECK(g.degree(0) == 2);
  CHECK(g.neighbors(0) == std::vector<int>{1, 2});
}

TEST_CASE("validity flags valence overflow") {
  MolGraph g(std::vector<Atom>(2));
  g.atom(0).explicit_h = 3;
  g.atom(1).explicit_h = 3;
  g.set_bond(0, 1, 2);
  auto err = g.validity_error();
  REQUIRE(err.has_value());
  CHECK(err->find("valence") != std::string::npos);

  // Positive charge loosens the budget by one.
  MolGraph n4(std::vector<Atom>{Atom{Element::N, 1, 4, 0}});
  CHECK_FALSE(n4.validity_error().has_value());
  MolGraph n4bad(std::vector<Atom>{Atom{Element::N, 0, 4, 0}});
  CHECK(n4bad.validity_error().has_value());
}

TEST_CASE("electron delta normalizes key order and drops zeros") {
  ElectronDelta d;
  d.set(3, 1, 2);
  CHECK(d.get(1, 3) == 2);
  CHECK(d.get(3, 1) == 2);
  CHECK(d.size() == 1);
  d.set(1, 3, 0);
  CHECK(d.empty());
  CHECK_THROWS_AS(d.set(1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(d.set(0, 1, 4), std::invalid_argument);
}

TEST_CASE("make_reaction builds alignment from atom maps") {
  Reaction r = parse_reaction_line("[CH3:1][Cl:2].[NH3:3]>>[CH3:1][NH2:3]", "x");
  CHECK(r.atom_alignment == std::vector<int>{0, -1, 1});
  CHECK(r.id == "x");
}

TEST_CASE("make_reaction rejects malformed alignments") {
  CHECK_THROWS_WITH_AS(
      parse_reaction_line("[CH3:1][CH3:1]>>[CH3:1][CH3:2]", "x"),
      doctest::Contains("duplicate atom map"), ReactionError);
  CHECK_THROWS_WITH_AS(parse_reaction_line("[CH4:1]>>C", "x"),
                       doctest::Contains("no atom map"), ReactionError);
  CHECK_THROWS_WITH_AS(parse_reaction_line("[CH4:1]>>[NH3:1]", "x"),
                       doctest::Contains("element mismatch"), ReactionError);
  CHECK_THROWS_WITH_AS(parse_reaction_line("[CH4:1]>>[CH4:2]", "x"),
                       doctest::Contains("no reactant source"), ReactionError);
  CHECK_THROWS_WITH_AS(parse_reaction_line("CC", "x"),
                       doctest::Contains(">>"), ReactionError);
  CHECK_THROWS_WITH_AS(parse_reaction_line("C>>C>>C", "x"),
                       doctest::Contains(">>"), ReactionError);
}

TEST_CASE("identity reaction has empty delta") {
  Reaction r = parse_reaction_line("[CH4:1]>>[CH4:1]", "x");
  CHECK(compute_delta(r).empty());
}

TEST_CASE("substitution delta: halide breaks, amine forms") {
  Reaction r = parse_reaction_line("[CH3:1][Cl:2].[NH3:3]>>[CH3:1][NH2:3]", "x");
  ElectronDelta d = compute_delta(r);
  REQUIRE(d.size() == 2);
  CHECK(d.get(0, 1) == -1);
  CHECK(d.get(0, 2) == 1);
}

TEST_CASE("double bond to single is a -1 entry") {
  Reaction r = parse_reaction_line("[CH2:1]=[CH2:2]>>[CH3:1][CH3:2]", "x");
  ElectronDelta d = compute_delta(r);
  REQUIRE(d.size() == 1);
  CHECK(d.get(0, 1) == -1);
}

TEST_CASE("leaving atoms break all incident bonds") {
  // N-N bound leaving group: both its bonds must show up as broken.
  Reaction r =
      parse_reaction_line("[CH3:1][Cl:2].[NH2:3]N>>[CH3:1][NH2:3]", "x");
  ElectronDelta d = compute_delta(r);
  CHECK(d.get(0, 1) == -1);  // C-Cl
  CHECK(d.get(0, 2) == 1);   // C-N formed
  CHECK(d.get(2, 3) == -1);  // N-N to the unmapped leaving N
  CHECK(d.size() == 3);
}

TEST_CASE("apply_delta round trips the product bond matrix") {
  const char* lines[] = {
      "[CH3:1][Cl:2].[NH2:3]>>[CH3:1][NH2:3]",
      "[CH2:1]=[CH2:2].[Br:3][Br:4]>>[CH2:1]([Br:3])[CH2:2][Br:4]",
      "[CH4:1]>>[CH4:1]",
  };
  for (const char* line : lines) {
    Reaction r = parse_reaction_line(line, "x");
    auto p = apply_delta(r.reactants, compute_delta(r));
    REQUIRE(p.has_value());
    for (int i = 0; i < r.reactants.atom_count(); ++i) {
      const int ai = r.atom_alignment[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < r.reactants.atom_count(); ++j) {
        const int aj = r.atom_alignment[static_cast<std::size_t>(j)];
        if (ai >= 0 && aj >= 0) CHECK(p->bond(i, j) == r.product.bond(ai, aj));
      }
    }
  }
}

TEST_CASE("apply_delta flags invalid outcomes") {
  MolGraph g = parse_smiles("CC");
  SUBCASE("empty delta is identity") {
    auto p = apply_delta(g, ElectronDelta{});
    REQUIRE(p.has_value());
    CHECK(p->bond(0, 1) == 1);
  }
  SUBCASE("negative bond") {
    ElectronDelta d;
    d.set(0, 1, -2);
    CHECK_FALSE(apply_delta(g, d).has_value());
  }
  SUBCASE("bond above triple") {
    MolGraph t = parse_smiles("C#C");
    ElectronDelta d;
    d.set(0, 1, 1);
    CHECK_FALSE(apply_delta(t, d).has_value());
  }
  SUBCASE("valence overflow on saturated carbon") {
    ElectronDelta d;
    d.set(0, 1, 1);  // CH3-CH3 to CH3=CH3
    CHECK_FALSE(apply_delta(g, d).has_value());
  }
}

TEST_CASE("apply_delta can prune detached unmapped atoms") {
  Reaction r = parse_reaction_line("[CH3:1]Cl.[NH2:2]>>[CH3:1][NH2:2]", "x");
  ElectronDelta d = compute_delta(r);
  auto kept = apply_delta(r.reactants, d);
  REQUIRE(kept.has_value());
  CHECK(kept->atom_count() == 3);
  auto pruned = apply_delta(r.reactants, d, /*drop_isolated=*/true);
  REQUIRE(pruned.has_value());
  CHECK(pruned->atom_count() == 2);
  for (int i = 0; i < pruned->atom_count(); ++i)
    CHECK(pruned->atom(i).element != Element::Cl);
}

TEST_CASE("canonical signature ignores token order") {
  CHECK(canonical_signature(parse_smiles("CCO")) ==
        canonical_signature(parse_smiles("OCC")));
  CHECK(canonical_signature(parse_smiles("CCO")) !=
        canonical_signature(parse_smiles("CC=O")));
}

TEST_CASE("canonical signature ignores map indices") {
  CHECK(canonical_signature(parse_smiles("[CH3:5][OH:9]")) ==
        canonical_signature(parse_smiles("CO")));
}

TEST_CASE("canonical signature is permutation invariant on random graphs") {
  Rng rng(20260814);
  for (int iter = 0; iter < 500; ++iter) {
    MolGraph g = testutil::random_molecule(rng, 2, 12);
    auto perm = testutil::random_permutation(rng, g.atom_count());
    MolGraph h = testutil::permute_graph(g, perm);
    CHECK(canonical_signature(g) == canonical_signature(h));
  }
}

TEST_CASE("canonical signature separates near-identical graphs") {
  // Same formula C2H6O: ethanol vs dimethyl ether.
  CHECK(canonical_signature(parse_smiles("CCO")) !=
        canonical_signature(parse_smiles("COC")));
  // Charge and explicit H both matter.
  CHECK(canonical_signature(parse_smiles("[OH-]")) !=
        canonical_signature(parse_smiles("[OH2]")));
}

TEST_CASE("pattern signature is a sorted multiset over element pairs") {
  Reaction r = parse_reaction_line("[CH3:1][Cl:2].[NH3:3]>>[CH3:1][NH2:3]", "x");
  CHECK(pattern_signature(compute_delta(r), r) == "C,Cl:-1;C,N:+1");

  Reaction identity = parse_reaction_line("[CH4:1]>>[CH4:1]", "x");
  CHECK(pattern_signature(compute_delta(identity), identity) == "-");

  // Different scaffold, same bond-change multiset.
  Reaction r2 = parse_reaction_line(
      "[CH3:4][CH2:1][Cl:2].[NH3:3]>>[CH3:4][CH2:1][NH2:3]", "x");
  CHECK(pattern_signature(compute_delta(r2), r2) ==
        pattern_signature(compute_delta(r), r));
}

TEST_CASE("reaction file round trip with comments and blank lines") {
  const std::string path = "molgraph_io_test.txt";
  {
    std::ofstream out(path);
    out << "# corpus header\n";
    out << "\n";
    out << "[CH3:1][Cl:2].[NH3:3]>>[CH3:1][NH2:3]\n";
    out << "  # indented comment\n";
    out << "[CH2:1]=[CH2:2]>>[CH3:1][CH3:2]\n";
  }
  auto reactions = read_reaction_file(path);
  REQUIRE(reactions.size() == 2);
  CHECK(reactions[0].id == "1");
  CHECK(reactions[1].id == "2");
  CHECK(compute_delta(reactions[0]).size() == 2);

  write_reaction_file(path, reactions);
  auto again = read_reaction_file(path);
  REQUIRE(again.size() == 2);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(canonical_signature(again[i].reactants) ==
          canonical_signature(reactions[i].reactants));
    CHECK(canonical_signature(again[i].product) ==
          canonical_signature(reactions[i].product));
  }
  std::remove(path.c_str());
}

TEST_CASE("lenient reader reports line numbers and keeps going") {
  const std::string path = "molgraph_io_bad.txt";
  {
    std::ofstream out(path);
    out << "[CH4:1]>>[CH4:1]\n";
    out << "not a reaction\n";
    out << "[CH4:1]>>[CH4:1]\n";
  }
  auto result = read_reaction_file_lenient(path);
  CHECK(result.reactions.size() == 2);
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].find("line 2") != std::string::npos);
  CHECK_THROWS_AS(read_reaction_file(path), ReactionError);
  CHECK_THROWS_AS(read_reaction_file("does_not_exist.txt"), ReactionError);
  std::remove(path.c_str());
}
