//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "erpflow/fingerprint.hpp"
#include "erpflow/smiles.hpp"
#include "test_util.hpp"

using namespace erpflow;
using namespace erpflow::fp;
using erpflow::chem::parse_smiles;

namespace {
std::uint64_t mass(const Fingerprint& f) {
  return std::accumulate(f.counts.begin(), f.counts.end(), std::uint64_t{0});
}
}  // namespace

TEST_CASE("identical graphs give identical fingerprints") {
  const auto a = morgan_fingerprint(parse_smiles("CC(=O)O"), 2, 2048);
  const auto b = morgan_fingerprint(parse_smiles("CC(=O)O"), 2, 2048);
  CHECK(a.counts == b.counts);
}

TEST_CASE("radius zero counts atom environments") {
  const auto cc = morgan_fingerprint(parse_smiles("CC"), 0, 64);
  const auto ccc = morgan_fingerprint(parse_smiles("CCC"), 0, 64);
  CHECK(mass(cc) == 2);
  CHECK(mass(ccc) == 3);
  // Both CH3 carbons of ethane share one environment bucket.
  int nonzero = 0;
  for (const auto v : cc.counts) nonzero += v != 0;
  CHECK(nonzero == 1);
  CHECK(cc.counts != ccc.counts);
}

TEST_CASE("total mass is atoms times shells") {
  const auto f = morgan_fingerprint(parse_smiles("CC(=O)OC1CCC1"), 2, 2048);
  CHECK(mass(f) == 8 * 3);
}

TEST_CASE("empty graph gives the zero vector") {
  const auto f = morgan_fingerprint(chem::MolGraph{}, 2, 128);
  CHECK(mass(f) == 0);
  CHECK(f.counts.size() == 128);
}

TEST_CASE("fingerprints ignore atom order and maps") {
  Rng rng(99);
  for (int iter = 0; iter < 200; ++iter) {
    chem::MolGraph g = testutil::random_molecule(rng, 2, 12, iter % 2 == 0);
    auto perm = testutil::random_permutation(rng, g.atom_count());
    chem::MolGraph h = testutil::permute_graph(g, perm);
    for (int i = 0; i < h.atom_count(); ++i) h.atom(i).map_index = 0;
    const auto fg = morgan_fingerprint(g, 2, 512);
    const auto fh = morgan_fingerprint(h, 2, 512);
    CHECK(fg.counts == fh.counts);
  }
}

TEST_CASE("cosine similarity formula") {
  Fingerprint a{{1, 1, 0}};
  Fingerprint b{{1, 0, 0}};
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  Fingerprint e1{{1, 0, 0}};
  Fingerprint e2{{0, 1, 0}};
  CHECK(cosine_similarity(e1, e2) == 0.0);
  Fingerprint zero{{0, 0, 0}};
  CHECK(cosine_similarity(a, zero) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(a, Fingerprint{{1, 2}}),
                  std::invalid_argument);
}

TEST_CASE("cosine stays within unit interval on random counts") {
  Rng rng(4242);
  for (int iter = 0; iter < 300; ++iter) {
    Fingerprint a, b;
    for (int i = 0; i < 32; ++i) {
      a.counts.push_back(static_cast<std::uint32_t>(rng.below(5)));
      b.counts.push_back(static_cast<std::uint32_t>(rng.below(5)));
    }
    const double s = cosine_similarity(a, b);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("centroid is the element-wise mean") {
  Fingerprint a{{2, 0, 4}};
  const Centroid single = centroid({a});
  CHECK(single.values == std::vector<double>{2.0, 0.0, 4.0});

  Fingerprint e1{{1, 0}};
  Fingerprint e2{{0, 1}};
  const Centroid mixed = centroid({e1, e2});
  CHECK(mixed.values == std::vector<double>{0.5, 0.5});

  CHECK_THROWS_AS(centroid({}), std::invalid_argument);
}

TEST_CASE("centroid of random vectors matches direct summation") {
  Rng rng(31337);
  std::vector<Fingerprint> fps(100);
  std::vector<double> sum(16, 0.0);
  for (auto& f : fps) {
    for (int i = 0; i < 16; ++i) {
      const auto v = static_cast<std::uint32_t>(rng.below(9));
      f.counts.push_back(v);
      sum[static_cast<std::size_t>(i)] += v;
    }
  }
  const Centroid c = centroid(fps);
  for (int i = 0; i < 16; ++i)
    CHECK(c.values[static_cast<std::size_t>(i)] ==
          doctest::Approx(sum[static_cast<std::size_t>(i)] / 100.0).epsilon(1e-12));
}

TEST_CASE("similar molecules score higher than dissimilar ones") {
  const auto base = morgan_fingerprint(parse_smiles("CCCCCl"), 2, 2048);
  const auto close_one = morgan_fingerprint(parse_smiles("CCCCCCl"), 2, 2048);
  const auto far_one = morgan_fingerprint(parse_smiles("O=S(=O)(O)O"), 2, 2048);
  CHECK(cosine_similarity(base, close_one) > cosine_similarity(base, far_one));
}
