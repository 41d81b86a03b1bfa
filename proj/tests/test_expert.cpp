//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "erpflow/expert.hpp"
#include "erpflow/molgraph.hpp"
#include "erpflow/smiles.hpp"
#include "test_util.hpp"

using namespace erpflow;
using namespace erpflow::model;
using erpflow::ad::Tensor;
using erpflow::chem::ElectronDelta;
using erpflow::chem::MolGraph;
using erpflow::chem::Reaction;

namespace {

ExpertConfig tiny_config() {
  ExpertConfig cfg;
  cfg.embed_dim = 8;
  cfg.gnn_rounds = 1;
  cfg.attn_layers = 1;
  cfg.attn_heads = 2;
  cfg.channels = 8;
  cfg.dropout_rate = 0.1;
  cfg.max_atoms = 16;
  return cfg;
}

Reaction amination() {
  return chem::parse_reaction_line("[CH3:1][Cl:2].[NH2:3]>>[CH3:1][NH2:3]",
                                   "rx-amination");
}

// Independent channel-sum evaluation: sum formation minus breaking, then
// average ordered pairs.
Tensor combine_channels(const std::vector<Tensor>& plus,
                        const std::vector<Tensor>& minus) {
  const int n = plus.front().rows();
  Tensor delta(n, n);
  for (const Tensor& w : plus)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) delta.at(i, j) += w.at(i, j);
  for (const Tensor& w : minus)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) delta.at(i, j) -= w.at(i, j);
  Tensor sym(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      sym.at(i, j) = 0.5 * (delta.at(i, j) + delta.at(j, i));
  return sym;
}

}  // namespace

TEST_CASE("config validation") {
  ExpertConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.embed_dim = 30;
  cfg.attn_heads = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.gnn_rounds = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.max_atoms = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("single atom encodes to a finite row") {
  const Expert e = Expert::init(tiny_config(), 7);
  const Tensor h = e.encode(chem::parse_smiles("C"));
  CHECK(h.rows() == 1);
  CHECK(h.cols() == 8);
  CHECK(h.all_finite());
}

TEST_CASE("encode rejects empty and oversized graphs") {
  ExpertConfig cfg = tiny_config();
  cfg.max_atoms = 4;
  const Expert e = Expert::init(cfg, 7);
  CHECK_THROWS_AS(e.encode(MolGraph()), std::invalid_argument);
  CHECK_THROWS_AS(e.encode(chem::parse_smiles("CCCCC")),
                  std::invalid_argument);
  CHECK_NOTHROW(e.encode(chem::parse_smiles("CCCC")));
}

TEST_CASE("dropout-off path is deterministic; fixed seed reproduces") {
  const Expert e = Expert::init(tiny_config(), 11);
  const MolGraph g = chem::parse_smiles("CC(=O)NC");

  const Tensor a = e.encode(g);
  const Tensor b = e.encode(g);
  CHECK(a.raw() == b.raw());

  DropoutPlan plan;
  plan.enabled = true;
  plan.rate = 0.3;
  plan.seed = 42;
  const Tensor c = e.encode(g, plan);
  const Tensor d = e.encode(g, plan);
  CHECK(c.raw() == d.raw());

  plan.seed = 43;
  const Tensor f = e.encode(g, plan);
  CHECK(c.raw() != f.raw());
  CHECK(a.raw() != c.raw());
}

TEST_CASE("encoding commutes with atom permutation") {
  Rng rng(2026);
  for (int trial = 0; trial < 30; ++trial) {
    const MolGraph g = testutil::random_molecule(rng, 2, 10);
    const std::vector<int> perm =
        testutil::random_permutation(rng, g.atom_count());
    const MolGraph p = testutil::permute_graph(g, perm);
    const Expert e = Expert::init(tiny_config(), 100 + trial);

    const Tensor hg = e.encode(g);
    const Tensor hp = e.encode(p);
    for (int i = 0; i < g.atom_count(); ++i) {
      const int pi = perm[static_cast<std::size_t>(i)];
      for (int c = 0; c < hg.cols(); ++c) {
        CHECK(hg.at(i, c) == doctest::Approx(hp.at(pi, c)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("zero-parameter model points uniformly") {
  ExpertConfig cfg = tiny_config();
  Expert e(cfg);  // all-zero weights
  const MolGraph g = chem::parse_smiles("CCCO");
  const int n = g.atom_count();
  const Expert::PointerWeights w = e.pointer_scores(g);
  REQUIRE(w.plus.size() == 8);
  REQUIRE(w.minus.size() == 8);
  for (const auto& group : {w.plus, w.minus}) {
    for (const Tensor& m : group) {
      REQUIRE(m.rows() == n);
      REQUIRE(m.cols() == n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i == j) {
            CHECK(m.at(i, j) == 0.0);
          } else {
            CHECK(m.at(i, j) == doctest::Approx(1.0 / n).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("pointer weights live in (0,1) and rows keep virtual mass") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MolGraph g = testutil::random_molecule(rng, 2, 12);
    const Expert e = Expert::init(tiny_config(), 900 + trial);
    const Expert::PointerWeights w = e.pointer_scores(g);
    const int n = g.atom_count();
    for (const auto& group : {w.plus, w.minus}) {
      for (const Tensor& m : group) {
        for (int i = 0; i < n; ++i) {
          double row = 0.0;
          for (int j = 0; j < n; ++j) {
            if (i == j) {
              CHECK(m.at(i, j) == 0.0);
              continue;
            }
            CHECK(m.at(i, j) > 0.0);
            CHECK(m.at(i, j) < 1.0);
            row += m.at(i, j);
          }
          CHECK(row < 1.0);
        }
      }
    }
  }
}

TEST_CASE("soft delta equals the independent channel-sum evaluation") {
  Rng rng(17);
  for (int trial = 0; trial < 15; ++trial) {
    const MolGraph g = testutil::random_molecule(rng, 2, 10);
    const Expert e = Expert::init(tiny_config(), 40 + trial);
    const Tensor soft = e.predict_soft_delta(g);
    const Expert::PointerWeights w = e.pointer_scores(g);
    const Tensor oracle = combine_channels(w.plus, w.minus);
    REQUIRE(soft.same_shape(oracle));
    for (int i = 0; i < soft.rows(); ++i)
      for (int j = 0; j < soft.cols(); ++j)
        CHECK(soft.at(i, j) == doctest::Approx(oracle.at(i, j)).epsilon(1e-12));
  }
}

TEST_CASE("channel-sum arithmetic: lone 0.8 entry symmetrizes to 0.4") {
  std::vector<Tensor> plus(8, Tensor(3, 3));
  std::vector<Tensor> minus(8, Tensor(3, 3));
  plus[0].at(1, 2) = 0.8;
  const Tensor sym = combine_channels(plus, minus);
  CHECK(sym.at(1, 2) == doctest::Approx(0.4));
  CHECK(sym.at(2, 1) == doctest::Approx(0.4));
  CHECK(sym.at(0, 1) == 0.0);
  CHECK(sym.at(1, 1) == 0.0);
}

TEST_CASE("matched formation and breaking heads cancel exactly") {
  ExpertConfig cfg = tiny_config();
  Expert e = Expert::init(cfg, 23);
  for (int c = 0; c < cfg.channels; ++c) {
    const std::string p = "ptr_plus" + std::to_string(c);
    const std::string m = "ptr_minus" + std::to_string(c);
    e.params().value(m + ".q") = e.params().value(p + ".q");
    e.params().value(m + ".k") = e.params().value(p + ".k");
  }
  const Tensor soft = e.predict_soft_delta(chem::parse_smiles("CC(=O)O"));
  for (const double v : soft.raw()) CHECK(v == 0.0);
}

TEST_CASE("soft delta is symmetric, zero-diagonal, bounded by channel count") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const MolGraph g = testutil::random_molecule(rng, 1, 12);
    const Expert e = Expert::init(tiny_config(), 3000 + trial);
    const Tensor soft = e.predict_soft_delta(g);
    for (int i = 0; i < soft.rows(); ++i) {
      CHECK(soft.at(i, i) == 0.0);
      for (int j = 0; j < soft.cols(); ++j) {
        CHECK(soft.at(i, j) == soft.at(j, i));
        CHECK(std::abs(soft.at(i, j)) <= 8.0);
      }
    }
  }
}

TEST_CASE("loss frozen examples") {
  ElectronDelta truth;
  truth.set(0, 1, 1);
  const Tensor zero(2, 2);
  CHECK(Expert::loss_value(zero, truth) == doctest::Approx(1.0));

  Tensor exact(2, 2);
  exact.at(0, 1) = 1.0;
  exact.at(1, 0) = 1.0;
  CHECK(Expert::loss_value(exact, truth) == 0.0);

  ElectronDelta outside;
  outside.set(0, 5, 1);
  CHECK_THROWS_AS(Expert::loss_value(zero, outside), std::invalid_argument);
}

TEST_CASE("loss matches a brute-force pair sum on random cases") {
  Rng rng(57);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    Tensor soft(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double v = rng.uniform(-2.0, 2.0);
        soft.at(i, j) = v;
        soft.at(j, i) = v;
      }
    }
    ElectronDelta truth;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.below(3) == 0)
          truth.set(i, j, 1 + static_cast<int>(rng.below(3)));

    double oracle = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i >= j) continue;
        const double diff = truth.get(i, j) - soft.at(i, j);
        oracle += diff * diff;
      }
    }
    CHECK(Expert::loss_value(soft, truth) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("reaction loss equals loss_value of the soft delta") {
  const Reaction r = amination();
  const Expert e = Expert::init(tiny_config(), 77);
  const double via_tape = e.loss(r);
  const double via_value =
      Expert::loss_value(e.predict_soft_delta(r.reactants), chem::compute_delta(r));
  CHECK(via_tape == doctest::Approx(via_value).epsilon(1e-12));
  CHECK(via_tape >= 0.0);
}

TEST_CASE("discretize rounds ties away from zero, clamps, drops zeros") {
  Tensor soft(4, 4);
  auto put = [&](int i, int j, double v) {
    soft.at(i, j) = v;
    soft.at(j, i) = v;
  };
  put(0, 1, 0.49);
  put(0, 2, 0.5);
  put(0, 3, -1.2);
  put(1, 2, -0.5);
  put(1, 3, 3.7);
  put(2, 3, -4.2);
  const ElectronDelta d = Expert::discretize(soft);
  CHECK(d.get(0, 1) == 0);
  CHECK(d.get(0, 2) == 1);
  CHECK(d.get(0, 3) == -1);
  CHECK(d.get(1, 2) == -1);
  CHECK(d.get(1, 3) == 3);
  CHECK(d.get(2, 3) == -3);
  CHECK(d.size() == 5);
}

TEST_CASE("full-model gradient check against central differences") {
  ExpertConfig cfg = tiny_config();
  cfg.dropout_rate = 0.0;
  Expert e = Expert::init(cfg, 12345);
  const Reaction r = amination();
  REQUIRE(r.reactants.atom_count() <= 6);

  DropoutPlan plans[2];
  plans[1].enabled = true;
  plans[1].rate = 0.2;
  plans[1].seed = 9;

  for (const DropoutPlan& plan : plans) {
    ad::Tape tape;
    std::vector<std::pair<std::string, ad::NodeId>> nodes;
    const ad::NodeId loss_node = e.loss_on_tape(tape, r, plan, &nodes);
    tape.backward(loss_node);

    const double h = 1e-5;
    double worst = 0.0;
    for (const auto& [name, node] : nodes) {
      const Tensor analytic = tape.grad(node);
      Tensor& value = e.params().value(name);
      for (std::size_t k = 0; k < value.raw().size(); ++k) {
        const double keep = value.raw()[k];
        value.raw()[k] = keep + h;
        const double up = e.loss(r, plan);
        value.raw()[k] = keep - h;
        const double down = e.loss(r, plan);
        value.raw()[k] = keep;
        const double fd = (up - down) / (2.0 * h);
        const double an = analytic.empty() ? 0.0 : analytic.raw()[k];
        const double rel =
            std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
        worst = std::max(worst, rel);
      }
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("training drives the loss down on a repeated example") {
  ExpertConfig cfg = tiny_config();
  cfg.dropout_rate = 0.0;
  Expert e = Expert::init(cfg, 321);
  const Reaction r = amination();
  const std::vector<const Reaction*> batch{&r};

  ad::AdamConfig adam;
  adam.lr = 1e-2;
  const double initial = e.loss(r);
  double final_loss = initial;
  for (int step = 0; step < 50; ++step) {
    final_loss = e.train_step(batch, adam, 0, static_cast<std::uint64_t>(step));
  }
  CHECK(final_loss < initial);
  CHECK(e.loss(r) < initial);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Expert e = Expert::init(tiny_config(), 55);
  const Reaction r = amination();
  std::map<std::string, std::vector<double>> before;
  for (const std::string& name : e.params().names())
    before[name] = e.params().value(name).raw();

  ad::AdamConfig adam;
  adam.lr = 0.0;
  e.train_step({&r}, adam, 3, 0);
  for (const std::string& name : e.params().names())
    CHECK(e.params().value(name).raw() == before[name]);
}

TEST_CASE("training is deterministic under a fixed seed") {
  const Reaction r1 = amination();
  const Reaction r2 = chem::parse_reaction_line(
      "[CH3:1][CH2:2][Br:3].[OH:4]>>[CH3:1][CH2:2][OH:4]", "rx-2");
  const std::vector<const Reaction*> batch{&r1, &r2};

  ad::AdamConfig adam;
  adam.lr = 5e-3;
  Expert a = Expert::init(tiny_config(), 777);
  Expert b = Expert::init(tiny_config(), 777);
  for (int step = 0; step < 10; ++step) {
    const double la = a.train_step(batch, adam, 99, 2 * static_cast<std::uint64_t>(step));
    const double lb = b.train_step(batch, adam, 99, 2 * static_cast<std::uint64_t>(step));
    CHECK(la == lb);
  }
  for (const std::string& name : a.params().names())
    CHECK(a.params().value(name).raw() == b.params().value(name).raw());
}

TEST_CASE("zero model predicts no change; overfit model recovers the product") {
  const Reaction r = amination();

  Expert zero{[] {
    ExpertConfig cfg = tiny_config();
    cfg.dropout_rate = 0.0;
    return cfg;
  }()};
  CHECK(zero.predict_delta(r.reactants).empty());
  const auto unchanged = zero.predict_products(r.reactants);
  REQUIRE(unchanged.has_value());
  CHECK(chem::canonical_signature(*unchanged) ==
        chem::canonical_signature(r.reactants));

  ExpertConfig cfg;
  cfg.embed_dim = 16;
  cfg.gnn_rounds = 2;
  cfg.attn_layers = 1;
  cfg.attn_heads = 4;
  cfg.dropout_rate = 0.0;
  cfg.max_atoms = 16;
  Expert e = Expert::init(cfg, 1001);
  ad::AdamConfig adam;
  adam.lr = 5e-3;
  const std::vector<const Reaction*> batch{&r};
  for (int step = 0; step < 300; ++step) e.train_step(batch, adam, 0, 0);

  const ElectronDelta truth = chem::compute_delta(r);
  CHECK(e.predict_delta(r.reactants) == truth);

  const auto predicted = e.predict_products(r.reactants);
  const auto expected = chem::apply_delta(r.reactants, truth);
  REQUIRE(predicted.has_value());
  REQUIRE(expected.has_value());
  CHECK(chem::canonical_signature(*predicted) ==
        chem::canonical_signature(*expected));
}

TEST_CASE("soft delta differs across dropout seeds") {
  const Expert e = Expert::init(tiny_config(), 404);
  const MolGraph g = chem::parse_smiles("CC(N)C(=O)O");
  DropoutPlan p1{true, 0.3, 1, 0};
  DropoutPlan p2{true, 0.3, 2, 0};
  CHECK(e.predict_soft_delta(g, p1).raw() != e.predict_soft_delta(g, p2).raw());
  CHECK(e.predict_soft_delta(g, p1).raw() == e.predict_soft_delta(g, p1).raw());
}

TEST_CASE("forward pass counter tracks encoder invocations") {
  const Expert e = Expert::init(tiny_config(), 8);
  const MolGraph g = chem::parse_smiles("CCO");
  Expert::reset_forward_pass_count();
  CHECK(Expert::forward_pass_count() == 0);
  (void)e.predict_soft_delta(g);
  (void)e.predict_soft_delta(g);
  (void)e.encode(g);
  (void)e.loss(amination());
  CHECK(Expert::forward_pass_count() == 4);
  Expert::reset_forward_pass_count();
  CHECK(Expert::forward_pass_count() == 0);
}

TEST_CASE("checkpoint container round-trips the model") {
  ExpertConfig cfg = tiny_config();
  cfg.embed_dim = 12;
  cfg.attn_heads = 3;
  const Expert e = Expert::init(cfg, 606);
  const MolGraph g = chem::parse_smiles("CC(=O)NC");

  const std::string blob = ad::serialize_tensors(e.to_tensors());
  const Expert back = Expert::from_tensors(ad::deserialize_tensors(blob));
  CHECK(back.config().embed_dim == 12);
  CHECK(back.config().attn_heads == 3);
  CHECK(back.config().dropout_rate == cfg.dropout_rate);
  CHECK(back.predict_soft_delta(g).raw() == e.predict_soft_delta(g).raw());

  ad::NamedTensors missing_header = e.to_tensors();
  missing_header.items.erase(missing_header.items.begin());
  CHECK_THROWS_AS(Expert::from_tensors(missing_header), ad::CheckpointError);

  ad::NamedTensors truncated = e.to_tensors();
  truncated.items.pop_back();
  CHECK_THROWS_AS(Expert::from_tensors(truncated), ad::CheckpointError);
}
