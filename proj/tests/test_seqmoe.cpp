//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "erpflow/hash.hpp"
#include "erpflow/seqmoe.hpp"
#include "erpflow/smiles.hpp"

using namespace erpflow;
using namespace erpflow::moe;
using chem::Reaction;

namespace {

// Substitution family over growing alkyl scaffolds: chloride out, amine in.
std::vector<Reaction> amination_family(int n) {
  std::vector<Reaction> out;
  for (int k = 0; k < n; ++k) {
    const int chain = 1 + k % 4;
    std::string left;
    std::string right;
    int map = 1;
    for (int c = 0; c < chain; ++c) {
      const std::string tag =
          (c == 0 ? "[CH3:" : "[CH2:") + std::to_string(map++) + "]";
      left += tag;
      right += tag;
    }
    const std::string cl = "[Cl:" + std::to_string(map++) + "]";
    const std::string nh = "[NH2:" + std::to_string(map) + "]";
    out.push_back(chem::parse_reaction_line(left + cl + "." + nh + ">>" + right + nh,
                                            "rx-" + std::to_string(k)));
  }
  return out;
}

SeqTrainConfig fast_config() {
  SeqTrainConfig cfg;
  cfg.warmup_iters = 25;
  cfg.n_experts = 4;
  cfg.t_per_expert = 2;
  cfg.max_total_iters = 8;
  cfg.chief_iters = 40;
  cfg.batch_size = 8;
  cfg.base_seed = 9;
  cfg.expert.embed_dim = 16;
  cfg.expert.gnn_rounds = 2;
  cfg.expert.attn_layers = 1;
  cfg.expert.attn_heads = 4;
  cfg.expert.dropout_rate = 0.1;
  cfg.expert.max_atoms = 16;
  cfg.adam.lr = 8e-3;
  cfg.fingerprint.radius = 2;
  cfg.fingerprint.length = 256;
  return cfg;
}

bool same_params(const model::Expert& a, const model::Expert& b) {
  if (a.params().names() != b.params().names()) return false;
  for (const std::string& name : a.params().names()) {
    if (a.params().value(name).raw() != b.params().value(name).raw())
      return false;
  }
  return true;
}

double mean_loss(const model::Expert& e, const std::vector<Reaction>& ds) {
  double total = 0.0;
  for (const Reaction& r : ds) total += e.loss(r);
  return total / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("config validation") {
  SeqTrainConfig cfg = fast_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.n_experts = 5;  // 5 * 2 > 8
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = fast_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = fast_config();
  cfg.stall_limit = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = fast_config();
  cfg.t_per_expert = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero warmup returns dataset-independent fresh parameters") {
  SeqTrainConfig cfg = fast_config();
  cfg.warmup_iters = 0;
  const std::vector<Reaction> a = amination_family(6);
  const std::vector<Reaction> b = amination_family(12);
  CHECK(same_params(warmup(a, cfg), warmup(b, cfg)));
}

TEST_CASE("warmup lowers the mean loss on a learnable set") {
  const std::vector<Reaction> ds = amination_family(16);
  SeqTrainConfig cfg = fast_config();
  cfg.warmup_iters = 0;
  const model::Expert fresh = warmup(ds, cfg);
  cfg.warmup_iters = 10;
  const model::Expert warmed = warmup(ds, cfg);
  CHECK(mean_loss(warmed, ds) < mean_loss(fresh, ds));
  CHECK(same_params(warmed, warmup(ds, cfg)));
}

TEST_CASE("empty dataset is rejected") {
  const SeqTrainConfig cfg = fast_config();
  CHECK_THROWS_AS(warmup({}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train_chief({}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(training_accuracy(model::Expert(cfg.expert), {}),
                  std::invalid_argument);
}

TEST_CASE("sequential chain partitions the dataset") {
  const std::vector<Reaction> ds = amination_family(20);
  const SeqTrainConfig cfg = fast_config();
  std::vector<std::string> log;
  const std::vector<ExpertRecord> records =
      train_sequential(warmup(ds, cfg), ds, cfg, &log);

  REQUIRE(!records.empty());

  std::set<std::string> dataset_ids;
  for (const Reaction& r : ds) dataset_ids.insert(r.id);

  std::set<std::string> seen;
  int last_id = 0;
  for (const ExpertRecord& rec : records) {
    CHECK(rec.expert_id > last_id);
    last_id = rec.expert_id;
    CHECK(!rec.correct_ids.empty());
    for (const std::string& id : rec.correct_ids) {
      CHECK(dataset_ids.count(id) == 1);
      CHECK(seen.insert(id).second);  // pairwise disjoint
    }
    CHECK(rec.centroid.values.size() ==
          static_cast<std::size_t>(cfg.fingerprint.length));
  }
  CHECK(seen.size() <= dataset_ids.size());

  // Every capture line reports an exact set difference; loss lines are
  // interleaved per epoch.
  std::size_t pool = ds.size();
  std::size_t capture_lines = 0;
  for (const std::string& line : log) {
    if (line.find("captured") == std::string::npos) {
      CHECK(line.find(": loss ") != std::string::npos);
      continue;
    }
    ++capture_lines;
    std::size_t captured = 0, of = 0, remainder = 0;
    REQUIRE(std::sscanf(line.c_str(), "expert %*d: captured %zu of %zu, remainder %zu",
                        &captured, &of, &remainder) == 3);
    CHECK(of == pool);
    CHECK(remainder == pool - captured);
    pool = remainder;
  }
  CHECK(capture_lines > 0);
  CHECK(ds.size() - seen.size() == pool);
}

TEST_CASE("stored centroids match a recomputation over capture sets") {
  const std::vector<Reaction> ds = amination_family(20);
  const SeqTrainConfig cfg = fast_config();
  const std::vector<ExpertRecord> records =
      train_sequential(warmup(ds, cfg), ds, cfg);
  REQUIRE(!records.empty());

  for (const ExpertRecord& rec : records) {
    std::vector<fp::Fingerprint> prints;
    for (const std::string& id : rec.correct_ids) {
      const auto it = std::find_if(ds.begin(), ds.end(),
                                   [&](const Reaction& r) { return r.id == id; });
      REQUIRE(it != ds.end());
      CHECK(predicts_correctly(rec.params, *it));
      prints.push_back(fp::morgan_fingerprint(it->reactants, cfg.fingerprint.radius,
                                              cfg.fingerprint.length));
    }
    const fp::Centroid again = fp::centroid(prints);
    REQUIRE(again.values.size() == rec.centroid.values.size());
    for (std::size_t i = 0; i < again.values.size(); ++i) {
      CHECK(rec.centroid.values[i] ==
            doctest::Approx(again.values[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("sequential training is deterministic") {
  const std::vector<Reaction> ds = amination_family(14);
  const SeqTrainConfig cfg = fast_config();
  const model::Expert warmed = warmup(ds, cfg);
  const std::vector<ExpertRecord> a = train_sequential(warmed, ds, cfg);
  const std::vector<ExpertRecord> b = train_sequential(warmed, ds, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].expert_id == b[i].expert_id);
    CHECK(a[i].correct_ids == b[i].correct_ids);
    CHECK(a[i].centroid.values == b[i].centroid.values);
    CHECK(same_params(a[i].params, b[i].params));
  }
}

TEST_CASE("training accuracy matches a serial recount across thread counts") {
  const std::vector<Reaction> ds = amination_family(10);
  const model::Expert e = warmup(ds, fast_config());

  double serial_hits = 0;
  for (const Reaction& r : ds) serial_hits += predicts_correctly(e, r) ? 1 : 0;
  const double expected = serial_hits / static_cast<double>(ds.size());

  setenv("ERPFLOW_THREADS", "1", 1);
  CHECK(training_accuracy(e, ds) == expected);
  setenv("ERPFLOW_THREADS", "3", 1);
  CHECK(training_accuracy(e, ds) == expected);
  unsetenv("ERPFLOW_THREADS");
  CHECK(training_accuracy(e, ds) == expected);
}

TEST_CASE("chief training is deterministic and leads on the full set") {
  const std::vector<Reaction> ds = amination_family(20);
  SeqTrainConfig cfg = fast_config();
  const model::Expert chief = train_chief(ds, cfg);
  CHECK(same_params(chief, train_chief(ds, cfg)));

  SeqTrainConfig fresh_cfg = cfg;
  fresh_cfg.chief_iters = 0;
  const model::Expert untrained = train_chief(ds, fresh_cfg);
  CHECK_FALSE(same_params(chief, untrained));

  const std::vector<ExpertRecord> records =
      train_sequential(warmup(ds, cfg), ds, cfg);
  const double chief_acc = training_accuracy(chief, ds);
  for (const ExpertRecord& rec : records) {
    CHECK(chief_acc >= training_accuracy(rec.params, ds));
  }
}

TEST_CASE("registry assembly records provenance") {
  const std::vector<Reaction> ds = amination_family(18);
  const SeqTrainConfig cfg = fast_config();
  std::vector<std::string> log;
  const ExpertRegistry reg = train_registry(ds, cfg, &log);

  CHECK(!reg.experts.empty());
  CHECK(!log.empty());
  CHECK(reg.fingerprint.radius == cfg.fingerprint.radius);
  CHECK(reg.fingerprint.length == cfg.fingerprint.length);

  auto manifest_value = [&](const std::string& key) -> std::string {
    for (const auto& [k, v] : reg.manifest)
      if (k == key) return v;
    return "<missing>";
  };
  CHECK(manifest_value("base_seed") == "9");
  CHECK(manifest_value("dataset_size") == "18");
  CHECK(manifest_value("experts_stored") == std::to_string(reg.experts.size()));
  CHECK(manifest_value("dataset_digest").size() == 16);
}

TEST_CASE("registry file round-trips losslessly") {
  const std::vector<Reaction> ds = amination_family(18);
  const std::vector<Reaction> held_out = amination_family(4);
  const SeqTrainConfig cfg = fast_config();
  const ExpertRegistry reg = train_registry(ds, cfg);
  const std::string path = "registry_roundtrip.bin";

  save_registry(path, reg);
  const ExpertRegistry back = load_registry(path);

  CHECK(back.manifest == reg.manifest);
  CHECK(back.fingerprint.radius == reg.fingerprint.radius);
  CHECK(back.fingerprint.length == reg.fingerprint.length);
  CHECK(same_params(back.chief, reg.chief));
  REQUIRE(back.experts.size() == reg.experts.size());
  for (std::size_t i = 0; i < reg.experts.size(); ++i) {
    CHECK(back.experts[i].expert_id == reg.experts[i].expert_id);
    CHECK(back.experts[i].correct_ids == reg.experts[i].correct_ids);
    CHECK(back.experts[i].centroid.values == reg.experts[i].centroid.values);
    CHECK(same_params(back.experts[i].params, reg.experts[i].params));
  }
  for (const Reaction& r : held_out) {
    CHECK(back.chief.predict_soft_delta(r.reactants).raw() ==
          reg.chief.predict_soft_delta(r.reactants).raw());
  }
  std::remove(path.c_str());
}

TEST_CASE("chief-only registry round-trips") {
  SeqTrainConfig cfg = fast_config();
  cfg.chief_iters = 0;
  const std::vector<Reaction> ds = amination_family(5);
  ExpertRegistry reg{train_chief(ds, cfg), {}, cfg.fingerprint, {{"note", "chief only"}}};
  const std::string path = "registry_chief_only.bin";
  save_registry(path, reg);
  const ExpertRegistry back = load_registry(path);
  CHECK(back.experts.empty());
  CHECK(back.manifest == reg.manifest);
  CHECK(same_params(back.chief, reg.chief));
  std::remove(path.c_str());
}

TEST_CASE("registry file integrity failures are reported") {
  SeqTrainConfig cfg = fast_config();
  cfg.chief_iters = 0;
  const std::vector<Reaction> ds = amination_family(5);
  const ExpertRegistry reg{train_chief(ds, cfg), {}, cfg.fingerprint, {}};
  const std::string path = "registry_integrity.bin";
  save_registry(path, reg);

  std::ifstream in(path, std::ios::binary);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();

  // Truncation breaks the checksum.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size() / 2));
  }
  CHECK_THROWS_AS(load_registry(path), ad::CheckpointError);

  // A flipped payload byte breaks the checksum.
  {
    std::string bad = blob;
    bad[20] = static_cast<char>(bad[20] ^ 0x5a);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(load_registry(path), doctest::Contains("checksum"),
                       ad::CheckpointError);

  // A future version with a valid checksum is refused.
  {
    std::string bad = blob;
    bad[8] = 9;  // version lives after the 8-byte magic
    Fnv1a h;
    h.update(std::string_view(bad).substr(0, bad.size() - 8));
    const std::uint64_t sum = h.digest();
    for (int i = 0; i < 8; ++i)
      bad[bad.size() - 8 + static_cast<std::size_t>(i)] =
          static_cast<char>(sum >> (8 * i));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(load_registry(path), doctest::Contains("version"),
                       ad::CheckpointError);

  CHECK_THROWS_AS(load_registry("does_not_exist.bin"), ad::CheckpointError);
  std::remove(path.c_str());
}
