//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/seqmoe.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "erpflow/binio.hpp"
#include "erpflow/checkpoint.hpp"
#include "erpflow/hash.hpp"
#include "erpflow/rng.hpp"
#include "erpflow/threading.hpp"

namespace erpflow::moe {

namespace {

constexpr char kRegistryMagic[] = "ERPREG01";
constexpr std::uint32_t kRegistryVersion = 1;

// Phase tags keep shuffle orders and dropout mask streams independent.
constexpr std::uint64_t kWarmupPhase = 0x77;
constexpr std::uint64_t kSequentialPhase = 0x73;
constexpr std::uint64_t kChiefPhase = 0x63;

std::uint64_t shuffle_key(std::uint64_t base, std::uint64_t phase,
                          std::uint64_t slot, std::uint64_t epoch) {
  return mix64(mix64(mix64(base, phase), slot), epoch);
}

std::string format_loss(double loss) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", loss);
  return buf;
}

// One pass over the pool in a freshly shuffled order. Returns the mean of
// the batch losses; advances the mask step counter by the pool size.
double run_epoch(model::Expert& e,
                 const std::vector<const chem::Reaction*>& pool,
                 const SeqTrainConfig& cfg, std::uint64_t order_key,
                 std::uint64_t dropout_seed, std::uint64_t& mask_step) {
  std::vector<const chem::Reaction*> shuffled = pool;
  Rng rng(order_key);
  rng.shuffle(shuffled);

  double loss_sum = 0.0;
  int batches = 0;
  for (std::size_t begin = 0; begin < shuffled.size();
       begin += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end =
        std::min(shuffled.size(), begin + static_cast<std::size_t>(cfg.batch_size));
    const std::vector<const chem::Reaction*> batch(
        shuffled.begin() + static_cast<std::ptrdiff_t>(begin),
        shuffled.begin() + static_cast<std::ptrdiff_t>(end));
    loss_sum += e.train_step(batch, cfg.adam, dropout_seed, mask_step);
    mask_step += batch.size();
    ++batches;
  }
  return batches == 0 ? 0.0 : loss_sum / batches;
}

std::vector<char> evaluate_pool(const model::Expert& e,
                                const std::vector<const chem::Reaction*>& pool) {
  std::vector<char> ok(pool.size(), 0);
  parallel_for(static_cast<int>(pool.size()), [&](int i) {
    ok[static_cast<std::size_t>(i)] =
        predicts_correctly(e, *pool[static_cast<std::size_t>(i)]) ? 1 : 0;
  });
  return ok;
}

std::vector<const chem::Reaction*> to_pointers(
    const std::vector<chem::Reaction>& dataset) {
  std::vector<const chem::Reaction*> out;
  out.reserve(dataset.size());
  for (const chem::Reaction& r : dataset) out.push_back(&r);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t dataset_digest(const std::vector<chem::Reaction>& dataset) {
  Fnv1a h;
  for (const chem::Reaction& r : dataset) {
    h.update(chem::reaction_to_line(r));
    h.update("\n");
  }
  return h.digest();
}

}  // namespace

void SeqTrainConfig::validate() const {
  expert.validate();
  if (warmup_iters < 0 || chief_iters < 0) {
    throw std::invalid_argument("iteration counts must be non-negative");
  }
  if (n_experts < 0 || t_per_expert < 1) {
    throw std::invalid_argument("expert counts must be positive");
  }
  if (n_experts * t_per_expert > max_total_iters) {
    throw std::invalid_argument(
        "n_experts * t_per_expert exceeds max_total_iters");
  }
  if (stall_limit < 1) {
    throw std::invalid_argument("stall_limit must be positive");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("batch_size must be positive");
  }
  if (fingerprint.radius < 0 || fingerprint.length < 1) {
    throw std::invalid_argument("invalid fingerprint shape");
  }
}

bool predicts_correctly(const model::Expert& e, const chem::Reaction& r) {
  return e.predict_delta(r.reactants) == chem::compute_delta(r);
}

double training_accuracy(const model::Expert& e,
                         const std::vector<chem::Reaction>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  const std::vector<const chem::Reaction*> pool = to_pointers(dataset);
  const std::vector<char> ok = evaluate_pool(e, pool);
  std::size_t hits = 0;
  for (const char c : ok) hits += static_cast<std::size_t>(c);
  return static_cast<double>(hits) / static_cast<double>(pool.size());
}

model::Expert warmup(const std::vector<chem::Reaction>& dataset,
                     const SeqTrainConfig& cfg,
                     std::vector<std::string>* log) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  model::Expert e = model::Expert::init(cfg.expert, mix64(cfg.base_seed, 1));
  const std::vector<const chem::Reaction*> pool = to_pointers(dataset);
  const std::uint64_t dropout_seed = mix64(cfg.base_seed, kWarmupPhase);
  std::uint64_t mask_step = 0;
  for (int epoch = 0; epoch < cfg.warmup_iters; ++epoch) {
    const double loss =
        run_epoch(e, pool, cfg,
                  shuffle_key(cfg.base_seed, kWarmupPhase, 0,
                              static_cast<std::uint64_t>(epoch)),
                  dropout_seed, mask_step);
    if (log != nullptr) {
      log->push_back("warmup epoch " + std::to_string(epoch + 1) + ": loss " +
                     format_loss(loss));
    }
  }
  return e;
}

std::vector<ExpertRecord> train_sequential(
    model::Expert params, const std::vector<chem::Reaction>& dataset,
    const SeqTrainConfig& cfg, std::vector<std::string>* log) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("empty dataset");

  std::vector<ExpertRecord> records;
  std::vector<const chem::Reaction*> pool = to_pointers(dataset);
  const std::uint64_t dropout_seed = mix64(cfg.base_seed, kSequentialPhase);
  std::uint64_t mask_step = 0;
  int stalled = 0;

  for (int i = 1; i <= cfg.n_experts && !pool.empty(); ++i) {
    std::vector<char> survivors(pool.size(), 1);
    for (int epoch = 0; epoch < cfg.t_per_expert; ++epoch) {
      const double loss =
          run_epoch(params, pool, cfg,
                    shuffle_key(cfg.base_seed, kSequentialPhase,
                                static_cast<std::uint64_t>(i),
                                static_cast<std::uint64_t>(epoch)),
                    dropout_seed, mask_step);
      if (log != nullptr) {
        log->push_back("expert " + std::to_string(i) + " epoch " +
                       std::to_string(epoch + 1) + ": loss " +
                       format_loss(loss));
      }
      const std::vector<char> ok = evaluate_pool(params, pool);
      for (std::size_t k = 0; k < pool.size(); ++k) survivors[k] &= ok[k];
    }

    std::vector<const chem::Reaction*> captured;
    std::vector<const chem::Reaction*> remainder;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      (survivors[k] ? captured : remainder).push_back(pool[k]);
    }

    if (log != nullptr) {
      log->push_back("expert " + std::to_string(i) + ": captured " +
                     std::to_string(captured.size()) + " of " +
                     std::to_string(pool.size()) + ", remainder " +
                     std::to_string(remainder.size()));
    }

    if (captured.empty()) {
      ++stalled;
      if (stalled >= cfg.stall_limit) break;
      continue;
    }
    stalled = 0;

    ExpertRecord rec{i, params, {}, {}};
    std::vector<fp::Fingerprint> prints;
    prints.reserve(captured.size());
    for (const chem::Reaction* r : captured) {
      if (!predicts_correctly(rec.params, *r)) {
        throw std::logic_error("snapshot fails on its own capture set");
      }
      rec.correct_ids.push_back(r->id);
      prints.push_back(fp::morgan_fingerprint(r->reactants, cfg.fingerprint.radius,
                                              cfg.fingerprint.length));
    }
    rec.centroid = fp::centroid(prints);
    records.push_back(std::move(rec));
    pool = std::move(remainder);
  }
  return records;
}

model::Expert train_chief(const std::vector<chem::Reaction>& dataset,
                          const SeqTrainConfig& cfg,
                          std::vector<std::string>* log) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  model::Expert e = model::Expert::init(cfg.expert, mix64(cfg.base_seed, 2));
  const std::vector<const chem::Reaction*> pool = to_pointers(dataset);
  const std::uint64_t dropout_seed = mix64(cfg.base_seed, kChiefPhase);
  std::uint64_t mask_step = 0;
  for (int epoch = 0; epoch < cfg.chief_iters; ++epoch) {
    const double loss =
        run_epoch(e, pool, cfg,
                  shuffle_key(cfg.base_seed, kChiefPhase, 0,
                              static_cast<std::uint64_t>(epoch)),
                  dropout_seed, mask_step);
    if (log != nullptr) {
      log->push_back("chief epoch " + std::to_string(epoch + 1) + ": loss " +
                     format_loss(loss));
    }
  }
  return e;
}

ExpertRegistry train_registry(const std::vector<chem::Reaction>& dataset,
                              const SeqTrainConfig& cfg,
                              std::vector<std::string>* log) {
  model::Expert warmed = warmup(dataset, cfg, log);
  std::vector<ExpertRecord> records =
      train_sequential(std::move(warmed), dataset, cfg, log);
  model::Expert chief = train_chief(dataset, cfg, log);

  ExpertRegistry reg{std::move(chief), std::move(records), cfg.fingerprint, {}};
  auto put = [&](const std::string& k, const std::string& v) {
    reg.manifest.emplace_back(k, v);
  };
  put("base_seed", std::to_string(cfg.base_seed));
  put("warmup_iters", std::to_string(cfg.warmup_iters));
  put("n_experts", std::to_string(cfg.n_experts));
  put("t_per_expert", std::to_string(cfg.t_per_expert));
  put("max_total_iters", std::to_string(cfg.max_total_iters));
  put("chief_iters", std::to_string(cfg.chief_iters));
  put("stall_limit", std::to_string(cfg.stall_limit));
  put("batch_size", std::to_string(cfg.batch_size));
  put("lr", format_double(cfg.adam.lr));
  put("weight_decay", format_double(cfg.adam.weight_decay));
  put("warmup_steps", std::to_string(cfg.adam.warmup_steps));
  put("decay_steps", std::to_string(cfg.adam.decay_steps));
  put("embed_dim", std::to_string(cfg.expert.embed_dim));
  put("gnn_rounds", std::to_string(cfg.expert.gnn_rounds));
  put("attn_layers", std::to_string(cfg.expert.attn_layers));
  put("attn_heads", std::to_string(cfg.expert.attn_heads));
  put("channels", std::to_string(cfg.expert.channels));
  put("dropout_rate", format_double(cfg.expert.dropout_rate));
  put("max_atoms", std::to_string(cfg.expert.max_atoms));
  put("fingerprint_radius", std::to_string(cfg.fingerprint.radius));
  put("fingerprint_length", std::to_string(cfg.fingerprint.length));
  put("dataset_size", std::to_string(dataset.size()));
  put("dataset_digest", to_hex(dataset_digest(dataset)));
  put("experts_stored", std::to_string(reg.experts.size()));
  return reg;
}

void save_registry(const std::string& path, const ExpertRegistry& reg) {
  ByteWriter w;
  w.bytes(std::string_view(kRegistryMagic, 8));
  w.u32(kRegistryVersion);
  w.u32(static_cast<std::uint32_t>(reg.fingerprint.radius));
  w.u32(static_cast<std::uint32_t>(reg.fingerprint.length));
  w.u32(static_cast<std::uint32_t>(reg.manifest.size()));
  for (const auto& [key, value] : reg.manifest) {
    w.str(key);
    w.str(value);
  }
  w.str(ad::serialize_tensors(reg.chief.to_tensors()));
  w.u32(static_cast<std::uint32_t>(reg.experts.size()));
  for (const ExpertRecord& rec : reg.experts) {
    w.u32(static_cast<std::uint32_t>(rec.expert_id));
    w.str(ad::serialize_tensors(rec.params.to_tensors()));
    w.u32(static_cast<std::uint32_t>(rec.correct_ids.size()));
    for (const std::string& id : rec.correct_ids) w.str(id);
    w.u32(static_cast<std::uint32_t>(rec.centroid.values.size()));
    for (const double v : rec.centroid.values) w.f64(v);
  }
  Fnv1a checksum;
  checksum.update(w.data());
  w.u64(checksum.digest());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ad::CheckpointError("cannot open " + path + " for writing");
  const std::string& blob = w.data();
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw ad::CheckpointError("failed writing " + path);
}

ExpertRegistry load_registry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ad::CheckpointError("cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  if (blob.size() < 16) throw ad::CheckpointError("truncated registry file");
  Fnv1a checksum;
  checksum.update(std::string_view(blob).substr(0, blob.size() - 8));
  ByteReader tail(std::string_view(blob).substr(blob.size() - 8));
  if (tail.u64() != checksum.digest()) {
    throw ad::CheckpointError("registry checksum mismatch");
  }

  ByteReader r(std::string_view(blob).substr(0, blob.size() - 8));
  if (r.bytes(8) != std::string_view(kRegistryMagic, 8)) {
    throw ad::CheckpointError("not a registry file");
  }
  if (r.u32() != kRegistryVersion) {
    throw ad::CheckpointError("unsupported registry version");
  }
  FingerprintSpec spec;
  spec.radius = static_cast<int>(r.u32());
  spec.length = static_cast<int>(r.u32());

  std::vector<std::pair<std::string, std::string>> manifest;
  const std::uint32_t manifest_count = r.u32();
  manifest.reserve(manifest_count);
  for (std::uint32_t i = 0; i < manifest_count; ++i) {
    std::string key = r.str();
    std::string value = r.str();
    manifest.emplace_back(std::move(key), std::move(value));
  }

  model::Expert chief =
      model::Expert::from_tensors(ad::deserialize_tensors(r.str()));

  std::vector<ExpertRecord> experts;
  const std::uint32_t expert_count = r.u32();
  experts.reserve(expert_count);
  for (std::uint32_t i = 0; i < expert_count; ++i) {
    const int id = static_cast<int>(r.u32());
    model::Expert params =
        model::Expert::from_tensors(ad::deserialize_tensors(r.str()));
    std::vector<std::string> ids(r.u32());
    for (std::string& s : ids) s = r.str();
    if (ids.empty()) {
      throw ad::CheckpointError("stored expert has an empty capture set");
    }
    fp::Centroid centroid;
    centroid.values.resize(r.u32());
    for (double& v : centroid.values) v = r.f64();
    if (static_cast<int>(centroid.values.size()) != spec.length) {
      throw ad::CheckpointError("fingerprint config mismatch");
    }
    experts.push_back(
        ExpertRecord{id, std::move(params), std::move(ids), std::move(centroid)});
  }
  if (!r.done()) throw ad::CheckpointError("trailing bytes in registry file");

  return ExpertRegistry{std::move(chief), std::move(experts), spec,
                        std::move(manifest)};
}

}  // namespace erpflow::moe
