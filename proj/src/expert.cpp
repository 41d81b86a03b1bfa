//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/expert.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "erpflow/checkpoint.hpp"
#include "erpflow/rng.hpp"

namespace erpflow::model {

namespace {

std::atomic<std::uint64_t> g_forward_passes{0};

constexpr int kChargeBuckets = 5;   // formal charge -2 .. +2
constexpr int kDegreeBuckets = 7;   // degree 0 .. 6
constexpr int kHcountBuckets = 9;   // explicit hydrogens 0 .. 8
// Self pairs get this score before the row softmax; it underflows to an
// exact zero weight.
constexpr double kSelfPairScore = -1e30;

int charge_bucket(int c) { return std::clamp(c, -2, 2) + 2; }
int degree_bucket(int d) { return std::clamp(d, 0, kDegreeBuckets - 1); }
int hcount_bucket(int h) { return std::clamp(h, 0, kHcountBuckets - 1); }

// Creates parameter leaves on demand, one tape node per distinct name.
class ParamNodes {
 public:
  ParamNodes(ad::Tape& tape, const ad::ParamStore& store,
             std::vector<std::pair<std::string, ad::NodeId>>* out)
      : tape_(tape), store_(store), out_(out) {}

  ad::NodeId operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const ad::NodeId id = tape_.param(&store_.value(name));
    cache_.emplace(name, id);
    if (out_ != nullptr) out_->emplace_back(name, id);
    return id;
  }

 private:
  ad::Tape& tape_;
  const ad::ParamStore& store_;
  std::vector<std::pair<std::string, ad::NodeId>>* out_;
  std::map<std::string, ad::NodeId> cache_;
};

// One pointer channel: bilinear pair scores, self pairs barred, softmax over
// the other atoms plus a virtual no-flow slot, virtual column dropped.
ad::NodeId pointer_channel(ad::Tape& tape, ad::NodeId h, int n, double scale,
                           ParamNodes& p, const std::string& prefix) {
  const ad::NodeId q = tape.matmul(h, p(prefix + ".q"));
  const ad::NodeId k = tape.matmul(h, p(prefix + ".k"));
  const ad::NodeId scores = tape.scale(tape.matmul_nt(q, k), scale);
  const ad::NodeId masked = tape.mask_diag(scores, kSelfPairScore);
  const ad::NodeId probs = tape.softmax_rows(tape.append_zero_col(masked));
  return tape.slice_cols(probs, 0, n);
}

}  // namespace

void ExpertConfig::validate() const {
  if (embed_dim <= 0) {
    throw std::invalid_argument("embed_dim must be positive");
  }
  if (attn_heads <= 0 || embed_dim % attn_heads != 0) {
    throw std::invalid_argument("embed_dim must be divisible by attn_heads");
  }
  if (gnn_rounds < 0 || attn_layers < 0) {
    throw std::invalid_argument("layer counts must be non-negative");
  }
  if (channels < 1) {
    throw std::invalid_argument("channels must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }
  if (max_atoms < 1) {
    throw std::invalid_argument("max_atoms must be positive");
  }
}

Expert::Expert(ExpertConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.embed_dim;
  auto ones = [](int r, int c) {
    ad::Tensor t(r, c);
    t.fill(1.0);
    return t;
  };

  params_.add("emb.element", ad::Tensor(chem::kElementCount, d));
  params_.add("emb.charge", ad::Tensor(kChargeBuckets, d));
  params_.add("emb.degree", ad::Tensor(kDegreeBuckets, d));
  params_.add("emb.hcount", ad::Tensor(kHcountBuckets, d));

  for (int r = 0; r < cfg_.gnn_rounds; ++r) {
    const std::string p = "gnn" + std::to_string(r);
    params_.add(p + ".self", ad::Tensor(d, d));
    params_.add(p + ".msg", ad::Tensor(d, d));
    params_.add(p + ".bias", ad::Tensor(1, d));
    params_.add(p + ".ln_g", ones(1, d));
    params_.add(p + ".ln_b", ad::Tensor(1, d));
  }
  for (int l = 0; l < cfg_.attn_layers; ++l) {
    const std::string p = "attn" + std::to_string(l);
    params_.add(p + ".q", ad::Tensor(d, d));
    params_.add(p + ".k", ad::Tensor(d, d));
    params_.add(p + ".v", ad::Tensor(d, d));
    params_.add(p + ".o", ad::Tensor(d, d));
    params_.add(p + ".ln1_g", ones(1, d));
    params_.add(p + ".ln1_b", ad::Tensor(1, d));
    params_.add(p + ".ffn1", ad::Tensor(d, 2 * d));
    params_.add(p + ".ffn1_b", ad::Tensor(1, 2 * d));
    params_.add(p + ".ffn2", ad::Tensor(2 * d, d));
    params_.add(p + ".ffn2_b", ad::Tensor(1, d));
    params_.add(p + ".ln2_g", ones(1, d));
    params_.add(p + ".ln2_b", ad::Tensor(1, d));
  }
  for (int c = 0; c < cfg_.channels; ++c) {
    const std::string p = "ptr_plus" + std::to_string(c);
    params_.add(p + ".q", ad::Tensor(d, d));
    params_.add(p + ".k", ad::Tensor(d, d));
  }
  for (int c = 0; c < cfg_.channels; ++c) {
    const std::string p = "ptr_minus" + std::to_string(c);
    params_.add(p + ".q", ad::Tensor(d, d));
    params_.add(p + ".k", ad::Tensor(d, d));
  }
}

Expert Expert::init(const ExpertConfig& cfg, std::uint64_t seed) {
  Expert e(cfg);
  Rng rng(seed);
  for (const std::string& name : e.params_.names()) {
    ad::Tensor& t = e.params_.value(name);
    if (name.starts_with("emb.")) {
      for (double& v : t.raw()) v = rng.normal(0.0, 0.02);
    } else if (name.ends_with("_g") || name.ends_with("_b") ||
               name.ends_with(".bias")) {
      // Norm gains stay at one, biases at zero.
    } else {
      const double a = std::sqrt(6.0 / (t.rows() + t.cols()));
      for (double& v : t.raw()) v = rng.uniform(-a, a);
    }
  }
  return e;
}

ad::NodeId Expert::encode_on_tape(
    ad::Tape& tape, const chem::MolGraph& g, const DropoutPlan& drop,
    std::vector<std::pair<std::string, ad::NodeId>>* param_nodes) const {
  const int n = g.atom_count();
  if (n < 1) throw std::invalid_argument("cannot encode an empty graph");
  if (n > cfg_.max_atoms) {
    throw std::invalid_argument("atom count " + std::to_string(n) +
                                " exceeds limit " +
                                std::to_string(cfg_.max_atoms));
  }
  g_forward_passes.fetch_add(1, std::memory_order_relaxed);

  ParamNodes param(tape, params_, param_nodes);
  const int d = cfg_.embed_dim;
  const bool dropping = drop.enabled && drop.rate > 0.0;

  std::vector<int> el(n), ch(n), dg(n), hc(n);
  for (int i = 0; i < n; ++i) {
    const chem::Atom& a = g.atom(i);
    el[static_cast<std::size_t>(i)] = static_cast<int>(a.element);
    ch[static_cast<std::size_t>(i)] = charge_bucket(a.formal_charge);
    dg[static_cast<std::size_t>(i)] = degree_bucket(g.degree(i));
    hc[static_cast<std::size_t>(i)] = hcount_bucket(a.explicit_h);
  }
  ad::NodeId h =
      tape.add(tape.add(tape.embedding_rows(param("emb.element"), el),
                        tape.embedding_rows(param("emb.charge"), ch)),
               tape.add(tape.embedding_rows(param("emb.degree"), dg),
                        tape.embedding_rows(param("emb.hcount"), hc)));

  ad::Tensor adjacency(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int order = g.bond(i, j);
      if (order != 0) {
        adjacency.at(i, j) = order;
        adjacency.at(j, i) = order;
      }
    }
  }
  const ad::NodeId adj = tape.constant(std::move(adjacency));

  for (int r = 0; r < cfg_.gnn_rounds; ++r) {
    const std::string p = "gnn" + std::to_string(r);
    const ad::NodeId msg = tape.matmul(adj, tape.matmul(h, param(p + ".msg")));
    const ad::NodeId pre = tape.add_rowvec(
        tape.add(tape.matmul(h, param(p + ".self")), msg), param(p + ".bias"));
    ad::NodeId update = tape.relu(pre);
    if (dropping) {
      update = tape.dropout(
          update, ad::dropout_mask(n, d, drop.rate, drop.seed,
                                   static_cast<std::uint64_t>(r), drop.step));
    }
    h = tape.layer_norm(tape.add(h, update), param(p + ".ln_g"),
                        param(p + ".ln_b"));
  }

  const int dh = d / cfg_.attn_heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < cfg_.attn_layers; ++l) {
    const std::string p = "attn" + std::to_string(l);
    const ad::NodeId q = tape.matmul(h, param(p + ".q"));
    const ad::NodeId k = tape.matmul(h, param(p + ".k"));
    const ad::NodeId v = tape.matmul(h, param(p + ".v"));
    std::vector<ad::NodeId> heads;
    heads.reserve(static_cast<std::size_t>(cfg_.attn_heads));
    for (int t = 0; t < cfg_.attn_heads; ++t) {
      const ad::NodeId qh = tape.slice_cols(q, t * dh, (t + 1) * dh);
      const ad::NodeId kh = tape.slice_cols(k, t * dh, (t + 1) * dh);
      const ad::NodeId vh = tape.slice_cols(v, t * dh, (t + 1) * dh);
      const ad::NodeId probs =
          tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), attn_scale));
      heads.push_back(tape.matmul(probs, vh));
    }
    ad::NodeId attn_out = tape.matmul(tape.concat_cols(heads), param(p + ".o"));
    if (dropping) {
      attn_out = tape.dropout(
          attn_out,
          ad::dropout_mask(n, d, drop.rate, drop.seed,
                           static_cast<std::uint64_t>(cfg_.gnn_rounds + l),
                           drop.step));
    }
    h = tape.layer_norm(tape.add(h, attn_out), param(p + ".ln1_g"),
                        param(p + ".ln1_b"));
    const ad::NodeId inner = tape.relu(
        tape.add_rowvec(tape.matmul(h, param(p + ".ffn1")), param(p + ".ffn1_b")));
    const ad::NodeId ffn_out = tape.add_rowvec(
        tape.matmul(inner, param(p + ".ffn2")), param(p + ".ffn2_b"));
    h = tape.layer_norm(tape.add(h, ffn_out), param(p + ".ln2_g"),
                        param(p + ".ln2_b"));
  }
  return h;
}

ad::NodeId Expert::soft_delta_on_tape(
    ad::Tape& tape, const chem::MolGraph& g, const DropoutPlan& drop,
    std::vector<std::pair<std::string, ad::NodeId>>* param_nodes) const {
  const ad::NodeId h = encode_on_tape(tape, g, drop, param_nodes);
  ParamNodes param(tape, params_, param_nodes);
  const int n = g.atom_count();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim));

  // Channel pairs are differenced before summing so matched formation and
  // breaking heads cancel exactly.
  ad::NodeId delta = -1;
  for (int c = 0; c < cfg_.channels; ++c) {
    const ad::NodeId plus = pointer_channel(tape, h, n, scale, param,
                                            "ptr_plus" + std::to_string(c));
    const ad::NodeId minus = pointer_channel(tape, h, n, scale, param,
                                             "ptr_minus" + std::to_string(c));
    const ad::NodeId diff = tape.sub(plus, minus);
    delta = (c == 0) ? diff : tape.add(delta, diff);
  }
  return tape.scale(tape.add(delta, tape.transpose(delta)), 0.5);
}

ad::Tensor Expert::encode(const chem::MolGraph& g,
                          const DropoutPlan& drop) const {
  ad::Tape tape;
  return tape.value(encode_on_tape(tape, g, drop, nullptr));
}

Expert::PointerWeights Expert::pointer_scores(const chem::MolGraph& g,
                                              const DropoutPlan& drop) const {
  ad::Tape tape;
  const ad::NodeId h = encode_on_tape(tape, g, drop, nullptr);
  ParamNodes param(tape, params_, nullptr);
  const int n = g.atom_count();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim));

  PointerWeights out;
  for (int c = 0; c < cfg_.channels; ++c) {
    out.plus.push_back(tape.value(pointer_channel(
        tape, h, n, scale, param, "ptr_plus" + std::to_string(c))));
  }
  for (int c = 0; c < cfg_.channels; ++c) {
    out.minus.push_back(tape.value(pointer_channel(
        tape, h, n, scale, param, "ptr_minus" + std::to_string(c))));
  }
  return out;
}

ad::Tensor Expert::predict_soft_delta(const chem::MolGraph& g,
                                      const DropoutPlan& drop) const {
  ad::Tape tape;
  return tape.value(soft_delta_on_tape(tape, g, drop, nullptr));
}

chem::ElectronDelta Expert::predict_delta(const chem::MolGraph& g,
                                          const DropoutPlan& drop) const {
  return discretize(predict_soft_delta(g, drop));
}

std::optional<chem::MolGraph> Expert::predict_products(
    const chem::MolGraph& g, const DropoutPlan& drop) const {
  return chem::apply_delta(g, predict_delta(g, drop));
}

double Expert::loss_value(const ad::Tensor& soft,
                          const chem::ElectronDelta& truth) {
  const int n = soft.rows();
  if (soft.cols() != n) {
    throw std::invalid_argument("soft delta must be square");
  }
  for (const auto& [pair, value] : truth.entries()) {
    (void)value;
    if (pair.second >= n) {
      throw std::invalid_argument("delta entry outside the graph");
    }
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double diff = soft.at(i, j) - truth.get(i, j);
      total += diff * diff;
    }
  }
  return total;
}

double Expert::loss(const chem::Reaction& r, const DropoutPlan& drop) const {
  ad::Tape tape;
  return tape.value(loss_on_tape(tape, r, drop, nullptr)).at(0, 0);
}

ad::NodeId Expert::loss_on_tape(
    ad::Tape& tape, const chem::Reaction& r, const DropoutPlan& drop,
    std::vector<std::pair<std::string, ad::NodeId>>* param_nodes) const {
  const ad::NodeId sym = soft_delta_on_tape(tape, r.reactants, drop,
                                            param_nodes);
  const int n = r.reactants.atom_count();
  const chem::ElectronDelta truth = chem::compute_delta(r);
  ad::Tensor target(n, n);
  for (const auto& [pair, value] : truth.entries()) {
    target.at(pair.first, pair.second) = value;
    target.at(pair.second, pair.first) = value;
  }
  const ad::NodeId diff = tape.sub(sym, tape.constant(std::move(target)));
  // The full-matrix sum double counts each unordered pair; the diagonal is
  // zero on both sides.
  return tape.scale(tape.sum(tape.mul(diff, diff)), 0.5);
}

chem::ElectronDelta Expert::discretize(const ad::Tensor& soft) {
  const int n = soft.rows();
  if (soft.cols() != n) {
    throw std::invalid_argument("soft delta must be square");
  }
  chem::ElectronDelta out;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double rounded = std::round(soft.at(i, j));
      const int q = static_cast<int>(std::clamp(rounded, -3.0, 3.0));
      if (q != 0) out.set(i, j, q);
    }
  }
  return out;
}

double Expert::train_step(const std::vector<const chem::Reaction*>& batch,
                          const ad::AdamConfig& adam,
                          std::uint64_t dropout_seed, std::uint64_t step_base) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");

  std::map<std::string, ad::Tensor> grads;
  for (const std::string& name : params_.names()) {
    const ad::Tensor& v = params_.value(name);
    grads.emplace(name, ad::Tensor(v.rows(), v.cols()));
  }

  double loss_sum = 0.0;
  for (std::size_t idx = 0; idx < batch.size(); ++idx) {
    ad::Tape tape;
    std::vector<std::pair<std::string, ad::NodeId>> nodes;
    DropoutPlan plan;
    plan.enabled = cfg_.dropout_rate > 0.0;
    plan.rate = cfg_.dropout_rate;
    plan.seed = dropout_seed;
    plan.step = step_base + idx;
    const ad::NodeId loss_node = loss_on_tape(tape, *batch[idx], plan, &nodes);
    loss_sum += tape.value(loss_node).at(0, 0);
    tape.backward(loss_node);
    for (const auto& [name, node] : nodes) {
      const ad::Tensor g = tape.grad(node);
      if (g.empty()) continue;
      ad::Tensor& acc = grads.at(name);
      for (std::size_t k = 0; k < g.raw().size(); ++k) {
        acc.raw()[k] += g.raw()[k];
      }
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (auto& [name, g] : grads) {
    (void)name;
    for (double& v : g.raw()) v *= inv_batch;
  }
  params_.adamw_step(grads, adam);
  return loss_sum * inv_batch;
}

ad::NamedTensors Expert::to_tensors() const {
  ad::NamedTensors out;
  ad::Tensor header(1, 7);
  header.raw() = {static_cast<double>(cfg_.embed_dim),
                  static_cast<double>(cfg_.gnn_rounds),
                  static_cast<double>(cfg_.attn_layers),
                  static_cast<double>(cfg_.attn_heads),
                  static_cast<double>(cfg_.channels),
                  cfg_.dropout_rate,
                  static_cast<double>(cfg_.max_atoms)};
  out.items.emplace_back("__config", std::move(header));
  for (auto& item : params_.to_tensors().items) {
    out.items.push_back(std::move(item));
  }
  return out;
}

Expert Expert::from_tensors(const ad::NamedTensors& t) {
  if (t.items.empty() || t.items.front().first != "__config" ||
      t.items.front().second.rows() != 1 ||
      t.items.front().second.cols() != 7) {
    throw ad::CheckpointError("missing model config header");
  }
  const auto& h = t.items.front().second.raw();
  ExpertConfig cfg;
  cfg.embed_dim = static_cast<int>(std::llround(h[0]));
  cfg.gnn_rounds = static_cast<int>(std::llround(h[1]));
  cfg.attn_layers = static_cast<int>(std::llround(h[2]));
  cfg.attn_heads = static_cast<int>(std::llround(h[3]));
  cfg.channels = static_cast<int>(std::llround(h[4]));
  cfg.dropout_rate = h[5];
  cfg.max_atoms = static_cast<int>(std::llround(h[6]));

  Expert e(cfg);
  ad::NamedTensors rest;
  rest.items.assign(t.items.begin() + 1, t.items.end());
  const ad::ParamStore loaded = ad::ParamStore::from_tensors(rest);
  if (loaded.names() != e.params_.names()) {
    throw ad::CheckpointError("parameter layout mismatch");
  }
  for (const std::string& name : loaded.names()) {
    const ad::Tensor& src = loaded.value(name);
    ad::Tensor& dst = e.params_.value(name);
    if (!dst.same_shape(src)) {
      throw ad::CheckpointError("parameter shape mismatch for " + name);
    }
    dst = src;
  }
  return e;
}

std::uint64_t Expert::forward_pass_count() {
  return g_forward_passes.load(std::memory_order_relaxed);
}

void Expert::reset_forward_pass_count() {
  g_forward_passes.store(0, std::memory_order_relaxed);
}

}  // namespace erpflow::model
