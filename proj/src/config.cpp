//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace erpflow::cfg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

std::int64_t parse_int(const std::string& where, const std::string& raw) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(raw, &pos);
    if (pos != raw.size()) fail(where + ": not an integer: " + raw);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(where + ": not an integer: " + raw);
  }
}

double parse_double(const std::string& where, const std::string& raw) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(raw, &pos);
    if (pos != raw.size()) fail(where + ": not a number: " + raw);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(where + ": not a number: " + raw);
  }
}

bool parse_bool(const std::string& where, const std::string& raw) {
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  fail(where + ": not a boolean: " + raw);
}

// Walks every section/key pair and errors on anything the reader did not
// consume.
class KeyChecker {
 public:
  explicit KeyChecker(const Config& c) : config_(c) {}

  void allow(const std::string& section, const std::string& key) {
    allowed_.insert(section + "." + key);
  }

  void enforce() const {
    for (const Config::Section& s : config_.sections()) {
      for (const Config::Entry& e : s.entries) {
        if (allowed_.count(s.name + "." + e.key) == 0) {
          fail("unknown key: [" + s.name + "] " + e.key);
        }
      }
    }
  }

 private:
  const Config& config_;
  std::set<std::string> allowed_;
};

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string section;
  bool have_section = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']') {
        fail("line " + std::to_string(lineno) + ": unterminated section header");
      }
      section = trim(stripped.substr(1, stripped.size() - 2));
      if (section.empty()) {
        fail("line " + std::to_string(lineno) + ": empty section name");
      }
      have_section = true;
      continue;
    }
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail("line " + std::to_string(lineno) + ": expected key=value");
    }
    if (!have_section) {
      fail("line " + std::to_string(lineno) + ": key before any section");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      fail("line " + std::to_string(lineno) + ": empty key");
    }
    if (!seen.insert(section + "." + key).second) {
      fail("line " + std::to_string(lineno) + ": duplicate key: " + key);
    }
    c.set(section, key, value);
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open config file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return parse(out.str());
}

std::string Config::echo() const {
  std::string out;
  for (const Section& s : sections_) {
    out += "[" + s.name + "]\n";
    for (const Entry& e : s.entries) {
      out += e.key + " = " + e.value + "\n";
    }
    out += "\n";
  }
  return out;
}

bool Config::has(const std::string& section, const std::string& key) const {
  for (const Section& s : sections_) {
    if (s.name != section) continue;
    for (const Entry& e : s.entries) {
      if (e.key == key) return true;
    }
  }
  return false;
}

const std::string& Config::get(const std::string& section,
                               const std::string& key) const {
  for (const Section& s : sections_) {
    if (s.name != section) continue;
    for (const Entry& e : s.entries) {
      if (e.key == key) return e.value;
    }
  }
  fail("missing key: [" + section + "] " + key);
}

std::int64_t Config::get_int(const std::string& section, const std::string& key,
                             std::int64_t fallback) const {
  if (!has(section, key)) return fallback;
  return parse_int("[" + section + "] " + key, get(section, key));
}

std::uint64_t Config::get_u64(const std::string& section,
                              const std::string& key,
                              std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string& raw = get(section, key);
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(raw, &pos);
    if (pos != raw.size()) {
      fail("[" + section + "] " + key + ": not an integer: " + raw);
    }
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail("[" + section + "] " + key + ": not an integer: " + raw);
  }
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  if (!has(section, key)) return fallback;
  return parse_double("[" + section + "] " + key, get(section, key));
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
  if (!has(section, key)) return fallback;
  return parse_bool("[" + section + "] " + key, get(section, key));
}

std::string Config::get_string(const std::string& section,
                               const std::string& key,
                               std::string fallback) const {
  if (!has(section, key)) return fallback;
  return get(section, key);
}

void Config::set(const std::string& section, const std::string& key,
                 std::string value) {
  for (Section& s : sections_) {
    if (s.name != section) continue;
    for (Entry& e : s.entries) {
      if (e.key == key) {
        e.value = std::move(value);
        return;
      }
    }
    s.entries.push_back(Entry{key, std::move(value)});
    return;
  }
  sections_.push_back(Section{section, {Entry{key, std::move(value)}}});
}

bool Config::operator==(const Config& other) const {
  if (sections_.size() != other.sections_.size()) return false;
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const Section& a = sections_[i];
    const Section& b = other.sections_[i];
    if (a.name != b.name || a.entries.size() != b.entries.size()) return false;
    for (std::size_t j = 0; j < a.entries.size(); ++j) {
      if (a.entries[j].key != b.entries[j].key ||
          a.entries[j].value != b.entries[j].value) {
        return false;
      }
    }
  }
  return true;
}

RunConfig run_config_from(const Config& c) {
  KeyChecker check(c);
  RunConfig rc;

  model::ExpertConfig& m = rc.train.expert;
  check.allow("model", "embed_dim");
  check.allow("model", "gnn_rounds");
  check.allow("model", "attn_layers");
  check.allow("model", "attn_heads");
  check.allow("model", "channels");
  check.allow("model", "dropout_rate");
  check.allow("model", "max_atoms");
  m.embed_dim = static_cast<int>(c.get_int("model", "embed_dim", m.embed_dim));
  m.gnn_rounds =
      static_cast<int>(c.get_int("model", "gnn_rounds", m.gnn_rounds));
  m.attn_layers =
      static_cast<int>(c.get_int("model", "attn_layers", m.attn_layers));
  m.attn_heads =
      static_cast<int>(c.get_int("model", "attn_heads", m.attn_heads));
  m.channels = static_cast<int>(c.get_int("model", "channels", m.channels));
  m.dropout_rate = c.get_double("model", "dropout_rate", m.dropout_rate);
  m.max_atoms = static_cast<int>(c.get_int("model", "max_atoms", m.max_atoms));

  moe::SeqTrainConfig& t = rc.train;
  check.allow("train", "warmup_iters");
  check.allow("train", "n_experts");
  check.allow("train", "t_per_expert");
  check.allow("train", "max_total_iters");
  check.allow("train", "chief_iters");
  check.allow("train", "stall_limit");
  check.allow("train", "batch_size");
  check.allow("train", "base_seed");
  t.warmup_iters =
      static_cast<int>(c.get_int("train", "warmup_iters", t.warmup_iters));
  t.n_experts = static_cast<int>(c.get_int("train", "n_experts", t.n_experts));
  t.t_per_expert =
      static_cast<int>(c.get_int("train", "t_per_expert", t.t_per_expert));
  t.max_total_iters = static_cast<int>(
      c.get_int("train", "max_total_iters", t.max_total_iters));
  t.chief_iters =
      static_cast<int>(c.get_int("train", "chief_iters", t.chief_iters));
  t.stall_limit =
      static_cast<int>(c.get_int("train", "stall_limit", t.stall_limit));
  t.batch_size =
      static_cast<int>(c.get_int("train", "batch_size", t.batch_size));
  t.base_seed = c.get_u64("train", "base_seed", t.base_seed);

  ad::AdamConfig& a = rc.train.adam;
  check.allow("optim", "lr");
  check.allow("optim", "beta1");
  check.allow("optim", "beta2");
  check.allow("optim", "eps");
  check.allow("optim", "weight_decay");
  check.allow("optim", "warmup_steps");
  check.allow("optim", "decay_steps");
  a.lr = c.get_double("optim", "lr", a.lr);
  a.beta1 = c.get_double("optim", "beta1", a.beta1);
  a.beta2 = c.get_double("optim", "beta2", a.beta2);
  a.eps = c.get_double("optim", "eps", a.eps);
  a.weight_decay = c.get_double("optim", "weight_decay", a.weight_decay);
  a.warmup_steps =
      static_cast<int>(c.get_int("optim", "warmup_steps", a.warmup_steps));
  a.decay_steps =
      static_cast<int>(c.get_int("optim", "decay_steps", a.decay_steps));

  moe::FingerprintSpec& f = rc.train.fingerprint;
  check.allow("fingerprint", "radius");
  check.allow("fingerprint", "length");
  f.radius = static_cast<int>(c.get_int("fingerprint", "radius", f.radius));
  f.length = static_cast<int>(c.get_int("fingerprint", "length", f.length));

  infer::PredictOptions& p = rc.predict;
  check.allow("predict", "top_n");
  check.allow("predict", "n_seeds");
  check.allow("predict", "dropout_rate");
  check.allow("predict", "base_seed");
  check.allow("predict", "strategy");
  p.top_n = static_cast<int>(c.get_int("predict", "top_n", p.top_n));
  p.n_seeds = static_cast<int>(c.get_int("predict", "n_seeds", p.n_seeds));
  p.dropout_rate = c.get_double("predict", "dropout_rate", p.dropout_rate);
  p.base_seed = c.get_u64("predict", "base_seed", p.base_seed);
  if (c.has("predict", "strategy")) {
    const std::string name = c.get("predict", "strategy");
    try {
      p.strategy = infer::rank_strategy_from_name(name);
    } catch (const std::exception&) {
      fail("unknown rank strategy: " + name);
    }
  }

  check.allow("eval", "rare_threshold");
  check.allow("eval", "hitrate_min_truths");
  check.allow("eval", "adjust_uspto");
  rc.rare_threshold = c.get_double("eval", "rare_threshold", rc.rare_threshold);
  rc.hitrate_min_truths = static_cast<int>(
      c.get_int("eval", "hitrate_min_truths", rc.hitrate_min_truths));
  rc.adjust_uspto = c.get_bool("eval", "adjust_uspto", rc.adjust_uspto);

  check.enforce();
  rc.train.validate();
  return rc;
}

Config to_config(const RunConfig& rc) {
  Config c;
  const model::ExpertConfig& m = rc.train.expert;
  c.set("model", "embed_dim", std::to_string(m.embed_dim));
  c.set("model", "gnn_rounds", std::to_string(m.gnn_rounds));
  c.set("model", "attn_layers", std::to_string(m.attn_layers));
  c.set("model", "attn_heads", std::to_string(m.attn_heads));
  c.set("model", "channels", std::to_string(m.channels));
  c.set("model", "dropout_rate", format_double(m.dropout_rate));
  c.set("model", "max_atoms", std::to_string(m.max_atoms));

  const moe::SeqTrainConfig& t = rc.train;
  c.set("train", "warmup_iters", std::to_string(t.warmup_iters));
  c.set("train", "n_experts", std::to_string(t.n_experts));
  c.set("train", "t_per_expert", std::to_string(t.t_per_expert));
  c.set("train", "max_total_iters", std::to_string(t.max_total_iters));
  c.set("train", "chief_iters", std::to_string(t.chief_iters));
  c.set("train", "stall_limit", std::to_string(t.stall_limit));
  c.set("train", "batch_size", std::to_string(t.batch_size));
  c.set("train", "base_seed", std::to_string(t.base_seed));

  const ad::AdamConfig& a = rc.train.adam;
  c.set("optim", "lr", format_double(a.lr));
  c.set("optim", "beta1", format_double(a.beta1));
  c.set("optim", "beta2", format_double(a.beta2));
  c.set("optim", "eps", format_double(a.eps));
  c.set("optim", "weight_decay", format_double(a.weight_decay));
  c.set("optim", "warmup_steps", std::to_string(a.warmup_steps));
  c.set("optim", "decay_steps", std::to_string(a.decay_steps));

  c.set("fingerprint", "radius", std::to_string(t.fingerprint.radius));
  c.set("fingerprint", "length", std::to_string(t.fingerprint.length));

  const infer::PredictOptions& p = rc.predict;
  c.set("predict", "top_n", std::to_string(p.top_n));
  c.set("predict", "n_seeds", std::to_string(p.n_seeds));
  c.set("predict", "dropout_rate", format_double(p.dropout_rate));
  c.set("predict", "base_seed", std::to_string(p.base_seed));
  c.set("predict", "strategy", infer::rank_strategy_name(p.strategy));

  c.set("eval", "rare_threshold", format_double(rc.rare_threshold));
  c.set("eval", "hitrate_min_truths", std::to_string(rc.hitrate_min_truths));
  c.set("eval", "adjust_uspto", rc.adjust_uspto ? "true" : "false");
  return c;
}

gen::CorpusSpec corpus_spec_from(const Config& c) {
  KeyChecker check(c);
  gen::CorpusSpec spec;
  spec.templates.clear();

  check.allow("corpus", "total");
  check.allow("corpus", "conflict_fraction");
  check.allow("corpus", "test_fraction");
  check.allow("corpus", "seed");
  spec.total = static_cast<int>(c.get_int("corpus", "total", spec.total));
  spec.conflict_fraction =
      c.get_double("corpus", "conflict_fraction", spec.conflict_fraction);
  spec.test_fraction =
      c.get_double("corpus", "test_fraction", spec.test_fraction);
  spec.seed = c.get_u64("corpus", "seed", spec.seed);

  bool have_templates = false;
  for (const Config::Section& s : c.sections()) {
    if (s.name != "templates") continue;
    have_templates = true;
    for (const Config::Entry& e : s.entries) {
      check.allow("templates", e.key);
      spec.templates.push_back(gen::TemplateShare{
          e.key, parse_double("[templates] " + e.key, e.value)});
    }
  }
  if (!have_templates) spec.templates = gen::default_spec().templates;

  check.enforce();
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("invalid corpus spec: ") + e.what());
  }
  return spec;
}

Config to_config(const gen::CorpusSpec& spec) {
  Config c;
  c.set("corpus", "total", std::to_string(spec.total));
  c.set("corpus", "conflict_fraction", format_double(spec.conflict_fraction));
  c.set("corpus", "test_fraction", format_double(spec.test_fraction));
  c.set("corpus", "seed", std::to_string(spec.seed));
  for (const gen::TemplateShare& t : spec.templates) {
    c.set("templates", t.name, format_double(t.share));
  }
  return c;
}

}  // namespace erpflow::cfg
