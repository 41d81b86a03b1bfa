//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "erpflow/datagen.hpp"
#include "erpflow/inference.hpp"
#include "erpflow/seqmoe.hpp"

namespace erpflow::cfg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain-text `key=value` document with `[section]` headers. `#` starts a
// comment, blank lines are ignored, duplicate keys within a section are
// errors. Values are raw trimmed strings; typed access converts on demand.
class Config {
 public:
  struct Entry {
    std::string key;
    std::string value;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
  };

  // Throws ConfigError with a 1-based line number on malformed input.
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  // Canonical text form; parse(echo()) reproduces an equal document.
  std::string echo() const;

  bool has(const std::string& section, const std::string& key) const;
  // Throws ConfigError when the key is absent.
  const std::string& get(const std::string& section,
                         const std::string& key) const;

  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  std::string get_string(const std::string& section, const std::string& key,
                         std::string fallback) const;

  void set(const std::string& section, const std::string& key,
           std::string value);

  const std::vector<Section>& sections() const { return sections_; }

  bool operator==(const Config& other) const;

 private:
  std::vector<Section> sections_;
};

// Consolidated run settings: model, training, fingerprint, inference, and
// reporting knobs. Missing keys keep their defaults; unknown sections or
// keys are hard errors.
struct RunConfig {
  moe::SeqTrainConfig train;
  infer::PredictOptions predict;
  double rare_threshold = 0.01;
  int hitrate_min_truths = 2;
  bool adjust_uspto = false;
};

RunConfig run_config_from(const Config& c);
Config to_config(const RunConfig& rc);

// Corpus settings live under [corpus] plus a [templates] section mapping
// template names to shares.
gen::CorpusSpec corpus_spec_from(const Config& c);
Config to_config(const gen::CorpusSpec& spec);

}  // namespace erpflow::cfg
