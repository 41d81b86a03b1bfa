//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/molgraph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "erpflow/hash.hpp"
#include "erpflow/smiles.hpp"

namespace erpflow::chem {

void MolGraph::set_bond(int i, int j, int order) {
  if (i == j) throw std::invalid_argument("self bond");
  if (i < 0 || j < 0 || i >= atom_count() || j >= atom_count())
    throw std::out_of_range("bond index out of range");
  if (order < 0 || order > 3) throw std::invalid_argument("bond order out of range");
  bonds_[idx(i, j)] = order;
  bonds_[idx(j, i)] = order;
}

int MolGraph::bond_order_sum(int i) const {
  int s = 0;
  for (int j = 0; j < atom_count(); ++j) s += bond(i, j);
  return s;
}

int MolGraph::degree(int i) const {
  int d = 0;
  for (int j = 0; j < atom_count(); ++j)
    if (bond(i, j) > 0) ++d;
  return d;
}

std::vector<int> MolGraph::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < atom_count(); ++j)
    if (bond(i, j) > 0) out.push_back(j);
  return out;
}

int MolGraph::add_atom(const Atom& a) {
  const int n = atom_count();
  std::vector<int> grown(static_cast<std::size_t>(n + 1) * (n + 1), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      grown[static_cast<std::size_t>(i) * (n + 1) + j] = bonds_[idx(i, j)];
  atoms_.push_back(a);
  bonds_ = std::move(grown);
  return n;
}

std::optional<std::string> MolGraph::validity_error() const {
  for (int i = 0; i < atom_count(); ++i) {
    const Atom& a = atom(i);
    if (a.explicit_h < 0) return "negative hydrogen count on atom " + std::to_string(i);
    const ElementInfo& info = element_info(a.element);
    const int used = bond_order_sum(i) + a.explicit_h - a.formal_charge;
    if (used > info.max_valence) {
      return std::string("valence of ") + info.symbol + " atom " +
             std::to_string(i) + " is " + std::to_string(used) +
             ", exceeds " + std::to_string(info.max_valence);
    }
  }
  return std::nullopt;
}

void ElectronDelta::set(int i, int j, int delta) {
  if (i == j) throw std::invalid_argument("delta on diagonal");
  if (delta < -3 || delta > 3) throw std::invalid_argument("delta out of range");
  const auto key = std::make_pair(std::min(i, j), std::max(i, j));
  if (delta == 0) {
    entries_.erase(key);
  } else {
    entries_[key] = delta;
  }
}

int ElectronDelta::get(int i, int j) const {
  const auto it = entries_.find({std::min(i, j), std::max(i, j)});
  return it == entries_.end() ? 0 : it->second;
}

Reaction make_reaction(MolGraph reactants, MolGraph product, std::string id) {
  std::map<int, int> r_by_map;
  for (int i = 0; i < reactants.atom_count(); ++i) {
    const int m = reactants.atom(i).map_index;
    if (m <= 0) continue;
    if (!r_by_map.emplace(m, i).second)
      throw ReactionError("duplicate atom map " + std::to_string(m) + " in reactants");
  }
  std::vector<int> alignment(static_cast<std::size_t>(reactants.atom_count()), -1);
  std::map<int, int> seen_product_maps;
  for (int p = 0; p < product.atom_count(); ++p) {
    const int m = product.atom(p).map_index;
    if (m <= 0)
      throw ReactionError("product atom " + std::to_string(p) + " has no atom map");
    if (!seen_product_maps.emplace(m, p).second)
      throw ReactionError("duplicate atom map " + std::to_string(m) + " in product");
    const auto it = r_by_map.find(m);
    if (it == r_by_map.end())
      throw ReactionError("product atom map " + std::to_string(m) +
                          " has no reactant source");
    const int r = it->second;
    if (reactants.atom(r).element != product.atom(p).element)
      throw ReactionError("element mismatch at atom map " + std::to_string(m));
    alignment[static_cast<std::size_t>(r)] = p;
  }
  Reaction rx;
  rx.reactants = std::move(reactants);
  rx.product = std::move(product);
  rx.atom_alignment = std::move(alignment);
  rx.id = std::move(id);
  return rx;
}

ElectronDelta compute_delta(const Reaction& r) {
  ElectronDelta d;
  const int n = r.reactants.atom_count();
  for (int i = 0; i < n; ++i) {
    const int ai = r.atom_alignment[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) {
      const int aj = r.atom_alignment[static_cast<std::size_t>(j)];
      const int er = r.reactants.bond(i, j);
      const int ep = (ai >= 0 && aj >= 0) ? r.product.bond(ai, aj) : 0;
      if (ep != er) d.set(i, j, ep - er);
    }
  }
  return d;
}

std::optional<MolGraph> apply_delta(const MolGraph& g, const ElectronDelta& d,
                                    bool drop_isolated) {
  MolGraph out = g;
  for (const auto& [pair, delta] : d.entries()) {
    const auto [i, j] = pair;
    if (i < 0 || j < 0 || i >= g.atom_count() || j >= g.atom_count())
      throw std::out_of_range("delta index out of range");
    const int nb = out.bond(i, j) + delta;
    if (nb < 0 || nb > 3) return std::nullopt;
    out.set_bond(i, j, nb);
  }
  if (out.validity_error()) return std::nullopt;
  if (!drop_isolated) return out;

  std::vector<Atom> kept;
  std::vector<int> remap(static_cast<std::size_t>(out.atom_count()), -1);
  for (int i = 0; i < out.atom_count(); ++i) {
    if (out.bond_order_sum(i) == 0 && out.atom(i).map_index == 0) continue;
    remap[static_cast<std::size_t>(i)] = static_cast<int>(kept.size());
    kept.push_back(out.atom(i));
  }
  MolGraph pruned(std::move(kept));
  for (int i = 0; i < out.atom_count(); ++i) {
    if (remap[static_cast<std::size_t>(i)] < 0) continue;
    for (int j = i + 1; j < out.atom_count(); ++j) {
      if (remap[static_cast<std::size_t>(j)] < 0) continue;
      const int b = out.bond(i, j);
      if (b > 0)
        pruned.set_bond(remap[static_cast<std::size_t>(i)],
                        remap[static_cast<std::size_t>(j)], b);
    }
  }
  return pruned;
}

std::string canonical_signature(const MolGraph& g) {
  const int n = g.atom_count();
  std::vector<std::uint64_t> label(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Atom& a = g.atom(i);
    const std::uint64_t packed =
        (static_cast<std::uint64_t>(a.element) << 16) |
        (static_cast<std::uint64_t>(a.formal_charge + 8) << 8) |
        static_cast<std::uint64_t>(a.explicit_h);
    label[static_cast<std::size_t>(i)] = mix64(packed);
  }
  // Neighborhood-hash refinement; n rounds reach a fixed point on any
  // n-atom graph.
  std::vector<std::uint64_t> next(label.size());
  std::vector<std::uint64_t> env;
  for (int round = 0; round < n; ++round) {
    for (int i = 0; i < n; ++i) {
      env.clear();
      for (int j = 0; j < n; ++j) {
        const int b = g.bond(i, j);
        if (b > 0)
          env.push_back(mix64(static_cast<std::uint64_t>(b),
                              label[static_cast<std::size_t>(j)]));
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = label[static_cast<std::size_t>(i)];
      for (const std::uint64_t v : env) h = mix64(h, v);
      next[static_cast<std::size_t>(i)] = h;
    }
    label.swap(next);
  }
  std::vector<std::uint64_t> nodes = label;
  std::sort(nodes.begin(), nodes.end());
  std::vector<std::uint64_t> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int b = g.bond(i, j);
      if (b == 0) continue;
      const std::uint64_t lo = std::min(label[static_cast<std::size_t>(i)],
                                        label[static_cast<std::size_t>(j)]);
      const std::uint64_t hi = std::max(label[static_cast<std::size_t>(i)],
                                        label[static_cast<std::size_t>(j)]);
      edges.push_back(mix64(mix64(lo, hi), static_cast<std::uint64_t>(b)));
    }
  }
  std::sort(edges.begin(), edges.end());
  std::uint64_t digest = mix64(static_cast<std::uint64_t>(n));
  for (const std::uint64_t v : nodes) digest = mix64(digest, v);
  for (const std::uint64_t v : edges) digest = mix64(digest, v);
  return to_hex(digest);
}

std::string pattern_signature(const ElectronDelta& d, const Reaction& r) {
  if (d.empty()) return "-";
  std::vector<std::string> parts;
  parts.reserve(d.size());
  for (const auto& [pair, delta] : d.entries()) {
    std::string a = element_info(r.reactants.atom(pair.first).element).symbol;
    std::string b = element_info(r.reactants.atom(pair.second).element).symbol;
    if (b < a) std::swap(a, b);
    parts.push_back(a + "," + b + ":" + (delta > 0 ? "+" : "") +
                    std::to_string(delta));
  }
  std::sort(parts.begin(), parts.end());
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += ";" + parts[i];
  return out;
}

Reaction parse_reaction_line(std::string_view line, std::string id) {
  const auto sep = line.find(">>");
  if (sep == std::string_view::npos)
    throw ReactionError("missing '>>' separator");
  if (line.find(">>", sep + 2) != std::string_view::npos)
    throw ReactionError("more than one '>>' separator");
  MolGraph reactants = parse_smiles(line.substr(0, sep));
  MolGraph product = parse_smiles(line.substr(sep + 2));
  return make_reaction(std::move(reactants), std::move(product), std::move(id));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  return s;
}

}  // namespace

ReactionFileResult read_reaction_file_lenient(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ReactionError("cannot open reaction file: " + path);
  ReactionFileResult result;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t ordinal = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    ++ordinal;
    try {
      result.reactions.push_back(
          parse_reaction_line(line, std::to_string(ordinal)));
    } catch (const std::exception& e) {
      result.errors.push_back("line " + std::to_string(line_no) + ": " +
                              e.what());
    }
  }
  return result;
}

std::vector<Reaction> read_reaction_file(const std::string& path) {
  ReactionFileResult r = read_reaction_file_lenient(path);
  if (!r.errors.empty()) throw ReactionError(path + ": " + r.errors.front());
  return std::move(r.reactions);
}

void write_reaction_file(const std::string& path,
                         const std::vector<Reaction>& reactions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReactionError("cannot write reaction file: " + path);
  for (const Reaction& r : reactions) out << reaction_to_line(r) << '\n';
  if (!out) throw ReactionError("write failed: " + path);
}

std::string reaction_to_line(const Reaction& r) {
  return write_smiles(r.reactants) + ">>" + write_smiles(r.product);
}

}  // namespace erpflow::chem
