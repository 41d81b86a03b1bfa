//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace erpflow::chem {

enum class Element : std::uint8_t { H, B, C, N, O, F, Si, P, S, Cl, Br, I };

inline constexpr int kElementCount = 12;

struct ElementInfo {
  const char* symbol;
  int max_valence;
  // Valence states used to fill implicit hydrogens on bare SMILES atoms,
  // ascending, 0-terminated.
  int fill_valences[4];
  // May be written without brackets.
  bool organic_subset;
};

const ElementInfo& element_info(Element e);
std::optional<Element> element_from_symbol(std::string_view s);

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  int explicit_h = 0;
  int map_index = 0;  // 0 means unmapped
};

// Atoms plus a symmetric shared-electron-pair matrix. Bond orders are
// 0 (none) through 3 (triple). Instances are treated as immutable once
// built; all operations below are pure.
class MolGraph {
 public:
  MolGraph() = default;
  explicit MolGraph(std::vector<Atom> atoms)
      : atoms_(std::move(atoms)), bonds_(atoms_.size() * atoms_.size(), 0) {}

  int atom_count() const { return static_cast<int>(atoms_.size()); }
  bool empty() const { return atoms_.empty(); }

  const Atom& atom(int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  Atom& atom(int i) { return atoms_[static_cast<std::size_t>(i)]; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  int bond(int i, int j) const { return bonds_[idx(i, j)]; }
  void set_bond(int i, int j, int order);

  // Total shared electron pairs on atom i.
  int bond_order_sum(int i) const;
  // Number of distinct bonded neighbors.
  int degree(int i) const;
  std::vector<int> neighbors(int i) const;

  int add_atom(const Atom& a);

  // First violated invariant, or nullopt when the graph is chemically valid
  // under the element table.
  std::optional<std::string> validity_error() const;

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * atoms_.size() +
           static_cast<std::size_t>(j);
  }

  std::vector<Atom> atoms_;
  std::vector<int> bonds_;
};

// Sparse bond-change matrix keyed by unordered atom pair (i < j) over
// reactant indices. Entries are never zero.
class ElectronDelta {
 public:
  using Map = std::map<std::pair<int, int>, int>;

  void set(int i, int j, int delta);
  int get(int i, int j) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const Map& entries() const { return entries_; }

  bool operator==(const ElectronDelta& other) const {
    return entries_ == other.entries_;
  }

 private:
  Map entries_;
};

struct Reaction {
  MolGraph reactants;
  MolGraph product;
  // reactant atom index -> product atom index, -1 for leaving atoms.
  std::vector<int> atom_alignment;
  std::string id;
};

class ReactionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Builds the alignment from map indices and checks the Reaction invariants:
// every product atom is the image of exactly one reactant atom, and aligned
// atoms share the element symbol.
Reaction make_reaction(MolGraph reactants, MolGraph product, std::string id);

// Bond-change matrix of an aligned reaction. Pairs touching a leaving atom
// contribute the full bond as broken.
ElectronDelta compute_delta(const Reaction& r);

// Reactant graph plus delta. Returns nullopt when any resulting bond falls
// outside [0, 3] or an atom exceeds its maximum valence. All atoms are kept
// unless drop_isolated is set, in which case unmapped atoms that end with
// zero bonds are removed.
std::optional<MolGraph> apply_delta(const MolGraph& g, const ElectronDelta& d,
                                    bool drop_isolated = false);

// Isomorphism-invariant digest: iterative neighborhood-hash refinement to a
// fixed point, then a sorted multiset digest. Ignores atom order and map
// indices.
std::string canonical_signature(const MolGraph& g);

// Canonical string over the multiset of (element, element, delta) tuples,
// element pair sorted. Reactions sharing a redistribution pattern map to the
// same string.
std::string pattern_signature(const ElectronDelta& d, const Reaction& r);

// --- Reaction file format -------------------------------------------------
// One reaction per line, `reactant_smiles>>product_smiles`, UTF-8,
// `#`-prefixed comment lines ignored. Ids are assigned from the running
// reaction ordinal unless the caller supplies a prefix.

Reaction parse_reaction_line(std::string_view line, std::string id);

struct ReactionFileResult {
  std::vector<Reaction> reactions;
  std::vector<std::string> errors;  // "line N: message", one per bad line
};

// Skips comments and blank lines, collects per-line errors instead of
// throwing. Ids are the 1-based reaction ordinal within the file.
ReactionFileResult read_reaction_file_lenient(const std::string& path);

// Throws ReactionError on the first bad line.
std::vector<Reaction> read_reaction_file(const std::string& path);

void write_reaction_file(const std::string& path,
                         const std::vector<Reaction>& reactions);
std::string reaction_to_line(const Reaction& r);

}  // namespace erpflow::chem
