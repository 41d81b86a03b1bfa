//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "erpflow/molgraph.hpp"

namespace erpflow::chem {

class SmilesError : public std::runtime_error {
 public:
  SmilesError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)),
        position(pos) {}
  std::size_t position;
};

// Kekulized subset: organic-subset atoms, bracket atoms with isotope-free
// element, H-count, charge in [-2, +2] and atom map; bonds - = #; branches;
// ring closures (digit and %nn); '.'-separated fragments. Lowercase aromatic
// atoms are rejected. Implicit hydrogens are filled on bare atoms from the
// element's valence list.
MolGraph parse_smiles(std::string_view s);

// Deterministic writer: DFS from the lowest atom index, neighbors visited in
// index order. Output reparses to an identical graph. Atoms with map index,
// charge, or a hydrogen count a bare atom would not imply are bracketed.
std::string write_smiles(const MolGraph& g);

}  // namespace erpflow::chem
