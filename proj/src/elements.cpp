//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/molgraph.hpp"

namespace erpflow::chem {

namespace {

constexpr ElementInfo kTable[kElementCount] = {
    // symbol  max  fill            organic
    {"H", 1, {1, 0, 0, 0}, false},
    {"B", 3, {3, 0, 0, 0}, true},
    {"C", 4, {4, 0, 0, 0}, true},
    {"N", 3, {3, 0, 0, 0}, true},
    {"O", 2, {2, 0, 0, 0}, true},
    {"F", 1, {1, 0, 0, 0}, true},
    {"Si", 4, {4, 0, 0, 0}, false},
    {"P", 5, {3, 5, 0, 0}, true},
    {"S", 6, {2, 4, 6, 0}, true},
    {"Cl", 1, {1, 0, 0, 0}, true},
    {"Br", 1, {1, 0, 0, 0}, true},
    {"I", 1, {1, 0, 0, 0}, true},
};

}  // namespace

const ElementInfo& element_info(Element e) {
  return kTable[static_cast<int>(e)];
}

std::optional<Element> element_from_symbol(std::string_view s) {
  for (int i = 0; i < kElementCount; ++i) {
    if (s == kTable[i].symbol) return static_cast<Element>(i);
  }
  return std::nullopt;
}

}  // namespace erpflow::chem
