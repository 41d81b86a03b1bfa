//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "erpflow/molgraph.hpp"

namespace erpflow::fp {

// Count-based circular fingerprint. Length is fixed per registry.
struct Fingerprint {
  std::vector<std::uint32_t> counts;
};

// Element-wise mean of fingerprints.
struct Centroid {
  std::vector<double> values;
};

// For each atom and each r in 0..=radius, hashes the r-neighborhood
// descriptor (element, charge, degree, attached H, sorted neighbor hashes
// with bond orders) and folds it modulo length. Map indices are ignored so
// the result is invariant under atom reordering.
Fingerprint morgan_fingerprint(const chem::MolGraph& g, int radius, int length);

double cosine_similarity(const Fingerprint& a, const Fingerprint& b);
double cosine_similarity(const Fingerprint& a, const Centroid& b);
double cosine_similarity(const Centroid& a, const Centroid& b);

Centroid centroid(const std::vector<Fingerprint>& fps);

}  // namespace erpflow::fp
