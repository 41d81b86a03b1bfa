//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "erpflow/hash.hpp"

namespace erpflow::fp {

Fingerprint morgan_fingerprint(const chem::MolGraph& g, int radius,
                               int length) {
  if (radius < 0) throw std::invalid_argument("radius must be >= 0");
  if (length <= 0) throw std::invalid_argument("length must be > 0");
  Fingerprint out;
  out.counts.assign(static_cast<std::size_t>(length), 0);

  const int n = g.atom_count();
  std::vector<std::uint64_t> env(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const chem::Atom& a = g.atom(i);
    std::uint64_t h = mix64(0x6d6f7267616e0000ULL,
                            static_cast<std::uint64_t>(a.element));
    h = mix64(h, static_cast<std::uint64_t>(a.formal_charge + 8));
    h = mix64(h, static_cast<std::uint64_t>(g.degree(i)));
    h = mix64(h, static_cast<std::uint64_t>(a.explicit_h));
    env[static_cast<std::size_t>(i)] = h;
  }

  std::vector<std::uint64_t> next(env.size());
  std::vector<std::uint64_t> around;
  for (int r = 0; r <= radius; ++r) {
    for (int i = 0; i < n; ++i) {
      out.counts[env[static_cast<std::size_t>(i)] %
                 static_cast<std::uint64_t>(length)]++;
    }
    if (r == radius) break;
    for (int i = 0; i < n; ++i) {
      around.clear();
      for (int j = 0; j < n; ++j) {
        const int b = g.bond(i, j);
        if (b > 0)
          around.push_back(mix64(static_cast<std::uint64_t>(b),
                                 env[static_cast<std::size_t>(j)]));
      }
      std::sort(around.begin(), around.end());
      std::uint64_t h = env[static_cast<std::size_t>(i)];
      for (const std::uint64_t v : around) h = mix64(h, v);
      next[static_cast<std::size_t>(i)] = h;
    }
    env.swap(next);
  }
  return out;
}

namespace {

template <typename A, typename B>
double cosine_impl(const A& a, const B& b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]);
    const double y = static_cast<double>(b[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double cosine_similarity(const Fingerprint& a, const Fingerprint& b) {
  return cosine_impl(a.counts, b.counts);
}
double cosine_similarity(const Fingerprint& a, const Centroid& b) {
  return cosine_impl(a.counts, b.values);
}
double cosine_similarity(const Centroid& a, const Centroid& b) {
  return cosine_impl(a.values, b.values);
}

Centroid centroid(const std::vector<Fingerprint>& fps) {
  if (fps.empty()) throw std::invalid_argument("empty fingerprint list");
  const std::size_t len = fps.front().counts.size();
  Centroid c;
  c.values.assign(len, 0.0);
  for (const Fingerprint& f : fps) {
    if (f.counts.size() != len) throw std::invalid_argument("length mismatch");
    for (std::size_t i = 0; i < len; ++i)
      c.values[i] += static_cast<double>(f.counts[i]);
  }
  for (double& v : c.values) v /= static_cast<double>(fps.size());
  return c;
}

}  // namespace erpflow::fp
