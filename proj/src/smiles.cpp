//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace erpflow::chem {

namespace {

bool is_aromatic_lower(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

// Hydrogens a bare atom implies: smallest fill valence covering the bond sum.
int implied_bare_h(Element e, int bond_sum) {
  const ElementInfo& info = element_info(e);
  for (const int v : info.fill_valences) {
    if (v == 0) break;
    if (v >= bond_sum) return v - bond_sum;
  }
  return 0;
}

struct RingOpen {
  int atom;
  int order;  // 0 when unspecified at the opening end
  std::size_t pos;
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  MolGraph run() {
    while (i_ < s_.size()) step();
    if (pending_ != 0) throw SmilesError("dangling bond", pending_pos_);
    if (!stack_.empty()) throw SmilesError("unclosed branch", s_.size());
    if (!ring_.empty())
      throw SmilesError("unclosed ring closure " +
                            std::to_string(ring_.begin()->first),
                        ring_.begin()->second.pos);
    if (expect_fragment_)
      throw SmilesError("empty fragment after '.'", s_.size());

    MolGraph g(atoms_);
    for (const auto& [a, b, order] : bonds_) g.set_bond(a, b, order);
    for (int k = 0; k < g.atom_count(); ++k) {
      if (!bracketed_[static_cast<std::size_t>(k)])
        g.atom(k).explicit_h = implied_bare_h(g.atom(k).element,
                                              g.bond_order_sum(k));
    }
    for (int k = 0; k < g.atom_count(); ++k) {
      const Atom& a = g.atom(k);
      const ElementInfo& info = element_info(a.element);
      const int used = g.bond_order_sum(k) + a.explicit_h - a.formal_charge;
      if (used > info.max_valence)
        throw SmilesError(std::string("valence of ") + info.symbol + " is " +
                              std::to_string(used) + ", exceeds " +
                              std::to_string(info.max_valence),
                          atom_pos_[static_cast<std::size_t>(k)]);
    }
    return g;
  }

 private:
  void step() {
    const char c = s_[i_];
    if (c == '[') {
      bracket_atom();
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      organic_atom();
    } else if (is_aromatic_lower(c)) {
      throw SmilesError("aromatic atoms not supported, kekulized input required",
                        i_);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
      ring_closure();
    } else if (c == '-' || c == '=' || c == '#') {
      if (pending_ != 0) throw SmilesError("two bond symbols in a row", i_);
      pending_ = (c == '-') ? 1 : (c == '=') ? 2 : 3;
      pending_pos_ = i_;
      ++i_;
    } else if (c == '(') {
      if (prev_ < 0) throw SmilesError("branch with no preceding atom", i_);
      if (pending_ != 0) throw SmilesError("bond before branch open", i_);
      stack_.push_back(prev_);
      ++i_;
    } else if (c == ')') {
      if (pending_ != 0) throw SmilesError("dangling bond", pending_pos_);
      if (stack_.empty()) throw SmilesError("unmatched ')'", i_);
      prev_ = stack_.back();
      stack_.pop_back();
      ++i_;
    } else if (c == '.') {
      if (pending_ != 0)
        throw SmilesError("bond before fragment separator", pending_pos_);
      if (prev_ < 0 || !stack_.empty())
        throw SmilesError("misplaced fragment separator", i_);
      prev_ = -1;
      expect_fragment_ = true;
      ++i_;
    } else {
      throw SmilesError(std::string("unexpected character '") + c + "'", i_);
    }
  }

  void organic_atom() {
    const std::size_t pos = i_;
    Element e;
    if (i_ + 1 < s_.size() && s_[i_] == 'C' && s_[i_ + 1] == 'l') {
      e = Element::Cl;
      i_ += 2;
    } else if (i_ + 1 < s_.size() && s_[i_] == 'B' && s_[i_ + 1] == 'r') {
      e = Element::Br;
      i_ += 2;
    } else {
      const auto found = element_from_symbol(s_.substr(i_, 1));
      if (!found || !element_info(*found).organic_subset)
        throw SmilesError(std::string("element '") + s_[i_] +
                              "' needs brackets or is unsupported",
                          i_);
      e = *found;
      ++i_;
    }
    Atom a;
    a.element = e;
    finish_atom(a, /*bracket=*/false, pos);
  }

  void bracket_atom() {
    const std::size_t pos = i_;
    std::size_t j = i_ + 1;
    const auto need = [&](bool cond, const char* msg) {
      if (!cond) throw SmilesError(msg, j < s_.size() ? j : s_.size());
    };
    need(j < s_.size(), "unterminated bracket atom");
    if (std::isdigit(static_cast<unsigned char>(s_[j])))
      throw SmilesError("isotopes not supported", j);
    if (std::islower(static_cast<unsigned char>(s_[j])))
      throw SmilesError("aromatic atoms not supported, kekulized input required",
                        j);
    need(std::isupper(static_cast<unsigned char>(s_[j])), "element expected");

    std::optional<Element> e;
    if (j + 1 < s_.size() &&
        std::islower(static_cast<unsigned char>(s_[j + 1])) &&
        (e = element_from_symbol(s_.substr(j, 2)))) {
      j += 2;
    } else {
      e = element_from_symbol(s_.substr(j, 1));
      if (!e)
        throw SmilesError("unsupported element '" + std::string(s_.substr(j, 1)) +
                              "'",
                          j);
      j += 1;
    }

    Atom a;
    a.element = *e;

    if (j < s_.size() && s_[j] == 'H') {
      ++j;
      if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
        a.explicit_h = 0;
        while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j])))
          a.explicit_h = a.explicit_h * 10 + (s_[j++] - '0');
      } else {
        a.explicit_h = 1;
      }
    }

    if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) {
      const char sign = s_[j];
      int mag = 1;
      ++j;
      if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
        mag = s_[j++] - '0';
      } else {
        while (j < s_.size() && s_[j] == sign) {
          ++mag;
          ++j;
        }
      }
      if (mag > 2) throw SmilesError("charge outside [-2, +2]", j - 1);
      a.formal_charge = (sign == '+') ? mag : -mag;
    }

    if (j < s_.size() && s_[j] == ':') {
      ++j;
      need(j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j])),
           "atom map digits expected");
      int m = 0;
      while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j])))
        m = m * 10 + (s_[j++] - '0');
      if (m <= 0) throw SmilesError("atom map must be positive", j - 1);
      a.map_index = m;
    }

    need(j < s_.size() && s_[j] == ']', "']' expected in bracket atom");
    i_ = j + 1;
    finish_atom(a, /*bracket=*/true, pos);
  }

  void ring_closure() {
    const std::size_t pos = i_;
    int num;
    if (s_[i_] == '%') {
      if (i_ + 2 >= s_.size() ||
          !std::isdigit(static_cast<unsigned char>(s_[i_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s_[i_ + 2])))
        throw SmilesError("'%' needs two digits", i_);
      num = (s_[i_ + 1] - '0') * 10 + (s_[i_ + 2] - '0');
      i_ += 3;
    } else {
      num = s_[i_] - '0';
      ++i_;
    }
    if (prev_ < 0) throw SmilesError("ring closure before any atom", pos);
    const auto it = ring_.find(num);
    if (it == ring_.end()) {
      ring_[num] = RingOpen{prev_, pending_, pos};
      pending_ = 0;
      return;
    }
    const RingOpen open = it->second;
    ring_.erase(it);
    if (open.order != 0 && pending_ != 0 && open.order != pending_)
      throw SmilesError("ring bond order mismatch", pos);
    const int order = open.order != 0 ? open.order : (pending_ != 0 ? pending_ : 1);
    add_bond(open.atom, prev_, order, pos);
    pending_ = 0;
  }

  void finish_atom(const Atom& a, bool bracket, std::size_t pos) {
    atoms_.push_back(a);
    bracketed_.push_back(bracket);
    atom_pos_.push_back(pos);
    const int cur = static_cast<int>(atoms_.size()) - 1;
    if (prev_ >= 0) {
      add_bond(prev_, cur, pending_ != 0 ? pending_ : 1, pos);
    } else if (pending_ != 0) {
      throw SmilesError("bond with no preceding atom", pending_pos_);
    }
    pending_ = 0;
    prev_ = cur;
    expect_fragment_ = false;
  }

  void add_bond(int a, int b, int order, std::size_t pos) {
    if (a == b) throw SmilesError("ring closure to the same atom", pos);
    for (const auto& [x, y, o] : bonds_) {
      if ((x == a && y == b) || (x == b && y == a))
        throw SmilesError("duplicate bond between atoms", pos);
    }
    bonds_.emplace_back(a, b, order);
  }

  std::string_view s_;
  std::size_t i_ = 0;
  std::vector<Atom> atoms_;
  std::vector<bool> bracketed_;
  std::vector<std::size_t> atom_pos_;
  std::vector<std::tuple<int, int, int>> bonds_;
  std::vector<int> stack_;
  std::map<int, RingOpen> ring_;
  int prev_ = -1;
  int pending_ = 0;
  std::size_t pending_pos_ = 0;
  bool expect_fragment_ = false;
};

const char* bond_sym(int order) {
  return order == 2 ? "=" : order == 3 ? "#" : "";
}

std::string closure_token(int num) {
  if (num <= 9) return std::string(1, static_cast<char>('0' + num));
  if (num <= 99)
    return std::string("%") + static_cast<char>('0' + num / 10) +
           static_cast<char>('0' + num % 10);
  throw std::logic_error("ring closure numbers exhausted");
}

std::string atom_token(const MolGraph& g, int u) {
  const Atom& a = g.atom(u);
  const ElementInfo& info = element_info(a.element);
  if (info.organic_subset && a.formal_charge == 0 && a.map_index == 0 &&
      a.explicit_h == implied_bare_h(a.element, g.bond_order_sum(u))) {
    return info.symbol;
  }
  std::string t = "[";
  t += info.symbol;
  if (a.explicit_h > 0) {
    t += 'H';
    if (a.explicit_h > 1) t += std::to_string(a.explicit_h);
  }
  if (a.formal_charge > 0) {
    t += '+';
    if (a.formal_charge > 1) t += std::to_string(a.formal_charge);
  } else if (a.formal_charge < 0) {
    t += '-';
    if (a.formal_charge < -1) t += std::to_string(-a.formal_charge);
  }
  if (a.map_index > 0) t += ":" + std::to_string(a.map_index);
  t += ']';
  return t;
}

}  // namespace

MolGraph parse_smiles(std::string_view s) { return Parser(s).run(); }

std::string write_smiles(const MolGraph& g) {
  const int n = g.atom_count();
  if (n == 0) return "";
  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  std::string out;
  bool first_fragment = true;

  for (int root = 0; root < n; ++root) {
    if (visited[static_cast<std::size_t>(root)]) continue;
    if (!first_fragment) out += '.';
    first_fragment = false;

    std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
    std::vector<std::vector<std::pair<int, int>>> ring_at(
        static_cast<std::size_t>(n));  // (closure number, bond order)
    std::set<std::pair<int, int>> edge_done;
    int next_ring = 1;

    const std::function<void(int)> collect = [&](int u) {
      visited[static_cast<std::size_t>(u)] = true;
      for (const int v : g.neighbors(u)) {
        const std::pair<int, int> key{std::min(u, v), std::max(u, v)};
        if (edge_done.count(key)) continue;
        edge_done.insert(key);
        if (!visited[static_cast<std::size_t>(v)]) {
          children[static_cast<std::size_t>(u)].push_back(v);
          collect(v);
        } else {
          const int num = next_ring++;
          const int order = g.bond(u, v);
          ring_at[static_cast<std::size_t>(u)].emplace_back(num, order);
          ring_at[static_cast<std::size_t>(v)].emplace_back(num, order);
        }
      }
    };
    collect(root);

    const std::function<void(int)> emit = [&](int u) {
      out += atom_token(g, u);
      for (const auto& [num, order] : ring_at[static_cast<std::size_t>(u)]) {
        out += bond_sym(order);
        out += closure_token(num);
      }
      const auto& kids = children[static_cast<std::size_t>(u)];
      for (std::size_t c = 0; c < kids.size(); ++c) {
        const int v = kids[c];
        const bool last = (c + 1 == kids.size());
        if (!last) out += '(';
        out += bond_sym(g.bond(u, v));
        emit(v);
        if (!last) out += ')';
      }
    };
    emit(root);
  }
  return out;
}

}  // namespace erpflow::chem
