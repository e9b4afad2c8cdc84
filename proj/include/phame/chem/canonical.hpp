#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "phame/chem/molecule.hpp"

namespace phame::chem {

namespace detail {

/// Replaces arbitrary sortable keys by dense ranks 0..k-1; returns k.
template <typename Key>
int dense_rank(const std::vector<Key>& keys, std::vector<int>& ranks) {
  const int n = static_cast<int>(keys.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });
  ranks.assign(n, 0);
  int r = 0;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && keys[order[i - 1]] < keys[order[i]]) ++r;
    ranks[order[i]] = r;
  }
  return n == 0 ? 0 : r + 1;
}

inline int count_classes(const std::vector<int>& ranks) {
  return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end()) + 1;
}

/// Iterative neighborhood refinement until the class count stops growing.
inline int refine(const Molecule& mol, std::vector<int>& ranks) {
  int classes = count_classes(ranks);
  while (true) {
    using Key = std::pair<int, std::vector<std::pair<int, int>>>;
    std::vector<Key> keys(ranks.size());
    for (int i = 0; i < mol.atom_count(); ++i) {
      keys[i].first = ranks[i];
      for (const auto& nb : mol.neighbors(i)) {
        keys[i].second.emplace_back(ranks[nb.atom], static_cast<int>(mol.bond(nb.bond).order));
      }
      std::sort(keys[i].second.begin(), keys[i].second.end());
    }
    std::vector<int> next;
    const int next_classes = dense_rank(keys, next);
    ranks = std::move(next);
    if (next_classes == classes) return classes;
    classes = next_classes;
  }
}

}  // namespace detail

/// Morgan-style canonical ranking: a total order on atoms that depends only on
/// the graph up to isomorphism. Ties that survive refinement are broken by
/// (element, degree, charge), then by the smallest atom index, and refinement
/// resumes after each break.
inline std::vector<int> canonical_ranks(const Molecule& mol) {
  const int n = mol.atom_count();
  using Invariant = std::tuple<int, int, int, int, int, int>;
  std::vector<Invariant> inv(n);
  for (int i = 0; i < n; ++i) {
    const Atom& a = mol.atom(i);
    int valence = 0;
    for (const auto& nb : mol.neighbors(i)) valence += static_cast<int>(mol.bond(nb.bond).order);
    inv[i] = {atomic_number(a.element), mol.degree(i), a.formal_charge, a.aromatic ? 1 : 0,
              a.explicit_h ? 1 + *a.explicit_h : 0, valence};
  }
  std::vector<int> ranks;
  detail::dense_rank(inv, ranks);
  int classes = detail::refine(mol, ranks);
  while (classes < n) {
    // lowest tied class
    std::vector<int> size(classes, 0);
    for (int r : ranks) ++size[r];
    int tied = 0;
    while (size[tied] < 2) ++tied;
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (ranks[i] != tied) continue;
      if (pick < 0) {
        pick = i;
        continue;
      }
      const auto key_i = std::tuple(atomic_number(mol.atom(i).element), mol.degree(i), mol.atom(i).formal_charge);
      const auto key_p =
          std::tuple(atomic_number(mol.atom(pick).element), mol.degree(pick), mol.atom(pick).formal_charge);
      if (key_i < key_p) pick = i;
    }
    for (int& r : ranks) r *= 2;
    for (int i = 0; i < n; ++i)
      if (ranks[i] == 2 * tied && i != pick) ranks[i] += 1;
    std::vector<int> dense;
    detail::dense_rank(ranks, dense);
    ranks = std::move(dense);
    classes = detail::refine(mol, ranks);
  }
  return ranks;
}

namespace detail {

inline void write_atom(std::string& out, const Atom& a) {
  std::string sym(symbol(a.element));
  if (a.aromatic) {
    for (auto& c : sym) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (!a.bracket() && a.formal_charge == 0) {
    out += sym;
    return;
  }
  out += '[';
  out += sym;
  const int h = a.explicit_h.value_or(0);
  if (h > 0) {
    out += 'H';
    if (h > 1) out += std::to_string(h);
  }
  if (a.formal_charge != 0) {
    out += a.formal_charge > 0 ? '+' : '-';
    const int mag = std::abs(a.formal_charge);
    if (mag > 1) out += std::to_string(mag);
  }
  out += ']';
}

inline void write_bond(std::string& out, const Molecule& mol, const Bond& b) {
  switch (b.order) {
    case BondOrder::Single:
      if (mol.atom(b.begin).aromatic && mol.atom(b.end).aromatic) out += '-';
      break;
    case BondOrder::Double: out += '='; break;
    case BondOrder::Triple: out += '#'; break;
    case BondOrder::Aromatic:
      if (!(mol.atom(b.begin).aromatic && mol.atom(b.end).aromatic)) out += ':';
      break;
  }
}

inline void write_ring_label(std::string& out, int label) {
  if (label < 10) {
    out += static_cast<char>('0' + label);
  } else {
    out += '%';
    out += std::to_string(label);
  }
}

/// Depth-first SMILES writer driven by an atom priority (lower first).
class SmilesWriter {
 public:
  SmilesWriter(const Molecule& mol, const std::vector<int>& priority) : mol_(mol), priority_(priority) {}

  std::string component(int start) {
    const int n = mol_.atom_count();
    visited_.assign(n, false);
    parent_bond_.assign(n, -1);
    closures_.assign(n, {});
    children_.assign(n, {});
    is_closure_.assign(mol_.bond_count(), false);
    discover(start);
    std::string out;
    emit(start, out);
    return out;
  }

 private:
  std::vector<Neighbor> ordered_neighbors(int a) const {
    auto nbs = mol_.neighbors(a);
    std::sort(nbs.begin(), nbs.end(),
              [&](const Neighbor& x, const Neighbor& y) { return priority_[x.atom] < priority_[y.atom]; });
    return nbs;
  }

  void discover(int a) {
    visited_[a] = true;
    for (const auto& nb : ordered_neighbors(a)) {
      if (nb.bond == parent_bond_[a]) continue;
      if (visited_[nb.atom]) {
        if (!is_closure_[nb.bond]) {
          is_closure_[nb.bond] = true;
          // opened at the ancestor nb.atom, closed here
          closures_[nb.atom].push_back(nb.bond);
          closures_[a].push_back(nb.bond);
        }
        continue;
      }
      parent_bond_[nb.atom] = nb.bond;
      children_[a].push_back(nb.atom);
      discover(nb.atom);
    }
  }

  void emit(int a, std::string& out) {
    write_atom(out, mol_.atom(a));
    // Ring bonds close in bond-discovery order; openings take the lowest free label.
    for (int bond : closures_[a]) {
      auto it = open_labels_.find(bond);
      if (it != open_labels_.end()) {
        write_ring_label(out, it->second);
        used_labels_.erase(std::find(used_labels_.begin(), used_labels_.end(), it->second));
        open_labels_.erase(it);
      } else {
        int label = 1;
        while (std::find(used_labels_.begin(), used_labels_.end(), label) != used_labels_.end()) ++label;
        used_labels_.push_back(label);
        open_labels_[bond] = label;
        write_bond(out, mol_, mol_.bond(bond));
        write_ring_label(out, label);
      }
    }
    const auto& kids = children_[a];
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const bool branch = k + 1 < kids.size();
      if (branch) out += '(';
      write_bond(out, mol_, mol_.bond(parent_bond_[kids[k]]));
      emit(kids[k], out);
      if (branch) out += ')';
    }
  }

  const Molecule& mol_;
  const std::vector<int>& priority_;
  std::vector<bool> visited_;
  std::vector<int> parent_bond_;
  std::vector<std::vector<int>> closures_;
  std::vector<std::vector<int>> children_;
  std::vector<bool> is_closure_;
  std::map<int, int> open_labels_;
  std::vector<int> used_labels_;
};

}  // namespace detail

/// Writes SMILES with traversal order driven by `priority` (lower first). Each
/// fragment starts at its lowest-priority atom; fragments are joined by '.'
/// in lexicographic order of their text.
inline std::string write_smiles(const Molecule& mol, const std::vector<int>& priority) {
  const auto comp = mol.components();
  const int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<int> start(ncomp, -1);
  for (int i = 0; i < mol.atom_count(); ++i) {
    int& s = start[comp[i]];
    if (s < 0 || priority[i] < priority[s]) s = i;
  }
  std::vector<std::string> parts;
  for (int s : start) {
    detail::SmilesWriter writer(mol, priority);
    parts.push_back(writer.component(s));
  }
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '.';
    out += parts[i];
  }
  return out;
}

/// Canonical SMILES: identical for any two isomorphic graphs.
inline std::string canonical_form(const Molecule& mol) { return write_smiles(mol, canonical_ranks(mol)); }

}  // namespace phame::chem
