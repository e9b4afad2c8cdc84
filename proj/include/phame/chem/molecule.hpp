#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phame/core/error.hpp"

namespace phame::chem {

/// Supported elements, valued by atomic number.
enum class Element : std::uint8_t {
  B = 5,
  C = 6,
  N = 7,
  O = 8,
  F = 9,
  P = 15,
  S = 16,
  Cl = 17,
  Br = 35,
  I = 53,
};

constexpr int atomic_number(Element e) { return static_cast<int>(e); }

constexpr std::string_view symbol(Element e) {
  switch (e) {
    case Element::B: return "B";
    case Element::C: return "C";
    case Element::N: return "N";
    case Element::O: return "O";
    case Element::F: return "F";
    case Element::P: return "P";
    case Element::S: return "S";
    case Element::Cl: return "Cl";
    case Element::Br: return "Br";
    case Element::I: return "I";
  }
  return "?";
}

constexpr std::optional<Element> element_from_symbol(std::string_view s) {
  if (s == "B") return Element::B;
  if (s == "C") return Element::C;
  if (s == "N") return Element::N;
  if (s == "O") return Element::O;
  if (s == "F") return Element::F;
  if (s == "P") return Element::P;
  if (s == "S") return Element::S;
  if (s == "Cl") return Element::Cl;
  if (s == "Br") return Element::Br;
  if (s == "I") return Element::I;
  return std::nullopt;
}

constexpr bool is_halogen(Element e) {
  return e == Element::F || e == Element::Cl || e == Element::Br || e == Element::I;
}

/// Elements that may be written in lowercase aromatic form.
constexpr bool can_be_aromatic(Element e) {
  return e == Element::B || e == Element::C || e == Element::N || e == Element::O ||
         e == Element::P || e == Element::S;
}

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  Element element = Element::C;
  bool aromatic = false;
  int formal_charge = 0;
  /// Set only for bracket atoms (an absent H count inside brackets is 0).
  std::optional<int> explicit_h;

  bool bracket() const { return explicit_h.has_value(); }

  friend bool operator==(const Atom&, const Atom&) = default;
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::Single;

  int other(int atom) const { return atom == begin ? end : begin; }
};

struct Neighbor {
  int atom;
  int bond;
};

class Molecule {
 public:
  int add_atom(const Atom& atom) {
    atoms_.push_back(atom);
    adjacency_.emplace_back();
    return static_cast<int>(atoms_.size()) - 1;
  }

  /// Adds a bond; rejects self-loops, out-of-range endpoints and duplicates.
  int add_bond(int a, int b, BondOrder order) {
    const int n = atom_count();
    if (a == b || a < 0 || b < 0 || a >= n || b >= n) {
      throw Error(ErrorCode::InvalidSyntax, "invalid bond endpoints");
    }
    if (bond_between(a, b)) throw Error(ErrorCode::InvalidSyntax, "duplicate bond");
    bonds_.push_back({a, b, order});
    const int idx = static_cast<int>(bonds_.size()) - 1;
    adjacency_[a].push_back({b, idx});
    adjacency_[b].push_back({a, idx});
    return idx;
  }

  int atom_count() const { return static_cast<int>(atoms_.size()); }
  int bond_count() const { return static_cast<int>(bonds_.size()); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const Atom& atom(int i) const { return atoms_[i]; }
  const Bond& bond(int i) const { return bonds_[i]; }
  const std::vector<Neighbor>& neighbors(int i) const { return adjacency_[i]; }
  int degree(int i) const { return static_cast<int>(adjacency_[i].size()); }

  std::optional<int> bond_between(int a, int b) const {
    for (const auto& nb : adjacency_[a])
      if (nb.atom == b) return nb.bond;
    return std::nullopt;
  }

  /// Set when stereo marks (/, \, @) were read and dropped.
  bool stereo_ignored() const { return stereo_ignored_; }
  void set_stereo_ignored(bool v) { stereo_ignored_ = v; }

  /// Component id per atom (0-based, in order of lowest atom index).
  std::vector<int> components() const {
    std::vector<int> comp(atoms_.size(), -1);
    int next = 0;
    std::vector<int> stack;
    for (int start = 0; start < atom_count(); ++start) {
      if (comp[start] >= 0) continue;
      comp[start] = next;
      stack.push_back(start);
      while (!stack.empty()) {
        const int a = stack.back();
        stack.pop_back();
        for (const auto& nb : adjacency_[a]) {
          if (comp[nb.atom] < 0) {
            comp[nb.atom] = next;
            stack.push_back(nb.atom);
          }
        }
      }
      ++next;
    }
    return comp;
  }

  bool connected() const {
    if (atoms_.empty()) return false;
    for (int c : components())
      if (c != 0) return false;
    return true;
  }

  /// Copy with atoms renumbered: new index of old atom i is order[i].
  Molecule permuted(const std::vector<int>& order) const {
    std::vector<int> inverse(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = static_cast<int>(i);
    Molecule out;
    for (int pos : inverse) out.add_atom(atoms_[pos]);
    for (const auto& b : bonds_) out.add_bond(order[b.begin], order[b.end], b.order);
    out.stereo_ignored_ = stereo_ignored_;
    return out;
  }

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
  bool stereo_ignored_ = false;
};

}  // namespace phame::chem
