#pragma once

#include <cstdlib>
#include <span>
#include <string_view>
#include <vector>

#include "phame/chem/molecule.hpp"
#include "phame/chem/smiles_parser.hpp"

namespace phame::chem {

/// Neutral-atom valences. Charged atoms shift every entry (see charged_valences).
inline std::vector<int> neutral_valences(Element e) {
  switch (e) {
    case Element::B: return {3};
    case Element::C: return {4};
    case Element::N: return {3};
    case Element::O: return {2};
    case Element::P: return {3, 5};
    case Element::S: return {2, 4, 6};
    case Element::F:
    case Element::Cl:
    case Element::Br:
    case Element::I: return {1};
  }
  return {};
}

/// N, O, P, S gain a bond per positive charge (ammonium, oxonium) and lose one
/// per negative charge; B does the opposite; C and halogens lose one per unit
/// of either sign.
inline std::vector<int> charged_valences(Element e, int charge) {
  auto vals = neutral_valences(e);
  for (int& v : vals) {
    switch (e) {
      case Element::N:
      case Element::O:
      case Element::P:
      case Element::S: v += charge; break;
      case Element::B: v -= charge; break;
      default: v -= std::abs(charge); break;
    }
  }
  return vals;
}

struct ValenceUse {
  /// Bond-order sum with each aromatic bond counted as 1.
  int sigma = 0;
  int aromatic_bonds = 0;
  int double_bonds = 0;
  int hydrogens = 0;
};

inline ValenceUse valence_use(const Molecule& mol, int i) {
  ValenceUse use;
  for (const auto& nb : mol.neighbors(i)) {
    const auto order = mol.bond(nb.bond).order;
    if (order == BondOrder::Aromatic) {
      ++use.aromatic_bonds;
      use.sigma += 1;
    } else {
      use.sigma += static_cast<int>(order);
      if (order == BondOrder::Double) ++use.double_bonds;
    }
  }
  if (mol.atom(i).explicit_h) use.hydrogens = *mol.atom(i).explicit_h;
  return use;
}

/// Kekule-free aromatic accounting: an atom on aromatic bonds takes one extra
/// shared pi unit. Carbon and boron must take it unless an exocyclic double
/// bond already supplies their pi electron (uracil C=O); N, O, P and S may
/// instead donate a lone pair (pyrrole, furan, thiophene) and skip it.
inline bool atom_valence_ok(const Molecule& mol, int i) {
  const Atom& atom = mol.atom(i);
  const ValenceUse use = valence_use(mol, i);
  if (atom.aromatic && use.aromatic_bonds == 0) return false;
  const bool pi_mandatory = use.aromatic_bonds > 0 && use.double_bonds == 0 &&
                            (atom.element == Element::C || atom.element == Element::B);
  const int need = use.sigma + use.hydrogens + (pi_mandatory ? 1 : 0);
  for (int v : charged_valences(atom.element, atom.formal_charge)) {
    if (v >= 0 && need <= v) return true;
  }
  return false;
}

/// Implicit hydrogens for an organic-subset atom: fill to the smallest
/// permitted valence not below current use. Bracket atoms report their H count.
inline int hydrogen_count(const Molecule& mol, int i) {
  const Atom& atom = mol.atom(i);
  if (atom.explicit_h) return *atom.explicit_h;
  const ValenceUse use = valence_use(mol, i);
  const int used =
      use.sigma + ((use.aromatic_bonds > 0 && use.double_bonds == 0 && atom.element == Element::C) ? 1 : 0);
  for (int v : neutral_valences(atom.element)) {
    if (v >= used) return v - used;
  }
  return 0;
}

inline bool valences_ok(const Molecule& mol) {
  for (int i = 0; i < mol.atom_count(); ++i)
    if (!atom_valence_ok(mol, i)) return false;
  return true;
}

/// True iff the text parses, the graph is a single fragment, and every atom
/// satisfies the valence table. Never throws.
inline bool is_valid(std::string_view text) {
  if (text.empty()) return false;
  try {
    const Molecule mol = parse_smiles(text);
    return mol.connected() && valences_ok(mol);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace phame::chem
