#pragma once

#include "phame/chem/molecule.hpp"

namespace phame::chem {

/// Additive surrogate for a lipophilicity-style property. Frozen coefficients:
struct SurrogateCoefficients {
  static constexpr double aliphatic_carbon = 0.5;
  static constexpr double aromatic_carbon = 0.3;
  static constexpr double halogen = 0.4;
  static constexpr double oxygen = -0.7;
  static constexpr double nitrogen = -0.6;
  static constexpr double other_heteroatom = -0.2;  // B, P, S
};

inline double surrogate_property(const Molecule& mol) {
  using K = SurrogateCoefficients;
  double total = 0.0;
  for (const Atom& a : mol.atoms()) {
    switch (a.element) {
      case Element::C: total += a.aromatic ? K::aromatic_carbon : K::aliphatic_carbon; break;
      case Element::O: total += K::oxygen; break;
      case Element::N: total += K::nitrogen; break;
      case Element::F:
      case Element::Cl:
      case Element::Br:
      case Element::I: total += K::halogen; break;
      case Element::B:
      case Element::P:
      case Element::S: total += K::other_heteroatom; break;
    }
  }
  return total;
}

}  // namespace phame::chem
