#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "phame/chem/molecule.hpp"
#include "phame/core/error.hpp"
#include "phame/core/random.hpp"

namespace phame::chem {

inline constexpr int kDefaultFingerprintRadius = 2;
inline constexpr int kDefaultFingerprintWidth = 2048;

/// Frozen seed for circular-environment identifiers.
inline constexpr std::uint64_t kFingerprintSeed = 0x50484D4543465031ULL;

class Fingerprint {
 public:
  Fingerprint(int width, int radius) : width_(width), radius_(radius) {
    if (width <= 0 || !std::has_single_bit(static_cast<unsigned>(width))) {
      throw Error(ErrorCode::InvalidParameters, "fingerprint width must be a positive power of two");
    }
    if (radius < 0) throw Error(ErrorCode::InvalidParameters, "fingerprint radius must be nonnegative");
    words_.assign((static_cast<std::size_t>(width) + 63) / 64, 0);
  }

  int width() const { return width_; }
  int radius() const { return radius_; }

  void set(int bit) { words_[bit >> 6] |= std::uint64_t{1} << (bit & 63); }
  bool test(int bit) const { return (words_[bit >> 6] >> (bit & 63)) & 1U; }

  int popcount() const {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

  /// Bits as 0/1 reals, for the linear-algebra consumers.
  std::vector<double> as_reals() const {
    std::vector<double> v(width_, 0.0);
    for (int i = 0; i < width_; ++i)
      if (test(i)) v[i] = 1.0;
    return v;
  }

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  int width_;
  int radius_;
  std::vector<std::uint64_t> words_;
};

/// Unfolded circular identifiers: entry [r][i] is atom i's environment hash at
/// radius r. Radius 0 hashes (element, charge, degree, aromatic); radius r
/// hashes the atom's previous identifier with the sorted (bond order,
/// neighbor identifier) pairs from radius r-1.
inline std::vector<std::vector<std::uint64_t>> circular_identifiers(const Molecule& mol, int radius) {
  const int n = mol.atom_count();
  std::vector<std::vector<std::uint64_t>> ids(radius + 1, std::vector<std::uint64_t>(n));
  for (int i = 0; i < n; ++i) {
    const Atom& a = mol.atom(i);
    std::uint64_t h = kFingerprintSeed;
    h = hash_combine(h, static_cast<std::uint64_t>(atomic_number(a.element)));
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(a.formal_charge)));
    h = hash_combine(h, static_cast<std::uint64_t>(mol.degree(i)));
    h = hash_combine(h, a.aromatic ? 1U : 0U);
    ids[0][i] = h;
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
  for (int r = 1; r <= radius; ++r) {
    for (int i = 0; i < n; ++i) {
      env.clear();
      for (const auto& nb : mol.neighbors(i)) {
        env.emplace_back(static_cast<std::uint64_t>(mol.bond(nb.bond).order), ids[r - 1][nb.atom]);
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = hash_combine(kFingerprintSeed, static_cast<std::uint64_t>(r));
      h = hash_combine(h, ids[r - 1][i]);
      for (const auto& [order, id] : env) {
        h = hash_combine(h, order);
        h = hash_combine(h, id);
      }
      ids[r][i] = h;
    }
  }
  return ids;
}

inline Fingerprint morgan_fingerprint(const Molecule& mol, int radius = kDefaultFingerprintRadius,
                                      int width = kDefaultFingerprintWidth) {
  Fingerprint fp(width, radius);
  const auto mask = static_cast<std::uint64_t>(width - 1);
  for (const auto& level : circular_identifiers(mol, radius))
    for (auto id : level) fp.set(static_cast<int>(id & mask));
  return fp;
}

/// |a AND b| / |a OR b|; two empty fingerprints compare as identical (1.0).
inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.width() != b.width()) {
    throw Error(ErrorCode::WidthMismatch,
                "tanimoto of widths " + std::to_string(a.width()) + " and " + std::to_string(b.width()));
  }
  int inter = 0;
  int uni = 0;
  const auto& wa = a.words();
  const auto& wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    inter += std::popcount(wa[i] & wb[i]);
    uni += std::popcount(wa[i] | wb[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace phame::chem
