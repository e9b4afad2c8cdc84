#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "phame/core/error.hpp"

namespace phame {

/// Dense real vector used for latents, embeddings and condition signals.
using RealVector = std::vector<double>;

inline void require_same_size(std::span<const double> a, std::span<const double> b,
                              const char* where) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(where) + ": " + std::to_string(a.size()) +
                                                  " vs " + std::to_string(b.size()));
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

/// Cosine similarity; throws ZeroVector when either side has zero norm.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double ab = dot(a, b);
  const double aa = squared_norm(a);
  const double bb = squared_norm(b);
  if (aa == 0.0 || bb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return ab / std::sqrt(aa * bb);
}

inline bool all_finite(std::span<const double> a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace phame
