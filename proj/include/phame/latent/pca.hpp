#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "phame/core/error.hpp"
#include "phame/core/random.hpp"
#include "phame/core/vector_ops.hpp"

namespace phame::latent {

struct PowerIterationOptions {
  double tolerance = 1e-8;
  int max_iterations = 10000;
  std::uint64_t seed = 0x9CA0C0DEC0FFEE01ULL;
};

struct PrincipalComponents {
  /// Unit-norm directions, one row per component, each of the row width.
  std::vector<RealVector> directions;
  /// Singular values of the input matrix along each direction (sqrt of eigenvalue).
  std::vector<double> singular_values;
};

namespace detail {

inline void orthogonalize(RealVector& v, const std::vector<RealVector>& basis) {
  for (const auto& b : basis) {
    const double p = dot(v, b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * b[i];
  }
}

/// Top eigenvectors of a symmetric PSD operator by power iteration with
/// deflation (each iterate is kept orthogonal to the vectors already found).
template <typename Apply>
std::vector<RealVector> power_eigenvectors(Apply&& apply, std::size_t n, int count,
                                           const PowerIterationOptions& opt) {
  std::vector<RealVector> found;
  Rng rng(opt.seed);
  RealVector next(n);
  for (int k = 0; k < count; ++k) {
    RealVector v = rng.normal_vector(n);
    orthogonalize(v, found);
    double nv = norm(v);
    for (double& x : v) x /= nv;
    bool converged = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
      apply(v, next);
      orthogonalize(next, found);
      const double nn = norm(next);
      if (nn <= 1e-300) {
        // null space: any unit vector orthogonal to the found ones
        converged = true;
        break;
      }
      for (double& x : next) x /= nn;
      if (dot(next, v) < 0)
        for (double& x : next) x = -x;
      const double change = distance(next, v);
      v.swap(next);
      if (change < opt.tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw Error(ErrorCode::NonConvergence, "power iteration did not reach tolerance for component " +
                                                 std::to_string(k));
    }
    // re-orthonormalize against accumulated round-off
    orthogonalize(v, found);
    nv = norm(v);
    for (double& x : v) x /= nv;
    found.push_back(std::move(v));
  }
  return found;
}

}  // namespace detail

/// Top principal directions of the row matrix X (rows are observations, taken
/// as already centered). Iterates on the smaller of X^T X and X X^T.
inline PrincipalComponents principal_components(const std::vector<RealVector>& rows, int count,
                                                const PowerIterationOptions& opt = {}) {
  if (rows.empty() || count < 1) throw Error(ErrorCode::InsufficientData, "no rows for PCA");
  const std::size_t n = rows.size();
  const std::size_t width = rows.front().size();
  if (static_cast<std::size_t>(count) > width) {
    throw Error(ErrorCode::InvalidParameters, "more components than columns");
  }
  PrincipalComponents pc;
  if (n < width) {
    std::vector<RealVector> gram(n, RealVector(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) gram[i][j] = gram[j][i] = dot(rows[i], rows[j]);
    auto apply = [&](const RealVector& u, RealVector& out) {
      for (std::size_t i = 0; i < n; ++i) out[i] = dot(gram[i], u);
    };
    const int reachable = std::min<int>(count, static_cast<int>(n));
    const auto us = detail::power_eigenvectors(apply, n, reachable, opt);
    for (const auto& u : us) {
      RealVector v(width, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < width; ++c) v[c] += u[i] * rows[i][c];
      detail::orthogonalize(v, pc.directions);
      const double nv = norm(v);
      if (nv <= 1e-12) break;
      for (double& x : v) x /= nv;
      pc.directions.push_back(std::move(v));
    }
    // Components beyond the data rank: complete with orthonormal basis vectors.
    for (std::size_t e = 0; pc.directions.size() < static_cast<std::size_t>(count) && e < width; ++e) {
      RealVector v(width, 0.0);
      v[e] = 1.0;
      detail::orthogonalize(v, pc.directions);
      detail::orthogonalize(v, pc.directions);
      const double nv = norm(v);
      if (nv < 1e-6) continue;
      for (double& x : v) x /= nv;
      pc.directions.push_back(std::move(v));
    }
  } else {
    auto apply = [&](const RealVector& v, RealVector& out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (const auto& r : rows) {
        const double p = dot(r, v);
        for (std::size_t c = 0; c < width; ++c) out[c] += p * r[c];
      }
    };
    pc.directions = detail::power_eigenvectors(apply, width, count, opt);
  }
  for (const auto& v : pc.directions) {
    double s = 0.0;
    for (const auto& r : rows) {
      const double p = dot(r, v);
      s += p * p;
    }
    pc.singular_values.push_back(std::sqrt(s));
  }
  return pc;
}

}  // namespace phame::latent
