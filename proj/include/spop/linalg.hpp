// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spop/error.hpp"
#include "spop/matrix.hpp"

namespace spop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thin SVD m = u * diag(sigma) * vᵀ with r = min(rows, cols).
struct SvdResult {
  Matrix u;                   // m x r, orthonormal columns
  std::vector<double> sigma;  // length r, non-increasing, >= 0
  Matrix v;                   // n x r, orthonormal columns
};

struct JacobiOptions {
  int max_sweeps = 100;
  double tol = 1e-12;
};

/// Singular values below this fraction of the largest are treated as exact
/// zeros.
inline constexpr double kRankCutoff = 1e-14;

namespace detail {

// Column-major scratch for one-sided Jacobi: ncols columns of length len.
struct ColumnStore {
  std::size_t len = 0;
  std::size_t ncols = 0;
  std::vector<double> a;

  double* col(std::size_t j) noexcept { return a.data() + j * len; }
  const double* col(std::size_t j) const noexcept { return a.data() + j * len; }
};

inline double dot(const double* x, const double* y, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
  return s;
}

inline void rotate(double* x, double* y, std::size_t n, double c, double s) noexcept {
  for (std::size_t k = 0; k < n; ++k) {
    const double xi = x[k];
    const double yi = y[k];
    x[k] = c * xi - s * yi;
    y[k] = s * xi + c * yi;
  }
}

// Hestenes one-sided Jacobi on the columns of `work`, optionally accumulating
// the right rotations into `vacc` (ncols x ncols, column-major).
inline void one_sided_jacobi(ColumnStore& work, ColumnStore* vacc,
                             const JacobiOptions& opts) {
  const std::size_t n = work.ncols;
  const std::size_t len = work.len;
  std::vector<double> norm2(n);
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (std::size_t j = 0; j < n; ++j) norm2[j] = dot(work.col(j), work.col(j), len);
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = norm2[i];
        const double beta = norm2[j];
        if (alpha == 0.0 || beta == 0.0) continue;
        const double gamma = dot(work.col(i), work.col(j), len);
        if (std::abs(gamma) <= opts.tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        rotate(work.col(i), work.col(j), len, c, s);
        if (vacc != nullptr) rotate(vacc->col(i), vacc->col(j), vacc->len, c, s);
        norm2[i] = alpha - t * gamma;
        norm2[j] = beta + t * gamma;
      }
    }
    if (!rotated) return;
  }
  throw ConvergenceError("svd did not converge after " + std::to_string(opts.max_sweeps) +
                         " sweeps");
}

// Completes the columns of q (len x k, column-major) marked in `missing` to an
// orthonormal set, trying unit vectors e_0, e_1, ... in order.
inline void complete_orthonormal(ColumnStore& q, const std::vector<bool>& missing) {
  const std::size_t len = q.len;
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < q.ncols; ++j) {
    if (!missing[j]) continue;
    while (candidate < len) {
      std::vector<double> e(len, 0.0);
      e[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < q.ncols; ++k) {
          if (k == j || (missing[k] && k > j)) continue;
          const double proj = dot(q.col(k), e.data(), len);
          for (std::size_t t = 0; t < len; ++t) e[t] -= proj * q.col(k)[t];
        }
      }
      const double nrm = std::sqrt(dot(e.data(), e.data(), len));
      if (nrm > 1e-8) {
        for (std::size_t t = 0; t < len; ++t) q.col(j)[t] = e[t] / nrm;
        break;
      }
    }
  }
}

// Jacobi on the orientation with rows >= cols; returns column-major u (m x n),
// sigma, v (n x n) for that orientation.
inline void tall_svd(const Matrix& m, bool transposed, ColumnStore& u,
                     std::vector<double>& sigma, ColumnStore* v,
                     const JacobiOptions& opts) {
  const std::size_t len = transposed ? m.cols() : m.rows();
  const std::size_t n = transposed ? m.rows() : m.cols();
  u.len = len;
  u.ncols = n;
  u.a.assign(len * n, 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (transposed)
        u.col(i)[j] = m(i, j);
      else
        u.col(j)[i] = m(i, j);
    }
  if (v != nullptr) {
    v->len = n;
    v->ncols = n;
    v->a.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) v->col(j)[j] = 1.0;
  }
  one_sided_jacobi(u, v, opts);
  sigma.resize(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(u.col(j), u.col(j), len));
}

inline std::vector<std::size_t> descending_order(const std::vector<double>& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return idx;
}

inline void clamp_small(std::vector<double>& sigma) {
  const double smax = sigma.empty() ? 0.0 : *std::max_element(sigma.begin(), sigma.end());
  for (double& s : sigma)
    if (s < kRankCutoff * smax) s = 0.0;
}

}  // namespace detail

/// Thin SVD by one-sided Jacobi on the smaller Gram dimension.
///
/// Output is deterministic: singular values are sorted non-increasing (stable
/// in the original column order), values below kRankCutoff * sigma_max are
/// zeroed, and each u column is signed so that its first entry with magnitude
/// above 1e-12 is positive (the matching v column flips with it). Columns of u
/// belonging to zero singular values are completed to an orthonormal set.
inline SvdResult svd(const Matrix& m, const JacobiOptions& opts = {}) {
  require_finite(m, "svd input");
  const bool transposed = m.rows() < m.cols();
  detail::ColumnStore left;
  detail::ColumnStore right;
  std::vector<double> raw;
  detail::tall_svd(m, transposed, left, raw, &right, opts);
  detail::clamp_small(raw);

  const std::size_t len = left.len;
  const std::size_t r = left.ncols;
  const auto order = detail::descending_order(raw);

  detail::ColumnStore lu{len, r, std::vector<double>(len * r)};
  detail::ColumnStore rv{r, r, std::vector<double>(r * r)};
  std::vector<double> sigma(r);
  std::vector<bool> missing(r, false);
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t src = order[k];
    sigma[k] = raw[src];
    std::copy_n(right.col(src), r, rv.col(k));
    if (sigma[k] > 0.0) {
      const double inv = 1.0 / sigma[k];
      for (std::size_t t = 0; t < len; ++t) lu.col(k)[t] = left.col(src)[t] * inv;
    } else {
      missing[k] = true;
    }
  }
  detail::complete_orthonormal(lu, missing);

  // Map back: for the transposed case mᵀ = lu Σ rvᵀ, so m = rv Σ luᵀ.
  detail::ColumnStore& ucols = transposed ? rv : lu;
  detail::ColumnStore& vcols = transposed ? lu : rv;
  for (std::size_t k = 0; k < r; ++k) {
    double* uc = ucols.col(k);
    for (std::size_t t = 0; t < ucols.len; ++t) {
      if (std::abs(uc[t]) > 1e-12) {
        if (uc[t] < 0.0) {
          for (std::size_t q = 0; q < ucols.len; ++q) uc[q] = -uc[q];
          double* vc = vcols.col(k);
          for (std::size_t q = 0; q < vcols.len; ++q) vc[q] = -vc[q];
        }
        break;
      }
    }
  }

  SvdResult out{Matrix(ucols.len, r), std::move(sigma), Matrix(vcols.len, r)};
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t t = 0; t < ucols.len; ++t) out.u(t, k) = ucols.col(k)[t];
    for (std::size_t t = 0; t < vcols.len; ++t) out.v(t, k) = vcols.col(k)[t];
  }
  return out;
}

/// Singular values only (skips accumulating the rotations).
inline std::vector<double> singular_values(const Matrix& m, const JacobiOptions& opts = {}) {
  require_finite(m, "singular_values input");
  detail::ColumnStore left;
  std::vector<double> sigma;
  detail::tall_svd(m, m.rows() < m.cols(), left, sigma, nullptr, opts);
  detail::clamp_small(sigma);
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

/// u * diag(values) * vᵀ for a thin SVD; `values` has length r.
inline Matrix compose(const SvdResult& s, std::span<const double> values) {
  const std::size_t m = s.u.rows();
  const std::size_t r = values.size();
  Matrix us(m, r);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < r; ++k) us(i, k) = s.u(i, k) * values[k];
  return matmul_nt(us, s.v);
}

struct EigResult {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
};

namespace detail {

inline void require_symmetric(const Matrix& x) {
  if (x.rows() != x.cols()) throw ShapeError("matrix must be square");
  const double scale = std::max(1.0, max_abs(x));
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.cols(); ++j)
      if (std::abs(x(i, j) - x(j, i)) > 1e-10 * scale)
        throw DomainError("matrix is not symmetric within 1e-10");
}

}  // namespace detail

/// Symmetric eigendecomposition by cyclic two-sided Jacobi.
inline EigResult eigh(const Matrix& x, const JacobiOptions& opts = {.max_sweeps = 100, .tol = 1e-14}) {
  require_finite(x, "eig_sym input");
  detail::require_symmetric(x);
  const std::size_t n = x.rows();
  Matrix a = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  Matrix v = Matrix::identity(n);
  const double floor = std::numeric_limits<double>::min() * 4;

  bool converged = false;
  for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double app = a(p, p);
        const double aqq = a(q, q);
        if (std::abs(apq) <= std::max(opts.tol * std::sqrt(std::abs(app)) * std::sqrt(std::abs(aqq)),
                                      floor))
          continue;
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw ConvergenceError("eig_sym did not converge after " + std::to_string(opts.max_sweeps) +
                           " sweeps");
  }
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  const auto order = detail::descending_order(diag);
  EigResult out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = diag[order[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// Eigenvalues of a symmetric matrix, descending.
inline std::vector<double> eig_sym(const Matrix& x) { return eigh(x).values; }

/// Schatten-q norm (q >= 1 or kInf) of a singular-value sequence.
inline double schatten_norm(std::span<const double> sigma, double q) {
  if (std::isnan(q) || q < 1.0) throw DomainError("schatten norm requires q >= 1");
  double smax = 0.0;
  for (double s : sigma) smax = std::max(smax, s);
  if (smax == 0.0) return 0.0;
  if (std::isinf(q)) return smax;
  double acc = 0.0;
  for (double s : sigma) acc += std::pow(s / smax, q);
  return smax * std::pow(acc, 1.0 / q);
}

/// Schatten-q norm of a matrix: q = 1 nuclear, 2 Frobenius, kInf spectral.
inline double schatten_norm(const Matrix& m, double q) {
  if (std::isnan(q) || q < 1.0) throw DomainError("schatten norm requires q >= 1");
  const auto sigma = singular_values(m);
  return schatten_norm(std::span<const double>(sigma), q);
}

}  // namespace spop
