// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "spop/error.hpp"
#include "spop/linalg.hpp"
#include "spop/matrix.hpp"

namespace spop {

/// Settings shared by the quintic orthogonalizer and the coupled
/// square-root iteration.
struct NsConfig {
  int ns_steps = 15;       // inner iterations per square-root round
  double eps = 1e-7;       // normalization guard and per-round diagonal shift
  double a = 3.4445;       // quintic coefficients
  double b = -4.7750;
  double c = 2.0315;
  int quintic_steps = 5;

  void validate() const {
    if (ns_steps < 1) throw DomainError("ns_steps must be >= 1");
    if (quintic_steps < 1) throw DomainError("quintic_steps must be >= 1");
    if (!(eps > 0.0)) throw DomainError("ns eps must be > 0");
  }
};

/// Number of successive square-root rounds used to reach x^(p/2): the
/// smallest L with 2^L >= 2/p, i.e. ceil(log2(2/p)).
inline int ns_root_rounds(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("ns_root requires p in (0, 1]");
  int rounds = 0;
  double reach = p;  // p * 2^rounds
  while (reach < 2.0 * (1.0 - 1e-12)) {
    reach *= 2.0;
    ++rounds;
  }
  return rounds;
}

namespace detail {

inline Matrix quintic_orthogonalize(const Matrix& m, const NsConfig& cfg) {
  const bool tall = m.rows() > m.cols();
  Matrix x = tall ? m.transpose() : m;
  x *= 1.0 / (frobenius_norm(x) + cfg.eps);
  for (int k = 0; k < cfg.quintic_steps; ++k) {
    const Matrix a = matmul_nt(x, x);
    Matrix b = matmul(a, a);
    b *= cfg.c;
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] += cfg.b * a.data()[i];
    Matrix next = matmul(b, x);
    for (std::size_t i = 0; i < next.size(); ++i) next.data()[i] += cfg.a * x.data()[i];
    x = std::move(next);
  }
  return tall ? x.transpose() : x;
}

inline Matrix symmetrize(const Matrix& x) {
  Matrix s = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) s(i, j) = 0.5 * (x(i, j) + x(j, i));
  return s;
}

// Coupled Newton–Schulz root without the PSD check; used on MᵀM inside the
// optimizer where positive semi-definiteness holds by construction.
inline Matrix ns_root_unchecked(const Matrix& input, double p, const NsConfig& cfg) {
  const int rounds = ns_root_rounds(p);
  const std::size_t n = input.rows();
  const Matrix eye = Matrix::identity(n);
  Matrix x = input;
  for (int round = 0; round < rounds; ++round) {
    const double alpha = frobenius_norm(x);
    x *= 1.0 / (alpha + cfg.eps);
    Matrix y = x;
    Matrix z = eye;
    for (int i = 0; i < cfg.ns_steps; ++i) {
      Matrix q = matmul(z, y);
      q *= -1.0;
      for (std::size_t d = 0; d < n; ++d) q(d, d) += 3.0;
      y = matmul(y, q);
      y *= 0.5;
      z = matmul(q, z);
      z *= 0.5;
    }
    y *= std::sqrt(alpha);
    x = symmetrize(y);
    for (std::size_t d = 0; d < n; ++d) x(d, d) += cfg.eps;
  }
  return x;
}

}  // namespace detail

/// Approximate orthogonal polar factor by the 5-step quintic Newton–Schulz
/// iteration with Frobenius pre-normalization. Iterates on the wide
/// orientation when the input is tall.
inline Matrix newton_schulz5(const Matrix& m, const NsConfig& cfg = {}) {
  cfg.validate();
  require_finite(m, "newton_schulz5 input");
  if (is_zero(m)) throw DomainError("zero momentum");
  return detail::quintic_orthogonalize(m, cfg);
}

/// Approximates x^(p/2) for symmetric PSD x by ns_root_rounds(p) rounds of
/// coupled Y/Z square-root iterations. Each round rescales by the Frobenius
/// norm, takes a square root, restores the scale by sqrt(norm), symmetrizes
/// and shifts the diagonal by eps.
///
/// When 2/p is not a power of two the round count overshoots, so the result
/// approximates x^(2^-L) with L = ns_root_rounds(p) rather than x^(p/2).
inline Matrix ns_root(const Matrix& x, double p, const NsConfig& cfg = {}) {
  cfg.validate();
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("ns_root requires p in (0, 1]");
  const auto eig = eig_sym(x);  // also validates square + symmetric
  const double lmax = std::max(0.0, eig.front());
  if (eig.back() < -1e-10 * lmax || (lmax == 0.0 && eig.back() < 0.0))
    throw DomainError("ns_root input is not positive semi-definite");
  return detail::ns_root_unchecked(x, p, cfg);
}

/// sigma^p with the convention 0^p = 0 for every p, including p = 0.
inline std::vector<double> powered(std::span<const double> sigma, double p) {
  std::vector<double> out(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i)
    out[i] = sigma[i] > 0.0 ? std::pow(sigma[i], p) : 0.0;
  return out;
}

/// U diag(sigma^p) Vᵀ through the exact SVD.
inline Matrix power_transform(const SvdResult& s, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("power_transform requires p in [0, 1]");
  return compose(s, powered(s.sigma, p));
}

inline Matrix power_transform(const Matrix& m, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("power_transform requires p in [0, 1]");
  return power_transform(svd(m), p);
}

/// Exact polar factor UVᵀ (a partial isometry on rank-deficient input).
inline Matrix polar(const Matrix& m) { return power_transform(m, 0.0); }

/// Maximizer of trace(G̃ᵀΔW) over the Schatten-q ball of radius delta.
struct SteepestSolution {
  Matrix delta_w;
  double q = 0.0;
  double delta = 0.0;
  double objective = 0.0;  // trace(G̃ᵀ delta_w)
};

/// Dual exponent p' with 1/p' + 1/q = 1 (q = inf gives 1).
inline double dual_exponent(double q) {
  if (std::isinf(q)) return 1.0;
  return q / (q - 1.0);
}

/// Closed-form steepest-ascent step under a Schatten-q trust region:
/// ΔW* = δ ‖G̃‖_{p'}^{-p'/q} U Σ^{p'-1} Vᵀ.
inline SteepestSolution schatten_steepest(const Matrix& g_tilde, double q, double delta) {
  if (std::isnan(q) || q <= 1.0) throw DomainError("schatten_steepest requires q > 1");
  if (!(delta > 0.0)) throw DomainError("schatten_steepest requires delta > 0");
  require_finite(g_tilde, "schatten_steepest gradient");
  if (is_zero(g_tilde)) throw DomainError("schatten_steepest requires a nonzero gradient");

  const SvdResult s = svd(g_tilde);
  const double pd = dual_exponent(q);
  const double smax = s.sigma.front();
  // Work with sigma / smax so large p' cannot overflow; the smax factors
  // cancel: ‖G‖^{-p'/q} σ^{p'-1} = smax^0 * ‖G/smax‖^{-p'/q} (σ/smax)^{p'-1}.
  std::vector<double> scaled(s.sigma.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = s.sigma[i] / smax;
  const double norm_scaled = schatten_norm(std::span<const double>(scaled), pd);
  const double coeff = std::isinf(q) ? delta : delta * std::pow(norm_scaled, -pd / q);
  std::vector<double> values = powered(scaled, pd - 1.0);
  for (double& v : values) v *= coeff;

  SteepestSolution out;
  out.delta_w = compose(s, values);
  out.q = q;
  out.delta = delta;
  out.objective = frobenius_inner(g_tilde, out.delta_w);
  return out;
}

/// Outcome of the brute-force optimality check.
struct SteepestCheck {
  double closed_form = 0.0;
  double sampled_max = 0.0;
  std::size_t n_samples = 0;
  bool pass = false;
};

/// Samples i.i.d. standard-normal matrices, rescales each to Schatten-q norm
/// delta and compares the best sampled objective with the closed form.
/// `injected` matrices are rescaled the same way and scored alongside the
/// random draws.
inline SteepestCheck verify_steepest(const Matrix& g_tilde, double q, double delta,
                                     std::size_t n_samples, std::uint64_t seed,
                                     std::span<const Matrix> injected = {}) {
  const SteepestSolution sol = schatten_steepest(g_tilde, q, delta);
  std::mt19937_64 rng(seed);
  SteepestCheck out;
  out.closed_form = sol.objective;
  out.sampled_max = -kInf;

  auto score = [&](Matrix candidate) {
    const double norm = schatten_norm(candidate, q);
    if (norm == 0.0) return;
    candidate *= delta / norm;
    out.sampled_max = std::max(out.sampled_max, frobenius_inner(g_tilde, candidate));
    ++out.n_samples;
  };
  for (std::size_t k = 0; k < n_samples; ++k)
    score(Matrix::random_normal(g_tilde.rows(), g_tilde.cols(), rng));
  for (const Matrix& m : injected) {
    g_tilde.require_same(m, "verify_steepest injected sample");
    score(m);
  }
  out.pass = out.closed_form >= out.sampled_max - 1e-9;
  return out;
}

}  // namespace spop
