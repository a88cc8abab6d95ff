// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spop/error.hpp"
#include "spop/linalg.hpp"
#include "spop/matrix.hpp"
#include "spop/specfun.hpp"

namespace spop {

enum class OptimizerKind {
  kSgdm,
  kAdam,
  kAdamW,
  kMuonSvd,
  kMuonNs,
  kHtMuon,
  kHtMuonNs,
  kHtMuonHt,
  kNorMuon,
  kHtMuonNorMuon,
};

inline constexpr std::array<std::pair<OptimizerKind, std::string_view>, 10> kOptimizerNames{{
    {OptimizerKind::kSgdm, "sgdm"},
    {OptimizerKind::kAdam, "adam"},
    {OptimizerKind::kAdamW, "adamw"},
    {OptimizerKind::kMuonSvd, "muon_svd"},
    {OptimizerKind::kMuonNs, "muon_ns"},
    {OptimizerKind::kHtMuon, "htmuon"},
    {OptimizerKind::kHtMuonNs, "htmuon_ns"},
    {OptimizerKind::kHtMuonHt, "htmuon_ht"},
    {OptimizerKind::kNorMuon, "normuon"},
    {OptimizerKind::kHtMuonNorMuon, "htmuon_normuon"},
}};

inline std::string_view to_string(OptimizerKind kind) {
  for (const auto& [k, name] : kOptimizerNames)
    if (k == kind) return name;
  return "unknown";
}

inline std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) {
  for (const auto& [k, n] : kOptimizerNames)
    if (n == name) return k;
  return std::nullopt;
}

/// Variants whose update is built from the spectrum of the momentum matrix.
inline bool is_matrix_family(OptimizerKind kind) {
  return kind != OptimizerKind::kSgdm && kind != OptimizerKind::kAdam &&
         kind != OptimizerKind::kAdamW;
}

/// Variants that can be interleaved with a cheaper base step.
inline bool is_heavy_family(OptimizerKind kind) {
  return kind == OptimizerKind::kHtMuon || kind == OptimizerKind::kHtMuonNs ||
         kind == OptimizerKind::kHtMuonHt || kind == OptimizerKind::kHtMuonNorMuon;
}

inline bool uses_row_normalization(OptimizerKind kind) {
  return kind == OptimizerKind::kNorMuon || kind == OptimizerKind::kHtMuonNorMuon;
}

struct AdaptiveLr {
  double lipschitz = 1.0;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kHtMuon;
  double lr = 0.02;
  double momentum = 0.95;  // β, or β₁ for the Adam family and NorMuon
  double weight_decay = 0.0;
  double power = 0.125;    // p
  double ht_alpha = 0.25;  // exponent of the fixed i^-α spectrum
  double beta2 = 0.95;
  double eps = 1e-8;
  int interval = 1;
  NsConfig ns{};
  std::optional<AdaptiveLr> adaptive_lr{};

  /// Kind-specific defaults: Adam/AdamW use β₁ = 0.9, β₂ = 0.999, lr 1e-3;
  /// NorMuon variants β₂ = 0.95; SGDM β = 0.9.
  static OptimizerConfig defaults(OptimizerKind kind) {
    OptimizerConfig c;
    c.kind = kind;
    switch (kind) {
      case OptimizerKind::kAdam:
      case OptimizerKind::kAdamW:
        c.lr = 1e-3;
        c.momentum = 0.9;
        c.beta2 = 0.999;
        break;
      case OptimizerKind::kSgdm:
        c.lr = 0.1;
        c.momentum = 0.9;
        break;
      default:
        break;
    }
    return c;
  }

  void validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be >= 0");
    if (!(power >= 0.0 && power <= 1.0)) throw DomainError("power must be in [0, 1]");
    if (!(ht_alpha > 0.0)) throw DomainError("ht_alpha must be > 0");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw DomainError("eps must be > 0");
    if (interval < 1) throw DomainError("interval must be >= 1");
    if (interval > 1 && !is_heavy_family(kind))
      throw DomainError("interval > 1 requires an HTMuon-family optimizer");
    if (kind == OptimizerKind::kHtMuonNs && power == 0.0)
      throw DomainError("htmuon_ns requires power in (0, 1]");
    if (adaptive_lr) {
      if (kind != OptimizerKind::kHtMuon)
        throw DomainError("adaptive learning rate is only defined for htmuon");
      if (!(adaptive_lr->lipschitz > 0.0)) throw DomainError("lipschitz must be > 0");
    }
    ns.validate();
  }
};

/// Per-parameter optimizer buffers.
struct OptimizerState {
  std::uint64_t t = 0;
  Matrix momentum;
  std::optional<Matrix> second_moment;  // Adam: rows x cols; NorMuon: rows x 1
  std::uint64_t seed = 0;

  static OptimizerState init(const OptimizerConfig& cfg, std::size_t rows, std::size_t cols) {
    OptimizerState s;
    s.momentum = Matrix(rows, cols);
    if (cfg.kind == OptimizerKind::kAdam || cfg.kind == OptimizerKind::kAdamW)
      s.second_moment = Matrix(rows, cols);
    else if (uses_row_normalization(cfg.kind))
      s.second_moment = Matrix(rows, 1);
    return s;
  }
};

/// What one step applied: W_next = W - lr·λ·W - effective_lr·scale·direction
/// (Adam folds its L2 term into the direction instead).
struct UpdateTrace {
  Matrix direction;
  double scale = 1.0;
  double effective_lr = 0.0;
  bool heavy = false;
  std::vector<double> singular_values;  // of direction, when known exactly
};

struct StepResult {
  Matrix weights;
  UpdateTrace trace;
};

inline double shape_scale(std::size_t rows, std::size_t cols) {
  return std::sqrt(std::max(1.0, static_cast<double>(rows) / static_cast<double>(cols)));
}

namespace detail {

// Σσ^{1+p} / (L Σσ^{2p}) over the nonzero spectrum.
inline double adaptive_lr_from_spectrum(std::span<const double> sigma, double p, double lipschitz) {
  double num = 0.0;
  double den = 0.0;
  for (double s : sigma) {
    if (s <= 0.0) continue;
    num += std::pow(s, 1.0 + p);
    den += std::pow(s, 2.0 * p);
  }
  if (den == 0.0) throw DomainError("adaptive learning rate needs a nonzero momentum");
  return num / (lipschitz * den);
}

// Row-wise second-moment normalization of an orthogonalized update. Returns
// the normalized direction and the rescaled learning rate.
inline std::pair<Matrix, double> row_normalize(const Matrix& o, Matrix& v, double beta2, double eps,
                                               double lr) {
  const std::size_t m = o.rows();
  const std::size_t n = o.cols();
  Matrix out = o;
  for (std::size_t i = 0; i < m; ++i) {
    double mean_sq = 0.0;
    for (double x : o.row(i)) mean_sq += x * x;
    mean_sq /= static_cast<double>(n);
    v(i, 0) = beta2 * v(i, 0) + (1.0 - beta2) * mean_sq;
    const double denom = std::sqrt(v(i, 0)) + eps;
    for (double& x : out.row(i)) x /= denom;
  }
  const double fro = frobenius_norm(out);
  const double eta_hat =
      fro > 0.0 ? 0.2 * lr * std::sqrt(static_cast<double>(m * n)) / fro : 0.0;
  return {std::move(out), eta_hat};
}

}  // namespace detail

/// Curvature-scaled adaptive step size ⟨M, ρ(M)⟩ / (L ‖ρ(M)‖_F²) with
/// ρ(M) = power_transform(M, p).
inline double adaptive_lr(const Matrix& m, double p, double lipschitz) {
  if (!(lipschitz > 0.0)) throw DomainError("lipschitz must be > 0");
  require_finite(m, "adaptive_lr momentum");
  if (is_zero(m)) throw DomainError("adaptive learning rate needs a nonzero momentum");
  const Matrix rho = power_transform(m, p);
  const double fro = frobenius_norm(rho);
  return frobenius_inner(m, rho) / (lipschitz * fro * fro);
}

/// One optimizer step for a single matrix parameter. Mutates `state`.
inline StepResult step(const OptimizerConfig& cfg, OptimizerState& state, const Matrix& w,
                       const Matrix& g) {
  w.require_same(g, "step (weights vs gradient)");
  w.require_same(state.momentum, "step (weights vs momentum)");
  require_finite(w, "weights");
  require_finite(g, "gradient");

  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  const double beta = cfg.momentum;
  Matrix& mom = state.momentum;

  UpdateTrace trace;
  trace.effective_lr = cfg.lr;
  trace.heavy = is_heavy_family(cfg.kind);
  double decay_lr = cfg.lr;

  auto update_momentum = [&](const Matrix& grad) {
    auto md = mom.data();
    auto gd = grad.data();
    for (std::size_t k = 0; k < md.size(); ++k) md[k] = beta * md[k] + (1.0 - beta) * gd[k];
  };

  switch (cfg.kind) {
    case OptimizerKind::kSgdm: {
      update_momentum(g);
      trace.direction = mom;
      break;
    }
    case OptimizerKind::kAdam:
    case OptimizerKind::kAdamW: {
      Matrix grad = g;
      if (cfg.kind == OptimizerKind::kAdam && cfg.weight_decay != 0.0) {
        for (std::size_t k = 0; k < grad.size(); ++k)
          grad.data()[k] += cfg.weight_decay * w.data()[k];
        decay_lr = 0.0;
      }
      update_momentum(grad);
      Matrix& v = *state.second_moment;
      const double b2 = cfg.beta2;
      const double tt = static_cast<double>(state.t + 1);
      const double c1 = 1.0 - std::pow(beta, tt);
      const double c2 = 1.0 - std::pow(b2, tt);
      trace.direction = Matrix(rows, cols);
      for (std::size_t k = 0; k < grad.size(); ++k) {
        const double gk = grad.data()[k];
        v.data()[k] = b2 * v.data()[k] + (1.0 - b2) * gk * gk;
        const double mhat = mom.data()[k] / c1;
        const double vhat = v.data()[k] / c2;
        trace.direction.data()[k] = mhat / (std::sqrt(vhat) + cfg.eps);
      }
      break;
    }
    default: {
      update_momentum(g);
      trace.scale = uses_row_normalization(cfg.kind) ? 1.0 : shape_scale(rows, cols);
      if (is_zero(mom)) {
        // Nothing to orthogonalize yet: the direction is zero.
        trace.direction = Matrix(rows, cols);
        if (cfg.adaptive_lr) {
          trace.effective_lr = 0.0;
          decay_lr = 0.0;
        }
        if (uses_row_normalization(cfg.kind)) trace.effective_lr = 0.0;
        break;
      }
      Matrix o;
      switch (cfg.kind) {
        case OptimizerKind::kMuonSvd: {
          const SvdResult s = svd(mom);
          trace.singular_values = powered(s.sigma, 0.0);
          o = compose(s, trace.singular_values);
          break;
        }
        case OptimizerKind::kMuonNs:
        case OptimizerKind::kNorMuon:
          o = detail::quintic_orthogonalize(mom, cfg.ns);
          break;
        case OptimizerKind::kHtMuon:
        case OptimizerKind::kHtMuonNorMuon: {
          const SvdResult s = svd(mom);
          trace.singular_values = powered(s.sigma, cfg.power);
          o = compose(s, trace.singular_values);
          if (cfg.adaptive_lr) {
            trace.effective_lr =
                detail::adaptive_lr_from_spectrum(s.sigma, cfg.power, cfg.adaptive_lr->lipschitz);
            decay_lr = trace.effective_lr;
          }
          break;
        }
        case OptimizerKind::kHtMuonNs: {
          const Matrix polar_part = detail::quintic_orthogonalize(mom, cfg.ns);
          const Matrix root_part = detail::ns_root_unchecked(gram(mom), cfg.power, cfg.ns);
          o = matmul(polar_part, root_part);
          break;
        }
        case OptimizerKind::kHtMuonHt: {
          const SvdResult s = svd(mom);
          trace.singular_values.resize(s.sigma.size());
          for (std::size_t i = 0; i < s.sigma.size(); ++i)
            trace.singular_values[i] = std::pow(static_cast<double>(i + 1), -cfg.ht_alpha);
          o = compose(s, trace.singular_values);
          break;
        }
        default:
          throw DomainError("unhandled optimizer kind");
      }
      if (uses_row_normalization(cfg.kind)) {
        auto [normalized, eta_hat] =
            detail::row_normalize(o, *state.second_moment, cfg.beta2, cfg.eps, cfg.lr);
        o = std::move(normalized);
        trace.effective_lr = eta_hat;
        trace.singular_values.clear();
      }
      trace.direction = std::move(o);
      break;
    }
  }

  Matrix next = w;
  const double decay = decay_lr * cfg.weight_decay;
  const double move = trace.effective_lr * trace.scale;
  auto nd = next.data();
  auto wd = w.data();
  auto dd = trace.direction.data();
  for (std::size_t k = 0; k < nd.size(); ++k) nd[k] = wd[k] - decay * wd[k] - move * dd[k];
  require_finite(next, "updated weights");
  ++state.t;
  return {std::move(next), std::move(trace)};
}

/// Interval scheduling: the configured heavy variant runs when t mod k == 0
/// (t counted from 0), the cheaper base variant otherwise. Both share the
/// momentum buffer. The base is NorMuon for htmuon_normuon and Muon_NS for the
/// rest of the HTMuon family.
inline StepResult scheduled_step(const OptimizerConfig& cfg, OptimizerState& state, const Matrix& w,
                                 const Matrix& g) {
  if (cfg.interval <= 1 || !is_heavy_family(cfg.kind)) return step(cfg, state, w, g);
  if (state.t % static_cast<std::uint64_t>(cfg.interval) == 0) return step(cfg, state, w, g);
  OptimizerConfig base = cfg;
  base.kind = cfg.kind == OptimizerKind::kHtMuonNorMuon ? OptimizerKind::kNorMuon
                                                         : OptimizerKind::kMuonNs;
  base.adaptive_lr.reset();
  return step(base, state, w, g);
}

}  // namespace spop
