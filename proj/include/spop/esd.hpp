// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spop/error.hpp"
#include "spop/linalg.hpp"
#include "spop/matrix.hpp"

namespace spop {

inline constexpr std::size_t kMinSpectrumSize = 50;
inline constexpr std::size_t kMinTailSize = 10;
inline constexpr double kDegenerateRelTol = 1e-9;

/// Continuous power law p(λ) ∝ λ^-alpha fitted above xmin.
struct PowerLawFit {
  double alpha = 0.0;
  double xmin = 0.0;
  double ks_stat = 0.0;
  std::size_t n_tail = 0;
};

/// The spectrum cannot carry a meaningful power-law fit.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Eigenvalues of the Gram matrix on the smaller side (WᵀW or WWᵀ),
/// descending, length min(rows, cols). Round-off negatives are clamped to 0.
inline std::vector<double> compute_esd(const Matrix& w) {
  require_finite(w, "compute_esd input");
  auto eig = eig_sym(w.rows() >= w.cols() ? gram(w) : gram(w.transpose()));
  for (double& e : eig) e = std::max(e, 0.0);
  return eig;
}

/// Hill / maximum-likelihood exponent with xmin picked by minimal
/// Kolmogorov–Smirnov distance.
///
/// A spectrum whose positive entries all agree to within kDegenerateRelTol
/// (relative) is degenerate: round-off spread on an orthogonal matrix must
/// not be fitted as a tail.
///
/// Candidates for xmin are the distinct positive eigenvalues that leave at
/// least kMinTailSize points in the tail; ties in KS distance go to the
/// smallest xmin. Non-positive entries are ignored.
inline PowerLawFit fit_power_law(std::span<const double> eigs) {
  std::vector<double> x;
  x.reserve(eigs.size());
  for (double e : eigs)
    if (e > 0.0 && std::isfinite(e)) x.push_back(e);
  std::sort(x.begin(), x.end());
  if (x.size() >= 2 && x.back() <= x.front() * (1.0 + kDegenerateRelTol))
    throw FitError("degenerate spectrum");
  if (x.size() < kMinSpectrumSize)
    throw FitError("too few eigenvalues: " + std::to_string(x.size()) + " positive, need " +
                   std::to_string(kMinSpectrumSize));

  const std::size_t n = x.size();
  std::vector<double> logs(n);
  for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(x[i]);
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + logs[i];

  PowerLawFit best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + kMinTailSize <= n; ++k) {
    if (k > 0 && x[k] == x[k - 1]) continue;
    const std::size_t nt = n - k;
    const double ntd = static_cast<double>(nt);
    const double log_sum = suffix[k] - ntd * logs[k];
    if (!(log_sum > 0.0)) continue;
    const double alpha = 1.0 + ntd / log_sum;

    // KS distance, abandoned as soon as it cannot beat the incumbent.
    double d = 0.0;
    for (std::size_t i = 0; i < nt && d < best_d; ++i) {
      const double cdf = 1.0 - std::exp(-(alpha - 1.0) * (logs[k + i] - logs[k]));
      const double lo = static_cast<double>(i) / ntd;
      const double hi = static_cast<double>(i + 1) / ntd;
      d = std::max({d, std::abs(hi - cdf), std::abs(cdf - lo)});
    }
    if (d < best_d) {
      best_d = d;
      best = {alpha, x[k], d, nt};
    }
  }
  if (best.n_tail == 0) throw FitError("degenerate spectrum");
  return best;
}

/// Exponent of the ESD of a matrix whose singular values decay as k^-s:
/// 1 + 1/(2s).
inline double lemma1_alpha(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("decay exponent s must be > 0");
  return 1.0 + 1.0 / (2.0 * s);
}

struct SpectralReport {
  std::string layer_name;
  std::optional<PowerLawFit> alpha;
  std::string fit_error;  // set when alpha is empty
  double spectral_norm = 0.0;
  double frobenius_norm = 0.0;
  double nuclear_norm = 0.0;
  std::vector<double> esd;
};

struct SpectralSummary {
  std::vector<SpectralReport> reports;
  std::optional<double> mean_alpha;  // over layers whose fit succeeded
  std::size_t n_fitted = 0;
};

/// Norms are derived from the ESD itself: spectral² = λ_max,
/// Frobenius² = Σλ, nuclear = Σ√λ.
inline SpectralReport spectral_report(std::string name, const Matrix& w) {
  SpectralReport r;
  r.layer_name = std::move(name);
  r.esd = compute_esd(w);
  r.spectral_norm = std::sqrt(r.esd.front());
  double sum = 0.0;
  double nuc = 0.0;
  for (double e : r.esd) {
    sum += e;
    nuc += std::sqrt(e);
  }
  r.frobenius_norm = std::sqrt(sum);
  r.nuclear_norm = nuc;
  try {
    r.alpha = fit_power_law(r.esd);
  } catch (const FitError& e) {
    r.fit_error = e.what();
  }
  return r;
}

inline SpectralSummary spectral_report(std::span<const std::pair<std::string, Matrix>> layers) {
  SpectralSummary out;
  double sum = 0.0;
  for (const auto& [name, w] : layers) {
    out.reports.push_back(spectral_report(name, w));
    if (out.reports.back().alpha) {
      sum += out.reports.back().alpha->alpha;
      ++out.n_fitted;
    }
  }
  if (out.n_fitted > 0) out.mean_alpha = sum / static_cast<double>(out.n_fitted);
  return out;
}

/// One JSONL record. `esd_limit` truncates the ESD to its largest values.
inline nlohmann::json to_json(const SpectralReport& r,
                              std::optional<std::size_t> esd_limit = std::nullopt) {
  nlohmann::json j;
  j["layer_name"] = r.layer_name;
  if (r.alpha) {
    j["alpha"] = {{"alpha", r.alpha->alpha},
                  {"xmin", r.alpha->xmin},
                  {"ks_stat", r.alpha->ks_stat},
                  {"n_tail", r.alpha->n_tail}};
  } else {
    j["alpha"] = nullptr;
    j["fit_error"] = r.fit_error;
  }
  j["spectral_norm"] = r.spectral_norm;
  j["frobenius_norm"] = r.frobenius_norm;
  j["nuclear_norm"] = r.nuclear_norm;
  const std::size_t keep = esd_limit ? std::min(*esd_limit, r.esd.size()) : r.esd.size();
  j["esd"] = std::vector<double>(r.esd.begin(), r.esd.begin() + static_cast<std::ptrdiff_t>(keep));
  return j;
}

inline std::string to_jsonl(std::span<const SpectralReport> reports,
                            std::optional<std::size_t> esd_limit = std::nullopt) {
  std::string out;
  for (const auto& r : reports) {
    out += to_json(r, esd_limit).dump();
    out += '\n';
  }
  return out;
}

}  // namespace spop
