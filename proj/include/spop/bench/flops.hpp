// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string_view>

#include "spop/error.hpp"
#include "spop/specfun.hpp"

namespace spop::bench {

enum class FlopsKind { kMuon, kHtMuonNs };

inline std::optional<FlopsKind> parse_flops_kind(std::string_view s) {
  if (s == "muon") return FlopsKind::kMuon;
  if (s == "htmuon_ns") return FlopsKind::kHtMuonNs;
  return std::nullopt;
}

/// Leading-order FLOPs of one update for an m x n momentum with r = min(m, n):
///   muon:      20mnr            (the O(mn) elementwise work is dropped)
///   htmuon_ns: 20mnr + 4mn² + 6LTn³, L = ceil(log2(2/p))
/// Exact in 64-bit integers.
inline std::uint64_t flops_count(FlopsKind kind, std::uint64_t m, std::uint64_t n, double p,
                                 int ns_steps) {
  if (m == 0 || n == 0) throw DomainError("flops_estimate requires positive dimensions");
  const std::uint64_t r = std::min(m, n);
  std::uint64_t total = 20 * m * n * r;
  if (kind == FlopsKind::kHtMuonNs) {
    if (ns_steps < 1) throw DomainError("flops_estimate requires ns_steps >= 1");
    const auto rounds = static_cast<std::uint64_t>(ns_root_rounds(p));
    total += 4 * m * n * n + 6 * rounds * static_cast<std::uint64_t>(ns_steps) * n * n * n;
  }
  return total;
}

inline double flops_estimate(FlopsKind kind, std::uint64_t m, std::uint64_t n, double p,
                             int ns_steps) {
  return static_cast<double>(flops_count(kind, m, n, p, ns_steps));
}

}  // namespace spop::bench
