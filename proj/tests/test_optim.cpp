// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "spop/optim.hpp"
#include "spop/optim_io.hpp"
#include "test_util.hpp"

namespace spop {
namespace {

using test::log_spaced;
using test::rel_fro;
using test::with_spectrum;

OptimizerConfig config(OptimizerKind kind, double lr = 0.05, double beta = 0.9) {
  OptimizerConfig c = OptimizerConfig::defaults(kind);
  c.lr = lr;
  c.momentum = beta;
  return c;
}

// Seeded sequence of gradients for trajectory comparisons.
std::vector<Matrix> gradient_stream(std::size_t rows, std::size_t cols, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Matrix> out;
  for (int t = 0; t < steps; ++t) out.push_back(Matrix::random_normal(rows, cols, rng));
  return out;
}

std::vector<StepResult> run(const OptimizerConfig& cfg, const Matrix& w0, const std::vector<Matrix>& grads,
                            bool scheduled = true) {
  auto st = OptimizerState::init(cfg, w0.rows(), w0.cols());
  Matrix w = w0;
  std::vector<StepResult> out;
  for (const auto& g : grads) {
    out.push_back(scheduled ? scheduled_step(cfg, st, w, g) : step(cfg, st, w, g));
    w = out.back().weights;
  }
  return out;
}

TEST(OptimizerKindNames, RoundTrip) {
  for (const auto& [kind, name] : kOptimizerNames) {
    EXPECT_EQ(to_string(kind), name);
    EXPECT_EQ(parse_optimizer_kind(name), kind);
  }
  EXPECT_FALSE(parse_optimizer_kind("lion").has_value());
}

TEST(OptimizerConfig, ValidationRejectsOutOfRangeFields) {
  auto bad = [](auto mutate) {
    OptimizerConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](auto& c) { c.lr = 0.0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.momentum = 1.0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.weight_decay = -1.0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.power = 1.5; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.ht_alpha = 0.0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.interval = 0; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.kind = OptimizerKind::kMuonNs, c.interval = 5; }).validate(), DomainError);
  EXPECT_THROW(bad([](auto& c) { c.kind = OptimizerKind::kMuonSvd, c.adaptive_lr = AdaptiveLr{1.0}; }).validate(),
               DomainError);
  EXPECT_THROW(bad([](auto& c) { c.adaptive_lr = AdaptiveLr{0.0}; }).validate(), DomainError);
  EXPECT_NO_THROW(OptimizerConfig{}.validate());
}

TEST(Step, HtMuonPowerOneMatchesSgdm) {
  std::mt19937_64 rng(41);
  const Matrix w = Matrix::random_normal(6, 8, rng);
  const auto grads = gradient_stream(6, 8, 10, 42);
  OptimizerConfig ht = config(OptimizerKind::kHtMuon);
  ht.power = 1.0;
  const auto a = run(ht, w, grads);
  const auto b = run(config(OptimizerKind::kSgdm), w, grads);
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_LE(max_abs(a[t].weights - b[t].weights), 1e-10);
}

TEST(Step, HtMuonPowerZeroMatchesMuonSvd) {
  std::mt19937_64 rng(43);
  const Matrix w = Matrix::random_normal(7, 5, rng);
  const auto grads = gradient_stream(7, 5, 10, 44);
  OptimizerConfig ht = config(OptimizerKind::kHtMuon);
  ht.power = 0.0;
  const auto a = run(ht, w, grads);
  const auto b = run(config(OptimizerKind::kMuonSvd), w, grads);
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_LE(max_abs(a[t].weights - b[t].weights), 1e-9);
}

TEST(Step, MuonSvdDirectionHasUnitSpectrum) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix g = Matrix::random_normal(5 + trial, 9, rng);
    auto cfg = config(OptimizerKind::kMuonSvd);
    auto st = OptimizerState::init(cfg, g.rows(), g.cols());
    const auto res = step(cfg, st, Matrix(g.rows(), g.cols()), g);
    for (double s : singular_values(res.trace.direction)) EXPECT_NEAR(s, 1.0, 1e-10);
    for (double s : res.trace.singular_values) EXPECT_EQ(s, 1.0);
  }
}

TEST(Step, ShapeScaleForTallMatrix) {
  EXPECT_EQ(shape_scale(1024, 256), 2.0);
  EXPECT_EQ(shape_scale(256, 1024), 1.0);
  std::mt19937_64 rng(46);
  const Matrix g = Matrix::random_normal(1024, 256, rng);
  auto cfg = config(OptimizerKind::kMuonNs);
  auto st = OptimizerState::init(cfg, 1024, 256);
  EXPECT_EQ(step(cfg, st, Matrix(1024, 256), g).trace.scale, 2.0);
}

TEST(Step, UpdateRuleWithDecoupledDecay) {
  std::mt19937_64 rng(47);
  const Matrix w = Matrix::random_normal(9, 4, rng);
  const Matrix g = Matrix::random_normal(9, 4, rng);
  auto cfg = config(OptimizerKind::kHtMuon, 0.03, 0.0);
  cfg.weight_decay = 0.1;
  auto st = OptimizerState::init(cfg, 9, 4);
  const auto res = step(cfg, st, w, g);
  // Independent oracle: W - ηλW - η s U Σ^p Vᵀ with s = sqrt(9/4).
  Matrix want = w;
  want *= 1.0 - 0.03 * 0.1;
  Matrix dir = power_transform(g, cfg.power);
  dir *= 0.03 * 1.5;
  want -= dir;
  EXPECT_LT(max_abs(res.weights - want), 1e-12);
  EXPECT_EQ(res.trace.scale, 1.5);
  EXPECT_EQ(res.trace.effective_lr, 0.03);
  EXPECT_EQ(st.t, 1u);
}

TEST(Step, ErrorsOnShapeMismatchAndNonFiniteGradient) {
  auto cfg = config(OptimizerKind::kHtMuon);
  auto st = OptimizerState::init(cfg, 3, 3);
  EXPECT_THROW(step(cfg, st, Matrix(3, 3), Matrix(3, 2)), ShapeError);
  Matrix g(3, 3);
  g(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)step(cfg, st, Matrix(3, 3), g);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("gradient"), std::string::npos);
  }
  EXPECT_EQ(st.t, 0u);
}

TEST(Step, ZeroMomentumGivesZeroDirection) {
  for (const auto& [kind, name] : kOptimizerNames) {
    if (!is_matrix_family(kind)) continue;
    auto cfg = config(kind);
    auto st = OptimizerState::init(cfg, 4, 3);
    const Matrix w43(4, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    const auto res = step(cfg, st, w43, Matrix(4, 3));
    EXPECT_TRUE(is_zero(res.trace.direction)) << name;
    EXPECT_TRUE(res.weights == w43) << name;
  }
}

TEST(Step, MomentumRecursionWithConstantGradient) {
  std::mt19937_64 rng(48);
  const Matrix g = Matrix::random_normal(5, 5, rng);
  auto cfg = config(OptimizerKind::kMuonNs, 0.01, 0.8);
  auto st = OptimizerState::init(cfg, 5, 5);
  Matrix w(5, 5);
  for (int t = 1; t <= 20; ++t) {
    w = step(cfg, st, w, g).weights;
    Matrix want = g;
    want *= 1.0 - std::pow(0.8, t);
    EXPECT_LT(max_abs(st.momentum - want), 1e-12);
  }
}

TEST(Step, GradientScaleResponse) {
  std::mt19937_64 rng(49);
  const auto grads = gradient_stream(6, 4, 5, 50);
  const Matrix w = Matrix::random_normal(6, 4, rng);
  for (double c : {0.01, 3.0, 250.0}) {
    std::vector<Matrix> scaled = grads;
    for (auto& g : scaled) g *= c;
    auto muon = config(OptimizerKind::kMuonSvd);
    // Directions only depend on the momentum, so feed the same weights.
    auto sa = OptimizerState::init(muon, 6, 4);
    auto sb = OptimizerState::init(muon, 6, 4);
    auto ht = config(OptimizerKind::kHtMuon);
    auto ha = OptimizerState::init(ht, 6, 4);
    auto hb = OptimizerState::init(ht, 6, 4);
    for (std::size_t t = 0; t < grads.size(); ++t) {
      const auto a = step(muon, sa, w, grads[t]).trace.direction;
      const auto b = step(muon, sb, w, scaled[t]).trace.direction;
      EXPECT_LT(max_abs(a - b), 1e-10);
      Matrix hx = step(ht, ha, w, grads[t]).trace.direction;
      const auto hy = step(ht, hb, w, scaled[t]).trace.direction;
      hx *= std::pow(c, ht.power);
      EXPECT_LT(rel_fro(hy, hx), 1e-10);
    }
  }
}

TEST(Step, HtMuonNsCloseToHtMuon) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 8 + 4 * trial;
    const Matrix m = with_spectrum(n, n, log_spaced(n, 2.0, 0.02), rng);
    auto exact = config(OptimizerKind::kHtMuon, 0.02, 0.0);
    auto approx = config(OptimizerKind::kHtMuonNs, 0.02, 0.0);
    auto s1 = OptimizerState::init(exact, n, n);
    auto s2 = OptimizerState::init(approx, n, n);
    const auto o1 = step(exact, s1, Matrix(n, n), m).trace.direction;
    const auto o2 = step(approx, s2, Matrix(n, n), m).trace.direction;
    EXPECT_LE(rel_fro(o2, o1), 0.35);
  }
}

TEST(Step, HtMuonHtFixedSpectrum) {
  std::mt19937_64 rng(52);
  auto cfg = config(OptimizerKind::kHtMuonHt, 0.02, 0.0);
  const Matrix g = Matrix::random_normal(10, 7, rng);
  auto st = OptimizerState::init(cfg, 10, 7);
  const auto s = singular_values(step(cfg, st, Matrix(10, 7), g).trace.direction);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], std::pow(i + 1.0, -0.25), 1e-10);
}

TEST(Step, PureDecayWithSgdm) {
  std::mt19937_64 rng(53);
  const Matrix w = Matrix::random_normal(4, 4, rng);
  auto cfg = config(OptimizerKind::kSgdm, 0.1, 0.0);
  cfg.weight_decay = 0.5;
  auto st = OptimizerState::init(cfg, 4, 4);
  const auto res = step(cfg, st, w, Matrix(4, 4));
  for (std::size_t k = 0; k < w.size(); ++k) EXPECT_EQ(res.weights.data()[k], w.data()[k] - 0.05 * w.data()[k]);
}

TEST(Step, NorMuonRescaledUpdateNorm) {
  std::mt19937_64 rng(54);
  for (auto kind : {OptimizerKind::kNorMuon, OptimizerKind::kHtMuonNorMuon}) {
    auto cfg = config(kind, 0.02, 0.9);
    auto st = OptimizerState::init(cfg, 12, 5);
    ASSERT_EQ(st.second_moment->rows(), 12u);
    ASSERT_EQ(st.second_moment->cols(), 1u);
    Matrix w(12, 5);
    for (int t = 0; t < 5; ++t) {
      const auto res = step(cfg, st, w, Matrix::random_normal(12, 5, rng));
      const double norm = res.trace.effective_lr * frobenius_norm(res.trace.direction);
      EXPECT_NEAR(norm, 0.2 * 0.02 * std::sqrt(60.0), 1e-8);
      EXPECT_EQ(res.trace.scale, 1.0);
      w = res.weights;
    }
  }
}

TEST(Step, NorMuonMatchesHandRolledNormalization) {
  std::mt19937_64 rng(55);
  const Matrix g = Matrix::random_normal(6, 4, rng);
  auto cfg = config(OptimizerKind::kHtMuonNorMuon, 0.02, 0.0);
  auto st = OptimizerState::init(cfg, 6, 4);
  const auto res = step(cfg, st, Matrix(6, 4), g);
  // Oracle: O = power transform, v_i = (1-β2) mean_j O_ij², Ô = O / (sqrt(v)+ε).
  const Matrix o = power_transform(g, cfg.power);
  Matrix want = o;
  for (std::size_t i = 0; i < 6; ++i) {
    double ms = 0.0;
    for (std::size_t j = 0; j < 4; ++j) ms += o(i, j) * o(i, j) / 4.0;
    const double v = (1.0 - cfg.beta2) * ms;
    EXPECT_NEAR((*st.second_moment)(i, 0), v, 1e-15);
    for (std::size_t j = 0; j < 4; ++j) want(i, j) = o(i, j) / (std::sqrt(v) + cfg.eps);
  }
  EXPECT_LT(rel_fro(res.trace.direction, want), 1e-12);
}

TEST(Step, AdamMatchesScalarOracle) {
  std::mt19937_64 rng(56);
  const auto grads = gradient_stream(3, 2, 6, 57);
  const Matrix w0 = Matrix::random_normal(3, 2, rng);
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kAdamW}) {
    auto cfg = OptimizerConfig::defaults(kind);
    cfg.weight_decay = 0.1;
    const auto traj = run(cfg, w0, grads);
    for (std::size_t k = 0; k < w0.size(); ++k) {
      double w = w0.data()[k];
      double m = 0.0;
      double v = 0.0;
      for (std::size_t t = 0; t < grads.size(); ++t) {
        double g = grads[t].data()[k];
        if (kind == OptimizerKind::kAdam) g += 0.1 * w;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, t + 1.0));
        const double vh = v / (1.0 - std::pow(0.999, t + 1.0));
        const double decay = kind == OptimizerKind::kAdamW ? 1e-3 * 0.1 * w : 0.0;
        w = w - decay - 1e-3 * mh / (std::sqrt(vh) + 1e-8);
        EXPECT_NEAR(traj[t].weights.data()[k], w, 1e-14);
      }
    }
  }
}

TEST(ScheduledStep, IntervalOneIsBitIdenticalToStep) {
  std::mt19937_64 rng(58);
  const Matrix w = Matrix::random_normal(6, 5, rng);
  const auto grads = gradient_stream(6, 5, 12, 59);
  for (auto kind : {OptimizerKind::kHtMuon, OptimizerKind::kHtMuonNs, OptimizerKind::kHtMuonNorMuon}) {
    const auto cfg = config(kind);
    const auto a = run(cfg, w, grads, true);
    const auto b = run(cfg, w, grads, false);
    for (std::size_t t = 0; t < a.size(); ++t) EXPECT_TRUE(a[t].weights == b[t].weights);
  }
}

TEST(ScheduledStep, IntervalFivePhases) {
  std::mt19937_64 rng(60);
  const Matrix w = Matrix::random_normal(6, 5, rng);
  const auto grads = gradient_stream(6, 5, 16, 61);
  auto cfg = config(OptimizerKind::kHtMuon);
  cfg.interval = 5;
  auto st = OptimizerState::init(cfg, 6, 5);
  Matrix cur = w;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    const auto res = scheduled_step(cfg, st, cur, grads[t]);
    EXPECT_EQ(res.trace.heavy, t % 5 == 0) << t;
    const Matrix expect = t % 5 == 0 ? power_transform(st.momentum, cfg.power) : newton_schulz5(st.momentum);
    EXPECT_LT(max_abs(res.trace.direction - expect), 1e-12) << t;
    cur = res.weights;
  }
}

TEST(ScheduledStep, HugeIntervalOnlyFirstStepDiffersFromMuonNs) {
  std::mt19937_64 rng(62);
  const Matrix w = Matrix::random_normal(5, 5, rng);
  const auto grads = gradient_stream(5, 5, 100, 63);
  auto cfg = config(OptimizerKind::kHtMuon);
  cfg.interval = 1000000000;
  auto st = OptimizerState::init(cfg, 5, 5);
  auto ref_cfg = config(OptimizerKind::kMuonNs);
  auto ref = OptimizerState::init(ref_cfg, 5, 5);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    const auto a = scheduled_step(cfg, st, w, grads[t]);
    const auto b = step(ref_cfg, ref, w, grads[t]);
    EXPECT_EQ(a.trace.direction == b.trace.direction, t != 0) << t;
    EXPECT_TRUE(st.momentum == ref.momentum);
  }
}

TEST(AdaptiveLr, DiagonalFormula) {
  const std::vector<double> sigma = {3.0, 1.5, 0.5};
  const Matrix m = Matrix::diag(3, 3, sigma);
  for (double p : {0.0, 0.125, 0.5, 1.0}) {
    double num = 0.0;
    double den = 0.0;
    for (double s : sigma) {
      num += std::pow(s, 1.0 + p);
      den += std::pow(s, 2.0 * p);
    }
    EXPECT_NEAR(adaptive_lr(m, p, 2.0), num / (2.0 * den), 1e-13);
  }
  EXPECT_NEAR(adaptive_lr(m, 0.0, 2.0), 5.0 / (2.0 * 3.0), 1e-13);
  EXPECT_NEAR(adaptive_lr(Matrix::diag({2.0, 1.0}), 1.0, 1.0), 1.0, 1e-14);
}

TEST(AdaptiveLr, PositiveAndErrors) {
  std::mt19937_64 rng(64);
  for (int i = 0; i < 20; ++i) EXPECT_GT(adaptive_lr(Matrix::random_normal(4, 6, rng), 0.3, 5.0), 0.0);
  EXPECT_THROW(adaptive_lr(Matrix(2, 2), 0.5, 1.0), DomainError);
  EXPECT_THROW(adaptive_lr(Matrix::identity(2), 0.5, 0.0), DomainError);
}

TEST(AdaptiveLr, StepUsesSpectrumBasedRate) {
  std::mt19937_64 rng(65);
  const Matrix g = Matrix::random_normal(5, 7, rng);
  auto cfg = config(OptimizerKind::kHtMuon, 0.02, 0.5);
  cfg.adaptive_lr = AdaptiveLr{4.0};
  auto st = OptimizerState::init(cfg, 5, 7);
  const auto res = step(cfg, st, Matrix(5, 7), g);
  EXPECT_NEAR(res.trace.effective_lr, adaptive_lr(st.momentum, cfg.power, 4.0), 1e-12);
}

TEST(Snapshot, RoundTripResumesBitIdentically) {
  std::mt19937_64 rng(66);
  const auto grads = gradient_stream(5, 4, 8, 67);
  for (auto kind : {OptimizerKind::kAdamW, OptimizerKind::kHtMuonNorMuon, OptimizerKind::kHtMuon}) {
    auto cfg = config(kind);
    if (kind == OptimizerKind::kHtMuon) cfg.adaptive_lr = AdaptiveLr{3.0};
    auto st = OptimizerState::init(cfg, 5, 4);
    st.seed = 99;
    Matrix w = Matrix::random_normal(5, 4, rng);
    for (int t = 0; t < 4; ++t) w = step(cfg, st, w, grads[t]).weights;
    const auto json = nlohmann::json::parse(snapshot_to_json(cfg, st).dump());
    auto [cfg2, st2] = snapshot_from_json(json);
    EXPECT_EQ(st2.t, 4u);
    EXPECT_EQ(st2.seed, 99u);
    EXPECT_EQ(cfg2.kind, kind);
    Matrix wa = w;
    Matrix wb = w;
    for (int t = 4; t < 8; ++t) {
      wa = step(cfg, st, wa, grads[t]).weights;
      wb = step(cfg2, st2, wb, grads[t]).weights;
    }
    EXPECT_TRUE(wa == wb);
  }
}

TEST(Snapshot, MalformedInputThrows) {
  EXPECT_THROW(snapshot_from_json(nlohmann::json::object()), FormatError);
  auto j = snapshot_to_json(OptimizerConfig{}, OptimizerState::init(OptimizerConfig{}, 2, 2));
  j["momentum"] = "!!notbase64";
  EXPECT_THROW(snapshot_from_json(j), FormatError);
}

TEST(Step, DeterministicAcrossRuns) {
  std::mt19937_64 rng(68);
  const Matrix w = Matrix::random_normal(6, 6, rng);
  const auto grads = gradient_stream(6, 6, 10, 69);
  for (const auto& [kind, name] : kOptimizerNames) {
    const auto a = run(config(kind), w, grads);
    const auto b = run(config(kind), w, grads);
    for (std::size_t t = 0; t < a.size(); ++t) EXPECT_TRUE(a[t].weights == b[t].weights) << name;
  }
}

}  // namespace
}  // namespace spop
