// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "spop/error.hpp"
#include "spop/linalg.hpp"
#include "spop/matrix.hpp"

namespace spop::bench {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// A smooth objective over a list of matrix parameters with a finite
/// dataset. Losses are means over the batch of per-sample losses, scaled so
/// the full-batch mean equals the objective.
class Problem {
 public:
  virtual ~Problem() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::vector<Shape> shapes() const = 0;
  [[nodiscard]] virtual std::vector<std::string> param_names() const = 0;
  [[nodiscard]] virtual std::size_t dataset_size() const = 0;
  [[nodiscard]] virtual std::vector<Matrix> initial_params() const = 0;

  [[nodiscard]] virtual double loss(std::span<const Matrix> params,
                                    std::span<const std::size_t> batch) const = 0;

  /// Loss and gradient at the same point.
  [[nodiscard]] virtual std::pair<double, std::vector<Matrix>> loss_and_grad(
      std::span<const Matrix> params, std::span<const std::size_t> batch) const = 0;

  [[nodiscard]] std::vector<Matrix> grad(std::span<const Matrix> params,
                                         std::span<const std::size_t> batch) const {
    return loss_and_grad(params, batch).second;
  }

  /// Smoothness constant of the full objective, when known in closed form.
  [[nodiscard]] virtual std::optional<double> lipschitz() const { return std::nullopt; }

  [[nodiscard]] std::vector<std::size_t> full_batch() const {
    std::vector<std::size_t> idx(dataset_size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }

  [[nodiscard]] double full_loss(std::span<const Matrix> params) const {
    const auto all = full_batch();
    return loss(params, all);
  }

 protected:
  void check_params(std::span<const Matrix> params) const {
    const auto expected = shapes();
    if (params.size() != expected.size())
      throw ShapeError(name() + ": expected " + std::to_string(expected.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].rows() != expected[i].rows || params[i].cols() != expected[i].cols)
        throw ShapeError(name() + ": parameter " + std::to_string(i) + " has the wrong shape");
  }

  void check_batch(std::span<const std::size_t> batch) const {
    if (batch.empty()) throw DomainError(name() + ": empty batch");
    for (std::size_t i : batch)
      if (i >= dataset_size()) throw DomainError(name() + ": batch index out of range");
  }
};

namespace detail {

inline Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) std::ranges::copy(src.row(idx[r]), out.row(r).begin());
  return out;
}

inline void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw ShapeError(std::string(what) + " must be positive");
}

}  // namespace detail

/// f(W) = ‖A W B − C‖_F² / 2 with C = A W* B + noise. Each row of A (with the
/// matching row of C) is one sample.
struct MatrixRegressionSpec {
  std::size_t rows = 64;       // W is rows x cols
  std::size_t cols = 64;
  std::size_t samples = 32;    // rows of A
  std::size_t out_cols = 32;   // columns of B
  double noise = 1e-3;         // noise std relative to the rms of A W* B
  std::uint64_t seed = 0;
};

class MatrixRegression final : public Problem {
 public:
  explicit MatrixRegression(const MatrixRegressionSpec& spec) : spec_(spec) {
    detail::require_positive(spec.rows, "rows");
    detail::require_positive(spec.cols, "cols");
    detail::require_positive(spec.samples, "samples");
    detail::require_positive(spec.out_cols, "out_cols");
    if (!(spec.noise >= 0.0)) throw DomainError("noise must be >= 0");
    std::mt19937_64 rng(spec.seed);
    a_ = Matrix::random_normal(spec.samples, spec.rows, rng, 1.0 / std::sqrt(double(spec.rows)));
    b_ = Matrix::random_normal(spec.cols, spec.out_cols, rng, 1.0 / std::sqrt(double(spec.cols)));
    w_star_ = Matrix::random_normal(spec.rows, spec.cols, rng, 1.0 / std::sqrt(double(spec.cols)));
    c_ = matmul(matmul(a_, w_star_), b_);
    if (spec.noise > 0.0) {
      const double rms = frobenius_norm(c_) / std::sqrt(double(c_.size()));
      c_ += Matrix::random_normal(c_.rows(), c_.cols(), rng, spec.noise * rms);
    }
    w0_ = Matrix::random_normal(spec.rows, spec.cols, rng, 1.0 / std::sqrt(double(spec.cols)));
  }

  std::string name() const override { return "matrix_regression"; }
  std::vector<Shape> shapes() const override { return {{spec_.rows, spec_.cols}}; }
  std::vector<std::string> param_names() const override { return {"W"}; }
  std::size_t dataset_size() const override { return spec_.samples; }
  std::vector<Matrix> initial_params() const override { return {w0_}; }

  double loss(std::span<const Matrix> params, std::span<const std::size_t> batch) const override {
    check_params(params);
    check_batch(batch);
    const Matrix r = residual(params[0], batch);
    const double fro = frobenius_norm(r);
    return 0.5 * fro * fro * batch_weight(batch);
  }

  std::pair<double, std::vector<Matrix>> loss_and_grad(
      std::span<const Matrix> params, std::span<const std::size_t> batch) const override {
    check_params(params);
    check_batch(batch);
    const Matrix ab = detail::gather_rows(a_, batch);
    Matrix r = matmul(matmul(ab, params[0]), b_);
    r -= detail::gather_rows(c_, batch);
    const double weight = batch_weight(batch);
    const double fro = frobenius_norm(r);
    Matrix g = matmul_nt(matmul_tn(ab, r), b_);
    g *= weight;
    return {0.5 * fro * fro * weight, {std::move(g)}};
  }

  /// λ_max(AᵀA) · λ_max(BBᵀ), the largest Hessian eigenvalue.
  std::optional<double> lipschitz() const override {
    const double sa = singular_values(a_).front();
    const double sb = singular_values(b_).front();
    return sa * sa * sb * sb;
  }

  const Matrix& solution() const noexcept { return w_star_; }
  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  const Matrix& c() const noexcept { return c_; }

 private:
  Matrix residual(const Matrix& w, std::span<const std::size_t> batch) const {
    Matrix r = matmul(matmul(detail::gather_rows(a_, batch), w), b_);
    r -= detail::gather_rows(c_, batch);
    return r;
  }

  double batch_weight(std::span<const std::size_t> batch) const {
    return static_cast<double>(spec_.samples) / static_cast<double>(batch.size());
  }

  MatrixRegressionSpec spec_;
  Matrix a_, b_, c_, w_star_, w0_;
};

/// Multinomial logistic regression on Gaussian clusters; one d x K weight.
struct LogisticSpec {
  std::size_t dim = 100;
  std::size_t classes = 10;
  std::size_t samples = 5000;
  double separation = 3.0;  // cluster-center scale relative to unit noise
  std::uint64_t seed = 0;
};

class LogisticRegression final : public Problem {
 public:
  explicit LogisticRegression(const LogisticSpec& spec) : spec_(spec) {
    detail::require_positive(spec.dim, "dim");
    detail::require_positive(spec.samples, "samples");
    if (spec.classes < 2) throw ShapeError("classes must be >= 2");
    if (!(spec.separation >= 0.0)) throw DomainError("separation must be >= 0");
    std::mt19937_64 rng(spec.seed);
    const Matrix centers = Matrix::random_normal(spec.classes, spec.dim, rng,
                                                 spec.separation / std::sqrt(double(spec.dim)));
    x_ = Matrix::random_normal(spec.samples, spec.dim, rng, 1.0 / std::sqrt(double(spec.dim)));
    labels_.resize(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i) {
      labels_[i] = i % spec.classes;
      for (std::size_t j = 0; j < spec.dim; ++j) x_(i, j) += centers(labels_[i], j);
    }
    w0_ = Matrix::random_normal(spec.dim, spec.classes, rng, 0.01);
  }

  std::string name() const override { return "logistic_regression"; }
  std::vector<Shape> shapes() const override { return {{spec_.dim, spec_.classes}}; }
  std::vector<std::string> param_names() const override { return {"W"}; }
  std::size_t dataset_size() const override { return spec_.samples; }
  std::vector<Matrix> initial_params() const override { return {w0_}; }

  double loss(std::span<const Matrix> params, std::span<const std::size_t> batch) const override {
    return loss_and_grad(params, batch).first;
  }

  std::pair<double, std::vector<Matrix>> loss_and_grad(
      std::span<const Matrix> params, std::span<const std::size_t> batch) const override {
    check_params(params);
    check_batch(batch);
    const Matrix xb = detail::gather_rows(x_, batch);
    Matrix probs = matmul(xb, params[0]);
    double total = 0.0;
    for (std::size_t r = 0; r < batch.size(); ++r) {
      auto row = probs.row(r);
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double& v : row) z += (v = std::exp(v - mx));
      const std::size_t y = labels_[batch[r]];
      total += std::log(z) - std::log(row[y]);
      for (double& v : row) v /= z;
      row[y] -= 1.0;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    Matrix g = matmul_tn(xb, probs);
    g *= inv;
    return {total * inv, {std::move(g)}};
  }

  const std::vector<std::size_t>& labels() const noexcept { return labels_; }

 private:
  LogisticSpec spec_;
  Matrix x_, w0_;
  std::vector<std::size_t> labels_;
};

/// Two-layer tanh network y = W2 tanh(W1 x) fitted to a random teacher of the
/// same architecture under squared loss.
struct MlpSpec {
  std::size_t input = 64;
  std::size_t hidden = 64;
  std::size_t output = 1;
  std::size_t samples = 2000;
  bool student_is_teacher = false;  // start exactly at the teacher weights
  std::uint64_t seed = 0;
};

class Mlp2 final : public Problem {
 public:
  explicit Mlp2(const MlpSpec& spec) : spec_(spec) {
    detail::require_positive(spec.input, "input");
    detail::require_positive(spec.hidden, "hidden");
    detail::require_positive(spec.output, "output");
    detail::require_positive(spec.samples, "samples");
    std::mt19937_64 rng(spec.seed);
    teacher_ = {Matrix::random_normal(spec.hidden, spec.input, rng, 1.0 / std::sqrt(double(spec.input))),
                Matrix::random_normal(spec.output, spec.hidden, rng, 1.0 / std::sqrt(double(spec.hidden)))};
    x_ = Matrix::random_normal(spec.samples, spec.input, rng);
    y_ = forward(teacher_, x_).second;
    if (spec.student_is_teacher) {
      w0_ = teacher_;
    } else {
      w0_ = {Matrix::random_normal(spec.hidden, spec.input, rng, 1.0 / std::sqrt(double(spec.input))),
             Matrix::random_normal(spec.output, spec.hidden, rng, 1.0 / std::sqrt(double(spec.hidden)))};
    }
  }

  std::string name() const override { return "mlp2"; }
  std::vector<Shape> shapes() const override {
    return {{spec_.hidden, spec_.input}, {spec_.output, spec_.hidden}};
  }
  std::vector<std::string> param_names() const override { return {"W1", "W2"}; }
  std::size_t dataset_size() const override { return spec_.samples; }
  std::vector<Matrix> initial_params() const override { return w0_; }

  double loss(std::span<const Matrix> params, std::span<const std::size_t> batch) const override {
    check_params(params);
    check_batch(batch);
    const Matrix xb = detail::gather_rows(x_, batch);
    Matrix r = forward(params, xb).second;
    r -= detail::gather_rows(y_, batch);
    const double fro = frobenius_norm(r);
    return 0.5 * fro * fro / static_cast<double>(batch.size());
  }

  std::pair<double, std::vector<Matrix>> loss_and_grad(
      std::span<const Matrix> params, std::span<const std::size_t> batch) const override {
    check_params(params);
    check_batch(batch);
    const double inv = 1.0 / static_cast<double>(batch.size());
    const Matrix xb = detail::gather_rows(x_, batch);
    auto [h, r] = forward(params, xb);
    r -= detail::gather_rows(y_, batch);
    const double fro = frobenius_norm(r);

    Matrix g2 = matmul_tn(r, h);  // output x hidden
    g2 *= inv;
    Matrix dz = matmul(r, params[1]);  // batch x hidden
    for (std::size_t k = 0; k < dz.size(); ++k) {
      const double hk = h.data()[k];
      dz.data()[k] *= 1.0 - hk * hk;
    }
    Matrix g1 = matmul_tn(dz, xb);  // hidden x input
    g1 *= inv;
    return {0.5 * fro * fro * inv, {std::move(g1), std::move(g2)}};
  }

  const std::vector<Matrix>& teacher() const noexcept { return teacher_; }

 private:
  // Returns (hidden activations, outputs) for rows of x.
  static std::pair<Matrix, Matrix> forward(std::span<const Matrix> params, const Matrix& x) {
    Matrix h = matmul_nt(x, params[0]);
    for (double& v : h.data()) v = std::tanh(v);
    Matrix out = matmul_nt(h, params[1]);
    return {std::move(h), std::move(out)};
  }

  MlpSpec spec_;
  std::vector<Matrix> teacher_, w0_;
  Matrix x_, y_;
};

using ProblemSpec = std::variant<MatrixRegressionSpec, LogisticSpec, MlpSpec>;

inline std::unique_ptr<Problem> make_problem(const ProblemSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::unique_ptr<Problem> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MatrixRegressionSpec>)
          return std::make_unique<MatrixRegression>(s);
        else if constexpr (std::is_same_v<T, LogisticSpec>)
          return std::make_unique<LogisticRegression>(s);
        else
          return std::make_unique<Mlp2>(s);
      },
      spec);
}

/// Central-difference gradient check on up to `n_coords` distinct random
/// coordinates (all of them when there are fewer). Returns the largest
/// |analytic − numeric| / (|numeric| + 1e-12).
inline double finite_diff_check(const Problem& problem, std::span<const Matrix> params,
                                std::span<const std::size_t> batch, double h,
                                std::size_t n_coords = 100, std::uint64_t seed = 0) {
  if (!(h > 0.0)) throw DomainError("finite difference step must be > 0");
  const auto analytic = problem.grad(params, batch);
  std::vector<std::pair<std::size_t, std::size_t>> coords;  // (param, flat index)
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  if (total <= n_coords) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t k = 0; k < params[i].size(); ++k) coords.emplace_back(i, k);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::unordered_set<std::size_t> seen;
    while (coords.size() < n_coords) {
      std::size_t flat = pick(rng);
      if (!seen.insert(flat).second) continue;
      std::size_t i = 0;
      while (flat >= params[i].size()) flat -= params[i++].size();
      coords.emplace_back(i, flat);
    }
  }

  std::vector<Matrix> probe(params.begin(), params.end());
  double worst = 0.0;
  for (const auto& [i, k] : coords) {
    const double orig = probe[i].data()[k];
    probe[i].data()[k] = orig + h;
    const double up = problem.loss(probe, batch);
    probe[i].data()[k] = orig - h;
    const double down = problem.loss(probe, batch);
    probe[i].data()[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i].data()[k] - numeric) / (std::abs(numeric) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace spop::bench
