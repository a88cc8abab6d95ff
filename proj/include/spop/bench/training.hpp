// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spop/bench/problem.hpp"
#include "spop/error.hpp"
#include "spop/esd.hpp"
#include "spop/linalg.hpp"
#include "spop/matrix.hpp"
#include "spop/optim.hpp"

namespace spop::bench {

struct RunOptions {
  std::size_t steps = 100;
  std::size_t batch_size = 0;  // 0 or >= dataset size means full batch
  std::uint64_t seed = 0;
  std::vector<std::size_t> checkpoints;  // step indices, recorded after the update
  bool record_grad_nuclear = true;       // one extra SVD per parameter per step
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;  // minibatch loss at the weights before the update
  double grad_fro = 0.0;
  std::optional<double> grad_nuclear;  // summed over parameters
  std::vector<double> effective_lr;    // per parameter
  bool heavy = false;
};

struct CheckpointRecord {
  std::size_t step = 0;
  std::vector<SpectralReport> weights;
  std::vector<SpectralReport> updates;  // spectra of the step's directions
};

struct RunRecord {
  std::string problem;
  std::string optimizer;
  std::vector<std::string> param_names;
  std::vector<StepRecord> steps;
  std::vector<CheckpointRecord> checkpoints;
  std::vector<Matrix> final_params;
  std::size_t heavy_steps = 0;
  double final_full_loss = 0.0;
};

/// Samples minibatch indices uniformly with replacement. A batch size of 0 or
/// at least the dataset size yields the whole dataset in order every time.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
      : n_(dataset_size), b_(batch_size), rng_(seed) {
    if (n_ == 0) throw DomainError("empty dataset");
  }

  [[nodiscard]] bool full_batch() const noexcept { return b_ == 0 || b_ >= n_; }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> idx;
    if (full_batch()) {
      idx.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) idx[i] = i;
      return idx;
    }
    std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
    idx.resize(b_);
    for (auto& i : idx) i = pick(rng_);
    return idx;
  }

 private:
  std::size_t n_;
  std::size_t b_;
  std::mt19937_64 rng_;
};

namespace detail {

inline std::vector<std::pair<std::string, Matrix>> named(const std::vector<std::string>& names,
                                                         const std::vector<Matrix>& mats) {
  std::vector<std::pair<std::string, Matrix>> out;
  for (std::size_t i = 0; i < mats.size(); ++i) out.emplace_back(names[i], mats[i]);
  return out;
}

}  // namespace detail

/// Minibatch training with one scheduled_step per parameter per step.
/// Throws NumericError carrying the step index when the loss or the updated
/// weights stop being finite.
inline RunRecord run_training(const Problem& problem, const OptimizerConfig& cfg,
                              const RunOptions& opts) {
  if (opts.steps < 1) throw DomainError("steps must be >= 1");
  cfg.validate();
  const std::set<std::size_t> checkpoint_set(opts.checkpoints.begin(), opts.checkpoints.end());

  RunRecord rec;
  rec.problem = problem.name();
  rec.optimizer = std::string(to_string(cfg.kind));
  rec.param_names = problem.param_names();
  rec.steps.reserve(opts.steps);

  std::vector<Matrix> params = problem.initial_params();
  std::vector<OptimizerState> states;
  for (const auto& p : params) {
    states.push_back(OptimizerState::init(cfg, p.rows(), p.cols()));
    states.back().seed = opts.seed;
  }
  BatchSampler sampler(problem.dataset_size(), opts.batch_size, opts.seed);

  for (std::size_t t = 0; t < opts.steps; ++t) {
    const auto batch = sampler.next();
    auto [loss, grads] = problem.loss_and_grad(params, batch);
    if (!std::isfinite(loss))
      throw NumericError("loss is not finite at step " + std::to_string(t), static_cast<std::ptrdiff_t>(t));

    StepRecord sr;
    sr.step = t;
    sr.loss = loss;
    double fro2 = 0.0;
    double nuclear = 0.0;
    for (const auto& g : grads) {
      const double f = frobenius_norm(g);
      fro2 += f * f;
      if (opts.record_grad_nuclear)
        for (double s : singular_values(g)) nuclear += s;
    }
    sr.grad_fro = std::sqrt(fro2);
    if (opts.record_grad_nuclear) sr.grad_nuclear = nuclear;

    const bool checkpoint = checkpoint_set.contains(t);
    std::vector<Matrix> directions;
    for (std::size_t i = 0; i < params.size(); ++i) {
      StepResult res;
      try {
        res = scheduled_step(cfg, states[i], params[i], grads[i]);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at step " + std::to_string(t),
                           static_cast<std::ptrdiff_t>(t));
      }
      params[i] = std::move(res.weights);
      sr.effective_lr.push_back(res.trace.effective_lr);
      sr.heavy = sr.heavy || res.trace.heavy;
      if (checkpoint) directions.push_back(std::move(res.trace.direction));
    }
    if (sr.heavy) ++rec.heavy_steps;
    rec.steps.push_back(std::move(sr));

    if (checkpoint) {
      CheckpointRecord cp;
      cp.step = t;
      cp.weights = spectral_report(detail::named(rec.param_names, params)).reports;
      cp.updates = spectral_report(detail::named(rec.param_names, directions)).reports;
      rec.checkpoints.push_back(std::move(cp));
    }
  }
  rec.final_full_loss = problem.full_loss(params);
  rec.final_params = std::move(params);
  return rec;
}

/// Running minimum of the gradient nuclear norm (empty entries carry the
/// previous minimum forward).
inline std::vector<double> running_min_grad_nuclear(const RunRecord& rec) {
  std::vector<double> out;
  double best = kInf;
  for (const auto& s : rec.steps) {
    if (s.grad_nuclear) best = std::min(best, *s.grad_nuclear);
    out.push_back(best);
  }
  return out;
}

inline nlohmann::json to_json(const StepRecord& s) {
  nlohmann::json j;
  j["step"] = s.step;
  j["loss"] = s.loss;
  j["grad_fro"] = s.grad_fro;
  j["grad_nuclear"] = s.grad_nuclear ? nlohmann::json(*s.grad_nuclear) : nlohmann::json(nullptr);
  j["effective_lr"] = s.effective_lr;
  j["heavy"] = s.heavy;
  return j;
}

/// One line per step.
inline std::string steps_jsonl(const RunRecord& rec) {
  std::string out;
  for (const auto& s : rec.steps) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

/// Checkpoint spectra as esd JSONL records tagged with "step" and "source"
/// ("weight" or "update").
inline std::string checkpoints_jsonl(const RunRecord& rec,
                                     std::optional<std::size_t> esd_limit = std::nullopt) {
  std::string out;
  for (const auto& cp : rec.checkpoints) {
    for (const auto& [source, reports] :
         {std::pair{"weight", &cp.weights}, std::pair{"update", &cp.updates}}) {
      for (const auto& r : *reports) {
        auto j = spop::to_json(r, esd_limit);
        j["step"] = cp.step;
        j["source"] = source;
        out += j.dump();
        out += '\n';
      }
    }
  }
  return out;
}

inline nlohmann::json summary_json(const RunRecord& rec) {
  nlohmann::json j;
  j["problem"] = rec.problem;
  j["optimizer"] = rec.optimizer;
  j["steps"] = rec.steps.size();
  j["heavy_steps"] = rec.heavy_steps;
  j["final_loss"] = rec.steps.empty() ? 0.0 : rec.steps.back().loss;
  j["final_full_loss"] = rec.final_full_loss;
  double min_loss = kInf;
  for (const auto& s : rec.steps) min_loss = std::min(min_loss, s.loss);
  j["min_loss"] = min_loss;
  const auto mins = running_min_grad_nuclear(rec);
  j["min_grad_nuclear"] =
      !mins.empty() && std::isfinite(mins.back()) ? nlohmann::json(mins.back()) : nlohmann::json(nullptr);
  const auto final_spec = spectral_report(detail::named(rec.param_names, rec.final_params));
  j["final_weight_mean_alpha"] =
      final_spec.mean_alpha ? nlohmann::json(*final_spec.mean_alpha) : nlohmann::json(nullptr);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& r : final_spec.reports) {
    layers.push_back({{"layer_name", r.layer_name},
                      {"alpha", r.alpha ? nlohmann::json(r.alpha->alpha) : nlohmann::json(nullptr)}});
  }
  j["final_weight_alpha"] = std::move(layers);
  return j;
}

}  // namespace spop::bench
