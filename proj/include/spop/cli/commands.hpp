// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"
#include "spop/bench/flops.hpp"
#include "spop/bench/problem.hpp"
#include "spop/bench/training.hpp"
#include "spop/cli/config.hpp"
#include "spop/error.hpp"
#include "spop/esd.hpp"
#include "spop/mat_io.hpp"
#include "spop/specfun.hpp"

namespace spop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;  // a check ran and did not pass
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Shortest round-trip decimal form; '.' separator regardless of locale.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Worker count from SPOP_THREADS (default 1, at least 1).
inline std::size_t worker_threads() {
  const char* env = std::getenv("SPOP_THREADS");
  if (env == nullptr) return 1;
  std::size_t n = 0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc{} || ptr != s.data() + s.size() || n == 0) return 1;
  return n;
}

namespace detail {

inline std::string loss_csv(const std::vector<NamedOptimizer>& opts,
                            const std::vector<bench::RunRecord>& runs) {
  std::string out = "step";
  for (const auto& o : opts) out += "," + o.name;
  out += '\n';
  const std::size_t steps = runs.front().steps.size();
  for (std::size_t t = 0; t < steps; ++t) {
    out += std::to_string(t);
    for (const auto& r : runs) out += "," + format_double(r.steps[t].loss);
    out += '\n';
  }
  return out;
}

inline nlohmann::json problem_json(const bench::ProblemSpec& spec) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, bench::MatrixRegressionSpec>)
          return {{"kind", "matrix_regression"}, {"rows", s.rows}, {"cols", s.cols},
                  {"samples", s.samples}, {"out_cols", s.out_cols}, {"noise", s.noise},
                  {"seed", s.seed}};
        else if constexpr (std::is_same_v<T, bench::LogisticSpec>)
          return {{"kind", "logistic_regression"}, {"dim", s.dim}, {"classes", s.classes},
                  {"samples", s.samples}, {"separation", s.separation}, {"seed", s.seed}};
        else
          return {{"kind", "mlp2"}, {"input", s.input}, {"hidden", s.hidden},
                  {"output", s.output}, {"samples", s.samples},
                  {"student_is_teacher", s.student_is_teacher}, {"seed", s.seed}};
      },
      spec);
}

}  // namespace detail

/// Runs every optimizer of the experiment and writes, into the output
/// directory: NAME.jsonl (one line per step), NAME.checkpoints.jsonl (when
/// checkpoints are configured), NAME.PARAM.mat1 (final weights), loss.csv and
/// summary.json. `output_override` replaces the configured directory.
inline int cmd_run(const std::filesystem::path& config_path,
                   const std::optional<std::filesystem::path>& output_override, std::ostream& out,
                   std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config(read_file_bytes(config_path));
  } catch (const ConfigError& e) {
    err << "spop run: " << config_path.string() << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "spop run: " << e.what() << '\n';
    return kExitUsage;
  }
  const std::filesystem::path dir = output_override ? *output_override : std::filesystem::path(cfg.output_dir);

  const auto problem = bench::make_problem(cfg.problem);
  bench::RunOptions ropts;
  ropts.steps = cfg.steps;
  ropts.batch_size = cfg.batch_size;
  ropts.seed = cfg.seed;
  ropts.checkpoints = cfg.checkpoints;
  ropts.record_grad_nuclear = cfg.record_grad_nuclear;

  // Each worker owns whole runs; results land in their config slot so the
  // output does not depend on scheduling.
  const std::size_t n = cfg.optimizers.size();
  std::vector<bench::RunRecord> runs(n);
  std::vector<std::exception_ptr> failures(n);
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n) return;
        i = next++;
      }
      try {
        runs[i] = bench::run_training(*problem, cfg.optimizers[i].config, ropts);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(worker_threads(), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const NumericError& e) {
      err << "spop run: optimizer '" << cfg.optimizers[i].name << "': " << e.what() << '\n';
      return kExitNumeric;
    } catch (const std::exception& e) {
      err << "spop run: optimizer '" << cfg.optimizers[i].name << "': " << e.what() << '\n';
      return kExitNumeric;
    }
  }

  try {
    std::filesystem::create_directories(dir);
    nlohmann::json summary;
    summary["problem"] = detail::problem_json(cfg.problem);
    summary["steps"] = cfg.steps;
    summary["batch_size"] = cfg.batch_size;
    summary["seed"] = cfg.seed;
    summary["runs"] = nlohmann::json::array();
    const std::optional<std::size_t> limit =
        cfg.esd_limit > 0 ? std::optional<std::size_t>(cfg.esd_limit) : std::nullopt;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& name = cfg.optimizers[i].name;
      write_file_atomic(dir / (name + ".jsonl"), bench::steps_jsonl(runs[i]));
      if (!cfg.checkpoints.empty())
        write_file_atomic(dir / (name + ".checkpoints.jsonl"), bench::checkpoints_jsonl(runs[i], limit));
      for (std::size_t p = 0; p < runs[i].final_params.size(); ++p)
        write_mat1(dir / (name + "." + runs[i].param_names[p] + ".mat1"), runs[i].final_params[p]);
      auto s = bench::summary_json(runs[i]);
      s["name"] = name;
      summary["runs"].push_back(std::move(s));
    }
    write_file_atomic(dir / "loss.csv", detail::loss_csv(cfg.optimizers, runs));
    write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "spop run: writing " << dir.string() << ": " << e.what() << '\n';
    return kExitUsage;
  }
  out << "wrote " << n << " run(s) to " << dir.string() << '\n';
  return kExitOk;
}

struct AnalyzeOptions {
  std::optional<std::filesystem::path> output;   // JSONL destination instead of `out`
  std::optional<std::filesystem::path> summary;  // summary JSON file
  std::optional<std::size_t> esd_limit;
};

/// SpectralReport JSONL for each MAT1 file (layer name = file stem) on `out`
/// or the output file; the ᾱ summary goes to `err` and optionally a file.
inline int cmd_analyze(const std::vector<std::filesystem::path>& files, const AnalyzeOptions& opts,
                       std::ostream& out, std::ostream& err) {
  if (files.empty()) {
    err << "usage: spop analyze [-o FILE] [--summary FILE] [--top N] WEIGHTS.mat1...\n";
    return kExitUsage;
  }
  std::vector<std::pair<std::string, Matrix>> layers;
  for (const auto& f : files) {
    try {
      layers.emplace_back(f.stem().string(), read_mat1(f));
    } catch (const std::exception& e) {
      err << "spop analyze: " << f.string() << ": " << e.what() << '\n';
      return kExitUsage;
    }
  }
  SpectralSummary summary;
  try {
    summary = spectral_report(layers);
  } catch (const std::exception& e) {
    err << "spop analyze: " << e.what() << '\n';
    return kExitNumeric;
  }
  const std::string jsonl = to_jsonl(summary.reports, opts.esd_limit);
  nlohmann::json sj;
  sj["n_layers"] = summary.reports.size();
  sj["n_fitted"] = summary.n_fitted;
  sj["mean_alpha"] = summary.mean_alpha ? nlohmann::json(*summary.mean_alpha) : nlohmann::json(nullptr);
  try {
    if (opts.output)
      write_file_atomic(*opts.output, jsonl);
    else
      out << jsonl;
    if (opts.summary) write_file_atomic(*opts.summary, sj.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "spop analyze: " << e.what() << '\n';
    return kExitUsage;
  }
  err << sj.dump() << '\n';
  return kExitOk;
}

struct OracleOptions {
  std::string q = "inf";
  double delta = 1.0;
  std::size_t rows = 8;
  std::size_t cols = 8;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
};

/// Parses q > 1 or "inf".
inline std::optional<double> parse_q(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF") return kInf;
  double q = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), q);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !(q > 1.0) || std::isinf(q)) return std::nullopt;
  return q;
}

/// Checks the closed-form Schatten-q steepest step against random feasible
/// directions for a seeded standard-normal gradient.
inline int cmd_oracle(const OracleOptions& o, std::ostream& out, std::ostream& err) {
  const auto q = parse_q(o.q);
  if (!q) {
    err << "spop oracle: q must be a number > 1 or 'inf', got '" << o.q << "'\n";
    return kExitUsage;
  }
  if (!(o.delta > 0.0) || !std::isfinite(o.delta) || o.rows == 0 || o.cols == 0) {
    err << "spop oracle: delta must be > 0 and dimensions positive\n";
    return kExitUsage;
  }
  std::mt19937_64 rng(o.seed);
  const Matrix g = Matrix::random_normal(o.rows, o.cols, rng);
  SteepestCheck check;
  double dual_norm = 0.0;
  try {
    check = verify_steepest(g, *q, o.delta, o.samples, o.seed + 1);
    dual_norm = schatten_norm(g, dual_exponent(*q));
  } catch (const std::exception& e) {
    err << "spop oracle: " << e.what() << '\n';
    return kExitNumeric;
  }
  out << "q=" << o.q << " delta=" << format_double(o.delta) << " dims=" << o.rows << "x" << o.cols
      << " samples=" << check.n_samples << '\n'
      << "closed_form=" << format_double(check.closed_form) << '\n'
      << "delta_dual_norm=" << format_double(o.delta * dual_norm) << '\n'
      << "sampled_max=" << format_double(check.sampled_max) << '\n'
      << (check.pass ? "PASS" : "FAIL") << '\n';
  return check.pass ? kExitOk : kExitFail;
}

/// Prints the exact leading-order FLOPs count.
inline int cmd_flops(const std::string& kind, std::uint64_t m, std::uint64_t n, double p, int t,
                     std::ostream& out, std::ostream& err) {
  const auto k = bench::parse_flops_kind(kind);
  if (!k) {
    err << "spop flops: kind must be 'muon' or 'htmuon_ns', got '" << kind << "'\n";
    return kExitUsage;
  }
  try {
    out << bench::flops_count(*k, m, n, p, t) << '\n';
  } catch (const Error& e) {
    err << "spop flops: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace spop::cli
