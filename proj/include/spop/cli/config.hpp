// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spop/bench/problem.hpp"
#include "spop/error.hpp"
#include "spop/optim.hpp"

namespace spop::cli {

/// Malformed experiment config. `line()` is 0 when no single line is at fault.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct NamedOptimizer {
  std::string name;
  OptimizerConfig config;
};

struct ExperimentConfig {
  bench::ProblemSpec problem;
  std::vector<NamedOptimizer> optimizers;
  std::size_t steps = 100;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> checkpoints;
  std::string output_dir = "out";
  bool record_grad_nuclear = true;
  std::size_t esd_limit = 0;  // 0 keeps the full ESD in checkpoint records
};

namespace detail {

struct Entry {
  std::string value;
  std::size_t line = 0;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, Entry> entries;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool valid_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

inline std::vector<Section> split_sections(std::string_view text) {
  std::vector<Section> sections;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      const auto name = trim(line.substr(1, line.size() - 2));
      for (const auto& s : sections)
        if (s.name == name) throw ConfigError("duplicate section [" + std::string(name) + "]", line_no);
      sections.push_back({std::string(name), line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    if (sections.empty()) throw ConfigError("key outside of any section", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!valid_name(key)) throw ConfigError("invalid key '" + key + "'", line_no);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", line_no);
    if (!sections.back().entries.emplace(key, Entry{value, line_no}).second)
      throw ConfigError("duplicate key '" + key + "'", line_no);
  }
  return sections;
}

// Typed reads that consume entries; whatever is left afterwards is unknown.
class Reader {
 public:
  explicit Reader(Section& s) : s_(s) {}

  template <class T>
  void read(const std::string& key, T& out) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return;
    out = parse<T>(key, it->second);
    s_.entries.erase(it);
  }

  std::optional<Entry> take(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return std::nullopt;
    Entry e = it->second;
    s_.entries.erase(it);
    return e;
  }

  void finish() const {
    if (s_.entries.empty()) return;
    // Report the first unknown key in file order.
    const auto first = std::min_element(s_.entries.begin(), s_.entries.end(), [](const auto& a, const auto& b) {
      return a.second.line < b.second.line;
    });
    throw ConfigError("unknown key '" + first->first + "' in [" + s_.name + "]", first->second.line);
  }

  template <class T>
  static T parse(const std::string& key, const Entry& e) {
    const std::string& v = e.value;
    auto bad = [&](const char* what) {
      return ConfigError("'" + key + "' expects " + what + ", got '" + v + "'", e.line);
    };
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true") return true;
      if (v == "false") return false;
      throw bad("true or false");
    } else if constexpr (std::is_same_v<T, double>) {
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(x)) throw bad("a finite number");
      return x;
    } else if constexpr (std::is_same_v<T, int>) {
      int x = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc{} || ptr != v.data() + v.size()) throw bad("an integer");
      return x;
    } else if constexpr (std::is_unsigned_v<T>) {
      T x = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc{} || ptr != v.data() + v.size()) throw bad("a non-negative integer");
      return x;
    } else {
      static_assert(std::is_same_v<T, std::vector<std::size_t>>);
      std::vector<std::size_t> out;
      std::string_view rest = v;
      while (true) {
        const auto comma = rest.find(',');
        const std::string item(trim(rest.substr(0, comma)));
        out.push_back(parse<std::size_t>(key, Entry{item, e.line}));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      return out;
    }
  }

 private:
  Section& s_;
};

inline void read_experiment(Section& s, ExperimentConfig& cfg) {
  Reader r(s);
  r.read("steps", cfg.steps);
  r.read("batch_size", cfg.batch_size);
  r.read("seed", cfg.seed);
  const auto checkpoints = r.take("checkpoints");
  r.read("output_dir", cfg.output_dir);
  r.read("record_grad_nuclear", cfg.record_grad_nuclear);
  r.read("esd_limit", cfg.esd_limit);
  r.finish();
  if (cfg.steps < 1) throw ConfigError("'steps' must be >= 1", s.line);
  if (checkpoints) {
    cfg.checkpoints = Reader::parse<std::vector<std::size_t>>("checkpoints", *checkpoints);
    for (std::size_t c : cfg.checkpoints)
      if (c >= cfg.steps)
        throw ConfigError("checkpoint " + std::to_string(c) + " is beyond the last step",
                          checkpoints->line);
  }
}

inline bench::ProblemSpec read_problem(Section& s, std::uint64_t default_seed) {
  Reader r(s);
  const auto kind = r.take("kind");
  if (!kind) throw ConfigError("[problem] requires 'kind'", s.line);
  bench::ProblemSpec out;
  if (kind->value == "matrix_regression") {
    bench::MatrixRegressionSpec p;
    p.seed = default_seed;
    r.read("seed", p.seed);
    r.read("rows", p.rows);
    r.read("cols", p.cols);
    r.read("samples", p.samples);
    r.read("out_cols", p.out_cols);
    r.read("noise", p.noise);
    out = p;
  } else if (kind->value == "logistic_regression") {
    bench::LogisticSpec p;
    p.seed = default_seed;
    r.read("seed", p.seed);
    r.read("dim", p.dim);
    r.read("classes", p.classes);
    r.read("samples", p.samples);
    r.read("separation", p.separation);
    out = p;
  } else if (kind->value == "mlp2") {
    bench::MlpSpec p;
    p.seed = default_seed;
    r.read("seed", p.seed);
    r.read("input", p.input);
    r.read("hidden", p.hidden);
    r.read("output", p.output);
    r.read("samples", p.samples);
    r.read("student_is_teacher", p.student_is_teacher);
    out = p;
  } else {
    throw ConfigError("unknown problem kind '" + kind->value + "'", kind->line);
  }
  r.finish();
  // Constructing the problem is the dimension check; do it here so errors
  // carry the section line.
  try {
    (void)bench::make_problem(out);
  } catch (const Error& e) {
    throw ConfigError(std::string("[problem] ") + e.what(), s.line);
  }
  return out;
}

inline NamedOptimizer read_optimizer(Section& s, const std::string& name,
                                     const std::optional<double>& problem_lipschitz) {
  Reader r(s);
  std::optional<OptimizerKind> kind;
  if (const auto k = r.take("kind")) {
    kind = parse_optimizer_kind(k->value);
    if (!kind) throw ConfigError("unknown optimizer kind '" + k->value + "'", k->line);
  } else {
    kind = parse_optimizer_kind(name);
    if (!kind) throw ConfigError("[optimizer." + name + "] requires 'kind'", s.line);
  }
  OptimizerConfig c = OptimizerConfig::defaults(*kind);
  r.read("lr", c.lr);
  r.read("momentum", c.momentum);
  r.read("weight_decay", c.weight_decay);
  r.read("power", c.power);
  r.read("ht_alpha", c.ht_alpha);
  r.read("beta2", c.beta2);
  r.read("eps", c.eps);
  r.read("interval", c.interval);
  r.read("ns_steps", c.ns.ns_steps);
  r.read("ns_eps", c.ns.eps);
  r.read("quintic_steps", c.ns.quintic_steps);
  if (const auto l = r.take("lipschitz")) {
    if (l->value == "auto") {
      if (!problem_lipschitz)
        throw ConfigError("lipschitz = auto needs a problem with a known smoothness constant", l->line);
      c.adaptive_lr = AdaptiveLr{*problem_lipschitz};
    } else {
      c.adaptive_lr = AdaptiveLr{Reader::parse<double>("lipschitz", *l)};
    }
  }
  r.finish();
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError("[optimizer." + name + "] " + e.what(), s.line);
  }
  return {name, c};
}

}  // namespace detail

/// Parses the sectioned key-value config:
///
///   [experiment]          steps, batch_size, seed, checkpoints, output_dir,
///                         record_grad_nuclear, esd_limit
///   [problem]             kind plus the keys of that problem
///   [optimizer.NAME]      kind (defaults to NAME), lr, momentum, weight_decay,
///                         power, ht_alpha, beta2, eps, interval, ns_steps,
///                         ns_eps, quintic_steps, lipschitz (number or auto)
///
/// '#' starts a comment. Omitted keys take the library defaults of the
/// corresponding struct; optimizer defaults depend on the kind.
inline ExperimentConfig parse_config(std::string_view text) {
  auto sections = detail::split_sections(text);
  ExperimentConfig cfg;
  detail::Section* experiment = nullptr;
  detail::Section* problem = nullptr;
  std::vector<detail::Section*> optimizers;
  for (auto& s : sections) {
    if (s.name == "experiment")
      experiment = &s;
    else if (s.name == "problem")
      problem = &s;
    else if (s.name.starts_with("optimizer.")) {
      if (!detail::valid_name(s.name.substr(10)))
        throw ConfigError("invalid optimizer name in [" + s.name + "]", s.line);
      optimizers.push_back(&s);
    } else
      throw ConfigError("unknown section [" + s.name + "]", s.line);
  }
  if (experiment == nullptr) throw ConfigError("missing [experiment] section", 0);
  if (problem == nullptr) throw ConfigError("missing [problem] section", 0);
  if (optimizers.empty()) throw ConfigError("at least one [optimizer.NAME] section is required", 0);

  detail::read_experiment(*experiment, cfg);
  cfg.problem = detail::read_problem(*problem, cfg.seed);
  std::optional<double> lipschitz;
  bool need_lipschitz = false;
  for (auto* s : optimizers) {
    auto it = s->entries.find("lipschitz");
    need_lipschitz = need_lipschitz || (it != s->entries.end() && it->second.value == "auto");
  }
  if (need_lipschitz) lipschitz = bench::make_problem(cfg.problem)->lipschitz();
  for (auto* s : optimizers)
    cfg.optimizers.push_back(detail::read_optimizer(*s, s->name.substr(10), lipschitz));
  return cfg;
}

}  // namespace spop::cli
