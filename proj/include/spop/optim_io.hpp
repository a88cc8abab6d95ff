// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>

#include "json.hpp"
#include "spop/mat_io.hpp"
#include "spop/optim.hpp"

namespace spop {

/// Checkpoint of one parameter's optimizer: kind, step count, every
/// hyperparameter, and the buffers as base64-encoded MAT1.
inline nlohmann::json snapshot_to_json(const OptimizerConfig& cfg, const OptimizerState& state) {
  nlohmann::json hp = {
      {"lr", cfg.lr},
      {"momentum", cfg.momentum},
      {"weight_decay", cfg.weight_decay},
      {"power", cfg.power},
      {"ht_alpha", cfg.ht_alpha},
      {"beta2", cfg.beta2},
      {"eps", cfg.eps},
      {"interval", cfg.interval},
      {"ns_steps", cfg.ns.ns_steps},
      {"ns_eps", cfg.ns.eps},
      {"ns_coefficients", {cfg.ns.a, cfg.ns.b, cfg.ns.c}},
      {"quintic_steps", cfg.ns.quintic_steps},
      {"lipschitz", cfg.adaptive_lr ? nlohmann::json(cfg.adaptive_lr->lipschitz) : nlohmann::json()},
  };
  return {
      {"kind", std::string(to_string(cfg.kind))},
      {"t", state.t},
      {"seed", state.seed},
      {"hyperparameters", std::move(hp)},
      {"momentum", base64_encode(encode_mat1(state.momentum))},
      {"second_moment", state.second_moment
                            ? nlohmann::json(base64_encode(encode_mat1(*state.second_moment)))
                            : nlohmann::json()},
  };
}

inline std::pair<OptimizerConfig, OptimizerState> snapshot_from_json(const nlohmann::json& j) {
  try {
    const auto kind = parse_optimizer_kind(j.at("kind").get<std::string>());
    if (!kind) throw FormatError("unknown optimizer kind in snapshot");
    OptimizerConfig cfg = OptimizerConfig::defaults(*kind);
    const auto& hp = j.at("hyperparameters");
    cfg.lr = hp.at("lr").get<double>();
    cfg.momentum = hp.at("momentum").get<double>();
    cfg.weight_decay = hp.at("weight_decay").get<double>();
    cfg.power = hp.at("power").get<double>();
    cfg.ht_alpha = hp.at("ht_alpha").get<double>();
    cfg.beta2 = hp.at("beta2").get<double>();
    cfg.eps = hp.at("eps").get<double>();
    cfg.interval = hp.at("interval").get<int>();
    cfg.ns.ns_steps = hp.at("ns_steps").get<int>();
    cfg.ns.eps = hp.at("ns_eps").get<double>();
    const auto& coeffs = hp.at("ns_coefficients");
    cfg.ns.a = coeffs.at(0).get<double>();
    cfg.ns.b = coeffs.at(1).get<double>();
    cfg.ns.c = coeffs.at(2).get<double>();
    cfg.ns.quintic_steps = hp.at("quintic_steps").get<int>();
    if (!hp.at("lipschitz").is_null()) cfg.adaptive_lr = AdaptiveLr{hp.at("lipschitz").get<double>()};
    cfg.validate();

    OptimizerState state;
    state.t = j.at("t").get<std::uint64_t>();
    state.seed = j.value("seed", std::uint64_t{0});
    state.momentum = decode_mat1(base64_decode(j.at("momentum").get<std::string>()));
    if (!j.at("second_moment").is_null())
      state.second_moment = decode_mat1(base64_decode(j.at("second_moment").get<std::string>()));
    return {cfg, std::move(state)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed optimizer snapshot: ") + e.what());
  }
}

}  // namespace spop
