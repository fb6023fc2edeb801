#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stablab/ergodicity.hpp"
#include "stablab/lyapunov.hpp"
#include "stablab/model.hpp"
#include "stablab/sde.hpp"

namespace stablab::serialize {

// 17 significant digits: distinct doubles stay distinct and reruns are
// byte-identical.
std::string format_double(double v);

std::string params_to_json(const model::Params& params);

// Parses the "model" configuration block; unknown fields are rejected.
model::Params params_from_json(const std::string& json_text);

sde::IntegratorConfig integrator_from_json(const std::string& json_text);

std::string ledger_to_json(const model::Params& params, const lyapunov::Constants& k,
                           const std::vector<lyapunov::Assertion>& assertions);

std::string report_to_json(const lyapunov::ViolationReport& report);

std::string mixing_report_to_json(const ergo::MixingReport& report, bool fit_available);

std::string stability_report_to_json(const ergo::StabilityReport& report, double target_delta);

// CSV: header path_id,t,x,y.
std::string trajectory_to_csv(const sde::Trajectory& traj, std::uint64_t path_id = 0);
std::string ensemble_to_csv(const std::vector<sde::Ensemble>& checkpoints);

// CSV: header t,w1,wv_lb.
std::string mixing_series_to_csv(const ergo::MixingReport& report);

// CSV: header t,tail.
std::string stability_series_to_csv(const ergo::StabilityReport& report);

// FNV-1a over the canonical parameter JSON; embedded in binary headers.
std::uint64_t params_hash(const model::Params& params);

// Little-endian binary ensemble block:
//   magic 'STBL', format u32, params-hash u64, n_paths u64, n_checkpoints u64,
//   then per checkpoint: t f64 followed by n_paths (x,y) f64 pairs.
std::vector<std::uint8_t> ensemble_to_binary(const model::Params& params,
                                             const std::vector<sde::Ensemble>& checkpoints);

}  // namespace stablab::serialize
