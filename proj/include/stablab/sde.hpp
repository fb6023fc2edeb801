#pragma once

#include <cstdint>
#include <vector>

#include "stablab/model.hpp"

namespace stablab::sde {

enum class Scheme { tamed_euler, euler };

struct IntegratorConfig {
  Scheme scheme = Scheme::tamed_euler;
  double dt = 1e-3;
  std::uint64_t steps = 1000;
  std::uint64_t seed = 0;
  std::uint64_t thin = 1;  // record every thin-th step
};

struct Trajectory {
  std::vector<double> times;
  std::vector<model::State> states;
  bool blowup_flag = false;  // plain Euler only: truncated at first non-finite state
};

struct Ensemble {
  double t = 0.0;
  std::vector<model::State> states;
  std::uint64_t n_paths = 0;
  std::uint64_t seed = 0;
};

void validate(const IntegratorConfig& config);

// One tamed Euler step: s' = s + dt f/(1 + dt |f|) + diag(eps) sqrt(dt) xi.
model::State step_tamed(const model::Params& params, model::State s, double dt, double xi1,
                        double xi2);

// Plain (untamed) Euler step; may produce non-finite states.
model::State step_euler(const model::Params& params, model::State s, double dt, double xi1,
                        double xi2);

Trajectory simulate_path(const model::Params& params, const IntegratorConfig& config,
                         model::State s0);

// Independent paths; path j draws its noise from counter (j, step), so the
// result is identical for every thread count. Checkpoints must sit on the
// step grid.
std::vector<Ensemble> simulate_ensemble(const model::Params& params,
                                        const IntegratorConfig& config, model::State s0,
                                        std::uint64_t n_paths,
                                        const std::vector<double>& checkpoints,
                                        int threads = 0);

}  // namespace stablab::sde
