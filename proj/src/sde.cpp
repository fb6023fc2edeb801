#include "stablab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "stablab/rng.hpp"

namespace stablab::sde {

namespace {

constexpr std::uint64_t kNoiseStream = 17;

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

inline model::State tamed_step_raw(const model::Params& params, model::State s, double dt,
                                   double sq_dt, double xi1, double xi2) {
  const model::DriftFields d = model::drift_fields_raw(params, s);
  const double fnorm = std::sqrt(d.fx * d.fx + d.fy * d.fy);
  const double tame = 1.0 / (1.0 + dt * fnorm);
  return {s.x + dt * d.fx * tame + params.eps_x * sq_dt * xi1,
          s.y + dt * d.fy * tame + params.eps_y * sq_dt * xi2};
}

inline model::State euler_step_raw(const model::Params& params, model::State s, double dt,
                                   double sq_dt, double xi1, double xi2) {
  const model::DriftFields d = model::drift_fields_raw(params, s);
  return {s.x + dt * d.fx + params.eps_x * sq_dt * xi1,
          s.y + dt * d.fy + params.eps_y * sq_dt * xi2};
}

}  // namespace

void validate(const IntegratorConfig& config) {
  if (!(config.dt > 0.0) || !finite(config.dt))
    throw ValidationError("integrator: dt must be positive and finite");
  if (config.steps == 0) throw ValidationError("integrator: steps must be positive");
  if (config.steps > (1ull << 32))
    throw ValidationError("integrator: steps must fit the per-path noise counter (<= 2^32)");
  if (config.thin == 0) throw ValidationError("integrator: thin must be positive");
}

model::State step_tamed(const model::Params& params, model::State s, double dt, double xi1,
                        double xi2) {
  if (!(dt > 0.0) || !finite(dt)) throw ValidationError("step_tamed: dt must be positive");
  if (!finite(xi1) || !finite(xi2))
    throw ValidationError("step_tamed: noise increments must be finite");
  const model::State out = tamed_step_raw(params, s, dt, std::sqrt(dt), xi1, xi2);
  if (!finite(out.x) || !finite(out.y))
    throw OverflowError("step_tamed: drift overflowed despite taming");
  return out;
}

model::State step_euler(const model::Params& params, model::State s, double dt, double xi1,
                        double xi2) {
  if (!(dt > 0.0) || !finite(dt)) throw ValidationError("step_euler: dt must be positive");
  if (!finite(xi1) || !finite(xi2))
    throw ValidationError("step_euler: noise increments must be finite");
  return euler_step_raw(params, s, dt, std::sqrt(dt), xi1, xi2);
}

Trajectory simulate_path(const model::Params& params, const IntegratorConfig& config,
                         model::State s0) {
  validate(config);
  const rng::CounterRng gen(config.seed, kNoiseStream);
  const double sq_dt = std::sqrt(config.dt);
  Trajectory out;
  out.times.reserve(config.steps / config.thin + 2);
  out.states.reserve(config.steps / config.thin + 2);
  out.times.push_back(0.0);
  out.states.push_back(s0);

  model::State s = s0;
  for (std::uint64_t i = 0; i < config.steps; ++i) {
    const auto [xi1, xi2] = gen.normal2(0, static_cast<std::uint32_t>(i));
    model::State next;
    if (config.scheme == Scheme::tamed_euler) {
      next = tamed_step_raw(params, s, config.dt, sq_dt, xi1, xi2);
      if (!finite(next.x) || !finite(next.y))
        throw OverflowError("simulate_path: tamed step overflowed at step " +
                            std::to_string(i));
    } else {
      next = euler_step_raw(params, s, config.dt, sq_dt, xi1, xi2);
      if (!finite(next.x) || !finite(next.y)) {
        out.blowup_flag = true;
        return out;  // truncated before the first non-finite state
      }
    }
    s = next;
    if ((i + 1) % config.thin == 0 || i + 1 == config.steps) {
      out.times.push_back(static_cast<double>(i + 1) * config.dt);
      out.states.push_back(s);
    }
  }
  return out;
}

std::vector<Ensemble> simulate_ensemble(const model::Params& params,
                                        const IntegratorConfig& config, model::State s0,
                                        std::uint64_t n_paths,
                                        const std::vector<double>& checkpoints,
                                        int threads) {
  validate(config);
  if (n_paths == 0) throw ValidationError("simulate_ensemble: n_paths must be positive");
  if (checkpoints.empty())
    throw ValidationError("simulate_ensemble: at least one checkpoint is required");

  // Checkpoints must sit on the step grid.
  std::vector<std::uint64_t> steps_at;
  for (const double t : checkpoints) {
    const double ratio = t / config.dt;
    const double rounded = std::round(ratio);
    if (std::fabs(ratio - rounded) > 1e-9 * std::max(1.0, std::fabs(ratio))) {
      std::ostringstream os;
      os << "simulate_ensemble: checkpoint " << t << " is not a multiple of dt = "
         << config.dt;
      throw ValidationError(os.str());
    }
    const auto step = static_cast<std::uint64_t>(rounded);
    if (step > config.steps)
      throw ValidationError("simulate_ensemble: checkpoint beyond the final step");
    if (!steps_at.empty() && step <= steps_at.back())
      throw ValidationError("simulate_ensemble: checkpoints must be strictly increasing");
    steps_at.push_back(step);
  }

  std::vector<Ensemble> out(steps_at.size());
  for (std::size_t c = 0; c < steps_at.size(); ++c) {
    out[c].t = static_cast<double>(steps_at[c]) * config.dt;
    out[c].states.resize(n_paths);
    out[c].n_paths = n_paths;
    out[c].seed = config.seed;
  }

  const rng::CounterRng gen(config.seed, kNoiseStream);
  const double sq_dt = std::sqrt(config.dt);
  const std::uint64_t last_step = steps_at.back();
  const int nthreads = resolve_threads(threads);

  std::exception_ptr bad;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (int tid = 0; tid < nthreads; ++tid) {
    pool.emplace_back([&, tid]() {
      try {
        const std::uint64_t lo = n_paths * tid / nthreads;
        const std::uint64_t hi = n_paths * (tid + 1) / nthreads;
        for (std::uint64_t j = lo; j < hi; ++j) {
          model::State s = s0;
          std::size_t c = 0;
          if (steps_at[0] == 0) {
            out[0].states[j] = s;
            c = 1;
          }
          for (std::uint64_t i = 0; i < last_step; ++i) {
            const auto [xi1, xi2] = gen.normal2(j, static_cast<std::uint32_t>(i));
            if (config.scheme == Scheme::tamed_euler) {
              s = tamed_step_raw(params, s, config.dt, sq_dt, xi1, xi2);
              if (!finite(s.x) || !finite(s.y))
                throw OverflowError("simulate_ensemble: tamed step overflowed on path " +
                                    std::to_string(j));
            } else {
              s = euler_step_raw(params, s, config.dt, sq_dt, xi1, xi2);
            }
            if (c < steps_at.size() && i + 1 == steps_at[c]) {
              out[c].states[j] = s;
              ++c;
            }
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!bad) bad = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (bad) std::rethrow_exception(bad);
  return out;
}

}  // namespace stablab::sde
