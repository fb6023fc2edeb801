#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stablab/lyapunov.hpp"
#include "stablab/sde.hpp"

namespace stablab::ergo {

// Empirical 1-Wasserstein distance between two equal-size point clouds under
// the Euclidean ground metric, computed by exact assignment. Clouds larger
// than 4096 points are truncated to their first 4096 paths (paths are iid by
// construction, so a fixed prefix is an unbiased subsample).
double empirical_wasserstein1(const sde::Ensemble& a, const sde::Ensemble& b);

struct DictEntry {
  std::string name;
  std::function<double(model::State)> f;
};

struct TestFunctionDictionary {
  std::vector<DictEntry> entries;
  double box_radius = 0.0;
  std::uint64_t probes = 0;
};

// Bounded dictionary for the weighted-distance lower bound: clipped
// coordinate ramps, radial bumps at 8 scales, V-normalized coordinates.
// Certifies |f| <= 1 + V on `probes` random points of the box
// [-box_radius, box_radius]^2; throws Error(verification) on any violation.
TestFunctionDictionary make_dictionary(const std::function<double(model::State)>& V,
                                       double box_radius, std::uint64_t probes,
                                       std::uint64_t seed);

// max over the dictionary of |mean_A f - mean_B f|; a lower bound for the
// weighted distance with weight 1 + V.
double wv_lower_bound(const sde::Ensemble& a, const sde::Ensemble& b,
                      const TestFunctionDictionary& dict);

struct ExpFit {
  double C = 0.0;
  double rate = 0.0;
  double r2 = 0.0;
};

// Least squares of log d against t: d(t) ~ C exp(-rate t). Requires >= 2
// positive distances.
ExpFit fit_exponential(const std::vector<double>& times, const std::vector<double>& dists);

struct MixingReport {
  std::vector<double> times;
  std::vector<double> w1;
  std::vector<double> wv_lb;
  double fitted_C = 0.0;
  double fitted_rate = 0.0;
  double fit_r2 = 0.0;
  double noise_floor = 0.0;
  std::uint64_t usable_checkpoints = 0;
  bool coupled = false;
};

// Raised when fewer than 3 checkpoints sit above the noise floor; carries
// the measured series so callers can still inspect or persist it.
class FitUnavailableError : public Error {
public:
  FitUnavailableError(const std::string& what, MixingReport partial)
      : Error(ErrorCode::fit_unavailable, what), report_(std::move(partial)) {}
  const MixingReport& report() const { return report_; }

private:
  MixingReport report_;
};

struct MixingConfig {
  model::State s0_a{5.0, 5.0};
  model::State s0_b{-5.0, -5.0};
  std::uint64_t n_paths = 4096;
  std::vector<double> checkpoints;  // must be > 0 and on the step grid
  double dt = 1e-3;
  std::uint64_t seed = 0;
  bool coupled = false;  // synchronous coupling: both ensembles share noise
  int threads = 0;
};

// Two ensembles from distinct initial points, distances at every checkpoint,
// exponential fit over checkpoints above 10x the same-law noise floor.
MixingReport mixing_experiment(const model::Params& params, const lyapunov::Constants& k,
                               const MixingConfig& config);

struct StabilityConfig {
  model::State s0{0.0, 0.0};
  std::uint64_t n_paths = 10000;
  std::vector<double> checkpoints;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  double threshold = 0.0;     // radius M; ignored when quantile > 0
  double quantile = 0.0;      // e.g. 0.995: calibrate M at quantile_time
  double quantile_time = 0.0;
  int threads = 0;
};

struct StabilityReport {
  double M = 0.0;
  double calibration_time = 0.0;
  std::vector<double> times;
  std::vector<double> tail;  // fraction of paths with |state| > M
};

StabilityReport stability_check(const model::Params& params, const StabilityConfig& config);

struct ReturnTimeStats {
  std::uint64_t excursions = 0;
  double mean_duration = 0.0;
  double max_duration = 0.0;
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> bin_counts;
  double log_survival_slope = 0.0;  // exponential-tail diagnostic
};

// Durations of excursions of |state| above the given radius along one path.
ReturnTimeStats return_time_stats(const sde::Trajectory& traj, double radius);

}  // namespace stablab::ergo
