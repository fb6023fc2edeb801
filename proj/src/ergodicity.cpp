#include "stablab/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stablab/assignment.hpp"
#include "stablab/rng.hpp"

namespace stablab::ergo {

namespace {

constexpr std::size_t kExactAssignmentCap = 4096;

std::vector<model::State> clip_cloud(const sde::Ensemble& e) {
  std::vector<model::State> pts = e.states;
  if (pts.size() > kExactAssignmentCap) pts.resize(kExactAssignmentCap);
  return pts;
}

}  // namespace

double empirical_wasserstein1(const sde::Ensemble& a, const sde::Ensemble& b) {
  if (a.states.size() != b.states.size())
    throw ValidationError("empirical_wasserstein1: ensembles must have equal size");
  if (a.states.empty())
    throw ValidationError("empirical_wasserstein1: ensembles are empty");
  const std::vector<model::State> pa = clip_cloud(a);
  const std::vector<model::State> pb = clip_cloud(b);
  const int n = static_cast<int>(pa.size());
  for (const auto& s : pa)
    if (!finite(s.x) || !finite(s.y))
      throw ValidationError("empirical_wasserstein1: non-finite point in first cloud");
  for (const auto& s : pb)
    if (!finite(s.x) || !finite(s.y))
      throw ValidationError("empirical_wasserstein1: non-finite point in second cloud");

  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const double xi = pa[i].x, yi = pa[i].y;
    double* row = cost.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j)
      row[j] = std::hypot(xi - pb[j].x, yi - pb[j].y);
  }
  return solve_assignment(cost.data(), n) / n;
}

TestFunctionDictionary make_dictionary(const std::function<double(model::State)>& V,
                                       double box_radius, std::uint64_t probes,
                                       std::uint64_t seed) {
  if (!(box_radius > 0.0))
    throw ValidationError("make_dictionary: box_radius must be positive");
  TestFunctionDictionary dict;
  dict.box_radius = box_radius;
  dict.probes = probes;

  auto clamp1 = [](double t) { return std::clamp(t, -1.0, 1.0); };
  dict.entries.push_back({"ramp_x", [clamp1](model::State s) { return clamp1(s.x); }});
  dict.entries.push_back({"ramp_y", [clamp1](model::State s) { return clamp1(s.y); }});
  for (int k = 0; k < 8; ++k) {
    const double sigma = box_radius * std::pow(2.0, k - 7);  // box/128 .. box
    std::ostringstream name;
    name << "bump_" << k;
    dict.entries.push_back({name.str(), [sigma](model::State s) {
                              return std::exp(-(s.x * s.x + s.y * s.y) / (2.0 * sigma * sigma));
                            }});
  }
  dict.entries.push_back({"x_over_1pV", [V](model::State s) { return s.x / (1.0 + V(s)); }});
  dict.entries.push_back({"y_over_1pV", [V](model::State s) { return s.y / (1.0 + V(s)); }});

  const rng::CounterRng gen(seed, 3000);
  for (std::uint64_t i = 0; i < probes; ++i) {
    const auto [u1, u2] = gen.uniform2(i, 0);
    const model::State s{box_radius * (2.0 * u1 - 1.0), box_radius * (2.0 * u2 - 1.0)};
    const double cap = 1.0 + V(s);
    for (const auto& entry : dict.entries) {
      const double val = entry.f(s);
      if (!finite(val) || std::fabs(val) > cap) {
        std::ostringstream os;
        os << "make_dictionary: entry '" << entry.name << "' breaks |f| <= 1 + V at ("
           << s.x << ", " << s.y << ")";
        throw Error(ErrorCode::verification, os.str());
      }
    }
  }
  return dict;
}

double wv_lower_bound(const sde::Ensemble& a, const sde::Ensemble& b,
                      const TestFunctionDictionary& dict) {
  if (a.states.empty() || b.states.empty())
    throw ValidationError("wv_lower_bound: ensembles are empty");
  if (dict.entries.empty()) throw ValidationError("wv_lower_bound: dictionary is empty");
  double best = 0.0;
  for (const auto& entry : dict.entries) {
    double ma = 0.0, mb = 0.0;
    for (const auto& s : a.states) ma += entry.f(s);
    for (const auto& s : b.states) mb += entry.f(s);
    ma /= static_cast<double>(a.states.size());
    mb /= static_cast<double>(b.states.size());
    best = std::max(best, std::fabs(ma - mb));
  }
  return best;
}

ExpFit fit_exponential(const std::vector<double>& times, const std::vector<double>& dists) {
  if (times.size() != dists.size())
    throw ValidationError("fit_exponential: times and distances differ in length");
  if (times.size() < 2)
    throw ValidationError("fit_exponential: need at least two points");
  const std::size_t n = times.size();
  std::vector<double> logs(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(dists[i] > 0.0))
      throw ValidationError("fit_exponential: distances must be positive");
    logs[i] = std::log(dists[i]);
  }
  const double tbar = std::accumulate(times.begin(), times.end(), 0.0) / n;
  const double lbar = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (times[i] - tbar) * (times[i] - tbar);
    sxy += (times[i] - tbar) * (logs[i] - lbar);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit_exponential: times are all equal");
  const double slope = sxy / sxx;
  const double intercept = lbar - slope * tbar;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = intercept + slope * times[i];
    ss_res += (logs[i] - pred) * (logs[i] - pred);
    ss_tot += (logs[i] - lbar) * (logs[i] - lbar);
  }
  ExpFit fit;
  fit.C = std::exp(intercept);
  fit.rate = -slope;
  fit.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

MixingReport mixing_experiment(const model::Params& params, const lyapunov::Constants& k,
                               const MixingConfig& config) {
  if (config.checkpoints.empty())
    throw ValidationError("mixing_experiment: checkpoints are required");
  for (const double t : config.checkpoints)
    if (!(t > 0.0)) throw ValidationError("mixing_experiment: checkpoints must be positive");

  const double t_end = config.checkpoints.back();
  const auto steps = static_cast<std::uint64_t>(std::llround(t_end / config.dt));

  sde::IntegratorConfig ic;
  ic.scheme = sde::Scheme::tamed_euler;
  ic.dt = config.dt;
  ic.steps = steps;
  ic.thin = steps;

  // Independent noise by default; synchronous coupling shares the stream.
  ic.seed = rng::mix64(config.seed, 1);
  const auto ens_a = sde::simulate_ensemble(params, ic, config.s0_a, config.n_paths,
                                            config.checkpoints, config.threads);
  ic.seed = config.coupled ? rng::mix64(config.seed, 1) : rng::mix64(config.seed, 2);
  const auto ens_b = sde::simulate_ensemble(params, ic, config.s0_b, config.n_paths,
                                            config.checkpoints, config.threads);

  // Noise floor: two fresh same-law ensembles at the final checkpoint.
  const std::vector<double> final_only{t_end};
  ic.seed = rng::mix64(config.seed, 3);
  const auto floor_a = sde::simulate_ensemble(params, ic, config.s0_a, config.n_paths,
                                              final_only, config.threads);
  ic.seed = rng::mix64(config.seed, 4);
  const auto floor_b = sde::simulate_ensemble(params, ic, config.s0_a, config.n_paths,
                                              final_only, config.threads);

  const auto V = [&params, &k](model::State s) {
    return lyapunov::global_V(params, k, s).value;
  };
  const double box = 10.0 * std::max({std::fabs(config.s0_a.x), std::fabs(config.s0_a.y),
                                      std::fabs(config.s0_b.x), std::fabs(config.s0_b.y), 1.0});
  const TestFunctionDictionary dict =
      make_dictionary(V, box, 1'000'000, rng::mix64(config.seed, 5));

  MixingReport report;
  report.coupled = config.coupled;
  report.noise_floor = empirical_wasserstein1(floor_a[0], floor_b[0]);
  for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
    report.times.push_back(config.checkpoints[c]);
    report.w1.push_back(empirical_wasserstein1(ens_a[c], ens_b[c]));
    report.wv_lb.push_back(wv_lower_bound(ens_a[c], ens_b[c], dict));
  }

  std::vector<double> fit_t, fit_d;
  for (std::size_t c = 0; c < report.times.size(); ++c) {
    if (report.w1[c] > 10.0 * report.noise_floor) {
      fit_t.push_back(report.times[c]);
      fit_d.push_back(report.w1[c]);
    }
  }
  report.usable_checkpoints = fit_t.size();
  if (fit_t.size() < 3) {
    std::ostringstream os;
    os << "mixing_experiment: only " << fit_t.size()
       << " checkpoints above 10x the noise floor (" << report.noise_floor
       << "); no reliable exponential fit";
    throw FitUnavailableError(os.str(), report);
  }
  const ExpFit fit = fit_exponential(fit_t, fit_d);
  report.fitted_C = fit.C;
  report.fitted_rate = fit.rate;
  report.fit_r2 = fit.r2;
  return report;
}

StabilityReport stability_check(const model::Params& params, const StabilityConfig& config) {
  if (config.checkpoints.empty())
    throw ValidationError("stability_check: checkpoints are required");
  const double t_end = config.checkpoints.back();
  const auto steps = static_cast<std::uint64_t>(std::llround(t_end / config.dt));

  sde::IntegratorConfig ic;
  ic.scheme = sde::Scheme::tamed_euler;
  ic.dt = config.dt;
  ic.steps = steps;
  ic.thin = steps;
  ic.seed = rng::mix64(config.seed, 11);

  std::vector<double> all_times = config.checkpoints;
  double calibration_time = 0.0;
  if (config.quantile > 0.0) {
    if (!(config.quantile < 1.0))
      throw ValidationError("stability_check: quantile must lie in (0,1)");
    calibration_time = config.quantile_time;
    if (std::find(all_times.begin(), all_times.end(), calibration_time) == all_times.end())
      throw ValidationError("stability_check: quantile_time must be one of the checkpoints");
  }

  const auto ens = sde::simulate_ensemble(params, ic, config.s0, config.n_paths, all_times,
                                          config.threads);

  double M = config.threshold;
  if (config.quantile > 0.0) {
    std::size_t cal_idx = 0;
    for (std::size_t c = 0; c < all_times.size(); ++c)
      if (all_times[c] == calibration_time) cal_idx = c;
    std::vector<double> radii(ens[cal_idx].states.size());
    for (std::size_t j = 0; j < radii.size(); ++j)
      radii[j] = std::hypot(ens[cal_idx].states[j].x, ens[cal_idx].states[j].y);
    std::sort(radii.begin(), radii.end());
    const auto pos = static_cast<std::size_t>(
        std::min<double>(radii.size() - 1.0, std::ceil(config.quantile * radii.size()) - 1.0));
    M = radii[pos];
  }

  StabilityReport report;
  report.M = M;
  report.calibration_time = calibration_time;
  for (std::size_t c = 0; c < all_times.size(); ++c) {
    std::uint64_t exceed = 0;
    for (const auto& s : ens[c].states)
      if (std::hypot(s.x, s.y) > M) ++exceed;
    report.times.push_back(all_times[c]);
    report.tail.push_back(static_cast<double>(exceed) / ens[c].states.size());
  }
  return report;
}

ReturnTimeStats return_time_stats(const sde::Trajectory& traj, double radius) {
  if (!(radius >= 0.0)) throw ValidationError("return_time_stats: radius must be >= 0");
  ReturnTimeStats out;
  std::vector<double> durations;
  double start = 0.0;
  bool outside = false;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const double r = std::hypot(traj.states[i].x, traj.states[i].y);
    if (r > radius && !outside) {
      outside = true;
      start = traj.times[i];
    } else if (r <= radius && outside) {
      outside = false;
      durations.push_back(traj.times[i] - start);
    }
  }
  if (outside) durations.push_back(traj.times.back() - start);  // censored tail excursion
  out.excursions = durations.size();
  if (durations.empty()) return out;

  out.mean_duration = std::accumulate(durations.begin(), durations.end(), 0.0) /
                      static_cast<double>(durations.size());
  out.max_duration = *std::max_element(durations.begin(), durations.end());

  const int bins = 16;
  const double top = out.max_duration * (1.0 + 1e-12);
  out.bin_edges.resize(bins + 1);
  out.bin_counts.assign(bins, 0);
  for (int b = 0; b <= bins; ++b) out.bin_edges[b] = top * b / bins;
  for (const double d : durations) {
    auto b = static_cast<std::size_t>(d / top * bins);
    if (b >= static_cast<std::size_t>(bins)) b = bins - 1;
    ++out.bin_counts[b];
  }

  // Log-survival slope: least squares of log(1 - ecdf) on sorted durations.
  std::sort(durations.begin(), durations.end());
  std::vector<double> ts, ls;
  const auto n = static_cast<double>(durations.size());
  for (std::size_t i = 0; i + 1 < durations.size(); ++i) {
    const double survival = 1.0 - static_cast<double>(i + 1) / n;
    if (survival > 0.0) {
      ts.push_back(durations[i]);
      ls.push_back(std::log(survival));
    }
  }
  if (ts.size() >= 2) {
    const double tbar = std::accumulate(ts.begin(), ts.end(), 0.0) / ts.size();
    const double lbar = std::accumulate(ls.begin(), ls.end(), 0.0) / ls.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      sxx += (ts[i] - tbar) * (ts[i] - tbar);
      sxy += (ts[i] - tbar) * (ls[i] - lbar);
    }
    if (sxx > 0.0) out.log_survival_slope = sxy / sxx;
  }
  return out;
}

}  // namespace stablab::ergo
