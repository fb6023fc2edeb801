#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "stablab/lyapunov.hpp"
#include "stablab/rng.hpp"

namespace stablab::lyapunov {

namespace {

constexpr std::uint64_t kSamplerStreamBase = 5000;

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

std::uint64_t stream_of(Target t) {
  switch (t) {
    case Target::v1: return kSamplerStreamBase + 1;
    case Target::v2: return kSamplerStreamBase + 2;
    case Target::v3: return kSamplerStreamBase + 3;
    case Target::v12: return kSamplerStreamBase + 12;
    case Target::v13: return kSamplerStreamBase + 13;
    case Target::V: return kSamplerStreamBase + 100;
  }
  return kSamplerStreamBase;
}

inline double log_uniform(double lo, double hi, double u) {
  return lo * std::pow(hi / lo, u);
}

// Solve |y| from the product value and |x|: |y| = (p / |x|^{m-1})^{1/(n-1)}.
inline double solve_y(double p, double ax, int m, int n) {
  return std::exp((std::log(p) - (m - 1) * std::log(ax)) / (n - 1));
}
inline double solve_x(double p, double ay, int m, int n) {
  return std::exp((std::log(p) - (n - 1) * std::log(ay)) / (m - 1));
}

inline double apply_sign(double mag, double u) { return u < 0.5 ? -mag : mag; }

model::State sample_r1(const model::Params& pr, const Constants& k, const rng::CounterRng& gen,
                       std::uint64_t idx) {
  const double u0 = gen.uniform(idx, 0);
  const double u1 = gen.uniform(idx, 1);
  const double u2 = gen.uniform(idx, 2);
  const double u3 = gen.uniform(idx, 3);
  const double u4 = gen.uniform(idx, 4);
  double p;
  if (u0 < 0.2) {
    p = k.c1 * (1.0 + 0.01 * (1e-6 + (1.0 - 1e-6) * u1));  // hugging the c1 edge
  } else {
    p = k.c1 * std::pow(10.0, 0.004 + 3.996 * u1);
  }
  const double xhi = 10.0 * std::max({k.c2, k.c3, 1.0});
  const double ax = log_uniform(1e-3, xhi, u2);
  const double ay = solve_y(p, ax, pr.m, pr.n);
  return {apply_sign(ax, u3), apply_sign(ay, u4)};
}

model::State sample_r2(const model::Params& pr, const Constants& k, const rng::CounterRng& gen,
                       std::uint64_t idx, double x_top) {
  const double u0 = gen.uniform(idx, 0);
  const double u1 = gen.uniform(idx, 1);
  const double u2 = gen.uniform(idx, 2);
  const double u3 = gen.uniform(idx, 3);
  const double u4 = gen.uniform(idx, 4);
  double ax, p;
  if (u0 < 0.05) {
    ax = log_uniform(k.c2, x_top, u1);
    return {apply_sign(ax, u3), 0.0};  // the y = 0 axis belongs to R2
  }
  if (u0 < 0.2) {
    ax = k.c2 * (1.0 + 0.01 * u1);  // hugging the |x| = c2 edge
    p = 2.0 * k.c1 * std::min(u2 * u2 * u2, 0.9999);
  } else if (u0 < 0.35) {
    ax = log_uniform(k.c2, x_top, u1);
    p = 2.0 * k.c1 * (1.0 - 0.01 * (1e-6 + (1.0 - 1e-6) * u2));  // hugging p = 2 c1
  } else {
    ax = log_uniform(k.c2, x_top, u1);
    p = 2.0 * k.c1 * std::min(u2 * u2 * u2, 0.9999);
  }
  const double ay = solve_y(p, ax, pr.m, pr.n);
  return {apply_sign(ax, u3), apply_sign(ay, u4)};
}

model::State sample_r3(const model::Params& pr, const Constants& k, const rng::CounterRng& gen,
                       std::uint64_t idx, double y_top) {
  const double u0 = gen.uniform(idx, 0);
  const double u1 = gen.uniform(idx, 1);
  const double u2 = gen.uniform(idx, 2);
  const double u3 = gen.uniform(idx, 3);
  const double u4 = gen.uniform(idx, 4);
  double ay, p;
  if (u0 < 0.05) {
    ay = log_uniform(k.c3, y_top, u1);
    return {0.0, apply_sign(ay, u3)};
  }
  if (u0 < 0.2) {
    ay = k.c3 * (1.0 + 0.01 * u1);
    p = 2.0 * k.c1 * std::min(u2 * u2 * u2, 0.9999);
  } else if (u0 < 0.35) {
    ay = log_uniform(k.c3, y_top, u1);
    p = 2.0 * k.c1 * (1.0 - 0.01 * (1e-6 + (1.0 - 1e-6) * u2));
  } else {
    ay = log_uniform(k.c3, y_top, u1);
    p = 2.0 * k.c1 * std::min(u2 * u2 * u2, 0.9999);
  }
  const double ax = solve_x(p, ay, pr.m, pr.n);
  return {apply_sign(ax, u4), apply_sign(ay, u3)};
}

// Overlap bands R1&R2 / R1&R3. The first 10^4 indices walk a deterministic
// 50 x 50 x 4-sign grid so the stabilization prefix is structured; the rest
// is boundary-biased random fill.
model::State sample_band(Target target, const model::Params& pr, const Constants& k,
                         const rng::CounterRng& gen, std::uint64_t idx, double along_top) {
  const bool with_x = (target == Target::v12);  // band in |x| (R2 side) or |y| (R3 side)
  const double along_lo = with_x ? k.c2 : k.c3;
  double p, along;
  double su_a, su_b;
  if (idx < 10000) {
    const int ia = static_cast<int>(idx % 50);
    const int ib = static_cast<int>((idx / 50) % 50);
    const int sc = static_cast<int>(idx / 2500);
    // Corner-inclusive grid: the statistic's maximum sits on the region
    // boundary, so the stabilization prefix must already contain it. The
    // 1e-9 nudge keeps the reconstructed product inside the region against
    // log/exp roundoff while staying far closer to the corner than the
    // random fill (whose edge huggers stop 1e-8 away).
    const double fa = (ia == 0) ? 1e-9 : (ia == 49 ? 1.0 - 1e-9 : ia / 49.0);
    p = k.c1 * (1.0 + fa);
    along = along_lo * std::pow(along_top / along_lo, ib / 49.0);
    su_a = (sc & 1) ? 0.0 : 1.0;
    su_b = (sc & 2) ? 0.0 : 1.0;
  } else {
    const double u0 = gen.uniform(idx, 0);
    const double u1 = gen.uniform(idx, 1);
    const double u2 = gen.uniform(idx, 2);
    su_a = gen.uniform(idx, 3);
    su_b = gen.uniform(idx, 4);
    if (u0 < 0.07) {
      p = k.c1 * (1.0 + 0.01 * (1e-6 + (1.0 - 1e-6) * u1));
      along = log_uniform(along_lo, along_top, u2);
    } else if (u0 < 0.14) {
      p = 2.0 * k.c1 * (1.0 - 0.005 * (1e-6 + (1.0 - 1e-6) * u1));
      along = log_uniform(along_lo, along_top, u2);
    } else if (u0 < 0.2) {
      p = k.c1 * (1.001 + 0.998 * u1);
      along = along_lo * (1.0 + 0.01 * u2);
    } else {
      p = k.c1 * (1.001 + 0.998 * u1);
      along = log_uniform(along_lo, along_top, u2);
    }
  }
  if (with_x) {
    const double ay = solve_y(p, along, pr.m, pr.n);
    return {apply_sign(along, su_a), apply_sign(ay, su_b)};
  }
  const double ax = solve_x(p, along, pr.m, pr.n);
  return {apply_sign(ax, su_b), apply_sign(along, su_a)};
}

// Mixture covering the whole disk of radius 10 max(c2,c3): polar fill, the
// center box (used for the a2 estimate), the two strips and the two bands.
model::State sample_disk(const model::Params& pr, const Constants& k, const rng::CounterRng& gen,
                         std::uint64_t idx) {
  const double radius = 10.0 * std::max(k.c2, k.c3);
  const std::uint64_t kind = idx % 5;
  const double u0 = gen.uniform(idx, 0);
  const double u1 = gen.uniform(idx, 1);
  const double u2 = gen.uniform(idx, 2);
  const double u3 = gen.uniform(idx, 3);
  const double u4 = gen.uniform(idx, 4);
  switch (kind) {
    case 0: {
      const double r = radius * std::pow(10.0, 6.0 * (u0 - 1.0));
      const double theta = 2.0 * M_PI * u1;
      return {r * std::cos(theta), r * std::sin(theta)};
    }
    case 1: {  // center box, log-stratified down to 1e-12 of each cap
      if (u0 < 0.01) return {0.0, 0.0};
      if (u0 < 0.05) return {apply_sign(k.c2 * std::pow(10.0, -12.0 * u1), u3), 0.0};
      if (u0 < 0.09) return {0.0, apply_sign(k.c3 * std::pow(10.0, -12.0 * u1), u3)};
      return {apply_sign(k.c2 * std::pow(10.0, -12.0 * u1), u3),
              apply_sign(k.c3 * std::pow(10.0, -12.0 * u2), u4)};
    }
    case 2: {  // R2-style strip out to the disk rim
      const double ax = log_uniform(k.c2, 0.99 * radius, u1);
      if (u0 < 0.05) return {apply_sign(ax, u3), 0.0};
      const double p = 2.0 * k.c1 * std::min(u2 * u2 * u2, 0.9999);
      return {apply_sign(ax, u3), apply_sign(solve_y(p, ax, pr.m, pr.n), u4)};
    }
    case 3: {  // R3-style strip
      const double ay = log_uniform(k.c3, 0.99 * radius, u1);
      if (u0 < 0.05) return {0.0, apply_sign(ay, u3)};
      const double p = 2.0 * k.c1 * std::min(u2 * u2 * u2, 0.9999);
      return {apply_sign(solve_x(p, ay, pr.m, pr.n), u4), apply_sign(ay, u3)};
    }
    default: {  // cutoff bands along both strips
      const double p = k.c1 * (1.001 + 0.998 * u1);
      if ((idx / 5) % 2 == 0) {
        const double ax = log_uniform(k.c2, 0.99 * radius, u2);
        return {apply_sign(ax, u3), apply_sign(solve_y(p, ax, pr.m, pr.n), u4)};
      }
      const double ay = log_uniform(k.c3, 0.99 * radius, u2);
      return {apply_sign(solve_x(p, ay, pr.m, pr.n), u4), apply_sign(ay, u3)};
    }
  }
}

bool in_target_region(Target target, const model::Params& pr, const Constants& k,
                      model::State s) {
  const RegionLabel r = classify_region(k, pr.m, pr.n, s);
  switch (target) {
    case Target::v1: return r.in_r1;
    case Target::v2: return r.in_r2;
    case Target::v3: return r.in_r3;
    case Target::v12: return r.in_r1 && r.in_r2;
    case Target::v13: return r.in_r1 && r.in_r3;
    case Target::V: {
      const double radius = 10.0 * std::max(k.c2, k.c3);
      return std::hypot(s.x, s.y) <= radius * (1.0 + 1e-12);
    }
  }
  return false;
}

struct SampleStat {
  double violation;      // target-specific statistic
  model::State s;
};

struct Best {
  double value = -std::numeric_limits<double>::infinity();
  std::uint64_t idx = std::numeric_limits<std::uint64_t>::max();
  model::State s{0.0, 0.0};
  void offer(double v, std::uint64_t i, model::State st) {
    if (v > value || (v == value && i < idx)) {
      value = v;
      idx = i;
      s = st;
    }
  }
  void merge(const Best& o) {
    if (o.value > value || (o.value == value && o.idx < idx)) *this = o;
  }
};

}  // namespace

model::State sample_region(Target target, const model::Params& params, const Constants& k,
                           std::uint64_t idx, std::uint64_t seed) {
  const rng::CounterRng gen(seed, stream_of(target));
  const double top = 10.0 * std::max({k.c2, k.c3, 1.0});
  model::State s{};
  switch (target) {
    case Target::v1: s = sample_r1(params, k, gen, idx); break;
    case Target::v2: s = sample_r2(params, k, gen, idx, top); break;
    case Target::v3: s = sample_r3(params, k, gen, idx, top); break;
    case Target::v12: s = sample_band(target, params, k, gen, idx, top); break;
    case Target::v13: s = sample_band(target, params, k, gen, idx, top); break;
    case Target::V: s = sample_disk(params, k, gen, idx); break;
  }
  if (!in_target_region(target, params, k, s)) {
    std::ostringstream os;
    os << "sample_region: sampler emitted (" << s.x << ", " << s.y
       << ") outside region " << target_region_name(target) << " at index " << idx;
    throw Error(ErrorCode::internal, os.str());
  }
  return s;
}

namespace {

// The raw statistic whose maximum the report tracks. For v1/v2/v3 it is
// LHS - RHS of the corresponding drift inequality (pass iff <= 0); for the
// blends it is L v + v/2 (its max is the empirical ceiling C); for V it is
// L V + a1 V (compared against a2 afterwards).
double statistic(Target target, const model::Params& pr, const Constants& k, model::State s,
                 double a1, double* secondary) {
  const double ex2 = pr.eps_x * pr.eps_x;
  const double ey2 = pr.eps_y * pr.eps_y;
  switch (target) {
    case Target::v1: {
      const model::Jet j = v1(s);
      const model::DriftFields d = model::drift_fields(pr, s);
      const double uq = abs_pow_q(d.u, pr.q);
      const double lhs = model::generator_apply(pr, j, s);
      return lhs - (-0.5 * j.value - uq * j.value + ex2 + ey2);
    }
    case Target::v2: {
      const model::Jet j = v2(k, s);
      const model::DriftFields d = model::drift_fields(pr, s);
      const double uq = abs_pow_q(d.u, pr.q);
      const double lhs = model::generator_apply(pr, j, s);
      return lhs - (-j.value - 0.5 * s.x * s.x * uq + ex2);
    }
    case Target::v3: {
      const model::Jet j = v3(k, s);
      const model::DriftFields d = model::drift_fields(pr, s);
      const double uq = abs_pow_q(d.u, pr.q);
      const double lhs = model::generator_apply(pr, j, s);
      if (secondary != nullptr && pr.q == 2.0)
        *secondary = lhs - (-j.value - 0.5 * s.y * s.y * (d.u * d.u) + ey2);
      return lhs - (-j.value - 0.5 * s.y * s.y * uq + ey2);
    }
    case Target::v12: {
      const model::Jet j = v_blend(2, pr, k, s);
      return model::generator_apply(pr, j, s) + 0.5 * j.value;
    }
    case Target::v13: {
      const model::Jet j = v_blend(3, pr, k, s);
      return model::generator_apply(pr, j, s) + 0.5 * j.value;
    }
    case Target::V: {
      const model::Jet j = global_V(pr, k, s);
      return model::generator_apply(pr, j, s) + a1 * j.value;
    }
  }
  return 0.0;
}

struct ChunkResult {
  Best best;         // over all indices of the chunk
  Best best_prefix;  // indices < prefix_n (blend stabilization)
  Best best_box;     // center-box samples only (V target)
  double v_min = std::numeric_limits<double>::infinity();
  double secondary_max = -std::numeric_limits<double>::infinity();
};

}  // namespace

ViolationReport verify_drift_condition(const model::Params& params, const Constants& k,
                                       Target target, std::uint64_t samples,
                                       std::uint64_t seed, int threads) {
  if (samples == 0) throw ValidationError("verify_drift_condition: samples must be positive");
  const int nthreads = resolve_threads(threads);
  const bool blend = (target == Target::v12 || target == Target::v13);
  const std::uint64_t prefix_n = std::min<std::uint64_t>(samples, 10000);
  const double a1 = 0.25;

  // The V target estimates a2 from the center box before scanning the disk.
  double a2 = 0.0;
  if (target == Target::V) {
    Best box;
    std::exception_ptr bad;
    std::vector<std::thread> pool;
    std::vector<Best> partial(nthreads);
    std::mutex guard;
    for (int tid = 0; tid < nthreads; ++tid) {
      pool.emplace_back([&, tid]() {
        try {
          Best local;
          for (std::uint64_t i = tid; i * 5 + 1 < samples; i += nthreads) {
            const std::uint64_t idx = i * 5 + 1;  // kind == box
            const model::State s = sample_region(target, params, k, idx, seed);
            double v = statistic(target, params, k, s, a1, nullptr);
            if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
            local.offer(v, idx, s);
          }
          partial[tid] = local;
        } catch (...) {
          std::lock_guard<std::mutex> lock(guard);
          if (!bad) bad = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (bad) std::rethrow_exception(bad);
    for (const auto& p : partial) box.merge(p);
    a2 = 1.1 * std::max(box.value, 1.0 + params.eps_x * params.eps_x +
                                       params.eps_y * params.eps_y);
  }

  std::vector<ChunkResult> results(nthreads);
  std::exception_ptr bad;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (int tid = 0; tid < nthreads; ++tid) {
    pool.emplace_back([&, tid]() {
      try {
        ChunkResult local;
        const std::uint64_t lo = samples * tid / nthreads;
        const std::uint64_t hi = samples * (tid + 1) / nthreads;
        for (std::uint64_t idx = lo; idx < hi; ++idx) {
          const model::State s = sample_region(target, params, k, idx, seed);
          double secondary = -std::numeric_limits<double>::infinity();
          double v = statistic(target, params, k, s, a1,
                               target == Target::v3 ? &secondary : nullptr);
          // NaN must surface as a failure, not vanish in the max-reduce.
          if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
          local.best.offer(v, idx, s);
          if (blend && idx < prefix_n) local.best_prefix.offer(v, idx, s);
          if (target == Target::V) {
            local.v_min = std::min(local.v_min, global_V(params, k, s).value);
            if (idx % 5 == 1) local.best_box.offer(v, idx, s);
          }
          if (target == Target::v3) local.secondary_max = std::max(local.secondary_max, secondary);
        }
        results[tid] = local;
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!bad) bad = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (bad) std::rethrow_exception(bad);

  ChunkResult total;
  for (const auto& r : results) {
    total.best.merge(r.best);
    total.best_prefix.merge(r.best_prefix);
    total.best_box.merge(r.best_box);
    total.v_min = std::min(total.v_min, r.v_min);
    total.secondary_max = std::max(total.secondary_max, r.secondary_max);
  }

  ViolationReport report;
  report.region = target_region_name(target);
  report.count = samples;
  report.argmax_x = total.best.s.x;
  report.argmax_y = total.best.s.y;

  if (target == Target::v1 || target == Target::v2 || target == Target::v3) {
    report.max_violation = total.best.value;
    report.pass = total.best.value <= 0.0 && finite(total.best.value);
    if (target == Target::v3 && params.q == 2.0)
      report.secondary_max_violation = total.secondary_max;
    return report;
  }

  if (blend) {
    const double ceiling = total.best.value;
    const double ceiling_prefix = total.best_prefix.value;
    report.C = ceiling;
    report.C_prefix = ceiling_prefix;
    const double scale = std::max({std::fabs(ceiling), std::fabs(ceiling_prefix), 1e-300});
    const double rel = std::fabs(ceiling - ceiling_prefix) / scale;
    report.C_rel_change = rel;
    report.max_violation = ceiling;
    report.pass = finite(ceiling) && (samples <= prefix_n || rel < 0.01);
    return report;
  }

  // Global V target: L V + a1 V <= a2 over the disk, V >= 1, divergence rays.
  report.a1 = a1;
  report.a2 = a2;
  report.max_violation = total.best.value - a2;
  report.v_min = total.v_min;

  bool rays_ok = true;
  const double radius = 10.0 * std::max(k.c2, k.c3);
  for (int angle = 0; angle < 16 && rays_ok; ++angle) {
    const double theta = 2.0 * M_PI * angle / 16.0;
    double prev = -std::numeric_limits<double>::infinity();
    double v_end = 0.0;
    for (int j = 0; j < 64; ++j) {
      const double r = radius * std::pow(10.0, 6.0 * (j / 63.0 - 1.0));
      const model::State s{r * std::cos(theta), r * std::sin(theta)};
      const double v = global_V(params, k, s).value;
      if (r >= 0.1 * radius) {
        if (v <= prev) rays_ok = false;
        prev = v;
      }
      v_end = v;
    }
    if (v_end < 1.0 + 0.2 * radius * radius) rays_ok = false;
  }
  report.rays_diverge = rays_ok;
  report.pass = report.max_violation <= 0.0 && total.v_min >= 1.0 - 1e-12 && rays_ok;
  return report;
}

}  // namespace stablab::lyapunov
