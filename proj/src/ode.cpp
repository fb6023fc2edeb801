#include "stablab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stablab::ode {

namespace {

struct Vec2 {
  double x, y;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

// Dormand & Prince RK5(4)7M coefficients (Hairer, Norsett, Wanner,
// "Solving Ordinary Differential Equations I", sec. II.5).
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

inline bool vec_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

}  // namespace

OdeResult integrate_drift(const model::Params& params, model::State s0, double t_end,
                          const OdeOptions& options) {
  if (!(t_end >= 0.0) || !std::isfinite(t_end))
    throw ValidationError("integrate_drift: t_end must be finite and >= 0");
  for (std::size_t i = 0; i + 1 < options.record_at.size(); ++i)
    if (!(options.record_at[i] < options.record_at[i + 1]))
      throw ValidationError("integrate_drift: record_at times must be strictly increasing");
  for (const double t : options.record_at)
    if (t < 0.0 || t > t_end)
      throw ValidationError("integrate_drift: record_at times must lie in [0, t_end]");

  auto rhs = [&](Vec2 v) -> Vec2 {
    const model::DriftFields d =
        options.pure_hamiltonian
            ? model::hamiltonian_drift(params, {v.x, v.y})
            : model::drift_fields_raw(params, {v.x, v.y});
    return {d.fx, d.fy};
  };

  OdeResult out;
  Vec2 state{s0.x, s0.y};
  double t = 0.0;
  std::size_t next_record = 0;

  auto record = [&](double when, Vec2 v) {
    out.times.push_back(when);
    out.states.push_back({v.x, v.y});
  };
  auto record_accepted = [&](double when, Vec2 v) {
    if (options.record_at.empty()) {
      record(when, v);
      return;
    }
    while (next_record < options.record_at.size() &&
           options.record_at[next_record] <= when + 1e-14 * std::max(1.0, when)) {
      record(options.record_at[next_record], v);
      ++next_record;
    }
  };

  record_accepted(0.0, state);
  out.t_last = 0.0;
  if (t_end == 0.0) return out;

  Vec2 k1;
  try {
    k1 = rhs(state);
  } catch (const OverflowError&) {
    out.blowup = true;
    return out;
  }
  double h = std::min(1e-3, t_end);
  const double min_scale = 1e-14;
  long steps = 0;

  while (t < t_end) {
    if (++steps > 20'000'000)
      throw Error(ErrorCode::internal, "integrate_drift: step budget exhausted");
    h = std::min(h, t_end - t);
    // Land exactly on the next requested record time.
    if (!options.record_at.empty() && next_record < options.record_at.size()) {
      const double to_next = options.record_at[next_record] - t;
      if (to_next > 0.0 && h > to_next) h = to_next;
    }

    bool failed = false;
    Vec2 k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, y5{};
    try {
      k2 = rhs(state + (h * a21) * k1);
      k3 = rhs(state + h * (a31 * k1 + a32 * k2));
      k4 = rhs(state + h * (a41 * k1 + a42 * k2 + a43 * k3));
      k5 = rhs(state + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      k6 = rhs(state + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      y5 = state + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = rhs(y5);
    } catch (const OverflowError&) {
      failed = true;
    }
    if (failed || !vec_finite(y5) || !vec_finite(k7)) {
      h *= 0.25;
      if (h < min_scale * std::max(1.0, std::fabs(t))) {
        out.blowup = true;
        out.t_last = t;
        return out;
      }
      continue;
    }

    const Vec2 err_vec =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double sc_x =
        options.abs_tol + options.rel_tol * std::max(std::fabs(state.x), std::fabs(y5.x));
    const double sc_y =
        options.abs_tol + options.rel_tol * std::max(std::fabs(state.y), std::fabs(y5.y));
    const double err = std::sqrt(0.5 * ((err_vec.x / sc_x) * (err_vec.x / sc_x) +
                                        (err_vec.y / sc_y) * (err_vec.y / sc_y)));

    if (err <= 1.0) {
      t += h;
      state = y5;
      k1 = k7;  // first-same-as-last
      record_accepted(t, state);
      out.t_last = t;
      if (std::fabs(state.x) > options.magnitude_cap ||
          std::fabs(state.y) > options.magnitude_cap) {
        out.blowup = true;
        return out;
      }
    }
    const double factor =
        (err <= 1e-30) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
    if (h < min_scale * std::max(1.0, std::fabs(t))) {
      out.blowup = true;
      out.t_last = t;
      return out;
    }
  }
  return out;
}

OdeResult ode_reference(const model::Params& params, model::State s0, double t_end,
                        const OdeOptions& options) {
  OdeResult out = integrate_drift(params, s0, t_end, options);
  if (out.blowup) {
    std::ostringstream os;
    os << "ode_reference: solution blows up near t = " << out.t_last
       << " (before t_end = " << t_end << ")";
    throw BlowupError(os.str(), out.t_last);
  }
  return out;
}

}  // namespace stablab::ode
