#include "stablab/model.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace stablab::model {

namespace {

std::vector<double> h_check_grid() {
  std::vector<double> grid;
  grid.push_back(0.0);
  for (int k = -24; k <= 24; ++k) {
    const double t = std::pow(10.0, 0.25 * k);  // 1e-6 .. 1e6
    grid.push_back(t);
    grid.push_back(-t);
  }
  for (int k = -40; k <= 40; ++k) grid.push_back(0.25 * k);
  return grid;
}

}  // namespace

Params make_params(int m, int n, double q, double eps_x, double eps_y,
                   const std::string& h_name) {
  Params p;
  p.m = m;
  p.n = n;
  p.q = q;
  p.eps_x = eps_x;
  p.eps_y = eps_y;
  p.h_name = h_name;
  if (h_name == "identity") {
    p.h = [](double t) { return t; };
    p.h_prime = [](double) { return 1.0; };
    p.a = 1.0;
  } else if (h_name == "neg-identity") {
    p.h = [](double t) { return -t; };
    p.h_prime = [](double) { return -1.0; };
    p.a = 1.0;
  } else if (h_name == "sine") {
    p.h = [](double t) { return t + 0.5 * std::sin(t); };
    p.h_prime = [](double t) { return 1.0 + 0.5 * std::cos(t); };
    p.a = 0.5;
  } else {
    throw ValidationError("unknown coupling name '" + h_name +
                          "' (expected identity, neg-identity or sine)");
  }
  validate(p);
  return p;
}

void validate(const Params& params) {
  if (params.m < 2 || params.n < 2)
    throw ValidationError("exponents m and n must be integers >= 2");
  if (!(params.q > 1.0) || !finite(params.q))
    throw ValidationError("drift exponent q must satisfy q > 1");
  if (!(params.eps_x > 0.0) || !(params.eps_y > 0.0) || !finite(params.eps_x) ||
      !finite(params.eps_y))
    throw ValidationError("noise amplitudes eps_x, eps_y must be positive");
  if (!params.h_prime) throw ValidationError("coupling derivative h_prime is required");
  if (!(params.a > 0.0) || !finite(params.a))
    throw ValidationError("coupling floor a must be positive");

  for (const double t : h_check_grid()) {
    const double hp = params.h_prime(t);
    if (!finite(hp))
      throw ValidationError("h_prime is not finite at t=" + std::to_string(t));
    if (std::fabs(hp) < params.a * (1.0 - 1e-12)) {
      std::ostringstream os;
      os << "|h_prime(" << t << ")| = " << std::fabs(hp)
         << " falls below the declared floor a = " << params.a;
      throw ValidationError(os.str());
    }
  }

  if (params.h) {
    // Centered difference of h against h_prime; grid kept at moderate |t| so
    // truncation dominates roundoff.
    for (int k = -12; k <= 12; ++k) {
      const double t = 0.6 * k;
      const double step = 1e-5 * std::max(1.0, std::fabs(t));
      const double fd = (params.h(t + step) - params.h(t - step)) / (2.0 * step);
      const double hp = params.h_prime(t);
      if (std::fabs(fd - hp) > 1e-6 * std::max(1.0, std::fabs(hp)))
        throw ValidationError("h and h_prime disagree near t=" + std::to_string(t));
    }
  }
}

namespace {

DriftFields drift_impl(const Params& p, State s) {
  DriftFields d;
  const double z = pow_int(s.x, p.m) * pow_int(s.y, p.n);
  const double hp = p.h_prime(z);
  d.w = hp * pow_int(s.x, p.m - 1) * pow_int(s.y, p.n - 1);
  d.u = std::fabs(d.w);
  const double uq = abs_pow_q(d.u, p.q);
  d.fx = (d.w - uq) * static_cast<double>(p.n) * s.x;
  d.fy = (-d.w - uq) * static_cast<double>(p.m) * s.y;
  return d;
}

}  // namespace

DriftFields drift_fields_raw(const Params& params, State s) {
  return drift_impl(params, s);
}

DriftFields drift_fields(const Params& params, State s) {
  if (!finite(s.x) || !finite(s.y))
    throw ValidationError("drift_fields: state is not finite");
  const double z = pow_int(s.x, params.m) * pow_int(s.y, params.n);
  if (!finite(z)) throw OverflowError("drift_fields: x^m*y^n overflowed");
  DriftFields d = drift_impl(params, s);
  if (!finite(d.w)) throw OverflowError("drift_fields: w = h'(x^m*y^n)*x^(m-1)*y^(n-1) overflowed");
  if (!finite(abs_pow_q(d.u, params.q)))
    throw OverflowError("drift_fields: |w|^q overflowed");
  if (!finite(d.fx)) throw OverflowError("drift_fields: fx overflowed");
  if (!finite(d.fy)) throw OverflowError("drift_fields: fy overflowed");
  return d;
}

DriftFields hamiltonian_drift(const Params& params, State s) {
  DriftFields d;
  const double z = pow_int(s.x, params.m) * pow_int(s.y, params.n);
  if (!finite(z)) throw OverflowError("hamiltonian_drift: x^m*y^n overflowed");
  const double hp = params.h_prime(z);
  d.w = hp * pow_int(s.x, params.m - 1) * pow_int(s.y, params.n - 1);
  d.u = std::fabs(d.w);
  d.fx = d.w * static_cast<double>(params.n) * s.x;
  d.fy = -d.w * static_cast<double>(params.m) * s.y;
  if (!finite(d.fx) || !finite(d.fy))
    throw OverflowError("hamiltonian_drift: drift overflowed");
  return d;
}

double generator_apply(const Params& params, const Jet& f, State s) {
  if (!finite(f.dx) || !finite(f.dy) || !finite(f.dxx) || !finite(f.dyy))
    throw ValidationError("generator_apply: partial derivatives must be finite");
  const DriftFields d = drift_fields(params, s);
  return d.fx * f.dx + d.fy * f.dy + 0.5 * params.eps_x * params.eps_x * f.dxx +
         0.5 * params.eps_y * params.eps_y * f.dyy;
}

double hamiltonian(const Params& params, State s) {
  if (!params.h)
    throw UnsupportedError("hamiltonian: coupling h is not available, only h_prime");
  const double z = pow_int(s.x, params.m) * pow_int(s.y, params.n);
  if (!finite(z)) throw OverflowError("hamiltonian: x^m*y^n overflowed");
  return params.h(z);
}

State deterministic_solution_equal(const Params& params, State s0, double t) {
  if (params.m != params.n)
    throw WrongRegimeError("deterministic_solution_equal requires m == n");
  const double z0 = pow_int(s0.x, params.m) * pow_int(s0.y, params.n);
  const double rate = params.h_prime(z0) * static_cast<double>(params.m) *
                      pow_int(s0.x, params.m - 1) * pow_int(s0.y, params.n - 1);
  const double growth = std::exp(rate * t);
  return {s0.x * growth, s0.y / growth};
}

State deterministic_solution_unequal(const Params& params, State s0, double t) {
  if (params.m == params.n)
    throw WrongRegimeError("deterministic_solution_unequal requires m != n");
  const double z0 = pow_int(s0.x, params.m) * pow_int(s0.y, params.n);
  const double denom = params.h_prime(z0) * static_cast<double>(params.m - params.n) *
                       pow_int(s0.x, params.m - 1) * pow_int(s0.y, params.n - 1);
  const double bracket = 1.0 - denom * t;
  if (bracket <= 0.0) {
    const double root = 1.0 / denom;
    std::ostringstream os;
    os << "deterministic solution leaves its domain at t* = " << root;
    throw BlowupError(os.str(), root);
  }
  const double px = static_cast<double>(params.n) / static_cast<double>(params.n - params.m);
  const double py = static_cast<double>(params.m) / static_cast<double>(params.m - params.n);
  return {s0.x * std::pow(bracket, px), s0.y * std::pow(bracket, py)};
}

std::optional<double> blowup_time(const Params& params, State s0) {
  if (params.m == params.n)
    throw WrongRegimeError("blowup_time requires m != n (m == n solutions are global)");
  const double z0 = pow_int(s0.x, params.m) * pow_int(s0.y, params.n);
  const double denom = params.h_prime(z0) * static_cast<double>(params.m - params.n) *
                       pow_int(s0.x, params.m - 1) * pow_int(s0.y, params.n - 1);
  if (denom > 0.0 && finite(denom)) return 1.0 / denom;
  return std::nullopt;
}

}  // namespace stablab::model
