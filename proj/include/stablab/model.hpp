#pragma once

#include <functional>
#include <optional>
#include <string>

#include "stablab/common.hpp"

namespace stablab::model {

struct State {
  double x = 0.0;
  double y = 0.0;
};

// Planar SDE
//   dx = (w - |w|^q) n x dt + eps_x dB1
//   dy = (-w - |w|^q) m y dt + eps_y dB2
// with w(x,y) = h'(x^m y^n) x^{m-1} y^{n-1}. The drift without the |w|^q
// terms is the Hamiltonian vector field of H = h(x^m y^n).
struct Params {
  int m = 2;
  int n = 2;
  double q = 2.0;
  double eps_x = 1.0;
  double eps_y = 1.0;
  // Coupling h. h_prime is required; h itself only for Hamiltonian values.
  std::function<double(double)> h;
  std::function<double(double)> h_prime;
  double a = 1.0;  // lower bound on |h'|, declared by the coupling
  std::string h_name = "identity";
};

struct DriftFields {
  double w = 0.0;
  double u = 0.0;  // |w|
  double fx = 0.0;
  double fy = 0.0;
};

// Built-in couplings: "identity" h(t)=t, "neg-identity" h(t)=-t,
// "sine" h(t)=t+0.5*sin(t). Unknown names are rejected.
Params make_params(int m, int n, double q, double eps_x, double eps_y,
                   const std::string& h_name);

// Throws ValidationError on any violated constraint, including a sampled
// check of |h'| >= a and, when h is present, a finite-difference consistency
// check of h against h_prime.
void validate(const Params& params);

// Full drift at a point. Throws OverflowError naming the first non-finite
// intermediate ("x^m*y^n", "w", "|w|^q", "fx", "fy").
DriftFields drift_fields(const Params& params, State s);

// Same computation without finiteness guards; the SDE integrators use this
// and handle non-finite values via their own truncation policy.
DriftFields drift_fields_raw(const Params& params, State s);

// Hamiltonian part of the drift only: (w n x, -w m y).
DriftFields hamiltonian_drift(const Params& params, State s);

// Function-with-partials bundle accepted by the generator.
struct Jet {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dxx = 0.0;
  double dyy = 0.0;
};

// L f = fx df/dx + fy df/dy + (eps_x^2/2) d2f/dx2 + (eps_y^2/2) d2f/dy2.
double generator_apply(const Params& params, const Jet& f, State s);

// H(x,y) = h(x^m y^n); requires h.
double hamiltonian(const Params& params, State s);

// Deterministic solution of the noise-free Hamiltonian flow, m == n:
//   x_t = x0 exp(E t), y_t = y0 exp(-E t), E = h'(x0^m y0^m) m x0^{m-1} y0^{m-1}.
State deterministic_solution_equal(const Params& params, State s0, double t);

// m != n case:
//   B(t) = 1 - h'(x0^m y0^n)(m-n) x0^{m-1} y0^{n-1} t,
//   x_t = x0 B^{n/(n-m)}, y_t = y0 B^{m/(m-n)}.
// Throws BlowupError (carrying the root of B) once B(t) <= 0.
State deterministic_solution_unequal(const Params& params, State s0, double t);

// Finite blow-up time of the noise-free flow when one exists.
std::optional<double> blowup_time(const Params& params, State s0);

}  // namespace stablab::model
