#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stablab/model.hpp>
#include <stablab/ode.hpp>
#include <stablab/rng.hpp>

#include <cmath>
#include <optional>

using namespace stablab;
using namespace stablab::model;

namespace {

Params config_a() { return make_params(2, 3, 2.0, 1.0, 1.0, "identity"); }

// Independent recomputation of the drift with std::pow and explicit sign
// bookkeeping; shares no code with drift_fields.
DriftFields drift_by_pow(const Params& p, State s) {
  const double z = std::copysign(std::pow(std::fabs(s.x), p.m), (p.m % 2 == 0) ? 1.0 : s.x) *
                   std::copysign(std::pow(std::fabs(s.y), p.n), (p.n % 2 == 0) ? 1.0 : s.y);
  double w = p.h_prime(z) * std::pow(std::fabs(s.x), p.m - 1) * std::pow(std::fabs(s.y), p.n - 1);
  if ((p.m - 1) % 2 == 1 && s.x < 0.0) w = -w;
  if ((p.n - 1) % 2 == 1 && s.y < 0.0) w = -w;
  DriftFields d;
  d.w = w;
  d.u = std::fabs(w);
  const double uq = std::pow(d.u, p.q);
  d.fx = (w - uq) * p.n * s.x;
  d.fy = (-w - uq) * p.m * s.y;
  return d;
}

}  // namespace

TEST_CASE("drift fields at hand-computed points") {
  const Params p = config_a();

  const DriftFields origin = drift_fields(p, {0.0, 0.0});
  CHECK(origin.w == 0.0);
  CHECK(origin.fx == 0.0);
  CHECK(origin.fy == 0.0);

  const DriftFields unit = drift_fields(p, {1.0, 1.0});
  CHECK(unit.w == 1.0);
  CHECK(unit.u == 1.0);
  CHECK(unit.fx == 0.0);  // (w - u^q) = 0 when w = u = 1
  CHECK(unit.fy == -4.0);

  const DriftFields far = drift_fields(p, {10.0, 10.0});
  CHECK(far.w == 1000.0);
  CHECK(far.fx == -2.997e7);   // (1000 - 1e6) * 3 * 10
  CHECK(far.fy == -2.002e7);   // (-1000 - 1e6) * 2 * 10
}

TEST_CASE("drift fields match an independent power-based recomputation") {
  const Params p = make_params(3, 2, 2.5, 0.7, 1.3, "sine");
  const rng::CounterRng rnd(5, 0);
  for (int i = 0; i < 500; ++i) {
    const auto [u1, u2] = rnd.uniform2(static_cast<std::uint64_t>(i), 0);
    const State s{(u1 - 0.5) * 6.0, (u2 - 0.5) * 6.0};
    const DriftFields got = drift_fields(p, s);
    const DriftFields want = drift_by_pow(p, s);
    CHECK(got.w == doctest::Approx(want.w).epsilon(1e-12));
    CHECK(got.fx == doctest::Approx(want.fx).epsilon(1e-12));
    CHECK(got.fy == doctest::Approx(want.fy).epsilon(1e-12));
  }
}

TEST_CASE("hamiltonian drift conserves x^m y^n pointwise") {
  const Params p = make_params(4, 3, 2.0, 1.0, 1.0, "sine");
  const rng::CounterRng rnd(6, 0);
  for (int i = 0; i < 200; ++i) {
    const auto [u1, u2] = rnd.uniform2(static_cast<std::uint64_t>(i), 0);
    const State s{0.2 + 2.0 * u1, 0.2 + 2.0 * u2};
    const DriftFields d = hamiltonian_drift(p, s);
    // d/dt (x^m y^n) = m x^{m-1} y^n fx + n x^m y^{n-1} fy must vanish.
    const double tx = p.m * pow_int(s.x, p.m - 1) * pow_int(s.y, p.n) * d.fx;
    const double ty = p.n * pow_int(s.x, p.m) * pow_int(s.y, p.n - 1) * d.fy;
    CHECK(std::fabs(tx + ty) <= 1e-12 * (std::fabs(tx) + std::fabs(ty)));
  }
}

TEST_CASE("generator applied to x^2 + y^2 at frozen points") {
  const Params p = config_a();
  const auto Lv1 = [&](State s) {
    Jet f;
    f.value = s.x * s.x + s.y * s.y;
    f.dx = 2.0 * s.x;
    f.dy = 2.0 * s.y;
    f.dxx = 2.0;
    f.dyy = 2.0;
    return generator_apply(p, f, s);
  };
  CHECK(Lv1({0.0, 0.0}) == 2.0);            // pure diffusion
  CHECK(Lv1({1.0, 1.0}) == -6.0);
  CHECK(Lv1({10.0, 10.0}) == -999799998.0);  // damping dominates far out
}

TEST_CASE("parameter validation rejects out-of-range inputs") {
  CHECK_THROWS_AS(make_params(1, 3, 2.0, 1.0, 1.0, "identity"), ValidationError);
  CHECK_THROWS_AS(make_params(2, 1, 2.0, 1.0, 1.0, "identity"), ValidationError);
  CHECK_THROWS_AS(make_params(2, 3, 1.0, 1.0, 1.0, "identity"), ValidationError);
  CHECK_THROWS_AS(make_params(2, 3, 2.0, 0.0, 1.0, "identity"), ValidationError);
  CHECK_THROWS_AS(make_params(2, 3, 2.0, 1.0, -1.0, "identity"), ValidationError);
  CHECK_THROWS_AS(make_params(2, 3, 2.0, 1.0, 1.0, "parabola"), ValidationError);
}

TEST_CASE("validation enforces the declared floor on |h'|") {
  Params p = config_a();
  p.h = {};
  p.h_prime = [](double t) { return 1.0 / (1.0 + t * t); };  // decays to 0
  p.a = 0.5;
  p.h_name = "custom";
  CHECK_THROWS_AS(validate(p), ValidationError);

  p.h_prime = [](double t) { return 2.0 + std::sin(t); };  // floor 1
  p.a = 1.0;
  CHECK_NOTHROW(validate(p));
}

TEST_CASE("validation cross-checks h against h_prime") {
  Params p = config_a();
  p.h = [](double t) { return t * t; };  // derivative 2t, not the declared 1
  CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("non-finite intermediates raise overflow errors") {
  const Params p = config_a();
  CHECK_THROWS_AS(drift_fields(p, {1e300, 1e300}), OverflowError);
  CHECK_THROWS_AS(drift_fields(p, {std::nan(""), 0.0}), ValidationError);
  try {
    drift_fields(p, {1e300, 1e300});
    FAIL("expected OverflowError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::overflow);
  }
}

TEST_CASE("hamiltonian requires the coupling itself") {
  Params p = config_a();
  CHECK(hamiltonian(p, {2.0, 1.0}) == 4.0);  // identity: H = x^2 y^3
  p.h = {};
  CHECK_THROWS_AS(hamiltonian(p, {2.0, 1.0}), UnsupportedError);
}

TEST_CASE("equal-exponent flow is an exact exponential") {
  const Params p = make_params(2, 2, 2.0, 1.0, 1.0, "identity");
  const State s = deterministic_solution_equal(p, {1.0, 1.0}, 1.0);
  CHECK(s.x == doctest::Approx(std::exp(2.0)).epsilon(1e-15));
  CHECK(s.y == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));

  // x y is a first integral of the noise-free Hamiltonian flow when m = n.
  const State s2 = deterministic_solution_equal(p, {1.3, 0.7}, 2.5);
  CHECK(s2.x * s2.y == doctest::Approx(1.3 * 0.7).epsilon(1e-14));

  CHECK_THROWS_AS(deterministic_solution_equal(config_a(), {1.0, 1.0}, 1.0), WrongRegimeError);
}

TEST_CASE("unequal-exponent flow follows the bracket power law") {
  const Params p = make_params(3, 2, 2.0, 1.0, 1.0, "identity");
  const State s = deterministic_solution_unequal(p, {1.0, 1.0}, 0.5);
  CHECK(s.x == doctest::Approx(4.0).epsilon(1e-15));    // (1 - t)^{-2} at t = 1/2
  CHECK(s.y == doctest::Approx(0.125).epsilon(1e-15));  // (1 - t)^{3}

  CHECK_THROWS_AS(deterministic_solution_unequal(make_params(2, 2, 2.0, 1.0, 1.0, "identity"),
                                                 {1.0, 1.0}, 0.5),
                  WrongRegimeError);

  try {
    deterministic_solution_unequal(p, {1.0, 1.0}, 1.0);
    FAIL("expected BlowupError");
  } catch (const BlowupError& e) {
    CHECK(e.t_star() == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("blow-up time matches the bracket root and its sign condition") {
  const Params grow = make_params(3, 2, 2.0, 1.0, 1.0, "identity");
  const auto t1 = blowup_time(grow, {1.0, 1.0});
  REQUIRE(t1.has_value());
  CHECK(*t1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(blowup_time(grow, {2.0, 1.0}));  // denom = (m-n) x0^2 y0 > 0

  const Params shrink = make_params(2, 3, 2.0, 1.0, 1.0, "identity");
  CHECK_FALSE(blowup_time(shrink, {1.0, 1.0}).has_value());
  // Flipping the coupling sign flips which orthant blows up.
  const Params neg = make_params(2, 3, 2.0, 1.0, 1.0, "neg-identity");
  const auto t2 = blowup_time(neg, {1.0, 1.0});
  REQUIRE(t2.has_value());
  CHECK(*t2 == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(blowup_time(make_params(2, 2, 2.0, 1.0, 1.0, "identity"), {1.0, 1.0}),
                  WrongRegimeError);
}

TEST_CASE("ode integration reproduces the closed forms") {
  ode::OdeOptions opt;
  opt.pure_hamiltonian = true;
  opt.rel_tol = 1e-10;
  opt.abs_tol = 1e-13;

  const Params equal = make_params(2, 2, 2.0, 1.0, 1.0, "identity");
  opt.record_at = {1.0};
  auto res = ode::integrate_drift(equal, {1.0, 1.0}, 1.0, opt);
  REQUIRE_FALSE(res.blowup);
  REQUIRE(res.states.size() == 1);
  CHECK(res.states.back().x == doctest::Approx(std::exp(2.0)).epsilon(1e-8));
  CHECK(res.states.back().y == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));

  const Params unequal = make_params(3, 2, 2.0, 1.0, 1.0, "identity");
  opt.record_at = {0.5, 0.9};
  res = ode::integrate_drift(unequal, {1.0, 1.0}, 0.9, opt);
  REQUIRE_FALSE(res.blowup);
  REQUIRE(res.states.size() == 2);
  const State mid = deterministic_solution_unequal(unequal, {1.0, 1.0}, 0.5);
  const State late = deterministic_solution_unequal(unequal, {1.0, 1.0}, 0.9);
  CHECK(res.states[0].x == doctest::Approx(mid.x).epsilon(1e-8));
  CHECK(res.states[0].y == doctest::Approx(mid.y).epsilon(1e-8));
  CHECK(res.states[1].x == doctest::Approx(late.x).epsilon(1e-7));
  CHECK(res.states[1].y == doctest::Approx(late.y).epsilon(1e-7));
}

TEST_CASE("ode integrator detects the finite-time blow-up") {
  const Params p = make_params(3, 2, 2.0, 1.0, 1.0, "identity");
  ode::OdeOptions opt;
  opt.pure_hamiltonian = true;
  const auto res = ode::integrate_drift(p, {1.0, 1.0}, 2.0, opt);
  CHECK(res.blowup);
  CHECK(res.t_last > 0.9);
  CHECK(res.t_last <= 1.0 + 1e-6);

  CHECK_THROWS_AS(ode::ode_reference(p, {1.0, 1.0}, 2.0, opt), BlowupError);
}

TEST_CASE("pure hamiltonian flow conserves the hamiltonian") {
  const Params p = make_params(2, 3, 2.0, 1.0, 1.0, "sine");
  const State s0{1.2, 0.8};
  const double h0 = hamiltonian(p, s0);
  ode::OdeOptions opt;
  opt.pure_hamiltonian = true;
  opt.rel_tol = 1e-10;
  opt.abs_tol = 1e-13;
  opt.record_at = {0.5, 1.0, 1.5, 2.0};
  const auto res = ode::integrate_drift(p, s0, 2.0, opt);
  REQUIRE_FALSE(res.blowup);
  for (const State& s : res.states) {
    CHECK(hamiltonian(p, s) == doctest::Approx(h0).epsilon(1e-8));
  }
}

TEST_CASE("damped flow shrinks the radius where the closed form grows") {
  // Same initial point as the blow-up case, but with the |w|^q damping on:
  // the full drift must keep the solution finite well past t* = 1.
  const Params p = make_params(3, 2, 2.0, 1.0, 1.0, "identity");
  ode::OdeOptions opt;
  opt.record_at = {2.0};
  const auto res = ode::integrate_drift(p, {1.0, 1.0}, 2.0, opt);
  REQUIRE_FALSE(res.blowup);
  const double r = std::hypot(res.states.back().x, res.states.back().y);
  CHECK(r < 10.0);
  CHECK(std::isfinite(r));
}
