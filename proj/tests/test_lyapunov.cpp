#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stablab/lyapunov.hpp>
#include <stablab/rng.hpp>

#include <cmath>
#include <string>
#include <vector>

using namespace stablab;
using namespace stablab::lyapunov;
using stablab::model::Jet;
using stablab::model::Params;
using stablab::model::State;

namespace {

Params config_a() { return model::make_params(2, 3, 2.0, 1.0, 1.0, "identity"); }

bool assertion_passed(const std::vector<Assertion>& list, const std::string& name) {
  for (const auto& a : list)
    if (a.name == name) return a.pass;
  FAIL("assertion '", name, "' missing from the transcript");
  return false;
}

// Small hand ledger for geometric unit tests (not a valid derived ledger).
Constants toy_ledger() {
  Constants k;
  k.a = 1.0;
  k.rho = 1.05;
  k.b = 423.36;
  k.k2 = 51.0;
  k.k3 = 34.0;
  k.c1 = 4.0;
  k.c2 = 1.0;
  k.c3 = 1.0;
  k.C2 = 1.0;
  k.C3 = 1.0;
  k.b12 = 1.0;
  k.b13 = 1.0;
  return k;
}

void check_jet_partials(const std::function<Jet(State)>& f, State s, double scale_x,
                        double scale_y, double tol) {
  const Jet j = f(s);
  const double hx = 1e-5 * scale_x;
  const double hy = 1e-5 * scale_y;
  const double fpx = f({s.x + hx, s.y}).value;
  const double fmx = f({s.x - hx, s.y}).value;
  const double fpy = f({s.x, s.y + hy}).value;
  const double fmy = f({s.x, s.y - hy}).value;
  const double ref = std::max({std::fabs(j.value), std::fabs(j.dx) * scale_x,
                               std::fabs(j.dy) * scale_y, 1e-30});
  CHECK(std::fabs((fpx - fmx) / (2.0 * hx) - j.dx) * scale_x <= tol * ref);
  CHECK(std::fabs((fpy - fmy) / (2.0 * hy) - j.dy) * scale_y <= tol * ref);
  // Wider step for the second differences: the double subtraction loses
  // ~ulp(f)/h^2, so h = 1e-5 scale would drown small curvatures in noise,
  // while h = 1e-3 scale picks up fourth-order truncation through the
  // quartic cutoff argument.
  const double gx = 1e-4 * scale_x;
  const double gy = 1e-4 * scale_y;
  const double gpx = f({s.x + gx, s.y}).value;
  const double gmx = f({s.x - gx, s.y}).value;
  const double gpy = f({s.x, s.y + gy}).value;
  const double gmy = f({s.x, s.y - gy}).value;
  CHECK(std::fabs((gpx - 2.0 * j.value + gmx) / (gx * gx) - j.dxx) * scale_x * scale_x <=
        100.0 * tol * ref);
  CHECK(std::fabs((gpy - 2.0 * j.value + gmy) / (gy * gy) - j.dyy) * scale_y * scale_y <=
        100.0 * tol * ref);
}

}  // namespace

TEST_CASE("cutoff is flat below 1 and above 4 with known midpoint values") {
  for (double t : {0.0, 0.3, 1.0, -0.7, -1.0}) {
    const PhiEval e = phi(t);
    CHECK(e.value == 0.0);
    CHECK(e.d1 == 0.0);
    CHECK(e.d2 == 0.0);
  }
  for (double t : {4.0, 5.0, 100.0, -4.0, -17.0}) {
    const PhiEval e = phi(t);
    CHECK(e.value == 1.0);
    CHECK(e.d1 == 0.0);
    CHECK(e.d2 == 0.0);
  }
  const PhiEval mid = phi(2.5);
  CHECK(mid.value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mid.d1 == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(mid.d2 == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("cutoff is even and C2 across the knots") {
  for (double t : {1.3, 2.0, 3.9}) {
    CHECK(phi(-t).value == phi(t).value);
    CHECK(phi(-t).d1 == -phi(t).d1);
    CHECK(phi(-t).d2 == phi(t).d2);
  }
  // Central differences across t = 1 and t = 4: value, slope and curvature
  // all approach zero from inside, so the piecewise definition is C2.
  for (double knot : {1.0, 4.0}) {
    const double h = 1e-4;
    const PhiEval in = phi(knot + (knot == 1.0 ? h : -h));
    CHECK(std::fabs(in.value - phi(knot).value) < 1e-7);
    CHECK(std::fabs(in.d1) < 1e-7);
    CHECK(std::fabs(in.d2) < 1e-3);
  }
  // Interior finite differences agree with the reported derivatives.
  for (double t = 1.05; t < 4.0; t += 0.11) {
    const double h = 1e-6;
    const PhiEval e = phi(t);
    const double fd1 = (phi(t + h).value - phi(t - h).value) / (2.0 * h);
    const double fd2 = (phi(t + h).d1 - phi(t - h).d1) / (2.0 * h);
    CHECK(fd1 == doctest::Approx(e.d1).epsilon(1e-7));
    CHECK(fd2 == doctest::Approx(e.d2).epsilon(1e-6));
  }
}

TEST_CASE("product and lambda helpers") {
  CHECK(product_abs(2, 3, {2.0, 0.5}) == 0.5);        // |x| * y^2
  CHECK(product_abs(3, 2, {-2.0, -3.0}) == 12.0);     // x^2 * |y|
  CHECK(product_abs(2, 2, {-5.0, 0.0}) == 0.0);
  // inf * 0 overflow/underflow pair resolved in log space.
  const double huge = product_abs(3, 3, {1e200, 1e-170});
  CHECK(huge == doctest::Approx(1e60).epsilon(1e-10));

  Constants k = toy_ledger();
  CHECK(lambda_fn(k, 2, 3, {8.0, 1.0}) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(lambda_fn(k, 2, 3, {2.0, 1.0}) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("region classification against the toy ledger") {
  const Constants k = toy_ledger();  // c1 = 4, c2 = c3 = 1
  const int m = 2, n = 3;

  const RegionLabel r2 = classify_region(k, m, n, {2.0, 0.1});
  CHECK(r2.in_r2);
  CHECK_FALSE(r2.in_r1);
  CHECK_FALSE(r2.in_r3);
  CHECK_FALSE(r2.in_center);

  const RegionLabel center = classify_region(k, m, n, {0.5, 0.5});
  CHECK(center.in_center);

  const RegionLabel r1 = classify_region(k, m, n, {10.0, 1.0});  // p = 10 > 2 c1
  CHECK(r1.in_r1);
  CHECK_FALSE(r1.in_r2);  // p above the strip cap despite |x| >= c2

  const RegionLabel edge = classify_region(k, m, n, {4.0, 1.0});  // p = c1 exactly
  CHECK(edge.in_r1);
  CHECK(edge.in_r2);  // also inside the strip: p <= 2 c1 and |x| >= c2

  const RegionLabel r3 = classify_region(k, m, n, {0.1, 2.0});  // p = 0.4, |y| >= 1
  CHECK(r3.in_r3);
  CHECK_FALSE(r3.in_r2);
}

TEST_CASE("derived ledger for m=2 n=3 q=2 unit noise") {
  const Params p = config_a();
  const Constants k = derive_constants(p);

  CHECK(k.a == 1.0);
  CHECK(k.rho == doctest::Approx(1.05).epsilon(1e-14));
  CHECK(k.k2 == 51.0);   // (4^{q/(q-1)} + 1) n / eps_y^2 = 17 * 3
  CHECK(k.k3 == 34.0);   // 17 * 2
  CHECK(k.b == doctest::Approx(423.36).epsilon(1e-13));
  CHECK(k.b13 == doctest::Approx(11424.0).epsilon(1e-13));
  CHECK(k.b12 == doctest::Approx(38556.0).epsilon(1e-13));
  CHECK(k.C2 == doctest::Approx(2.778889333511182e-05).epsilon(1e-12));
  CHECK(k.C3 == doctest::Approx(2.778889333511182e-05).epsilon(1e-12));
  // c1 is pinned by the b12 coverage bound: 1.05 * 4 sqrt(38556).
  CHECK(k.c1 == doctest::Approx(824.69863586646).epsilon(1e-12));
  CHECK(k.c2 == doctest::Approx(59354550.46167217).epsilon(1e-9));
  CHECK(k.c3 == doctest::Approx(559.3644002102787).epsilon(1e-12));

  const auto assertions = check_constants(p, k);
  CHECK(assertions.size() == 20);
  for (const auto& a : assertions) {
    INFO("assertion ", a.name);
    CHECK(a.pass);
  }
  // The two noise-to-coefficient identities collapse to the same gain.
  CHECK(k.k2 * p.eps_y * p.eps_y / p.n == doctest::Approx(17.0).epsilon(1e-14));
  CHECK(k.k3 * p.eps_x * p.eps_x / p.m == doctest::Approx(17.0).epsilon(1e-14));
}

TEST_CASE("rho override propagates through the chain") {
  DeriveOptions opt;
  opt.rho_override = 1.1;
  const Constants k = derive_constants(config_a(), opt);
  CHECK(k.rho == 1.1);
  CHECK(k.b == doctest::Approx(443.52).epsilon(1e-13));    // 1.05 * 64 * 1.1 * 6
  CHECK(k.b13 == doctest::Approx(11968.0).epsilon(1e-13)); // 80 * 1.1 * 4 * 34
  CHECK(k.b12 == doctest::Approx(40392.0).epsilon(1e-13)); // 80 * 1.1 * 9 * 51
  CHECK(k.k2 == 51.0);  // independent of rho
  CHECK(k.c1 >= 4.0 * std::sqrt(40392.0));
}

TEST_CASE("derivation succeeds across the figure parameter sets") {
  for (int mn : {0, 1, 2}) {
    for (const char* h : {"identity", "neg-identity"}) {
      const int m = (mn == 0) ? 2 : (mn == 1) ? 9 : 5;
      const int n = (mn == 0) ? 9 : (mn == 1) ? 2 : 5;
      const Params p = model::make_params(m, n, 2.0, 10.0, 10.0, h);
      const Constants k = derive_constants(p);
      const auto assertions = check_constants(p, k);
      for (const auto& a : assertions) {
        INFO("m=", m, " n=", n, " h=", h, " assertion ", a.name);
        CHECK(a.pass);
      }
    }
  }
}

TEST_CASE("tampered ledger fails the independent re-check") {
  const Params p = config_a();
  Constants k = derive_constants(p);
  k.c1 = 0.1;
  const auto assertions = check_constants(p, k);
  CHECK_FALSE(assertion_passed(assertions, "c1_noise_floor"));
  CHECK_FALSE(assertion_passed(assertions, "c1_covers_b13"));
  CHECK_FALSE(assertion_passed(assertions, "c1_covers_b12"));
  CHECK(assertion_passed(assertions, "k2_identity"));  // untouched parts still pass
}

TEST_CASE("candidate jets carry exact partial derivatives") {
  const Constants k = toy_ledger();
  const State pts[] = {{0.7, -1.3}, {-2.0, 0.4}, {3.0, 3.0}, {-0.2, -0.1}};
  for (const State& s : pts) {
    check_jet_partials([](State t) { return v1(t); }, s, 1.0, 1.0, 1e-8);
    check_jet_partials([&](State t) { return v2(k, t); }, s, 1.0, 1.0, 1e-8);
    check_jet_partials([&](State t) { return v3(k, t); }, s, 1.0, 1.0, 1e-8);
  }
  CHECK(v2(k, {2.0, 0.1}).value == doctest::Approx(4.0 * (1.0 - 0.51)).epsilon(1e-15));
  CHECK(v3(k, {0.1, 2.0}).value == doctest::Approx(4.0 * (1.0 - 0.34)).epsilon(1e-15));
}

TEST_CASE("analytic L v1 agrees with the generator route") {
  const Params p = config_a();
  CHECK(analytic_Lv1(p, {0.0, 0.0}) == 2.0);
  CHECK(analytic_Lv1(p, {1.0, 1.0}) == -6.0);
  CHECK(analytic_Lv1(p, {10.0, 10.0}) == -999799998.0);

  const Params p2 = model::make_params(3, 2, 2.5, 0.7, 1.3, "sine");
  const rng::CounterRng rnd(11, 0);
  for (int i = 0; i < 300; ++i) {
    const auto [u1, u2] = rnd.uniform2(static_cast<std::uint64_t>(i), 0);
    const State s{(u1 - 0.5) * 8.0, (u2 - 0.5) * 8.0};
    const double via_generator = model::generator_apply(p2, v1(s), s);
    CHECK(analytic_Lv1(p2, s) == doctest::Approx(via_generator).epsilon(1e-12));
  }
}

TEST_CASE("generator applied to v2 matches its closed form") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  const rng::CounterRng rnd(12, 0);
  for (int i = 0; i < 300; ++i) {
    const auto [u1, u2] = rnd.uniform2(static_cast<std::uint64_t>(i), 0);
    const State s{(u1 - 0.5) * 8.0, (u2 - 0.5) * 2.0};
    const model::DriftFields d = model::drift_fields(p, s);
    const double uq = abs_pow_q(d.u, p.q);
    const double x2 = s.x * s.x, y2 = s.y * s.y;
    const double closed = 2.0 * p.n * x2 * (d.w - uq) * (1.0 - k.k2 * y2) +
                          2.0 * p.m * k.k2 * x2 * y2 * (d.w + uq) +
                          p.eps_x * p.eps_x * (1.0 - k.k2 * y2) -
                          p.eps_y * p.eps_y * k.k2 * x2;
    const double via_generator = model::generator_apply(p, v2(k, s), s);
    CHECK(via_generator == doctest::Approx(closed).epsilon(1e-11));
  }
}

TEST_CASE("blend short-circuits to the exact pieces outside the band") {
  const Params p = config_a();
  const Constants k = derive_constants(p);

  // p = |x| y^2 with c1 ~ 824.7: (100, 5) gives p = 2500 < 2 c1? No: 2500 > 1649.
  const State deep_r1{100.0, 5.0};
  const Jet b1 = v_blend(2, p, k, deep_r1);
  const Jet j1 = v1(deep_r1);
  CHECK(b1.value == j1.value);
  CHECK(b1.dx == j1.dx);
  CHECK(b1.dy == j1.dy);
  CHECK(b1.dxx == j1.dxx);
  CHECK(b1.dyy == j1.dyy);

  const State low{100.0, 0.5};  // p = 25 <= c1
  const Jet b2 = v_blend(2, p, k, low);
  const Jet j2 = v2(k, low);
  CHECK(b2.value == j2.value);
  CHECK(b2.dx == j2.dx);
  CHECK(b2.dy == j2.dy);
  CHECK(b2.dxx == j2.dxx);
  CHECK(b2.dyy == j2.dyy);

  const Jet b3 = v_blend(3, p, k, low);
  CHECK(b3.value == v3(k, low).value);

  CHECK_THROWS_AS(v_blend(4, p, k, low), ValidationError);
}

TEST_CASE("blend partial derivatives verified by finite differences") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  // Points inside the transition band c1 < |x| y^2 < 2 c1.
  const double ys[] = {3.3, -3.3, 2.9};
  for (double y : ys) {
    const double x_mid = 1.5 * k.c1 / (y * y);
    for (double sx : {1.0, -1.0}) {
      const State s{sx * x_mid, y};
      // The transition band c1 < product < 2 c1 lies inside R1.
      CHECK(classify_region(k, p.m, p.n, s).in_r1);
      const double lam = lambda_fn(k, p.m, p.n, s);
      CHECK(lam > 1.0);
      CHECK(lam < 4.0);
      check_jet_partials([&](State t) { return v_blend(2, p, k, t); }, s, std::fabs(s.x),
                         std::fabs(y), 1e-6);
      check_jet_partials([&](State t) { return v_blend(3, p, k, t); }, s, std::fabs(s.x),
                         std::fabs(y), 1e-6);
    }
  }
}

TEST_CASE("blend is continuous across both band edges") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  const double y = 2.0;
  for (double edge_p : {k.c1, 2.0 * k.c1}) {
    const double x_edge = edge_p / (y * y);
    const Jet lo = v_blend(2, p, k, {x_edge * (1.0 - 1e-9), y});
    const Jet hi = v_blend(2, p, k, {x_edge * (1.0 + 1e-9), y});
    const double ref = std::fabs(lo.value) + 1.0;
    CHECK(std::fabs(hi.value - lo.value) <= 1e-6 * ref);
    CHECK(std::fabs(hi.dx - lo.dx) * x_edge <= 1e-5 * ref);
    CHECK(std::fabs(hi.dy - lo.dy) * std::fabs(y) <= 1e-5 * ref);
  }
}

TEST_CASE("global candidate reduces to the expected pieces") {
  const Params p = config_a();
  const Constants k = derive_constants(p);

  // Far out along the product direction: plain 1 + x^2 + y^2.
  const State r1pt{1000.0, 2.0};
  CHECK(product_abs(p.m, p.n, r1pt) > 2.0 * k.c1);
  const Jet vr1 = global_V(p, k, r1pt);
  CHECK(vr1.value == 1.0 + r1pt.x * r1pt.x + r1pt.y * r1pt.y);
  CHECK(vr1.dx == 2.0 * r1pt.x);
  CHECK(vr1.dxx == 2.0);

  // Deep in the x-strip: 1 + v2 exactly.
  const State r2pt{1.5 * k.c2, 1e-3};
  const Jet vr2 = global_V(p, k, r2pt);
  const Jet jv2 = v2(k, r2pt);
  CHECK(vr2.value == 1.0 + jv2.value);
  CHECK(vr2.dx == jv2.dx);
  CHECK(vr2.dy == jv2.dy);
  CHECK(vr2.dxx == jv2.dxx);
  CHECK(vr2.dyy == jv2.dyy);

  // Deep in the y-strip: 1 + v3 exactly.
  const State r3pt{1e-4, 1.5 * k.c3};
  CHECK(product_abs(p.m, p.n, r3pt) < k.c1);
  const Jet vr3 = global_V(p, k, r3pt);
  const Jet jv3 = v3(k, r3pt);
  CHECK(vr3.value == 1.0 + jv3.value);
  CHECK(vr3.dy == jv3.dy);

  // Near the origin: 1 + x^2 + y^2.
  const Jet vc = global_V(p, k, {1.0, 1.0});
  CHECK(vc.value == 3.0);
  CHECK(vc.dx == 2.0);

  Constants bad = k;
  bad.c1 = 1e40;  // strips would overlap the band
  CHECK_THROWS_AS(global_V(p, bad, {1.0, 1.0}), ValidationError);
}

TEST_CASE("global candidate stays above one and has verified partials") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  const rng::CounterRng rnd(13, 0);
  const double radius = 10.0 * std::max(k.c2, k.c3);
  for (int i = 0; i < 2000; ++i) {
    const auto [u1, u2] = rnd.uniform2(static_cast<std::uint64_t>(i), 0);
    const auto [u3, u4] = rnd.uniform2(static_cast<std::uint64_t>(i), 1);
    const double r = radius * std::pow(10.0, 8.0 * (u1 - 1.0));
    const double theta = 2.0 * M_PI * u2;
    const State s{r * std::cos(theta), r * std::sin(theta)};
    (void)u3;
    (void)u4;
    const Jet j = global_V(p, k, s);
    CHECK(j.value >= 1.0);
    CHECK(stablab::finite(j.value));
  }
  // Partials in the awkward spots: the A band, the B band, and the cutoff band.
  check_jet_partials([&](State t) { return global_V(p, k, t); }, {0.95 * k.c2, 1e-3},
                     0.95 * k.c2, 1.0, 1e-5);
  check_jet_partials([&](State t) { return global_V(p, k, t); }, {1e-3, 0.95 * k.c3}, 1.0,
                     0.95 * k.c3, 1e-5);
  check_jet_partials([&](State t) { return global_V(p, k, t); }, {1.5 * k.c1 / 4.0, 2.0},
                     1.5 * k.c1 / 4.0, 2.0, 1e-5);
}

TEST_CASE("target names round-trip") {
  CHECK(target_from_name("v1") == Target::v1);
  CHECK(target_from_name("V") == Target::V);
  CHECK(target_region_name(Target::v12) == "R1&R2");
  CHECK(target_region_name(Target::V) == "disk");
  CHECK_THROWS_AS(target_from_name("w"), ValidationError);
}

TEST_CASE("region samplers emit in-region points for every target") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  for (Target t : {Target::v1, Target::v2, Target::v3, Target::v12, Target::v13, Target::V}) {
    for (std::uint64_t idx = 0; idx < 3000; ++idx) {
      // sample_region itself throws if the point leaves the region.
      const State s = sample_region(t, p, k, idx, 42);
      CHECK(stablab::finite(s.x));
      CHECK(stablab::finite(s.y));
    }
    // Determinism: same (idx, seed) gives the same point.
    const State one = sample_region(t, p, k, 777, 42);
    const State two = sample_region(t, p, k, 777, 42);
    CHECK(one.x == two.x);
    CHECK(one.y == two.y);
  }
}

TEST_CASE("drift conditions verified on the three pure regions") {
  const Params p = config_a();
  const Constants k = derive_constants(p);

  const ViolationReport r1 = verify_drift_condition(p, k, Target::v1, 20000, 7);
  CHECK(r1.pass);
  CHECK(r1.region == "R1");
  CHECK(r1.count == 20000);
  CHECK(r1.max_violation <= 0.0);

  const ViolationReport r2 = verify_drift_condition(p, k, Target::v2, 20000, 7);
  CHECK(r2.pass);
  CHECK(r2.max_violation <= 0.0);

  const ViolationReport r3 = verify_drift_condition(p, k, Target::v3, 20000, 7);
  CHECK(r3.pass);
  CHECK(r3.max_violation <= 0.0);
  REQUIRE(r3.secondary_max_violation.has_value());
  CHECK(*r3.secondary_max_violation <= 0.0);
}

TEST_CASE("blended conditions stabilize and verify on the overlap bands") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  for (Target t : {Target::v12, Target::v13}) {
    const ViolationReport r = verify_drift_condition(p, k, t, 30000, 7);
    CHECK(r.pass);
    REQUIRE(r.C.has_value());
    REQUIRE(r.C_prefix.has_value());
    REQUIRE(r.C_rel_change.has_value());
    CHECK(*r.C_rel_change < 0.01);
    CHECK(stablab::finite(*r.C));
  }
}

TEST_CASE("global drift condition holds on the disk") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  const ViolationReport r = verify_drift_condition(p, k, Target::V, 50000, 7);
  CHECK(r.pass);
  CHECK(r.region == "disk");
  REQUIRE(r.a1.has_value());
  CHECK(*r.a1 == 0.25);
  REQUIRE(r.a2.has_value());
  CHECK(*r.a2 >= 1.0 + p.eps_x * p.eps_x + p.eps_y * p.eps_y);
  REQUIRE(r.v_min.has_value());
  CHECK(*r.v_min >= 1.0 - 1e-12);
  REQUIRE(r.rays_diverge.has_value());
  CHECK(*r.rays_diverge);
}

TEST_CASE("verification is reproducible across thread counts") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  const ViolationReport one = verify_drift_condition(p, k, Target::v1, 8000, 3, 1);
  const ViolationReport four = verify_drift_condition(p, k, Target::v1, 8000, 3, 4);
  CHECK(one.max_violation == four.max_violation);
  CHECK(one.argmax_x == four.argmax_x);
  CHECK(one.argmax_y == four.argmax_y);
}

TEST_CASE("sabotaged c1 makes the verification fail honestly") {
  const Params p = config_a();
  Constants k = derive_constants(p);
  k.c1 = 0.1;
  const ViolationReport r1 = verify_drift_condition(p, k, Target::v1, 10000, 7);
  CHECK_FALSE(r1.pass);
  CHECK(r1.max_violation > 0.0);
}

TEST_CASE("verification rejects empty sample budgets") {
  const Params p = config_a();
  const Constants k = derive_constants(p);
  CHECK_THROWS_AS(verify_drift_condition(p, k, Target::v1, 0, 7), ValidationError);
}
