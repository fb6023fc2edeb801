#include "stablab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stablab::lyapunov {

namespace {

// p(s) = 6 s^5 - 15 s^4 + 10 s^3 on [0,1] and its derivatives.
inline void smooth_poly(double s, double& p, double& p1, double& p2) {
  p = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  p1 = 30.0 * s * s * (1.0 - s) * (1.0 - s);
  p2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
}

// Smoothstep on [0,1] with derivatives w.r.t. z.
inline PhiEval smooth01(double z) {
  if (z <= 0.0) return {0.0, 0.0, 0.0};
  if (z >= 1.0) return {1.0, 0.0, 0.0};
  PhiEval e;
  smooth_poly(z, e.value, e.d1, e.d2);
  return e;
}

}  // namespace

PhiEval phi(double t) {
  const double at = std::fabs(t);
  if (at <= 1.0) return {0.0, 0.0, 0.0};
  if (at >= 4.0) return {1.0, 0.0, 0.0};
  const double s = (at - 1.0) / 3.0;
  double p, p1, p2;
  smooth_poly(s, p, p1, p2);
  const double sign = (t < 0.0) ? -1.0 : 1.0;
  return {p, sign * p1 / 3.0, p2 / 9.0};
}

double product_abs(int m, int n, model::State s) {
  const double px = pow_int(std::fabs(s.x), m - 1);
  const double py = pow_int(std::fabs(s.y), n - 1);
  const double p = px * py;
  if (std::isnan(p) && !std::isnan(px) && !std::isnan(py)) {
    // inf * 0: decide in log space.
    const double lg = static_cast<double>(m - 1) * std::log(std::fabs(s.x)) +
                      static_cast<double>(n - 1) * std::log(std::fabs(s.y));
    return std::exp(lg);
  }
  return p;
}

double lambda_fn(const Constants& k, int m, int n, model::State s) {
  const double ratio = product_abs(m, n, s) / k.c1;
  return ratio * ratio;
}

RegionLabel classify_region(const Constants& k, int m, int n, model::State s) {
  const double p = product_abs(m, n, s);
  RegionLabel r;
  r.in_r1 = p >= k.c1;
  r.in_r2 = p <= 2.0 * k.c1 && std::fabs(s.x) >= k.c2;
  r.in_r3 = p <= 2.0 * k.c1 && std::fabs(s.y) >= k.c3;
  r.in_center = !r.in_r1 && !r.in_r2 && !r.in_r3;
  return r;
}

model::Jet v1(model::State s) {
  return {s.x * s.x + s.y * s.y, 2.0 * s.x, 2.0 * s.y, 2.0, 2.0};
}

model::Jet v2(const Constants& k, model::State s) {
  const double damp = 1.0 - k.k2 * s.y * s.y;
  model::Jet j;
  j.value = s.x * s.x * damp;
  j.dx = 2.0 * s.x * damp;
  j.dy = -2.0 * k.k2 * s.x * s.x * s.y;
  j.dxx = 2.0 * damp;
  j.dyy = -2.0 * k.k2 * s.x * s.x;
  return j;
}

model::Jet v3(const Constants& k, model::State s) {
  const double damp = 1.0 - k.k3 * s.x * s.x;
  model::Jet j;
  j.value = s.y * s.y * damp;
  j.dx = -2.0 * k.k3 * s.x * s.y * s.y;
  j.dy = 2.0 * s.y * damp;
  j.dxx = -2.0 * k.k3 * s.y * s.y;
  j.dyy = 2.0 * damp;
  return j;
}

namespace {

// phi(lambda)-blend of v1 against an arbitrary jet. The lambda derivatives
// are assembled from monomials directly (lambda(x,y) = x^{2m-2} y^{2n-2} / c1^2),
// which keeps them exact for negative coordinates and avoids dividing by x
// or y.
model::Jet blend_with_v1(const model::Params& params, const Constants& k, model::State s,
                         const model::Jet& other) {
  const double p = product_abs(params.m, params.n, s);
  if (p >= 2.0 * k.c1) return v1(s);
  if (p <= k.c1) return other;

  const int m = params.m, n = params.n;
  const double inv_c1sq = 1.0 / (k.c1 * k.c1);
  const double lambda = (p / k.c1) * (p / k.c1);
  const PhiEval f = phi(lambda);

  const double dldx = 2.0 * (m - 1) * pow_int(s.x, 2 * m - 3) * pow_int(s.y, 2 * n - 2) * inv_c1sq;
  const double dldy = 2.0 * (n - 1) * pow_int(s.x, 2 * m - 2) * pow_int(s.y, 2 * n - 3) * inv_c1sq;
  const double d2ldx2 =
      2.0 * (m - 1) * (2 * m - 3) * pow_int(s.x, 2 * m - 4) * pow_int(s.y, 2 * n - 2) * inv_c1sq;
  const double d2ldy2 =
      2.0 * (n - 1) * (2 * n - 3) * pow_int(s.x, 2 * m - 2) * pow_int(s.y, 2 * n - 4) * inv_c1sq;

  const model::Jet a = v1(s);
  const double gap = a.value - other.value;
  const double gap_dx = a.dx - other.dx;
  const double gap_dy = a.dy - other.dy;

  model::Jet j;
  j.value = f.value * a.value + (1.0 - f.value) * other.value;
  j.dx = f.d1 * dldx * gap + f.value * a.dx + (1.0 - f.value) * other.dx;
  j.dy = f.d1 * dldy * gap + f.value * a.dy + (1.0 - f.value) * other.dy;
  j.dxx = f.d2 * dldx * dldx * gap + f.d1 * d2ldx2 * gap + 2.0 * f.d1 * dldx * gap_dx +
          f.value * a.dxx + (1.0 - f.value) * other.dxx;
  j.dyy = f.d2 * dldy * dldy * gap + f.d1 * d2ldy2 * gap + 2.0 * f.d1 * dldy * gap_dy +
          f.value * a.dyy + (1.0 - f.value) * other.dyy;
  return j;
}

}  // namespace

model::Jet v_blend(int i, const model::Params& params, const Constants& k, model::State s) {
  if (i != 2 && i != 3)
    throw ValidationError("v_blend: index must be 2 or 3");
  const model::Jet other = (i == 2) ? v2(k, s) : v3(k, s);
  return blend_with_v1(params, k, s, other);
}

model::Jet global_V(const model::Params& params, const Constants& k, model::State s) {
  const int m = params.m, n = params.n;
  if (!(pow_int(k.c2, m - 1) * pow_int(k.c3, n - 1) > 2.0 * k.c1))
    throw ValidationError("global_V: ledger regions R2 and R3 overlap");

  const model::Jet g{s.x * s.x + s.y * s.y, 2.0 * s.x, 2.0 * s.y, 2.0, 2.0};
  const model::Jet jv2 = v2(k, s);
  const model::Jet jv3 = v3(k, s);

  // Weight in |y|/c3 ramping over [0.9 c3, c3].
  const double wy = 0.1 * k.c3;
  const PhiEval B = smooth01((std::fabs(s.y) - 0.9 * k.c3) / wy);
  const double dB = B.d1 * ((s.y < 0.0) ? -1.0 : 1.0) / wy;
  const double d2B = B.d2 / (wy * wy);

  model::Jet inner;
  inner.value = B.value * jv3.value + (1.0 - B.value) * g.value;
  inner.dx = B.value * jv3.dx + (1.0 - B.value) * g.dx;
  inner.dy = dB * (jv3.value - g.value) + B.value * jv3.dy + (1.0 - B.value) * g.dy;
  inner.dxx = B.value * jv3.dxx + (1.0 - B.value) * g.dxx;
  inner.dyy = d2B * (jv3.value - g.value) + 2.0 * dB * (jv3.dy - g.dy) + B.value * jv3.dyy +
              (1.0 - B.value) * g.dyy;

  // Weight in |x|/c2 ramping over [0.9 c2, c2].
  const double wx = 0.1 * k.c2;
  const PhiEval A = smooth01((std::fabs(s.x) - 0.9 * k.c2) / wx);
  const double dA = A.d1 * ((s.x < 0.0) ? -1.0 : 1.0) / wx;
  const double d2A = A.d2 / (wx * wx);

  model::Jet w23;
  w23.value = A.value * jv2.value + (1.0 - A.value) * inner.value;
  w23.dx = dA * (jv2.value - inner.value) + A.value * jv2.dx + (1.0 - A.value) * inner.dx;
  w23.dy = A.value * jv2.dy + (1.0 - A.value) * inner.dy;
  w23.dxx = d2A * (jv2.value - inner.value) + 2.0 * dA * (jv2.dx - inner.dx) +
            A.value * jv2.dxx + (1.0 - A.value) * inner.dxx;
  w23.dyy = A.value * jv2.dyy + (1.0 - A.value) * inner.dyy;

  model::Jet j = blend_with_v1(params, k, s, w23);
  j.value += 1.0;
  return j;
}

double analytic_Lv1(const model::Params& params, model::State s) {
  const model::DriftFields d = model::drift_fields(params, s);
  const double uq = abs_pow_q(d.u, params.q);
  return 2.0 * params.n * s.x * s.x * (d.w - uq) + params.eps_x * params.eps_x +
         2.0 * params.m * s.y * s.y * (-d.w - uq) + params.eps_y * params.eps_y;
}

namespace {

struct PhiBounds {
  double max_d1 = 0.0;
  double max_d2 = 0.0;
};

PhiBounds phi_derivative_bounds(int grid_points) {
  PhiBounds b;
  for (int i = 0; i <= grid_points; ++i) {
    const double t = 1.0 + 3.0 * static_cast<double>(i) / grid_points;
    const PhiEval e = phi(t);
    b.max_d1 = std::max(b.max_d1, std::fabs(e.d1));
    b.max_d2 = std::max(b.max_d2, std::fabs(e.d2));
  }
  return b;
}

}  // namespace

Constants derive_constants(const model::Params& params, const DeriveOptions& options) {
  model::validate(params);
  const int m = params.m, n = params.n;
  const double q = params.q;
  const double s = options.safety;

  Constants k;
  k.a = params.a;
  if (options.rho_override) {
    k.rho = *options.rho_override;
  } else {
    const PhiBounds pb = phi_derivative_bounds(options.rho_grid_points);
    k.rho = s * std::max({1.0, pb.max_d1, pb.max_d2});
  }
  k.b = s * std::max(4.001, 64.0 * k.rho * m * n);

  const double gain = std::pow(4.0, q / (q - 1.0)) + 1.0;
  k.k2 = gain * n / (params.eps_y * params.eps_y);
  k.k3 = gain * m / (params.eps_x * params.eps_x);

  k.C2 = n / (k.b * k.k2 * (m + n));
  k.C3 = m / (k.b * k.k3 * (m + n));

  k.b13 = 80.0 * params.eps_x * params.eps_x * k.rho * m * m * k.k3;
  k.b12 = 80.0 * params.eps_y * params.eps_y * k.rho * n * n * k.k2;

  const double sep = std::pow(k.C2, 0.5 * (n - 1)) * std::pow(k.C3, 0.5 * (m - 1));
  const double bounds[] = {
      std::pow(4.0, 1.0 / (q - 1.0)) / k.a,
      4.0 * std::sqrt(k.b13) / k.a,
      4.0 * std::sqrt(k.b12) / k.a,
      0.5 * std::pow(6.0 / k.k3, 0.5 * (n - 1)) * std::pow(k.C3, 0.5 * (m - 1)),
      0.5 * std::pow(6.0 / k.k2, 0.5 * (m - 1)) * std::pow(k.C2, 0.5 * (n - 1)),
      std::max(0.5 * sep, 0.55 * sep / pow_int(0.9, m + n - 2)),
  };
  k.c1 = s * *std::max_element(std::begin(bounds), std::end(bounds));

  for (int attempt = 0; attempt <= options.max_doublings; ++attempt) {
    k.c2 = std::pow(2.0 * k.c1 * std::pow(k.C2, 0.5 * (1 - n)), 1.0 / (m - 1));
    k.c3 = std::pow(2.0 * k.c1 * std::pow(k.C3, 0.5 * (1 - m)), 1.0 / (n - 1));
    const auto assertions = check_constants(params, k);
    bool ok = true;
    for (const auto& a : assertions) ok = ok && a.pass;
    if (ok) return k;
    k.c1 *= 2.0;
  }
  throw DerivationError(
      "derive_constants: ledger invariants still failing after doubling c1 " +
      std::to_string(options.max_doublings) + " times");
}

std::vector<Assertion> check_constants(const model::Params& params, const Constants& k) {
  const int m = params.m, n = params.n;
  const double q = params.q;
  const double gain = std::pow(4.0, q / (q - 1.0)) + 1.0;
  std::vector<Assertion> out;
  auto add = [&](const char* name, bool pass) { out.push_back({name, pass}); };

  auto rel_eq = [](double lhs, double rhs, double tol) {
    return std::fabs(lhs - rhs) <= tol * std::max(std::fabs(lhs), std::fabs(rhs));
  };

  const bool finite_all = finite(k.a) && finite(k.rho) && finite(k.b) && finite(k.k2) &&
                          finite(k.k3) && finite(k.c1) && finite(k.c2) && finite(k.c3) &&
                          finite(k.C2) && finite(k.C3) && finite(k.b12) && finite(k.b13);
  add("ledger_finite", finite_all && k.c1 > 0 && k.c2 > 0 && k.c3 > 0);

  add("k2_identity", rel_eq(k.k2 * params.eps_y * params.eps_y / n, gain, 1e-12));
  add("k3_identity", rel_eq(k.k3 * params.eps_x * params.eps_x / m, gain, 1e-12));

  const PhiBounds pb = phi_derivative_bounds(4001);
  add("rho_dominates_cutoff", k.rho >= std::max({1.0, pb.max_d1, pb.max_d2}));
  add("b_exceeds_cutoff_margin", k.b > std::max(4.0, 64.0 * k.rho * m * n));

  add("C2_value", rel_eq(k.C2, n / (k.b * k.k2 * (m + n)), 1e-12));
  add("C3_value", rel_eq(k.C3, m / (k.b * k.k3 * (m + n)), 1e-12));
  add("b13_value", rel_eq(k.b13, 80.0 * params.eps_x * params.eps_x * k.rho * m * m * k.k3, 1e-12));
  add("b12_value", rel_eq(k.b12, 80.0 * params.eps_y * params.eps_y * k.rho * n * n * k.k2, 1e-12));

  // c2, c3 invert the caps: (2 c1 / c2^{m-1})^{2/(n-1)} = C2 and mirrored.
  const double cap2 = std::pow(2.0 * k.c1 / pow_int(k.c2, m - 1), 2.0 / (n - 1));
  const double cap3 = std::pow(2.0 * k.c1 / pow_int(k.c3, n - 1), 2.0 / (m - 1));
  add("c2_inverts_cap", rel_eq(cap2, k.C2, 1e-9));
  add("c3_inverts_cap", rel_eq(cap3, k.C3, 1e-9));

  add("c1_noise_floor", k.c1 >= std::pow(4.0, 1.0 / (q - 1.0)) / k.a);
  add("c1_covers_b13", k.a * k.a * k.c1 * k.c1 >= 16.0 * k.b13);
  add("c1_covers_b12", k.a * k.a * k.c1 * k.c1 >= 16.0 * k.b12);
  add("c3_square_floor", k.c3 * k.c3 >= 6.0 / k.k3);
  add("c2_square_floor", k.c2 * k.c2 >= 6.0 / k.k2);
  add("regions_disjoint", pow_int(k.c2, m - 1) * pow_int(k.c3, n - 1) > 2.0 * k.c1);
  add("transition_band_separation",
      pow_int(0.9 * k.c2, m - 1) * pow_int(0.9 * k.c3, n - 1) >= 2.0 * k.c1);
  // Negative branches of v2/v3 must stay inside the cutoff's v1 zone.
  add("patch_safe_v2", pow_int(0.9 * k.c2, m - 1) >= 2.0 * k.c1 * std::pow(k.k2, 0.5 * (n - 1)));
  add("patch_safe_v3", pow_int(0.9 * k.c3, n - 1) >= 2.0 * k.c1 * std::pow(k.k3, 0.5 * (m - 1)));
  return out;
}

Target target_from_name(const std::string& name) {
  if (name == "v1") return Target::v1;
  if (name == "v2") return Target::v2;
  if (name == "v3") return Target::v3;
  if (name == "v12") return Target::v12;
  if (name == "v13") return Target::v13;
  if (name == "V") return Target::V;
  throw ValidationError("unknown verification target '" + name +
                        "' (expected v1, v2, v3, v12, v13 or V)");
}

std::string target_region_name(Target t) {
  switch (t) {
    case Target::v1: return "R1";
    case Target::v2: return "R2";
    case Target::v3: return "R3";
    case Target::v12: return "R1&R2";
    case Target::v13: return "R1&R3";
    case Target::V: return "disk";
  }
  return "?";
}

}  // namespace stablab::lyapunov
