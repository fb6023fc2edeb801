#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stablab/model.hpp"

namespace stablab::lyapunov {

// Derived constant ledger. Every field is reproducible from the model
// parameters; derive_constants fills it and check_constants re-validates it
// independently.
struct Constants {
  double a = 0.0;    // coupling floor carried over from the model
  double rho = 0.0;  // safety factor over the cutoff derivative bounds
  double b = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double C2 = 0.0;  // cap on y^2 over R2
  double C3 = 0.0;  // cap on x^2 over R3
  double b12 = 0.0;
  double b13 = 0.0;
};

struct DeriveOptions {
  double safety = 1.05;
  std::optional<double> rho_override;  // use a fixed rho instead of the grid bound
  int max_doublings = 64;
  int rho_grid_points = 4001;
};

struct Assertion {
  std::string name;
  bool pass = false;
};

Constants derive_constants(const model::Params& params, const DeriveOptions& options = {});

// Re-checks every ledger invariant from scratch; usable on overridden ledgers.
std::vector<Assertion> check_constants(const model::Params& params, const Constants& k);

struct RegionLabel {
  bool in_r1 = false;
  bool in_r2 = false;
  bool in_r3 = false;
  bool in_center = false;
};

// Region decomposition driven by the product |x|^{m-1} |y|^{n-1}:
//   R1: product >= c1
//   R2: product <= 2 c1 and |x| >= c2
//   R3: product <= 2 c1 and |y| >= c3
RegionLabel classify_region(const Constants& k, int m, int n, model::State s);

// |x|^{m-1} |y|^{n-1} with a log-space fallback when the direct product
// hits inf * 0.
double product_abs(int m, int n, model::State s);

// Quintic smoothstep cutoff: 0 on |t|<=1, 1 on |t|>=4, C^2 everywhere.
struct PhiEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};
PhiEval phi(double t);

// Cutoff argument lambda = (product / c1)^2.
double lambda_fn(const Constants& k, int m, int n, model::State s);

model::Jet v1(model::State s);
model::Jet v2(const Constants& k, model::State s);  // x^2 (1 - k2 y^2)
model::Jet v3(const Constants& k, model::State s);  // y^2 (1 - k3 x^2)

// phi(lambda) v1 + (1 - phi(lambda)) v_i, with exact short-circuits to v1
// (lambda >= 4) and v_i (lambda <= 1). i is 2 or 3.
model::Jet v_blend(int i, const model::Params& params, const Constants& k, model::State s);

// Global C^2 Lyapunov candidate: 1 + blend of v1 against a smooth patchwork
// of v2, v3 and x^2+y^2 keyed by |x|/c2 and |y|/c3.
model::Jet global_V(const model::Params& params, const Constants& k, model::State s);

// Closed form of L(x^2+y^2): 2n x^2 (w - u^q) + eps_x^2 + 2m y^2 (-w - u^q) + eps_y^2.
double analytic_Lv1(const model::Params& params, model::State s);

enum class Target { v1, v2, v3, v12, v13, V };

Target target_from_name(const std::string& name);
std::string target_region_name(Target t);

struct ViolationReport {
  std::string region;
  std::uint64_t count = 0;
  double max_violation = 0.0;
  double argmax_x = 0.0;
  double argmax_y = 0.0;
  bool pass = false;
  // Blend targets: empirical drift ceiling and its stabilization diagnostics.
  std::optional<double> C;
  std::optional<double> C_prefix;
  std::optional<double> C_rel_change;
  // Global target: L V <= -a1 V + a2 bookkeeping.
  std::optional<double> a1;
  std::optional<double> a2;
  std::optional<double> v_min;
  std::optional<bool> rays_diverge;
  // q == 2 only: same inequality evaluated with u*u in place of |u|^q.
  std::optional<double> secondary_max_violation;
};

// Deterministic boundary-biased sampler for the named target region;
// a pure function of (idx, seed), so thread decomposition cannot change it.
model::State sample_region(Target target, const model::Params& params, const Constants& k,
                           std::uint64_t idx, std::uint64_t seed);

// Samples the target region and checks the corresponding drift inequality at
// every point. Throws Error(internal) if the sampler emits an out-of-region
// point. threads <= 0 picks hardware concurrency.
ViolationReport verify_drift_condition(const model::Params& params, const Constants& k,
                                       Target target, std::uint64_t samples,
                                       std::uint64_t seed, int threads = 0);

}  // namespace stablab::lyapunov
