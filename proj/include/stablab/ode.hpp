#pragma once

#include <vector>

#include "stablab/model.hpp"

namespace stablab::ode {

struct OdeResult {
  std::vector<double> times;
  std::vector<model::State> states;
  bool blowup = false;
  double t_last = 0.0;  // last time the integrator trusts
};

struct OdeOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double magnitude_cap = 1e10;  // |x| or |y| beyond this counts as blown up
  bool pure_hamiltonian = false;
  // When non-empty, solution states are recorded exactly at these times
  // (ascending, within [0, t_end]); otherwise at every accepted step.
  std::vector<double> record_at;
};

// Non-throwing integration of the noise-free drift; stops early with
// blowup=true when the solution escapes or the step size underflows.
OdeResult integrate_drift(const model::Params& params, model::State s0, double t_end,
                          const OdeOptions& options = {});

// High-accuracy reference solution. Throws BlowupError carrying the last
// reliable time when the solution blows up before t_end.
OdeResult ode_reference(const model::Params& params, model::State s0, double t_end,
                        const OdeOptions& options = {});

}  // namespace stablab::ode
