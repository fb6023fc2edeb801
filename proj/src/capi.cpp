#include "stablab.h"

#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stablab/ergodicity.hpp"
#include "stablab/lyapunov.hpp"
#include "stablab/model.hpp"
#include "stablab/ode.hpp"
#include "stablab/sde.hpp"
#include "stablab/serialize.hpp"

using ordered_json = nlohmann::ordered_json;

struct stablab_params {
  stablab::model::Params value;
};

struct stablab_ledger {
  stablab::lyapunov::Constants value;
};

struct stablab_buffer {
  std::string bytes;
};

namespace {

thread_local std::string g_last_error;

stablab_status fail(stablab_status code, const char* what) {
  g_last_error = what;
  return code;
}

stablab_status run(const std::function<void()>& body) {
  try {
    body();
    return STABLAB_OK;
  } catch (const stablab::Error& e) {
    g_last_error = e.what();
    return static_cast<stablab_status>(static_cast<int>(e.code()));
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return STABLAB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return STABLAB_ERR_INTERNAL;
  }
}

stablab_buffer* make_buffer(std::string bytes) {
  auto* buf = new stablab_buffer;
  buf->bytes = std::move(bytes);
  return buf;
}

ordered_json parse_object(const char* text, const char* where) {
  if (text == nullptr)
    throw stablab::ValidationError(std::string(where) + ": JSON text is null");
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw stablab::ValidationError(std::string(where) + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object())
    throw stablab::ValidationError(std::string(where) + ": expected a JSON object");
  return doc;
}

stablab::model::State state_from(const ordered_json& arr, const char* name) {
  if (!arr.is_array() || arr.size() != 2)
    throw stablab::ValidationError(std::string(name) + " must be a [x, y] pair");
  return {arr[0].get<double>(), arr[1].get<double>()};
}

void reject_unknown(const ordered_json& doc, std::initializer_list<const char*> keys,
                    const char* where) {
  for (const auto& item : doc.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) known = true;
    if (!known)
      throw stablab::ValidationError(std::string("unknown field '") + item.key() + "' in " +
                                     where + " block");
  }
}

double* ledger_field(stablab::lyapunov::Constants& k, const std::string& key) {
  if (key == "a") return &k.a;
  if (key == "rho") return &k.rho;
  if (key == "b") return &k.b;
  if (key == "k2") return &k.k2;
  if (key == "k3") return &k.k3;
  if (key == "c1") return &k.c1;
  if (key == "c2") return &k.c2;
  if (key == "c3") return &k.c3;
  if (key == "C2") return &k.C2;
  if (key == "C3") return &k.C3;
  if (key == "b12") return &k.b12;
  if (key == "b13") return &k.b13;
  return nullptr;
}

}  // namespace

extern "C" {

const char* stablab_version(void) { return "0.1.0"; }

const char* stablab_last_error(void) { return g_last_error.c_str(); }

const char* stablab_buffer_data(const stablab_buffer* buf) {
  return buf == nullptr ? nullptr : buf->bytes.data();
}

size_t stablab_buffer_size(const stablab_buffer* buf) {
  return buf == nullptr ? 0 : buf->bytes.size();
}

void stablab_buffer_destroy(stablab_buffer* buf) { delete buf; }

stablab_status stablab_params_create(const char* model_json, stablab_params** out) {
  if (out == nullptr) return fail(STABLAB_ERR_VALIDATION, "out pointer is null");
  *out = nullptr;
  return run([&]() {
    if (model_json == nullptr)
      throw stablab::ValidationError("model JSON is null");
    auto* p = new stablab_params{stablab::serialize::params_from_json(model_json)};
    *out = p;
  });
}

stablab_status stablab_params_create_custom(int m, int n, double q, double eps_x,
                                            double eps_y, double a,
                                            double (*h)(double, void*),
                                            double (*h_prime)(double, void*), void* ctx,
                                            stablab_params** out) {
  if (out == nullptr) return fail(STABLAB_ERR_VALIDATION, "out pointer is null");
  *out = nullptr;
  return run([&]() {
    if (h_prime == nullptr) throw stablab::ValidationError("h_prime callback is required");
    stablab::model::Params p;
    p.m = m;
    p.n = n;
    p.q = q;
    p.eps_x = eps_x;
    p.eps_y = eps_y;
    p.a = a;
    p.h_name = "custom";
    p.h_prime = [h_prime, ctx](double t) { return h_prime(t, ctx); };
    if (h != nullptr) p.h = [h, ctx](double t) { return h(t, ctx); };
    stablab::model::validate(p);
    *out = new stablab_params{std::move(p)};
  });
}

void stablab_params_destroy(stablab_params* params) { delete params; }

stablab_status stablab_params_to_json(const stablab_params* params, stablab_buffer** out) {
  if (params == nullptr || out == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *out = nullptr;
  return run([&]() { *out = make_buffer(stablab::serialize::params_to_json(params->value)); });
}

stablab_status stablab_drift_fields(const stablab_params* params, double x, double y,
                                    double out_wufxfy[4]) {
  if (params == nullptr || out_wufxfy == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  return run([&]() {
    const auto d = stablab::model::drift_fields(params->value, {x, y});
    out_wufxfy[0] = d.w;
    out_wufxfy[1] = d.u;
    out_wufxfy[2] = d.fx;
    out_wufxfy[3] = d.fy;
  });
}

stablab_status stablab_hamiltonian(const stablab_params* params, double x, double y,
                                   double* out) {
  if (params == nullptr || out == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  return run([&]() { *out = stablab::model::hamiltonian(params->value, {x, y}); });
}

stablab_status stablab_generator_apply(const stablab_params* params, const double partials[4],
                                       double x, double y, double* out) {
  if (params == nullptr || partials == nullptr || out == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  return run([&]() {
    stablab::model::Jet jet;
    jet.dx = partials[0];
    jet.dy = partials[1];
    jet.dxx = partials[2];
    jet.dyy = partials[3];
    *out = stablab::model::generator_apply(params->value, jet, {x, y});
  });
}

stablab_status stablab_solution_equal(const stablab_params* params, double x0, double y0,
                                      double t, double out_xy[2]) {
  if (params == nullptr || out_xy == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  return run([&]() {
    const auto s = stablab::model::deterministic_solution_equal(params->value, {x0, y0}, t);
    out_xy[0] = s.x;
    out_xy[1] = s.y;
  });
}

stablab_status stablab_solution_unequal(const stablab_params* params, double x0, double y0,
                                        double t, double out_xy[2]) {
  if (params == nullptr || out_xy == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  return run([&]() {
    const auto s = stablab::model::deterministic_solution_unequal(params->value, {x0, y0}, t);
    out_xy[0] = s.x;
    out_xy[1] = s.y;
  });
}

stablab_status stablab_blowup_time(const stablab_params* params, double x0, double y0,
                                   int* has_blowup, double* t_star) {
  if (params == nullptr || has_blowup == nullptr || t_star == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  return run([&]() {
    const auto t = stablab::model::blowup_time(params->value, {x0, y0});
    *has_blowup = t.has_value() ? 1 : 0;
    *t_star = t.value_or(0.0);
  });
}

stablab_status stablab_ode_reference(const stablab_params* params, double x0, double y0,
                                     double t_end, int pure_hamiltonian, int* blew_up,
                                     double* t_last, stablab_buffer** csv) {
  if (params == nullptr || blew_up == nullptr || t_last == nullptr || csv == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *csv = nullptr;
  return run([&]() {
    stablab::ode::OdeOptions opt;
    opt.pure_hamiltonian = pure_hamiltonian != 0;
    const auto res = stablab::ode::integrate_drift(params->value, {x0, y0}, t_end, opt);
    *blew_up = res.blowup ? 1 : 0;
    *t_last = res.t_last;
    stablab::sde::Trajectory traj;
    traj.times = res.times;
    traj.states = res.states;
    *csv = make_buffer(stablab::serialize::trajectory_to_csv(traj));
  });
}

stablab_status stablab_derive_constants(const stablab_params* params, stablab_ledger** out) {
  if (params == nullptr || out == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *out = nullptr;
  return run([&]() {
    *out = new stablab_ledger{stablab::lyapunov::derive_constants(params->value)};
  });
}

void stablab_ledger_destroy(stablab_ledger* ledger) { delete ledger; }

stablab_status stablab_ledger_get(const stablab_ledger* ledger, const char* key, double* out) {
  if (ledger == nullptr || key == nullptr || out == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  auto k = ledger->value;
  double* field = ledger_field(k, key);
  if (field == nullptr) return fail(STABLAB_ERR_VALIDATION, "unknown ledger key");
  *out = *field;
  return STABLAB_OK;
}

stablab_status stablab_ledger_override(stablab_ledger* ledger, const char* key, double value) {
  if (ledger == nullptr || key == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  double* field = ledger_field(ledger->value, key);
  if (field == nullptr) return fail(STABLAB_ERR_VALIDATION, "unknown ledger key");
  *field = value;
  return STABLAB_OK;
}

stablab_status stablab_ledger_to_json(const stablab_params* params,
                                      const stablab_ledger* ledger, stablab_buffer** out) {
  if (params == nullptr || ledger == nullptr || out == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *out = nullptr;
  return run([&]() {
    const auto assertions =
        stablab::lyapunov::check_constants(params->value, ledger->value);
    *out = make_buffer(
        stablab::serialize::ledger_to_json(params->value, ledger->value, assertions));
  });
}

stablab_status stablab_verify_drift(const stablab_params* params, const stablab_ledger* ledger,
                                    const char* target, uint64_t samples, uint64_t seed,
                                    int threads, int* pass, stablab_buffer** report_json) {
  if (params == nullptr || ledger == nullptr || target == nullptr || pass == nullptr ||
      report_json == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *report_json = nullptr;
  *pass = 0;
  return run([&]() {
    const auto t = stablab::lyapunov::target_from_name(target);
    const auto report = stablab::lyapunov::verify_drift_condition(params->value, ledger->value,
                                                                  t, samples, seed, threads);
    *pass = report.pass ? 1 : 0;
    *report_json = make_buffer(stablab::serialize::report_to_json(report));
  });
}

stablab_status stablab_simulate_path(const stablab_params* params, const char* integrator_json,
                                     double x0, double y0, int* blew_up,
                                     stablab_buffer** csv) {
  if (params == nullptr || integrator_json == nullptr || blew_up == nullptr || csv == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *csv = nullptr;
  return run([&]() {
    const auto config = stablab::serialize::integrator_from_json(integrator_json);
    const auto traj = stablab::sde::simulate_path(params->value, config, {x0, y0});
    *blew_up = traj.blowup_flag ? 1 : 0;
    *csv = make_buffer(stablab::serialize::trajectory_to_csv(traj));
  });
}

stablab_status stablab_simulate_ensemble(const stablab_params* params,
                                         const char* integrator_json, double x0, double y0,
                                         uint64_t n_paths, const double* checkpoints,
                                         size_t n_checkpoints, int threads,
                                         stablab_buffer** csv, stablab_buffer** binary) {
  if (params == nullptr || integrator_json == nullptr || checkpoints == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  if (csv == nullptr && binary == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "at least one output buffer is required");
  if (csv != nullptr) *csv = nullptr;
  if (binary != nullptr) *binary = nullptr;
  return run([&]() {
    const auto config = stablab::serialize::integrator_from_json(integrator_json);
    const std::vector<double> cps(checkpoints, checkpoints + n_checkpoints);
    const auto ens = stablab::sde::simulate_ensemble(params->value, config, {x0, y0}, n_paths,
                                                     cps, threads);
    if (csv != nullptr) *csv = make_buffer(stablab::serialize::ensemble_to_csv(ens));
    if (binary != nullptr) {
      const auto bytes = stablab::serialize::ensemble_to_binary(params->value, ens);
      *binary = make_buffer(std::string(bytes.begin(), bytes.end()));
    }
  });
}

stablab_status stablab_mixing(const stablab_params* params, const stablab_ledger* ledger,
                              const char* experiment_json, int threads,
                              stablab_buffer** report_json, stablab_buffer** series_csv) {
  if (params == nullptr || ledger == nullptr || report_json == nullptr ||
      series_csv == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *report_json = nullptr;
  *series_csv = nullptr;
  return run([&]() {
    const auto doc = parse_object(experiment_json, "mixing experiment");
    reject_unknown(doc, {"s0_a", "s0_b", "n_paths", "checkpoints", "dt", "seed", "coupled"},
                   "mixing experiment");
    stablab::ergo::MixingConfig config;
    if (doc.contains("s0_a")) config.s0_a = state_from(doc["s0_a"], "s0_a");
    if (doc.contains("s0_b")) config.s0_b = state_from(doc["s0_b"], "s0_b");
    if (doc.contains("n_paths")) config.n_paths = doc["n_paths"].get<std::uint64_t>();
    if (!doc.contains("checkpoints"))
      throw stablab::ValidationError("mixing experiment: checkpoints are required");
    config.checkpoints = doc["checkpoints"].get<std::vector<double>>();
    if (doc.contains("dt")) config.dt = doc["dt"].get<double>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("coupled")) config.coupled = doc["coupled"].get<bool>();
    config.threads = threads;
    try {
      const auto report =
          stablab::ergo::mixing_experiment(params->value, ledger->value, config);
      *report_json = make_buffer(stablab::serialize::mixing_report_to_json(report, true));
      *series_csv = make_buffer(stablab::serialize::mixing_series_to_csv(report));
    } catch (const stablab::ergo::FitUnavailableError& e) {
      *report_json =
          make_buffer(stablab::serialize::mixing_report_to_json(e.report(), false));
      *series_csv = make_buffer(stablab::serialize::mixing_series_to_csv(e.report()));
      throw;
    }
  });
}

stablab_status stablab_fit_exponential(const double* times, const double* dists, size_t count,
                                       double out_C_rate_r2[3]) {
  if (times == nullptr || dists == nullptr || out_C_rate_r2 == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  return run([&]() {
    const std::vector<double> t(times, times + count);
    const std::vector<double> d(dists, dists + count);
    const auto fit = stablab::ergo::fit_exponential(t, d);
    out_C_rate_r2[0] = fit.C;
    out_C_rate_r2[1] = fit.rate;
    out_C_rate_r2[2] = fit.r2;
  });
}

stablab_status stablab_stability(const stablab_params* params, const char* experiment_json,
                                 int threads, stablab_buffer** report_json,
                                 stablab_buffer** series_csv) {
  if (params == nullptr || report_json == nullptr || series_csv == nullptr)
    return fail(STABLAB_ERR_VALIDATION, "null argument");
  *report_json = nullptr;
  *series_csv = nullptr;
  return run([&]() {
    const auto doc = parse_object(experiment_json, "stability experiment");
    reject_unknown(doc,
                   {"s0", "n_paths", "checkpoints", "dt", "seed", "threshold", "quantile",
                    "quantile_time", "delta"},
                   "stability experiment");
    stablab::ergo::StabilityConfig config;
    if (doc.contains("s0")) config.s0 = state_from(doc["s0"], "s0");
    if (doc.contains("n_paths")) config.n_paths = doc["n_paths"].get<std::uint64_t>();
    if (!doc.contains("checkpoints"))
      throw stablab::ValidationError("stability experiment: checkpoints are required");
    config.checkpoints = doc["checkpoints"].get<std::vector<double>>();
    if (doc.contains("dt")) config.dt = doc["dt"].get<double>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("threshold")) config.threshold = doc["threshold"].get<double>();
    if (doc.contains("quantile")) config.quantile = doc["quantile"].get<double>();
    if (doc.contains("quantile_time"))
      config.quantile_time = doc["quantile_time"].get<double>();
    if (config.quantile <= 0.0 && !(config.threshold > 0.0))
      throw stablab::ValidationError(
          "stability experiment: provide threshold or quantile/quantile_time");
    config.threads = threads;
    const double delta = doc.value("delta", 0.01);
    const auto report = stablab::ergo::stability_check(params->value, config);
    *report_json =
        make_buffer(stablab::serialize::stability_report_to_json(report, delta));
    *series_csv = make_buffer(stablab::serialize::stability_series_to_csv(report));
  });
}

}  // extern "C"
