#include "stablab/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <json.hpp>

namespace stablab::serialize {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

// Doubles are emitted as native JSON numbers (the library prints the
// shortest round-trip form, so reruns stay byte-identical); non-finite
// values fall back to signed text because JSON has no literal for them.
void put_raw(ordered_json& doc, const std::string& key, double v) {
  if (std::isfinite(v))
    doc[key] = v;
  else
    doc[key] = format_double(v);
}

void check_known_keys(const ordered_json& obj, std::initializer_list<const char*> keys,
                      const std::string& where) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) known = true;
    if (!known)
      throw ValidationError("unknown field '" + item.key() + "' in " + where + " block");
  }
}

}  // namespace

std::string params_to_json(const model::Params& params) {
  ordered_json doc;
  doc["m"] = params.m;
  doc["n"] = params.n;
  doc["q"] = params.q;
  doc["eps_x"] = params.eps_x;
  doc["eps_y"] = params.eps_y;
  doc["h"] = params.h_name;
  doc["a"] = params.a;
  return doc.dump();
}

model::Params params_from_json(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("model block is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("model block must be a JSON object");
  check_known_keys(doc, {"m", "n", "q", "eps_x", "eps_y", "h", "a"}, "model");
  for (const char* key : {"m", "n", "q", "eps_x", "eps_y"})
    if (!doc.contains(key))
      throw ValidationError(std::string("model block is missing field '") + key + "'");
  if (!doc["m"].is_number_integer() || !doc["n"].is_number_integer())
    throw ValidationError("model exponents m and n must be integers");
  const std::string h_name = doc.value("h", "identity");
  model::Params p = model::make_params(doc["m"].get<int>(), doc["n"].get<int>(),
                                       doc["q"].get<double>(), doc["eps_x"].get<double>(),
                                       doc["eps_y"].get<double>(), h_name);
  if (doc.contains("a")) {
    const double a = doc["a"].get<double>();
    if (std::fabs(a - p.a) > 1e-12 * std::max(1.0, p.a))
      throw ValidationError("model block declares a = " + format_double(a) +
                            " but coupling '" + h_name + "' has floor " + format_double(p.a));
  }
  return p;
}

sde::IntegratorConfig integrator_from_json(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("integrator block is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("integrator block must be a JSON object");
  check_known_keys(doc, {"scheme", "dt", "steps", "seed", "thin"}, "integrator");
  sde::IntegratorConfig c;
  const std::string scheme = doc.value("scheme", "tamed_euler");
  if (scheme == "tamed_euler") c.scheme = sde::Scheme::tamed_euler;
  else if (scheme == "euler") c.scheme = sde::Scheme::euler;
  else throw ValidationError("unknown scheme '" + scheme + "' (tamed_euler or euler)");
  if (doc.contains("dt")) c.dt = doc["dt"].get<double>();
  if (doc.contains("steps")) c.steps = doc["steps"].get<std::uint64_t>();
  if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("thin")) c.thin = doc["thin"].get<std::uint64_t>();
  sde::validate(c);
  return c;
}

std::string ledger_to_json(const model::Params& params, const lyapunov::Constants& k,
                           const std::vector<lyapunov::Assertion>& assertions) {
  ordered_json doc;
  doc["params"] = ordered_json::parse(params_to_json(params));
  ordered_json constants;
  put_raw(constants, "a", k.a);
  put_raw(constants, "rho", k.rho);
  put_raw(constants, "b", k.b);
  put_raw(constants, "k2", k.k2);
  put_raw(constants, "k3", k.k3);
  put_raw(constants, "c1", k.c1);
  put_raw(constants, "c2", k.c2);
  put_raw(constants, "c3", k.c3);
  put_raw(constants, "C2", k.C2);
  put_raw(constants, "C3", k.C3);
  put_raw(constants, "b12", k.b12);
  put_raw(constants, "b13", k.b13);
  doc["constants"] = constants;
  ordered_json cutoff;
  cutoff["kind"] = "quintic_smoothstep";
  cutoff["flat_below"] = 1.0;
  cutoff["flat_above"] = 4.0;
  doc["cutoff"] = cutoff;
  ordered_json asserts = ordered_json::array();
  bool all = true;
  for (const auto& a : assertions) {
    ordered_json item;
    item["name"] = a.name;
    item["pass"] = a.pass;
    asserts.push_back(item);
    all = all && a.pass;
  }
  doc["assertions"] = asserts;
  doc["all_pass"] = all;
  return doc.dump(2) + "\n";
}

std::string report_to_json(const lyapunov::ViolationReport& report) {
  ordered_json doc;
  doc["region"] = report.region;
  doc["count"] = report.count;
  put_raw(doc, "max_violation", report.max_violation);
  put_raw(doc, "argmax_x", report.argmax_x);
  put_raw(doc, "argmax_y", report.argmax_y);
  doc["pass"] = report.pass;
  if (report.C) put_raw(doc, "C", *report.C);
  if (report.C_prefix) put_raw(doc, "C_prefix", *report.C_prefix);
  if (report.C_rel_change) put_raw(doc, "C_rel_change", *report.C_rel_change);
  if (report.a1) put_raw(doc, "a1", *report.a1);
  if (report.a2) put_raw(doc, "a2", *report.a2);
  if (report.v_min) put_raw(doc, "v_min", *report.v_min);
  if (report.rays_diverge) doc["rays_diverge"] = *report.rays_diverge;
  if (report.secondary_max_violation)
    put_raw(doc, "secondary_max_violation", *report.secondary_max_violation);
  return doc.dump(2) + "\n";
}

std::string mixing_report_to_json(const ergo::MixingReport& report, bool fit_available) {
  ordered_json doc;
  ordered_json times = ordered_json::array(), w1 = ordered_json::array(),
               wv = ordered_json::array();
  for (const double t : report.times) times.push_back(t);
  for (const double d : report.w1) w1.push_back(d);
  for (const double d : report.wv_lb) wv.push_back(d);
  doc["times"] = times;
  doc["w1"] = w1;
  doc["wv_lb"] = wv;
  put_raw(doc, "noise_floor", report.noise_floor);
  doc["usable_checkpoints"] = report.usable_checkpoints;
  doc["coupled"] = report.coupled;
  doc["fit_available"] = fit_available;
  if (fit_available) {
    put_raw(doc, "fitted_C", report.fitted_C);
    put_raw(doc, "fitted_rate", report.fitted_rate);
    put_raw(doc, "fit_r2", report.fit_r2);
  }
  return doc.dump(2) + "\n";
}

std::string stability_report_to_json(const ergo::StabilityReport& report, double target_delta) {
  ordered_json doc;
  put_raw(doc, "M", report.M);
  put_raw(doc, "delta", target_delta);
  put_raw(doc, "calibration_time", report.calibration_time);
  ordered_json times = ordered_json::array(), tail = ordered_json::array();
  for (const double t : report.times) times.push_back(t);
  for (const double f : report.tail) tail.push_back(f);
  doc["times"] = times;
  doc["tail"] = tail;
  return doc.dump(2) + "\n";
}

std::string trajectory_to_csv(const sde::Trajectory& traj, std::uint64_t path_id) {
  std::string out = "path_id,t,x,y\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    out += std::to_string(path_id);
    out += ',';
    out += format_double(traj.times[i]);
    out += ',';
    out += format_double(traj.states[i].x);
    out += ',';
    out += format_double(traj.states[i].y);
    out += '\n';
  }
  return out;
}

std::string ensemble_to_csv(const std::vector<sde::Ensemble>& checkpoints) {
  std::string out = "path_id,t,x,y\n";
  for (const auto& e : checkpoints) {
    for (std::size_t j = 0; j < e.states.size(); ++j) {
      out += std::to_string(j);
      out += ',';
      out += format_double(e.t);
      out += ',';
      out += format_double(e.states[j].x);
      out += ',';
      out += format_double(e.states[j].y);
      out += '\n';
    }
  }
  return out;
}

std::string mixing_series_to_csv(const ergo::MixingReport& report) {
  std::string out = "t,w1,wv_lb\n";
  for (std::size_t i = 0; i < report.times.size(); ++i) {
    out += format_double(report.times[i]);
    out += ',';
    out += format_double(report.w1[i]);
    out += ',';
    out += format_double(report.wv_lb[i]);
    out += '\n';
  }
  return out;
}

std::string stability_series_to_csv(const ergo::StabilityReport& report) {
  std::string out = "t,tail\n";
  for (std::size_t i = 0; i < report.times.size(); ++i) {
    out += format_double(report.times[i]);
    out += ',';
    out += format_double(report.tail[i]);
    out += '\n';
  }
  return out;
}

std::uint64_t params_hash(const model::Params& params) {
  const std::string canon = params_to_json(params);
  std::uint64_t h = 1469598103934665603ull;
  for (const char ch : canon) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

template <typename T>
void append_le(std::vector<std::uint8_t>& buf, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

void append_f64(std::vector<std::uint8_t>& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  append_le(buf, bits);
}

}  // namespace

std::vector<std::uint8_t> ensemble_to_binary(const model::Params& params,
                                             const std::vector<sde::Ensemble>& checkpoints) {
  std::vector<std::uint8_t> buf;
  buf.push_back('S');
  buf.push_back('T');
  buf.push_back('B');
  buf.push_back('L');
  append_le<std::uint32_t>(buf, 1);  // format version
  append_le<std::uint64_t>(buf, params_hash(params));
  const std::uint64_t n_paths = checkpoints.empty() ? 0 : checkpoints.front().states.size();
  append_le<std::uint64_t>(buf, n_paths);
  append_le<std::uint64_t>(buf, checkpoints.size());
  for (const auto& e : checkpoints) {
    append_f64(buf, e.t);
    for (const auto& s : e.states) {
      append_f64(buf, s.x);
      append_f64(buf, s.y);
    }
  }
  return buf;
}

}  // namespace stablab::serialize
