// stab_lab: batch driver for the stablab shared library. Talks to the
// library exclusively through the public C interface; everything here is
// client-side plumbing (config assembly, file output, exit codes).
#include <stablab.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 2 validation, 3 derivation, 4 verification,
// 5 I/O or runtime failure, 6 fit unavailable.
struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void die(int code, const std::string& message) { throw CliError{code, message}; }

int exit_code_for(stablab_status status) {
  switch (status) {
    case STABLAB_OK:
      return 0;
    case STABLAB_ERR_VALIDATION:
      return 2;
    case STABLAB_ERR_DERIVATION:
      return 3;
    case STABLAB_ERR_VERIFICATION:
      return 4;
    case STABLAB_ERR_IO:
      return 5;
    case STABLAB_ERR_FIT_UNAVAILABLE:
      return 6;
    case STABLAB_ERR_WRONG_REGIME:
    case STABLAB_ERR_UNSUPPORTED:
      return 2;  // broken preconditions surface as validation failures
    default:
      return 5;  // internal / overflow: runtime failure
  }
}

void check(stablab_status status) {
  if (status != STABLAB_OK) die(exit_code_for(status), stablab_last_error());
}

struct ParamsDeleter {
  void operator()(stablab_params* p) const { stablab_params_destroy(p); }
};
struct LedgerDeleter {
  void operator()(stablab_ledger* l) const { stablab_ledger_destroy(l); }
};
using ParamsPtr = std::unique_ptr<stablab_params, ParamsDeleter>;
using LedgerPtr = std::unique_ptr<stablab_ledger, LedgerDeleter>;

std::string take_string(stablab_buffer* buf) {
  std::string out(stablab_buffer_data(buf), stablab_buffer_size(buf));
  stablab_buffer_destroy(buf);
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char ch : text) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    die(2, what + ": '" + text + "' is not a number");
  return v;
}

// ---- configuration assembly ------------------------------------------------

ordered_json preset_model(const std::string& name) {
  auto fig1 = [](int m, int n, const char* h) {
    ordered_json model;
    model["m"] = m;
    model["n"] = n;
    model["q"] = 2.0;
    model["eps_x"] = 10.0;
    model["eps_y"] = 10.0;
    model["h"] = h;
    return model;
  };
  if (name == "config-a") {
    ordered_json model;
    model["m"] = 2;
    model["n"] = 3;
    model["q"] = 2.0;
    model["eps_x"] = 1.0;
    model["eps_y"] = 1.0;
    model["h"] = "identity";
    return model;
  }
  if (name == "fig1-m2n9-plus") return fig1(2, 9, "identity");
  if (name == "fig1-m2n9-minus") return fig1(2, 9, "neg-identity");
  if (name == "fig1-m9n2-plus") return fig1(9, 2, "identity");
  if (name == "fig1-m9n2-minus") return fig1(9, 2, "neg-identity");
  if (name == "fig1-m5n5-plus") return fig1(5, 5, "identity");
  if (name == "fig1-m5n5-minus") return fig1(5, 5, "neg-identity");
  die(2, "unknown preset '" + name +
             "' (config-a, fig1-{m2n9,m9n2,m5n5}-{plus,minus})");
}

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> overrides;

  std::optional<int> m, n;
  std::optional<double> q, eps_x, eps_y;
  std::optional<std::string> h;

  std::optional<std::string> scheme;
  std::optional<double> dt;
  std::optional<std::uint64_t> steps, thin;
};

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (model/integrator/experiment)");
  cmd->add_option("--preset", o.preset, "named model preset (replaces the model block)");
  cmd->add_option("--out", o.out_dir, "output directory for files and the manifest");
  cmd->add_option("--seed", o.seed, "seed override for integrator and experiment");
  cmd->add_option("--threads", o.threads, "worker threads (0 = auto)");
  cmd->add_option("--override", o.overrides, "ledger override KEY=VALUE")->delimiter(0);

  cmd->add_option("--m", o.m, "exponent m");
  cmd->add_option("--n", o.n, "exponent n");
  cmd->add_option("--q", o.q, "damping exponent q");
  cmd->add_option("--eps-x", o.eps_x, "noise amplitude in x");
  cmd->add_option("--eps-y", o.eps_y, "noise amplitude in y");
  cmd->add_option("--coupling", o.h, "h selector: identity, neg-identity or sine");

  cmd->add_option("--scheme", o.scheme, "integrator scheme: tamed_euler or euler");
  cmd->add_option("--dt", o.dt, "integrator step size");
  cmd->add_option("--steps", o.steps, "integrator step count");
  cmd->add_option("--thin", o.thin, "record every thin-th step");
}

ordered_json load_doc(const CommonOpts& o) {
  ordered_json doc = ordered_json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path, std::ios::binary);
    if (!in) die(5, "cannot open config file '" + o.config_path + "'");
    std::ostringstream body;
    body << in.rdbuf();
    try {
      doc = ordered_json::parse(body.str());
    } catch (const std::exception& e) {
      die(2, "config file is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) die(2, "config file must hold a JSON object");
    for (const auto& item : doc.items())
      if (item.key() != "model" && item.key() != "integrator" && item.key() != "experiment")
        die(2, "unknown top-level config field '" + item.key() + "'");
  }
  if (!o.preset.empty()) doc["model"] = preset_model(o.preset);
  if (!doc.contains("model")) doc["model"] = ordered_json::object();
  ordered_json& model = doc["model"];
  if (o.m) model["m"] = *o.m;
  if (o.n) model["n"] = *o.n;
  if (o.q) model["q"] = *o.q;
  if (o.eps_x) model["eps_x"] = *o.eps_x;
  if (o.eps_y) model["eps_y"] = *o.eps_y;
  if (o.h) model["h"] = *o.h;
  if (model.empty()) die(2, "no model given: use --preset, --config or --m/--n/... flags");
  return doc;
}

ParamsPtr make_params(const ordered_json& doc) {
  stablab_params* raw = nullptr;
  check(stablab_params_create(doc["model"].dump().c_str(), &raw));
  return ParamsPtr(raw);
}

std::string canonical_params_json(const stablab_params* params) {
  stablab_buffer* buf = nullptr;
  check(stablab_params_to_json(params, &buf));
  return take_string(buf);
}

ordered_json integrator_block(const ordered_json& doc, const CommonOpts& o) {
  ordered_json block;
  block["scheme"] = "tamed_euler";
  block["dt"] = 1e-3;
  block["steps"] = std::uint64_t{1000};
  block["seed"] = std::uint64_t{0};
  block["thin"] = std::uint64_t{1};
  if (doc.contains("integrator")) {
    if (!doc["integrator"].is_object()) die(2, "integrator block must be a JSON object");
    for (const auto& item : doc["integrator"].items()) block[item.key()] = item.value();
  }
  if (o.scheme) block["scheme"] = *o.scheme;
  if (o.dt) block["dt"] = *o.dt;
  if (o.steps) block["steps"] = *o.steps;
  if (o.thin) block["thin"] = *o.thin;
  if (o.seed) block["seed"] = *o.seed;
  return block;
}

ordered_json experiment_block(const ordered_json& doc) {
  if (!doc.contains("experiment")) return ordered_json::object();
  if (!doc["experiment"].is_object()) die(2, "experiment block must be a JSON object");
  return doc["experiment"];
}

int resolve_threads(const CommonOpts& o) {
  if (o.threads) return *o.threads;
  const char* env = std::getenv("STAB_LAB_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0')
    die(2, std::string("STAB_LAB_THREADS is not an integer: '") + env + "'");
  return static_cast<int>(v);
}

LedgerPtr make_ledger(const stablab_params* params, const CommonOpts& o) {
  stablab_ledger* raw = nullptr;
  check(stablab_derive_constants(params, &raw));
  LedgerPtr ledger(raw);
  for (const std::string& entry : o.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      die(2, "ledger override must be KEY=VALUE, got '" + entry + "'");
    const std::string key = entry.substr(0, eq);
    const double value = parse_double(entry.substr(eq + 1), "ledger override " + key);
    check(stablab_ledger_override(ledger.get(), key.c_str(), value));
  }
  return ledger;
}

// ---- output ------------------------------------------------------------------

void atomic_write(const fs::path& dir, const std::string& name, const std::string& bytes) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) die(5, "cannot create output directory '" + dir.string() + "': " + ec.message());
  const fs::path final_path = dir / name;
  const fs::path tmp_path = dir / (name + ".tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) die(5, "cannot open '" + tmp_path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) die(5, "short write to '" + tmp_path.string() + "'");
  }
  fs::rename(tmp_path, final_path, ec);
  if (ec) die(5, "cannot rename '" + tmp_path.string() + "': " + ec.message());
}

ordered_json make_manifest(const std::string& command, const std::string& params_json,
                           std::uint64_t seed, const std::vector<std::string>& outputs) {
  ordered_json manifest;
  manifest["command"] = command;
  manifest["params"] = ordered_json::parse(params_json);
  manifest["params_hash"] = fnv1a_hex(params_json);
  manifest["seed"] = seed;
  manifest["outputs"] = outputs;
  ordered_json versions;
  versions["stablab"] = stablab_version();
  versions["manifest_format"] = 1;
  manifest["versions"] = versions;
  return manifest;
}

void write_manifest(const fs::path& dir, ordered_json manifest,
                    std::vector<std::string> outputs) {
  outputs.push_back("manifest.json");
  manifest["outputs"] = outputs;
  atomic_write(dir, "manifest.json", manifest.dump(2) + "\n");
}

// ---- commands ------------------------------------------------------------------

struct DeriveCmd {
  CommonOpts common;

  int run() const {
    const ordered_json doc = load_doc(common);
    const ParamsPtr params = make_params(doc);
    const LedgerPtr ledger = make_ledger(params.get(), common);
    stablab_buffer* buf = nullptr;
    check(stablab_ledger_to_json(params.get(), ledger.get(), &buf));
    const std::string ledger_json = take_string(buf);
    std::cout << ledger_json;
    if (!common.out_dir.empty()) {
      atomic_write(common.out_dir, "ledger.json", ledger_json);
      const auto manifest = make_manifest("derive-constants",
                                          canonical_params_json(params.get()),
                                          common.seed.value_or(0), {"ledger.json"});
      write_manifest(common.out_dir, manifest, {"ledger.json"});
    }
    return 0;
  }
};

struct VerifyCmd {
  CommonOpts common;
  std::vector<std::string> targets;
  std::optional<std::uint64_t> samples;

  int run() const {
    const ordered_json doc = load_doc(common);
    const ParamsPtr params = make_params(doc);
    const LedgerPtr ledger = make_ledger(params.get(), common);
    const ordered_json experiment = experiment_block(doc);

    std::vector<std::string> list = targets;
    if (list.empty() && experiment.contains("targets"))
      list = experiment["targets"].get<std::vector<std::string>>();
    if (list.empty()) list = {"v1", "v2", "v3", "v12", "v13", "V"};

    std::uint64_t n = samples.value_or(
        experiment.contains("samples") ? experiment["samples"].get<std::uint64_t>() : 100000);
    const std::uint64_t seed = common.seed.value_or(
        experiment.contains("seed") ? experiment["seed"].get<std::uint64_t>() : 0);
    const int threads = resolve_threads(common);

    ordered_json combined;
    combined["reports"] = ordered_json::object();
    bool all_pass = true;
    for (const std::string& target : list) {
      int pass = 0;
      stablab_buffer* buf = nullptr;
      check(stablab_verify_drift(params.get(), ledger.get(), target.c_str(), n, seed, threads,
                                 &pass, &buf));
      combined["reports"][target] = ordered_json::parse(take_string(buf));
      all_pass = all_pass && pass == 1;
    }
    combined["all_pass"] = all_pass;
    const std::string text = combined.dump(2) + "\n";
    std::cout << text;
    if (!common.out_dir.empty()) {
      atomic_write(common.out_dir, "verify_report.json", text);
      const auto manifest = make_manifest("verify-lyapunov",
                                          canonical_params_json(params.get()), seed,
                                          {"verify_report.json"});
      write_manifest(common.out_dir, manifest, {"verify_report.json"});
    }
    return all_pass ? 0 : 4;
  }
};

struct SimulateCmd {
  CommonOpts common;
  std::optional<double> x0, y0;
  bool pure_hamiltonian = false;
  std::optional<double> t_end;
  std::optional<std::uint64_t> n_paths;
  std::vector<double> checkpoints;

  int run() const {
    const ordered_json doc = load_doc(common);
    const ParamsPtr params = make_params(doc);
    const ordered_json experiment = experiment_block(doc);
    if (common.out_dir.empty()) die(2, "simulate writes files: --out DIR is required");

    double sx = 1.0, sy = 1.0;
    if (experiment.contains("s0")) {
      sx = experiment["s0"].at(0).get<double>();
      sy = experiment["s0"].at(1).get<double>();
    }
    if (x0) sx = *x0;
    if (y0) sy = *y0;

    const std::string params_json = canonical_params_json(params.get());

    if (pure_hamiltonian) {
      const double horizon = t_end.value_or(
          experiment.contains("t_end") ? experiment["t_end"].get<double>() : 10.0);
      int blew = 0;
      double t_last = 0.0;
      stablab_buffer* csv = nullptr;
      check(stablab_ode_reference(params.get(), sx, sy, horizon, 1, &blew, &t_last, &csv));
      atomic_write(common.out_dir, "trajectory.csv", take_string(csv));
      auto manifest = make_manifest("simulate", params_json, 0, {"trajectory.csv"});
      manifest["pure_hamiltonian"] = true;
      manifest["blew_up"] = blew == 1;
      manifest["t_last"] = t_last;
      std::cout << manifest.dump(2) + "\n";
      write_manifest(common.out_dir, manifest, {"trajectory.csv"});
      return 0;
    }

    const ordered_json integ = integrator_block(doc, common);
    const std::string integ_json = integ.dump();
    const auto seed = integ["seed"].get<std::uint64_t>();
    const std::uint64_t paths = n_paths.value_or(
        experiment.contains("n_paths") ? experiment["n_paths"].get<std::uint64_t>() : 1);

    if (paths <= 1) {
      int blew = 0;
      stablab_buffer* csv = nullptr;
      check(stablab_simulate_path(params.get(), integ_json.c_str(), sx, sy, &blew, &csv));
      atomic_write(common.out_dir, "trajectory.csv", take_string(csv));
      auto manifest = make_manifest("simulate", params_json, seed, {"trajectory.csv"});
      manifest["integrator"] = integ;
      manifest["blew_up"] = blew == 1;
      std::cout << manifest.dump(2) + "\n";
      write_manifest(common.out_dir, manifest, {"trajectory.csv"});
      return 0;
    }

    std::vector<double> cps = checkpoints;
    if (cps.empty() && experiment.contains("checkpoints"))
      cps = experiment["checkpoints"].get<std::vector<double>>();
    if (cps.empty())
      cps = {integ["dt"].get<double>() * static_cast<double>(integ["steps"].get<std::uint64_t>())};

    stablab_buffer* csv = nullptr;
    stablab_buffer* bin = nullptr;
    check(stablab_simulate_ensemble(params.get(), integ_json.c_str(), sx, sy, paths, cps.data(),
                                    cps.size(), resolve_threads(common), &csv, &bin));
    atomic_write(common.out_dir, "ensemble.csv", take_string(csv));
    atomic_write(common.out_dir, "ensemble.stbl", take_string(bin));
    auto manifest =
        make_manifest("simulate", params_json, seed, {"ensemble.csv", "ensemble.stbl"});
    manifest["integrator"] = integ;
    manifest["n_paths"] = paths;
    manifest["checkpoints"] = cps;
    std::cout << manifest.dump(2) + "\n";
    write_manifest(common.out_dir, manifest, {"ensemble.csv", "ensemble.stbl"});
    return 0;
  }
};

struct MixingCmd {
  CommonOpts common;
  std::string series_path;
  std::vector<double> s0_a, s0_b;
  std::optional<std::uint64_t> n_paths;
  std::vector<double> checkpoints;
  bool coupled = false;

  int run_series() const {
    std::ifstream in(series_path, std::ios::binary);
    if (!in) die(5, "cannot open series file '" + series_path + "'");
    std::vector<double> times, dists;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream row(line);
      std::string t_text, d_text;
      if (!std::getline(row, t_text, ',') || !std::getline(row, d_text, ',')) continue;
      char* end = nullptr;
      const double t = std::strtod(t_text.c_str(), &end);
      if (end == t_text.c_str()) continue;  // header row
      times.push_back(t);
      dists.push_back(parse_double(d_text, "series distance"));
    }
    if (times.size() < 2)
      die(2, "series file '" + series_path + "' holds fewer than two data rows");
    double out[3];
    check(stablab_fit_exponential(times.data(), dists.data(), times.size(), out));
    ordered_json fit;
    fit["fitted_C"] = out[0];
    fit["fitted_rate"] = out[1];
    fit["fit_r2"] = out[2];
    fit["points"] = times.size();
    const std::string text = fit.dump(2) + "\n";
    std::cout << text;
    if (!common.out_dir.empty()) atomic_write(common.out_dir, "fit.json", text);
    return 0;
  }

  int run() const {
    if (!series_path.empty()) return run_series();

    const ordered_json doc = load_doc(common);
    const ParamsPtr params = make_params(doc);
    const LedgerPtr ledger = make_ledger(params.get(), common);

    ordered_json experiment = experiment_block(doc);
    if (!s0_a.empty()) experiment["s0_a"] = s0_a;
    if (!s0_b.empty()) experiment["s0_b"] = s0_b;
    if (n_paths) experiment["n_paths"] = *n_paths;
    if (!checkpoints.empty()) experiment["checkpoints"] = checkpoints;
    if (common.dt) experiment["dt"] = *common.dt;
    if (common.seed) experiment["seed"] = *common.seed;
    if (coupled) experiment["coupled"] = true;

    stablab_buffer* report = nullptr;
    stablab_buffer* series = nullptr;
    const stablab_status status =
        stablab_mixing(params.get(), ledger.get(), experiment.dump().c_str(),
                       resolve_threads(common), &report, &series);
    if (status != STABLAB_OK && status != STABLAB_ERR_FIT_UNAVAILABLE)
      die(exit_code_for(status), stablab_last_error());

    const std::string report_json = take_string(report);
    const std::string series_csv = take_string(series);
    std::cout << report_json;
    if (!common.out_dir.empty()) {
      atomic_write(common.out_dir, "mixing_report.json", report_json);
      atomic_write(common.out_dir, "mixing_series.csv", series_csv);
      const auto manifest = make_manifest(
          "mixing", canonical_params_json(params.get()),
          experiment.contains("seed") ? experiment["seed"].get<std::uint64_t>() : 0,
          {"mixing_report.json", "mixing_series.csv"});
      write_manifest(common.out_dir, manifest, {"mixing_report.json", "mixing_series.csv"});
    }
    if (status == STABLAB_ERR_FIT_UNAVAILABLE) {
      std::cerr << "stab_lab mixing: " << stablab_last_error() << "\n";
      return 6;
    }
    return 0;
  }
};

struct StabilityCmd {
  CommonOpts common;
  std::vector<double> s0;
  std::optional<std::uint64_t> n_paths;
  std::vector<double> checkpoints;
  std::optional<double> threshold, quantile, quantile_time, delta;

  int run() const {
    const ordered_json doc = load_doc(common);
    const ParamsPtr params = make_params(doc);

    ordered_json experiment = experiment_block(doc);
    if (!s0.empty()) experiment["s0"] = s0;
    if (n_paths) experiment["n_paths"] = *n_paths;
    if (!checkpoints.empty()) experiment["checkpoints"] = checkpoints;
    if (common.dt) experiment["dt"] = *common.dt;
    if (common.seed) experiment["seed"] = *common.seed;
    if (threshold) experiment["threshold"] = *threshold;
    if (quantile) experiment["quantile"] = *quantile;
    if (quantile_time) experiment["quantile_time"] = *quantile_time;
    if (delta) experiment["delta"] = *delta;

    stablab_buffer* report = nullptr;
    stablab_buffer* series = nullptr;
    check(stablab_stability(params.get(), experiment.dump().c_str(), resolve_threads(common),
                            &report, &series));
    const std::string report_json = take_string(report);
    const std::string series_csv = take_string(series);
    std::cout << report_json;
    if (!common.out_dir.empty()) {
      atomic_write(common.out_dir, "stability_report.json", report_json);
      atomic_write(common.out_dir, "stability_series.csv", series_csv);
      const auto manifest = make_manifest(
          "stability", canonical_params_json(params.get()),
          experiment.contains("seed") ? experiment["seed"].get<std::uint64_t>() : 0,
          {"stability_report.json", "stability_series.csv"});
      write_manifest(common.out_dir, manifest,
                     {"stability_report.json", "stability_series.csv"});
    }
    return 0;
  }
};

struct BlowupCmd {
  CommonOpts common;
  double x_min = -2.0, x_max = 2.0;
  double y_min = -2.0, y_max = 2.0;
  std::uint64_t x_count = 5, y_count = 5;

  int run() const {
    const ordered_json doc = load_doc(common);
    const ordered_json& model = doc["model"];
    if (model.contains("m") && model.contains("n") && model["m"] == model["n"])
      die(2,
          "m == n: the noise-free flow is global (no finite-time blow-up); "
          "the blow-up grid applies to m != n");
    const ParamsPtr params = make_params(doc);
    if (x_count < 1 || y_count < 1) die(2, "grid counts must be >= 1");

    std::string csv = "x0,y0,t_star\n";
    for (std::uint64_t i = 0; i < x_count; ++i) {
      const double gx =
          x_count == 1 ? x_min : x_min + (x_max - x_min) * static_cast<double>(i) /
                                             static_cast<double>(x_count - 1);
      for (std::uint64_t j = 0; j < y_count; ++j) {
        const double gy =
            y_count == 1 ? y_min : y_min + (y_max - y_min) * static_cast<double>(j) /
                                               static_cast<double>(y_count - 1);
        int has = 0;
        double t_star = 0.0;
        check(stablab_blowup_time(params.get(), gx, gy, &has, &t_star));
        csv += format_double(gx);
        csv += ',';
        csv += format_double(gy);
        csv += ',';
        if (has == 1) csv += format_double(t_star);
        csv += '\n';
      }
    }
    std::cout << csv;
    if (!common.out_dir.empty()) {
      atomic_write(common.out_dir, "blowup_grid.csv", csv);
      const auto manifest = make_manifest("blowup", canonical_params_json(params.get()), 0,
                                          {"blowup_grid.csv"});
      write_manifest(common.out_dir, manifest, {"blowup_grid.csv"});
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stab_lab: reproducible experiments on the noise-stabilized system"};
  app.require_subcommand(1);

  DeriveCmd derive;
  auto* derive_cmd =
      app.add_subcommand("derive-constants", "derive the Lyapunov constant ledger");
  add_common_flags(derive_cmd, derive.common);

  VerifyCmd verify;
  auto* verify_cmd =
      app.add_subcommand("verify-lyapunov", "sample-verify the drift inequalities");
  add_common_flags(verify_cmd, verify.common);
  verify_cmd->add_option("--target", verify.targets,
                         "verification target: v1, v2, v3, v12, v13 or V (repeatable)");
  verify_cmd->add_option("--samples", verify.samples, "samples per target");

  SimulateCmd simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "integrate paths or ensembles");
  add_common_flags(simulate_cmd, simulate.common);
  simulate_cmd->add_option("--x0", simulate.x0, "initial x");
  simulate_cmd->add_option("--y0", simulate.y0, "initial y");
  simulate_cmd->add_flag("--pure-hamiltonian", simulate.pure_hamiltonian,
                         "integrate the noise-free Hamiltonian flow (blow-up aware)");
  simulate_cmd->add_option("--t-end", simulate.t_end, "horizon for --pure-hamiltonian");
  simulate_cmd->add_option("--n-paths", simulate.n_paths, "ensemble size (1 = single path)");
  simulate_cmd->add_option("--checkpoints", simulate.checkpoints, "ensemble checkpoint times")
      ->delimiter(',');

  MixingCmd mixing;
  auto* mixing_cmd = app.add_subcommand("mixing", "two-ensemble Wasserstein decay experiment");
  add_common_flags(mixing_cmd, mixing.common);
  mixing_cmd->add_option("--series", mixing.series_path,
                         "fit an existing t,distance CSV instead of simulating");
  mixing_cmd->add_option("--s0-a", mixing.s0_a, "first initial point x,y")->delimiter(',');
  mixing_cmd->add_option("--s0-b", mixing.s0_b, "second initial point x,y")->delimiter(',');
  mixing_cmd->add_option("--n-paths", mixing.n_paths, "paths per ensemble");
  mixing_cmd->add_option("--checkpoints", mixing.checkpoints, "checkpoint times")
      ->delimiter(',');
  mixing_cmd->add_flag("--coupled", mixing.coupled, "synchronous coupling (shared noise)");

  StabilityCmd stability;
  auto* stability_cmd =
      app.add_subcommand("stability", "bounded-in-probability tail experiment");
  add_common_flags(stability_cmd, stability.common);
  stability_cmd->add_option("--s0", stability.s0, "initial point x,y")->delimiter(',');
  stability_cmd->add_option("--n-paths", stability.n_paths, "ensemble size");
  stability_cmd->add_option("--checkpoints", stability.checkpoints, "checkpoint times")
      ->delimiter(',');
  stability_cmd->add_option("--threshold", stability.threshold, "fixed radius M");
  stability_cmd->add_option("--quantile", stability.quantile,
                            "calibrate M as this radius quantile");
  stability_cmd->add_option("--quantile-time", stability.quantile_time,
                            "checkpoint at which the quantile is taken");
  stability_cmd->add_option("--delta", stability.delta, "target tail probability");

  BlowupCmd blowup;
  auto* blowup_cmd =
      app.add_subcommand("blowup", "closed-form blow-up times over an initial grid");
  add_common_flags(blowup_cmd, blowup.common);
  blowup_cmd->add_option("--x-min", blowup.x_min, "grid x minimum");
  blowup_cmd->add_option("--x-max", blowup.x_max, "grid x maximum");
  blowup_cmd->add_option("--x-count", blowup.x_count, "grid points in x");
  blowup_cmd->add_option("--y-min", blowup.y_min, "grid y minimum");
  blowup_cmd->add_option("--y-max", blowup.y_max, "grid y maximum");
  blowup_cmd->add_option("--y-count", blowup.y_count, "grid points in y");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (derive_cmd->parsed()) return derive.run();
    if (verify_cmd->parsed()) return verify.run();
    if (simulate_cmd->parsed()) return simulate.run();
    if (mixing_cmd->parsed()) return mixing.run();
    if (stability_cmd->parsed()) return stability.run();
    if (blowup_cmd->parsed()) return blowup.run();
  } catch (const CliError& e) {
    std::cerr << "stab_lab: " << e.message << "\n";
    return e.exit_code;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "stab_lab: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "stab_lab: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
