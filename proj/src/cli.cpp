#include "voltvar/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "voltvar/benchmark.hpp"
#include "voltvar/dynamics.hpp"
#include "voltvar/errors.hpp"
#include "voltvar/io.hpp"
#include "voltvar/stability.hpp"
#include "voltvar/trainer.hpp"

namespace voltvar {

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream s;
  for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return s.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Shared state of one invocation: parsed flags, inputs read, outputs written.
struct Run {
  std::string command;
  std::string feeder_path, rules_path, scenarios_path, out_path;
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = -1.0;  // < 0: command default
  Json config = Json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  Json timings = Json::object();

  FeederModel feeder() {
    if (feeder_path.empty()) throw ValidationError("--feeder is required");
    inputs.push_back(feeder_path);
    return load_feeder(feeder_path);
  }
  RuleParams rules(const FeederModel& model) {
    if (rules_path.empty()) throw ValidationError("--rules is required");
    inputs.push_back(rules_path);
    RuleParams p = load_rules(rules_path);
    if (p.size() != model.size())
      throw ParseError(rules_path + ": rule has " + std::to_string(p.size()) + " nodes, feeder " +
                       feeder_path + " has " + std::to_string(model.size()));
    return p;
  }
  ScenarioSet scenarios(const FeederModel& model) {
    if (scenarios_path.empty()) throw ValidationError("--scenarios is required");
    inputs.push_back(scenarios_path);
    return load_scenarios(scenarios_path, model);
  }
  double tolerance(double fallback) const { return tol > 0.0 ? tol : fallback; }

  void emit_json(std::ostream& out, const Json& j) {
    out << j.dump(2) << "\n";
    if (!out_path.empty()) write_output(out_path, j.dump(2) + "\n");
  }
  void write_output(const std::string& path, const std::string& text) {
    write_text_file(path, text);
    outputs.push_back(path);
  }

  /// Sidecar <output>.manifest.json next to every output file.
  void write_manifests() {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    for (const auto& path : outputs) {
      Json m;
      m["command"] = command;
      m["tool_version"] = kToolVersion;
      m["timestamp"] = utc_timestamp();
      m["seed"] = seed;
      m["threads"] = threads;
      m["config"] = config;
      Json digests = Json::object();
      for (const auto& in : inputs) digests[in] = "sha256:" + sha256_hex(read_text_file(in));
      m["inputs"] = digests;
      m["output"] = path;
      m["output_digest"] = "sha256:" + sha256_hex(read_text_file(path));
      m["elapsed_seconds"] = elapsed;
      if (!timings.empty()) m["timings"] = timings;
      write_json_file(path + ".manifest.json", m);
    }
  }
};

void add_common(CLI::App* sub, Run& run, bool feeder, bool rules, bool scenarios) {
  if (feeder) sub->add_option("--feeder", run.feeder_path, "feeder JSON (topology or explicit model)")->required();
  if (rules) sub->add_option("--rules", run.rules_path, "rule JSON (curves, qhat, der_mask)")->required();
  if (scenarios) sub->add_option("--scenarios", run.scenarios_path, "scenario CSV")->required();
  sub->add_option("--out", run.out_path, "output file");
  sub->add_option("--seed", run.seed, "random seed");
  sub->add_option("--threads", run.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--tol", run.tol, "tolerance (meaning depends on the command)");
}

Json validation_json(const RuleParams& p) {
  Json arr = Json::array();
  for (const auto& v : validate(p).violations)
    arr.push_back({{"node", v.node + 1}, {"bound", to_string(v.bound)}, {"margin", v.margin}});
  return arr;
}

Vector der_qhat(const RuleParams& p) {
  Vector q = Vector::Zero(p.size());
  for (Index n : der_indices(p.der_mask)) q(n) = p.qhat(n);
  return q;
}

// ---- subcommands -------------------------------------------------------------

int cmd_feeder_validate(Run& run, std::ostream& out) {
  const FeederModel model = run.feeder();
  Json j;
  j["kind"] = to_string(model.kind());
  j["n_nodes"] = model.size();
  j["v0"] = model.v0();
  j["min_symmetric_eigenvalue"] = min_symmetric_eigenvalue(model.reactance());
  j["spectral_norm_x"] = spectral_norm(model.reactance());
  j["labels"] = model.labels();
  j["phases"] = model.phases();
  j["model"] = feeder_to_json(model);
  run.emit_json(out, j);
  return kExitOk;
}

int cmd_stability(Run& run, std::ostream& out, double epsilon, std::vector<double> eps1) {
  const FeederModel model = run.feeder();
  const RuleParams params = run.rules(model);
  run.config["epsilon"] = epsilon;
  run.config["eps1"] = eps1;
  const StabilityCertificate cert = certify(model, params.slopes(), epsilon);
  Json j = certificate_to_json(cert);
  const double x_norm = spectral_norm(model.reactance());
  const double q_norm = der_qhat(params).norm();
  Json depths = Json::array();
  for (double e : eps1) depths.push_back({{"eps1", e}, {"T", min_depth(x_norm, q_norm, epsilon, e)}});
  j["min_depth_for"] = eps1.size() == 1 ? depths[0] : depths;
  j["x_norm"] = x_norm;
  j["qhat_norm"] = q_norm;
  j["ieee1547_violations"] = validation_json(params);
  run.emit_json(out, j);
  return kExitOk;
}

int cmd_simulate(Run& run, std::ostream& out, int scenario_index, int steps,
                 const std::string& summary_path) {
  const FeederModel model = run.feeder();
  const RuleParams params = run.rules(model);
  const ScenarioSet set = run.scenarios(model);
  if (scenario_index < 1 || static_cast<std::size_t>(scenario_index) > set.size())
    throw ValidationError("--scenario must lie in [1, " + std::to_string(set.size()) + "]");
  const double tol = run.tolerance(kDefaultSettleTolerance);
  run.config["scenario"] = scenario_index;
  run.config["steps"] = steps;
  run.config["tol"] = tol;
  const DynamicsTrace trace =
      simulate(model, params, set.scenarios[static_cast<std::size_t>(scenario_index - 1)], steps, tol);
  if (!run.out_path.empty()) {
    std::ostringstream csv;
    write_csv(csv, trace_table(trace));
    run.write_output(run.out_path, csv.str());
  }
  Json summary{{"converged", trace.converged}, {"settle_steps", trace.settle_steps}, {"final_gap", trace.final_gap}};
  out << summary.dump(2) << "\n";
  if (!summary_path.empty()) run.write_output(summary_path, summary.dump(2) + "\n");
  return kExitOk;
}

int cmd_equilibrium(Run& run, std::ostream& out, const std::string& method) {
  const FeederModel model = run.feeder();
  const RuleParams params = run.rules(model);
  const ScenarioSet set = run.scenarios(model);
  run.config["method"] = method;
  Json arr = Json::array();
  for (std::size_t s = 0; s < set.size(); ++s) {
    EquilibriumResult eq;
    if (method == "fixed-point")
      eq = equilibrium_fixed_point(model, params, set.scenarios[s], run.tolerance(1e-12));
    else if (method == "coordinate-descent")
      eq = equilibrium_coordinate_descent(model, params, set.scenarios[s], run.tolerance(1e-13));
    else
      eq = enumerate_equilibrium(model, params, set.scenarios[s], run.tolerance(1e-10)).equilibrium;
    Json j = equilibrium_to_json(eq);
    j["scenario"] = s + 1;
    arr.push_back(std::move(j));
  }
  run.config["tol"] = run.tol;
  run.emit_json(out, Json{{"equilibria", arr}});
  return kExitOk;
}

struct DesignFlags {
  double epsilon = 0.5;
  int epochs = 200;
  double lr = 0.01;
  int batch = 0;
  std::string init = "stock";
  std::string optimizer = "adam";
  int depth = 0;
  double eps1 = 1e-4;
  bool adaptive = false;
  bool last = false;
  std::string report_path;
};

TwinParams parse_init_point(const std::string& text, const RuleParams& rules) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      v.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ValidationError("--init expects 'stock', 'rules' or vref,delta,sigma,alpha; got '" + text + "'");
    }
  }
  if (v.size() != 4) throw ValidationError("--init expects four numbers vref,delta,sigma,alpha");
  TwinParams p = TwinParams::from_rule(default_rule(rules.qhat, rules.der_mask));
  for (Index n : der_indices(rules.der_mask)) {
    p.vref(n) = v[0];
    p.delta(n) = v[1];
    p.sigma(n) = v[2];
    p.alpha(n) = v[3];
  }
  return p;
}

int cmd_design(Run& run, std::ostream& out, const DesignFlags& f) {
  const FeederModel model = run.feeder();
  const RuleParams rules = run.rules(model);
  const ScenarioSet set = run.scenarios(model);
  TrainConfig cfg;
  cfg.epsilon = f.epsilon;
  cfg.epochs = f.epochs;
  cfg.step_size = f.lr;
  cfg.batch_size = f.batch > 0 ? f.batch : static_cast<int>(std::min<std::size_t>(4, set.size()));
  cfg.mode = optimizer_mode_from_string(f.optimizer);
  cfg.seed = run.seed;
  cfg.depth = f.depth;
  cfg.depth_accuracy = f.eps1;
  cfg.adaptive_depth = f.adaptive;
  cfg.keep_best = !f.last;
  cfg.threads = run.threads;
  if (f.init == "rules") {
    cfg.init = rules;
  } else if (f.init != "stock") {
    const TwinParams p = parse_init_point(f.init, rules);
    // Carry the raw point through the slope-based projection path.
    RuleParams r = rules;
    r.vref = p.vref;
    r.delta = p.delta;
    r.sigma = p.sigma;
    for (Index n : der_indices(rules.der_mask)) r.qbar(n) = p.alpha(n) * (p.sigma(n) - p.delta(n));
    cfg.init = r;
  }
  run.config["epsilon"] = cfg.epsilon;
  run.config["epochs"] = cfg.epochs;
  run.config["lr"] = cfg.step_size;
  run.config["batch"] = cfg.batch_size;
  run.config["optimizer"] = to_string(cfg.mode);
  run.config["init"] = f.init;
  run.config["depth"] = cfg.depth;
  run.config["eps1"] = cfg.depth_accuracy;
  run.config["adaptive_depth"] = cfg.adaptive_depth;
  run.config["keep_best"] = cfg.keep_best;

  const TrainReport report = train(model, set, rules.qhat, rules.der_mask, cfg);
  run.timings["seconds_per_epoch"] = report.seconds_per_epoch;

  const Json report_json = train_report_to_json(report, cfg);
  const Json rule_json = rules_to_json(report.final_params);
  if (!run.out_path.empty()) run.write_output(run.out_path, rule_json.dump(2) + "\n");
  if (!f.report_path.empty()) run.write_output(f.report_path, report_json.dump(2) + "\n");

  const EvaluationResult ev = evaluate(model, report.final_params, set);
  Json summary;
  summary["final_loss"] = report.loss_per_epoch.empty() ? report.initial_loss : report.loss_per_epoch.back();
  summary["best_epoch"] = report.best_epoch;
  summary["objective"] = ev.objective;
  summary["excluded_scenarios"] = ev.excluded.size();
  summary["certificate"] = certificate_to_json(report.certificate);
  summary["ieee1547_violations"] = validation_json(report.final_params);
  out << summary.dump(2) << "\n";
  return kExitOk;
}

Json evaluation_json(const EvaluationResult& ev) {
  Json j;
  j["objective"] = std::isfinite(ev.objective) ? Json(ev.objective) : Json(nullptr);
  Json per = Json::array();
  for (double d : ev.per_scenario) per.push_back(std::isfinite(d) ? Json(d) : Json(nullptr));
  j["per_scenario"] = per;
  Json ex = Json::array();
  for (auto s : ev.excluded) ex.push_back(s + 1);
  j["excluded_scenarios"] = ex;
  return j;
}

int cmd_evaluate(Run& run, std::ostream& out) {
  const FeederModel model = run.feeder();
  const RuleParams params = run.rules(model);
  const ScenarioSet set = run.scenarios(model);
  const EvaluationResult ev = evaluate(model, params, set);
  const EvaluationResult def = evaluate(model, default_rule(params.qhat, params.der_mask), set);
  const EvaluationResult none = evaluate_no_compensation(model, set);
  Json j;
  j["rules"] = evaluation_json(ev);
  j["default_rule"] = evaluation_json(def);
  j["no_compensation"] = evaluation_json(none);
  run.emit_json(out, j);
  return ev.excluded.size() == set.size() ? kExitNoConvergence : kExitOk;
}

int cmd_verify(Run& run, std::ostream& out, double epsilon, const std::string& minlp_path) {
  const FeederModel model = run.feeder();
  const RuleParams params = run.rules(model);
  const ScenarioSet set = run.scenarios(model);
  if (!model.single_phase())
    throw KindError("verify needs a single-phase feeder (the inner program is defined there)");
  const double tol = run.tolerance(1e-9);
  run.config["tol"] = tol;
  const BigMSpec spec = calibrate_big_m(model, params, set);
  Json arr = Json::array();
  double worst = 0.0;
  bool all_big_m = true;
  for (std::size_t s = 0; s < set.size(); ++s) {
    const auto eq = equilibrium_fixed_point(model, params, set.scenarios[s]);
    const auto kkt = kkt_residual(model, params, set.scenarios[s], eq.q_star);
    const auto bm = check_big_m(model, params, kkt.point, spec, tol);
    worst = std::max(worst, kkt.residual);
    all_big_m = all_big_m && bm.pass;
    Json bins = Json::array();
    for (Index n : der_indices(params.der_mask)) bins.push_back(bm.binaries[static_cast<std::size_t>(n)]);
    arr.push_back({{"scenario", s + 1},
                   {"kkt_residual", kkt.residual},
                   {"stationarity", kkt.stationarity},
                   {"primal_feasibility", kkt.primal_feasibility},
                   {"dual_feasibility", kkt.dual_feasibility},
                   {"complementarity", kkt.complementarity},
                   {"big_m_pass", bm.pass},
                   {"big_m_binaries", bins},
                   {"big_m_failures", bm.failures}});
  }
  Json j;
  j["scenarios"] = arr;
  j["max_kkt_residual"] = worst;
  j["big_m"] = {{"m1", spec.m1}, {"m2", vector_to_json(spec.m2)}, {"all_pass", all_big_m}};
  run.emit_json(out, j);
  if (!minlp_path.empty()) {
    std::ostringstream text;
    export_minlp(text, model, set, params.qhat, params.der_mask, epsilon, spec);
    run.write_output(minlp_path, text.str());
  }
  return kExitOk;
}

int cmd_oracle(Run& run, std::ostream& out, double epsilon, GridSpec grid, const std::string& log_path) {
  const FeederModel model = run.feeder();
  const RuleParams rules = run.rules(model);
  const ScenarioSet set = run.scenarios(model);
  grid.threads = run.threads;
  run.config["epsilon"] = epsilon;
  run.config["grid"] = {{"vref_points", grid.vref_points},
                        {"delta_points", grid.delta_points},
                        {"alpha_points", grid.alpha_points},
                        {"qbar_points", grid.qbar_points},
                        {"refine_levels", grid.refine_levels}};
  const auto res = grid_search_ord(model, set, rules.qhat, rules.der_mask, epsilon, grid, !log_path.empty());
  Json j = rules_to_json(res.best);
  if (!run.out_path.empty()) run.write_output(run.out_path, j.dump(2) + "\n");
  if (!log_path.empty()) {
    CsvTable t;
    for (Index n : der_indices(rules.der_mask)) {
      const std::string id = std::to_string(n + 1);
      for (const char* name : {"vref_", "delta_", "sigma_", "alpha_"}) t.header.push_back(name + id);
    }
    t.header.push_back("objective");
    t.rows = res.log;
    std::ostringstream csv;
    write_csv(csv, t);
    run.write_output(log_path, csv.str());
  }
  Json summary{{"objective", res.objective}, {"evaluated", res.evaluated}, {"feasible", res.feasible},
               {"best", j}};
  out << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_profile(Run& run, std::ostream& out) {
  const FeederModel model = run.feeder();
  const RuleParams optimized = run.rules(model);
  const ScenarioSet set = run.scenarios(model);
  const EvaluationResult none = evaluate_no_compensation(model, set);
  const EvaluationResult def = evaluate(model, default_rule(optimized.qhat, optimized.der_mask), set);
  const EvaluationResult opt = evaluate(model, optimized, set);
  CsvTable t;
  t.header = {"scenario", "bus", "no_compensation", "default_rule", "optimized", "default_converged",
              "optimized_converged"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t s = 0; s < set.size(); ++s) {
    const bool dc = def.voltages[s].size() > 0, oc = opt.voltages[s].size() > 0;
    for (Index n = 0; n < model.size(); ++n)
      t.rows.push_back({static_cast<double>(s + 1), static_cast<double>(n + 1), none.voltages[s](n),
                        dc ? def.voltages[s](n) : nan, oc ? opt.voltages[s](n) : nan, dc ? 1.0 : 0.0,
                        oc ? 1.0 : 0.0});
  }
  std::ostringstream csv;
  write_csv(csv, t);
  if (!run.out_path.empty()) run.write_output(run.out_path, csv.str());
  else out << csv.str();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Volt/VAR rule design and verification on linearized distribution feeders", "voltvar"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Run run;

  auto* fv = app.add_subcommand("feeder-validate", "check a feeder file and print the model summary");
  add_common(fv, run, true, false, false);

  double stab_eps = 0.3;
  std::vector<double> stab_eps1{1e-4};
  auto* st = app.add_subcommand("stability", "stability certificate and unrolling depth of a rule");
  add_common(st, run, true, true, false);
  st->add_option("--epsilon", stab_eps, "stability margin in (0,1)");
  st->add_option("--eps1", stab_eps1, "twin accuracy targets for the depth bound");

  int sim_scenario = 1, sim_steps = 1000;
  std::string sim_summary;
  auto* sm = app.add_subcommand("simulate", "iterate the closed-loop dynamics for one scenario");
  add_common(sm, run, true, true, true);
  sm->add_option("--scenario", sim_scenario, "1-based scenario row");
  sm->add_option("--steps", sim_steps, "maximum iterations")->check(CLI::NonNegativeNumber);
  sm->add_option("--summary", sim_summary, "summary JSON path");

  std::string eq_method = "fixed-point";
  auto* eq = app.add_subcommand("equilibrium", "equilibrium set-points per scenario");
  add_common(eq, run, true, true, true);
  eq->add_option("--method", eq_method, "fixed-point, coordinate-descent or region-enumeration")
      ->check(CLI::IsMember({"fixed-point", "coordinate-descent", "region-enumeration"}));

  DesignFlags design;
  auto* ds = app.add_subcommand("design", "train rule parameters through the digital twin");
  add_common(ds, run, true, true, true);
  ds->add_option("--epsilon", design.epsilon, "stability margin in (0,1)");
  ds->add_option("--epochs", design.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  ds->add_option("--lr", design.lr, "step size");
  ds->add_option("--batch", design.batch, "batch size (default min(4, S))");
  ds->add_option("--init", design.init, "stock, rules, or vref,delta,sigma,alpha");
  ds->add_option("--optimizer", design.optimizer, "adam or plain");
  ds->add_option("--depth", design.depth, "twin depth (default from the depth bound)");
  ds->add_option("--eps1", design.eps1, "twin accuracy used for the default depth");
  ds->add_flag("--adaptive-depth", design.adaptive, "stop layers once the loss settles");
  ds->add_flag("--last", design.last, "keep the last iterate instead of the best epoch");
  ds->add_option("--report", design.report_path, "training report JSON");

  auto* ev = app.add_subcommand("evaluate", "equilibrium objective of a rule, the default rule and no control");
  add_common(ev, run, true, true, true);

  double ver_eps = 0.3;
  std::string minlp_path;
  auto* vf = app.add_subcommand("verify", "KKT residuals and big-M checks at the equilibria");
  add_common(vf, run, true, true, true);
  vf->add_option("--epsilon", ver_eps, "stability margin written to the MINLP export");
  vf->add_option("--minlp", minlp_path, "write the mixed-integer instance as text");

  double or_eps = 0.5;
  GridSpec grid;
  std::string grid_log;
  auto* oc = app.add_subcommand("oracle", "exhaustive grid search for 1-2 DERs");
  add_common(oc, run, true, true, true);
  oc->add_option("--epsilon", or_eps, "stability margin in (0,1)");
  oc->add_option("--vref-points", grid.vref_points)->check(CLI::PositiveNumber);
  oc->add_option("--delta-points", grid.delta_points)->check(CLI::PositiveNumber);
  oc->add_option("--alpha-points", grid.alpha_points)->check(CLI::PositiveNumber);
  oc->add_option("--qbar-points", grid.qbar_points)->check(CLI::PositiveNumber);
  oc->add_option("--refine", grid.refine_levels, "zoom passes")->check(CLI::NonNegativeNumber);
  oc->add_option("--log", grid_log, "CSV of every grid point and its objective");

  auto* pf = app.add_subcommand("profile", "per-bus voltages: no control, default rule, given rule");
  add_common(pf, run, true, true, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    int code = kExitOk;
    CLI::App* sub = app.get_subcommands().front();
    run.command = sub->get_name();
    if (sub == fv) code = cmd_feeder_validate(run, out);
    else if (sub == st) code = cmd_stability(run, out, stab_eps, stab_eps1);
    else if (sub == sm) code = cmd_simulate(run, out, sim_scenario, sim_steps, sim_summary);
    else if (sub == eq) code = cmd_equilibrium(run, out, eq_method);
    else if (sub == ds) code = cmd_design(run, out, design);
    else if (sub == ev) code = cmd_evaluate(run, out);
    else if (sub == vf) code = cmd_verify(run, out, ver_eps, minlp_path);
    else if (sub == oc) code = cmd_oracle(run, out, or_eps, grid, grid_log);
    else if (sub == pf) code = cmd_profile(run, out);
    run.write_manifests();
    return code;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ConvergenceError& e) {
    err << "no convergence: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const BoundaryAmbiguityError& e) {
    err << "ambiguous equilibrium: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace voltvar
