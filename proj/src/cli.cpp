#include "misirt/cli.hpp"

#include "misirt/baseline.hpp"
#include "misirt/io.hpp"
#include "misirt/mml.hpp"
#include "misirt/sampler.hpp"
#include "misirt/selection.hpp"
#include "misirt/simulate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace misirt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolName = "misirt";

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

struct SeedChoice {
  std::uint64_t value = 0;
  std::string source;
};

SeedChoice resolve_seed(const CLI::Option* opt, std::uint64_t given) {
  if (opt->count() > 0) return {given, "flag"};
  return {entropy_seed(), "entropy"};
}

template <typename Fn>
std::string render(Fn fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

std::string rep_name(const std::string& stem, std::size_t index, const std::string& ext) {
  std::ostringstream os;
  os << stem << std::setw(3) << std::setfill('0') << index + 1 << ext;
  return os.str();
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
  std::size_t design = 1;
  double rho = 0.0;
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  std::size_t persons = 500;
  std::size_t items = 20;
  double gamma0 = 0.0, gamma1 = 0.0, gamma2 = 0.0;
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* g0_opt = nullptr;
  CLI::Option* g1_opt = nullptr;
  CLI::Option* g2_opt = nullptr;
};

SimDesign design_from(std::size_t index, double rho, std::size_t persons, std::size_t items,
                      const CLI::Option* g0, double v0, const CLI::Option* g1, double v1,
                      const CLI::Option* g2, double v2) {
  SimDesign d = SimDesign::from_grid(index, rho);
  d.n_persons = persons;
  d.n_items = items;
  if (g0->count() || g1->count() || g2->count()) {
    if (g0->count()) d.gamma.g0 = v0;
    if (g1->count()) d.gamma.g1 = v1;
    if (g2->count()) d.gamma.g2 = v2;
    d.column = 0;
  }
  d.validate();
  return d;
}

void warn_replications(std::size_t reps, std::ostream& err) {
  if (reps >= 100) {
    err << "warning: " << reps
        << " replications requested; each one is a full MCMC fit, expect a long run\n";
  }
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  SimDesign d = design_from(a.design, a.rho, a.persons, a.items, a.g0_opt, a.gamma0, a.g1_opt,
                            a.gamma1, a.g2_opt, a.gamma2);
  const SeedChoice seed = resolve_seed(a.seed_opt, a.seed);
  d.seed = seed.value;
  d.replications = a.reps;
  warn_replications(a.reps, err);
  const fs::path dir(a.out);
  json files = json::array();
  std::vector<double> proportions;
  double mean = 0.0;
  for (std::size_t r = 0; r < a.reps; ++r) {
    const Replication rep = simulate_replication(d, r);
    const std::string data_name = rep_name("data_rep", r, ".csv");
    const std::string truth_name = rep_name("truth_rep", r, ".json");
    write_text(dir / data_name, render([&](std::ostream& os) { write_dataset_csv(os, rep.data); }));
    json truth = to_json(rep.truth);
    truth["replication"] = r + 1;
    truth["dataset_hash"] = hex64(rep.data.content_hash());
    write_json(dir / truth_name, truth);
    files.push_back({{"data", data_name}, {"truth", truth_name}});
    proportions.push_back(rep.truth.missing_proportion);
    mean += rep.truth.missing_proportion;
  }
  if (a.reps > 0) mean /= static_cast<double>(a.reps);
  json manifest = {{"tool", kToolName},
                   {"command", "simulate"},
                   {"design", to_json(d)},
                   {"seed", d.seed},
                   {"seed_source", seed.source},
                   {"realized_missing_proportions", proportions},
                   {"mean_realized_missing_proportion", mean},
                   {"files", files}};
  write_json(dir / "manifest.json", manifest);
  out << "wrote " << a.reps << " replications of " << d.label() << " to " << dir.string()
      << " (mean missing proportion " << format_double(mean) << ")\n";
  return kExitOk;
}

// ---- fit -----------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string mode = "nonignorable";
  bool listwise = false;
  std::string estimator = "bayes";
  std::size_t iterations = 20000;
  std::size_t burn_in = 15000;
  std::size_t thin = 1;
  std::size_t chains = 3;
  std::uint64_t seed = 0;
  double s01 = 0.01;
  double s02 = 0.01;
  bool store_persons = false;
  std::size_t jobs = 1;
  std::size_t checkpoint = 500;
  std::string config;
  std::string out;
  // MML
  double gamma0 = -1.0, gamma1 = 0.05, gamma2 = -0.1;
  double sigma_theta_tau = 0.0;
  double sigma2_tau = 1.0;
  std::size_t quad_points = 21;
  double tol = 1e-8;
  std::size_t max_iter = 200;
  bool no_missingness = false;

  CLI::App* app = nullptr;
  CLI::Option* seed_opt = nullptr;
};

bool given(const CLI::App* app, const std::string& name) { return app->count(name) > 0; }

int fit_mml_command(const FitArgs& a, const Dataset& data, std::ostream& out) {
  const Gammas gammas{a.gamma0, a.gamma1, a.gamma2};
  MmlConfig cfg;
  cfg.K = a.quad_points;
  cfg.tol = a.tol;
  cfg.max_iter = a.max_iter;
  cfg.include_missingness = !a.no_missingness;
  const auto start = std::chrono::steady_clock::now();
  const MmlEstimate est = fit_mml(data, gammas, a.sigma_theta_tau, a.sigma2_tau, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path dir(a.out);
  write_text(dir / "mml_estimates.csv",
             render([&](std::ostream& os) { write_mml_csv(os, est, data.item_ids()); }));
  json manifest = {{"tool", kToolName},
                   {"command", "fit"},
                   {"estimator", "mml"},
                   {"data", fs::absolute(a.data).string()},
                   {"dataset_hash", hex64(data.content_hash())},
                   {"n_persons", data.n_persons()},
                   {"n_items", data.n_items()},
                   {"gamma", {a.gamma0, a.gamma1, a.gamma2}},
                   {"sigma_theta_tau", a.sigma_theta_tau},
                   {"sigma2_tau", a.sigma2_tau},
                   {"include_missingness", cfg.include_missingness},
                   {"K", cfg.K},
                   {"tol", cfg.tol},
                   {"max_iter", cfg.max_iter},
                   {"iterations", est.n_iterations},
                   {"converged", est.converged},
                   {"gradient_norm", est.gradient_norm},
                   {"loglik", est.loglik},
                   {"wall_time_seconds", wall}};
  write_json(dir / "manifest.json", manifest);
  out << "MML " << (est.converged ? "converged" : "did not converge") << " after "
      << est.n_iterations << " iterations, loglik " << format_double(est.loglik) << "\n";
  return est.converged ? kExitOk : kExitNumerical;
}

int cmd_fit(FitArgs a, std::ostream& out, std::ostream& err) {
  SamplerConfig config;
  json replay;
  if (!a.config.empty()) {
    const json j = read_json(a.config);
    if (j.contains("command") && j.at("command") == "fit") {
      // A fit manifest: replay its settings.
      replay = j;
      config = sampler_config_from_json(j.at("config"));
      if (!given(a.app, "--data")) a.data = j.at("data").get<std::string>();
      if (!given(a.app, "--mode")) a.mode = j.at("mode").get<std::string>();
      if (!given(a.app, "--listwise")) a.listwise = j.at("listwise").get<bool>();
    } else {
      config = sampler_config_from_json(j);
    }
  } else {
    config.n_chains = a.chains;
  }
  if (a.data.empty()) throw std::invalid_argument("fit: --data is required");
  const Dataset data = read_dataset_csv(a.data);
  if (a.estimator == "mml") return fit_mml_command(a, data, out);
  if (a.estimator != "bayes") throw std::invalid_argument("unknown estimator '" + a.estimator + "'");

  if (given(a.app, "--iterations")) config.n_iterations = a.iterations;
  if (given(a.app, "--burn-in")) config.burn_in = a.burn_in;
  if (given(a.app, "--thin")) config.thin = a.thin;
  if (given(a.app, "--chains")) config.n_chains = a.chains;
  if (given(a.app, "--s01")) config.proposal_var_s01 = a.s01;
  if (given(a.app, "--s02")) config.proposal_var_s02 = a.s02;
  if (given(a.app, "--store-persons")) config.store_person_draws = a.store_persons;
  if (given(a.app, "--jobs")) config.jobs = a.jobs;
  if (given(a.app, "--checkpoint")) config.rhat_checkpoint = a.checkpoint;
  SeedChoice seed{config.seed, "config"};
  if (a.seed_opt->count()) {
    seed = {a.seed, "flag"};
  } else if (replay.is_null() && a.config.empty()) {
    seed = {entropy_seed(), "entropy"};
  }
  config.seed = seed.value;
  config.validate();

  ModelSpec spec;
  spec.mode = parse_mode(a.mode);
  const auto start = std::chrono::steady_clock::now();
  DrawStore draws;
  std::vector<std::size_t> retained;
  std::vector<std::string> item_ids = data.item_ids();
  if (a.listwise) {
    const CompleteCaseDataset cc = listwise_delete(data);
    retained = cc.person_index;
    err << "listwise deletion kept " << retained.size() << " of " << data.n_persons() << " persons\n";
    draws = fit_irt_only(cc, config);
  } else {
    draws = run_chains(data, spec, config);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const PosteriorSummary summary = summarize(draws);

  const fs::path dir(a.out);
  json outputs = json::array();
  for (const auto& chain : draws.chains) {
    const std::string name = "draws_chain" + std::to_string(chain.chain_id + 1) + ".csv";
    write_text(dir / name, render([&](std::ostream& os) { write_draws_csv(os, chain); }));
    outputs.push_back(name);
  }
  write_text(dir / "summary.csv", render([&](std::ostream& os) { write_summary_csv(os, summary); }));
  write_text(dir / "items.csv",
             render([&](std::ostream& os) { write_item_table_csv(os, summary, item_ids); }));
  outputs.push_back("summary.csv");
  outputs.push_back("items.csv");

  json manifest = {{"tool", kToolName},
                   {"command", "fit"},
                   {"estimator", "bayes"},
                   {"data", fs::absolute(a.data).string()},
                   {"dataset_hash", hex64(data.content_hash())},
                   {"n_persons", data.n_persons()},
                   {"n_items", data.n_items()},
                   {"missing_proportion", data.missing_proportion()},
                   {"mode", to_string(spec.mode)},
                   {"listwise", a.listwise},
                   {"config", to_json(config)},
                   {"seed_source", seed.source}};
  if (a.listwise) {
    manifest["retained_persons"] = retained.size();
  } else {
    write_text(dir / "structural.csv",
               render([&](std::ostream& os) { write_structural_csv(os, summary); }));
    outputs.push_back("structural.csv");
    const SelectionReport sel = selection_report(draws);
    write_json(dir / "selection.json", to_json(sel));
    outputs.push_back("selection.json");
    manifest["selection"] = to_json(sel);
    manifest["sigma_theta_tau_fixed"] = spec.mode == MissingnessMode::Ignorable;
    if (spec.mode == MissingnessMode::Ignorable) manifest["sigma_theta_tau_value"] = 0.0;
    json acceptance = json::array();
    for (const auto& c : draws.chains) {
      acceptance.push_back({{"chain", c.chain_id + 1},
                            {"sigma_theta_tau", c.acceptance_rate_sigma_theta_tau()},
                            {"sigma2_tau", c.acceptance_rate_sigma_tau_sq()}});
    }
    manifest["acceptance_rates"] = acceptance;
  }
  if (draws.n_chains() >= 2 && draws.chains.front().rows() >= 2) {
    const RhatReport rhat = rhat_report(draws, config.rhat_checkpoint);
    write_text(dir / "rhat_trace.csv", render([&](std::ostream& os) { write_rhat_trace_csv(os, rhat); }));
    outputs.push_back("rhat_trace.csv");
    manifest["rhat"] = {{"max", rhat.max_rhat()}, {"all_below_1_1", rhat.all_pass()}};
  }
  manifest["outputs"] = outputs;
  manifest["wall_time_seconds"] = wall;
  write_json(dir / "manifest.json", manifest);

  out << "fit " << (a.listwise ? "listwise" : to_string(spec.mode)) << ": " << draws.n_chains()
      << " chain(s) x " << draws.chains.front().rows() << " retained draws in "
      << std::fixed << std::setprecision(1) << wall << " s\n";
  if (manifest.contains("selection")) {
    out << "DIC " << format_double(manifest["selection"]["dic"].get<double>()) << ", LPML "
        << format_double(manifest["selection"]["lpml"].get<double>()) << "\n";
  }
  return kExitOk;
}

// ---- compare -------------------------------------------------------------

int cmd_compare(const std::string& non_path, const std::string& ign_path, const std::string& out_path,
                std::ostream& out) {
  auto load = [](const std::string& path) {
    const json j = read_json(path);
    try {
      return std::make_pair(j.at("dataset_hash").get<std::string>(), selection_from_json(j.at("selection")));
    } catch (const json::exception& e) {
      throw DataError(path + ": not a fit manifest with a selection report (" + e.what() + ")");
    }
  };
  const auto [hash_n, sel_n] = load(non_path);
  const auto [hash_i, sel_i] = load(ign_path);
  if (hash_n != hash_i) {
    throw DataError("the two fits were run on different datasets (hash " + hash_n + " vs " + hash_i + ")");
  }
  const ModelComparison c = compare(sel_n, sel_i);
  json decision = to_json(c);
  decision["dataset_hash"] = hash_n;
  decision["dic"] = {{"nonignorable", sel_n.dic}, {"ignorable", sel_i.dic}};
  decision["lpml"] = {{"nonignorable", sel_n.lpml}, {"ignorable", sel_i.lpml}};
  if (!out_path.empty()) write_json(out_path, decision);
  out << decision.dump(2) << "\n";
  return kExitOk;
}

// ---- recover -------------------------------------------------------------

struct RecoverArgs {
  std::size_t design = 1;
  double rho = 0.0;
  std::string method = "proposed";
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  std::size_t persons = 500;
  std::size_t items = 20;
  std::size_t iterations = 20000;
  std::size_t burn_in = 15000;
  std::size_t thin = 1;
  std::size_t jobs = 1;
  bool selection = false;
  std::string out;
  CLI::Option* seed_opt = nullptr;
};

int cmd_recover(const RecoverArgs& a, std::ostream& out, std::ostream& err) {
  SimDesign d = SimDesign::from_grid(a.design, a.rho);
  d.n_persons = a.persons;
  d.n_items = a.items;
  d.replications = a.reps;
  const SeedChoice seed = resolve_seed(a.seed_opt, a.seed);
  d.seed = seed.value;
  warn_replications(a.reps, err);
  SamplerConfig config;
  config.n_iterations = a.iterations;
  config.burn_in = a.burn_in;
  config.thin = a.thin;
  config.validate();

  std::vector<RecoveryMethod> methods;
  if (a.method == "both") {
    methods = {RecoveryMethod::Proposed, RecoveryMethod::Listwise};
  } else {
    methods = {parse_method(a.method)};
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<RecoveryReport> reports;
  json failures = json::array();
  for (RecoveryMethod m : methods) {
    reports.push_back(run_recovery_study(d, m, config, a.jobs));
    for (const auto& f : reports.back().failures) failures.push_back(to_string(m) + ": " + f);
  }
  const fs::path dir(a.out);
  write_text(dir / "recovery.csv", render([&](std::ostream& os) { write_recovery_csv(os, reports); }));
  json manifest = {{"tool", kToolName},    {"command", "recover"},  {"design", to_json(d)},
                   {"seed", d.seed},       {"seed_source", seed.source}, {"method", a.method},
                   {"config", to_json(config)}, {"failures", failures}};
  if (a.selection) {
    const auto rows = run_selection_study(d, config, a.jobs);
    write_text(dir / "selection_study.csv",
               render([&](std::ostream& os) { write_selection_study_csv(os, rows); }));
  }
  manifest["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "manifest.json", manifest);
  for (const auto& r : reports) {
    out << r.method << " (" << r.replications << " replications, missing proportion "
        << format_double(r.mean_missing_proportion) << ")\n";
    for (const auto& b : r.blocks) {
      out << "  " << std::left << std::setw(16) << b.parameter;
      if (b.available) {
        out << " bias " << std::showpos << std::fixed << std::setprecision(3) << b.bias
            << std::noshowpos << "  MAE " << b.mae << "\n";
      } else {
        out << " -\n";
      }
      out.unsetf(std::ios::floatfield);
    }
  }
  return failures.empty() ? kExitOk : kExitNumerical;
}

// ---- diagnose ------------------------------------------------------------

int cmd_diagnose(const std::vector<std::string>& paths, std::size_t checkpoint,
                 const std::string& out_dir, std::ostream& out) {
  if (paths.size() < 2) throw std::invalid_argument("diagnose needs at least two draws files");
  std::vector<DrawTable> tables;
  for (const auto& p : paths) tables.push_back(read_draws_csv(p));
  for (const auto& t : tables) {
    if (t.names != tables.front().names) throw DataError("draws files have different columns");
  }
  std::vector<std::vector<std::span<const double>>> chains(tables.size());
  for (std::size_t c = 0; c < tables.size(); ++c) {
    for (const auto& col : tables[c].columns) chains[c].emplace_back(col);
  }
  const RhatReport report = rhat_report(tables.front().names, chains, checkpoint);
  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    write_text(dir / "rhat_trace.csv", render([&](std::ostream& os) { write_rhat_trace_csv(os, report); }));
    write_text(dir / "rhat.csv", render([&](std::ostream& os) {
                 os << "parameter,rhat,pass\n";
                 for (const auto& e : report.entries) {
                   os << e.parameter << ',' << format_double(e.rhat) << ',' << (e.pass ? 1 : 0) << '\n';
                 }
               }));
  }
  std::size_t failing = 0;
  for (const auto& e : report.entries) {
    if (!e.pass) {
      ++failing;
      out << "  " << e.parameter << " R-hat " << format_double(e.rhat) << "\n";
    }
  }
  out << report.entries.size() << " parameters, max R-hat " << format_double(report.max_rhat())
      << ", " << failing << " at or above 1.1\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-parameter normal-ogive IRT with a selection model for omitted and not-reached responses",
               kToolName};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate simulated datasets from the design grid");
  simulate->add_option("--design", sim.design, "Design column 1-5")->capture_default_str();
  simulate->add_option("--rho", sim.rho, "Correlation of theta and tau")->capture_default_str();
  simulate->add_option("--reps", sim.reps, "Number of replications")->capture_default_str();
  sim.seed_opt = simulate->add_option("--seed", sim.seed, "Seed (entropy when omitted)");
  simulate->add_option("--persons", sim.persons)->capture_default_str();
  simulate->add_option("--items", sim.items)->capture_default_str();
  sim.g0_opt = simulate->add_option("--gamma0", sim.gamma0, "Override gamma0");
  sim.g1_opt = simulate->add_option("--gamma1", sim.gamma1, "Override gamma1");
  sim.g2_opt = simulate->add_option("--gamma2", sim.gamma2, "Override gamma2");
  simulate->add_option("--out", sim.out, "Output directory")->required();

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Fit a response CSV (0/1/NA, columns in administration order)");
  fit.app = fitc;
  fitc->add_option("--data", fit.data, "Response matrix CSV");
  fitc->add_option("--mode", fit.mode, "nonignorable or ignorable")->capture_default_str();
  fitc->add_flag("--listwise", fit.listwise, "Drop persons with any missing response and fit the plain 2PNO model");
  fitc->add_option("--estimator", fit.estimator, "bayes or mml")->capture_default_str();
  fitc->add_option("--iterations", fit.iterations)->capture_default_str();
  fitc->add_option("--burn-in", fit.burn_in)->capture_default_str();
  fitc->add_option("--thin", fit.thin)->capture_default_str();
  fitc->add_option("--chains", fit.chains)->capture_default_str();
  fit.seed_opt = fitc->add_option("--seed", fit.seed, "Seed (entropy when omitted)");
  fitc->add_option("--s01", fit.s01, "Proposal variance for sigma_theta_tau")->capture_default_str();
  fitc->add_option("--s02", fit.s02, "Proposal variance for sigma_tau^2")->capture_default_str();
  fitc->add_flag("--store-persons", fit.store_persons, "Keep theta/tau draws in the draws files");
  fitc->add_option("--jobs", fit.jobs, "Chains run concurrently")->capture_default_str();
  fitc->add_option("--checkpoint", fit.checkpoint, "R-hat trace spacing in retained draws")->capture_default_str();
  fitc->add_option("--config", fit.config, "Sampler settings JSON or a previous fit manifest to replay");
  fitc->add_option("--gamma0", fit.gamma0, "MML: fixed gamma0")->capture_default_str();
  fitc->add_option("--gamma1", fit.gamma1, "MML: fixed gamma1")->capture_default_str();
  fitc->add_option("--gamma2", fit.gamma2, "MML: fixed gamma2")->capture_default_str();
  fitc->add_option("--sigma-theta-tau", fit.sigma_theta_tau, "MML: fixed covariance")->capture_default_str();
  fitc->add_option("--sigma2-tau", fit.sigma2_tau, "MML: fixed tau variance")->capture_default_str();
  fitc->add_option("--quad-points", fit.quad_points, "MML: Gauss-Hermite points per dimension")->capture_default_str();
  fitc->add_option("--tol", fit.tol, "MML: convergence tolerance")->capture_default_str();
  fitc->add_option("--max-iter", fit.max_iter, "MML: iteration limit")->capture_default_str();
  fitc->add_flag("--no-missingness", fit.no_missingness, "MML: response part only");
  fitc->add_option("--out", fit.out, "Output directory")->required();

  std::string non_path, ign_path, decision_path;
  auto* comparec = app.add_subcommand("compare", "Compare a nonignorable and an ignorable fit");
  comparec->add_option("--nonignorable", non_path, "Manifest of the nonignorable fit")->required();
  comparec->add_option("--ignorable", ign_path, "Manifest of the ignorable fit")->required();
  comparec->add_option("--out", decision_path, "Decision JSON path");

  RecoverArgs rec;
  auto* recoverc = app.add_subcommand("recover", "Run a parameter recovery study");
  recoverc->add_option("--design", rec.design, "Design column 1-5")->capture_default_str();
  recoverc->add_option("--rho", rec.rho)->capture_default_str();
  recoverc->add_option("--method", rec.method, "proposed, listwise or both")->capture_default_str();
  recoverc->add_option("--reps", rec.reps)->capture_default_str();
  rec.seed_opt = recoverc->add_option("--seed", rec.seed, "Seed (entropy when omitted)");
  recoverc->add_option("--persons", rec.persons)->capture_default_str();
  recoverc->add_option("--items", rec.items)->capture_default_str();
  recoverc->add_option("--iterations", rec.iterations)->capture_default_str();
  recoverc->add_option("--burn-in", rec.burn_in)->capture_default_str();
  recoverc->add_option("--thin", rec.thin)->capture_default_str();
  recoverc->add_option("--jobs", rec.jobs, "Replications run concurrently")->capture_default_str();
  recoverc->add_flag("--selection", rec.selection, "Also fit both modes and record DIC/LPML differences");
  recoverc->add_option("--out", rec.out, "Output directory")->required();

  std::vector<std::string> draw_paths;
  std::size_t checkpoint = 500;
  std::string diag_out;
  auto* diagnosec = app.add_subcommand("diagnose", "Gelman-Rubin R-hat from two or more draws files");
  diagnosec->add_option("--draws", draw_paths, "Draws CSV per chain")->required();
  diagnosec->add_option("--checkpoint", checkpoint)->capture_default_str();
  diagnosec->add_option("--out", diag_out, "Output directory for the R-hat tables");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out, err);
    if (*fitc) return cmd_fit(fit, out, err);
    if (*comparec) return cmd_compare(non_path, ign_path, decision_path, out);
    if (*recoverc) return cmd_recover(rec, out, err);
    if (*diagnosec) return cmd_diagnose(draw_paths, checkpoint, diag_out, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace misirt
