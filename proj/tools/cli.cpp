#include "mixim/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "mixim/data.hpp"
#include "mixim/errors.hpp"
#include "mixim/gibbs.hpp"
#include "mixim/ilb.hpp"
#include "mixim/parallel.hpp"
#include "mixim/simbench.hpp"
#include "mixim/verification.hpp"

namespace mixim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int threads = default_threads();
  std::string out;
};

struct DataOptions {
  std::string input;
  std::vector<std::string> responses;  // NAME=KIND
  std::vector<std::string> covariates;
  std::string missing_token = "NA";
};

struct ChainOptions {
  int G = 7;
  double a = 0.0;  // 0 = 1/G
  long burn_in = 500;
  long keep = 1500;
  long thin = 1;
  long m = 10;
  std::string init = "single";
  bool standardize = true;
  long log_every = 0;
};

struct IlbOptions {
  std::string loss;
  long B = 500;
  long ilb_thin = 10;
  std::string source = "chain";
  double level = 0.95;
};

struct SimOptions {
  int scenario = 1;
  std::string mode = "continuous";
  long reps = 1;
  long population = 10000;
  long sample_size = 500;
  long B = 500;
  bool no_ilb = false;
  bool no_baselines = false;
};

struct CheckOptions {
  std::vector<std::string> suites{"all"};
  std::string inject_fault;
  bool quick = false;
};

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--input", d.input, "Input CSV with a header row")->required()->check(CLI::ExistingFile);
  app->add_option("--response", d.responses, "Response column as NAME=KIND (continuous, binary, count, count:a1;a2)")
      ->required();
  app->add_option("--covariate", d.covariates, "Covariate column (default: every non-response column)");
  app->add_option("--missing-token", d.missing_token, "Token marking a missing cell");
}

void add_chain_options(CLI::App* app, ChainOptions& c) {
  app->add_option("--G", c.G, "Number of mixture components")->check(CLI::PositiveNumber);
  app->add_option("--a", c.a, "Shrinkage concentration of the u prior (default 1/G)");
  app->add_option("--burn-in", c.burn_in, "Burn-in sweeps")->check(CLI::NonNegativeNumber);
  app->add_option("--keep", c.keep, "Sweeps kept after burn-in")->check(CLI::PositiveNumber);
  app->add_option("--thin", c.thin, "Keep every thin-th sweep")->check(CLI::PositiveNumber);
  app->add_option("--init", c.init, "Initial allocation")->check(CLI::IsMember({"single", "kmeans", "random"}));
  app->add_option("--standardize", c.standardize, "Centre and scale x and continuous y internally");
  app->add_option("--log-every", c.log_every, "Structured checkpoint log to stderr every N sweeps (0 = off)");
}

Schema make_schema(const DataOptions& d) {
  Schema s;
  s.covariates = d.covariates;
  s.missing_token = d.missing_token;
  for (const auto& r : d.responses) {
    const auto eq = r.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("cli", "response must be NAME=KIND, got '" + r + "'");
    s.responses.emplace_back(r.substr(0, eq), VariableKind::parse(r.substr(eq + 1)));
  }
  return s;
}

ChainConfig make_chain_config(const ChainOptions& c) {
  ChainConfig cfg;
  cfg.burn_in = c.burn_in;
  cfg.keep = c.keep;
  cfg.thin = c.thin;
  cfg.m_imputations = c.m;
  cfg.init = parse_init_strategy(c.init);
  cfg.standardize = c.standardize;
  cfg.log_every = c.log_every;
  return cfg;
}

PriorConfig make_prior(const ChainOptions& c, const Dataset& d) {
  PriorConfig prior = PriorConfig::defaults(c.G, d.p(), d.q());
  if (c.a != 0.0) prior.a = c.a;
  prior.validate(d.p(), d.q());
  return prior;
}

json data_json(const DataOptions& d) {
  return {{"input", fs::path(d.input).filename().string()},
          {"responses", d.responses},
          {"covariates", d.covariates},
          {"missing_token", d.missing_token}};
}

json chain_json(const ChainOptions& c, const PriorConfig& prior) {
  return {{"G", c.G},           {"a", prior.a},        {"burn_in", c.burn_in},         {"keep", c.keep},
          {"thin", c.thin},     {"init", c.init},      {"standardize", c.standardize}, {"nu", prior.nu},
          {"s_b", prior.s_b}};
}

fs::path ensure_out(const std::string& out) {
  if (out.empty()) throw ValidationError("cli", "--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cli", "cannot create output directory " + out + ": " + ec.message());
  return fs::path(out);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cli", "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// ---------------------------------------------------------------------------

int cmd_impute(const Common& common, const DataOptions& dopt, ChainOptions copt) {
  const Dataset data = read_dataset(dopt.input, make_schema(dopt));
  const auto prior = make_prior(copt, data);
  const auto cfg = make_chain_config(copt);
  cfg.validate();
  const fs::path out = ensure_out(common.out);
  const auto result = run_chain(data, copt.G, prior, cfg, RngStream(common.seed, 0));
  json config{{"command", "impute"}, {"data", data_json(dopt)}, {"chain", chain_json(copt, prior)}, {"m", copt.m}};
  write_imputations(result.draws, out, common.seed, config);
  result.diagnostics.write_trace_csv(out / "trace.csv");
  const auto& cd = *result.final_state.data;
  json params = to_json(result.final_params);
  params["scale"] = cfg.standardize ? "standardized" : "input";
  params["x_center"] = to_vector(cd.x_center);
  params["x_scale"] = to_vector(cd.x_scale);
  params["y_center"] = to_vector(cd.y_center);
  params["y_scale"] = to_vector(cd.y_scale);
  write_json(out / "final_params.json", params);
  write_json(out / "diagnostics.json", result.diagnostics.summary());
  std::cout << json{{"command", "impute"}, {"out", out.string()}, {"m", result.draws.m()},
                    {"mean_non_null_kept", result.diagnostics.mean_non_null_kept}}
                   .dump()
            << '\n';
  return kOk;
}

int cmd_ilb(const Common& common, const DataOptions& dopt, ChainOptions copt, const IlbOptions& iopt) {
  const Dataset data = read_dataset(dopt.input, make_schema(dopt));
  std::vector<std::string> columns = data.x_names;
  columns.insert(columns.end(), data.y_names.begin(), data.y_names.end());
  const LossSpec loss = parse_loss(iopt.loss, columns);
  validate_loss(loss, data.q() + data.p());
  if (iopt.B < 2) throw ValidationError("cli", "B must be >= 2");
  if (iopt.ilb_thin < 1) throw ValidationError("cli", "ilb-thin must be >= 1");
  if (!(iopt.level > 0.0 && iopt.level < 1.0)) throw ValidationError("cli", "level must lie in (0, 1)");
  const auto prior = make_prior(copt, data);
  copt.m = 1;
  const auto cfg = make_chain_config(copt);
  cfg.validate();
  const fs::path out = ensure_out(common.out);

  const RngStream root(common.seed, 0);
  std::unique_ptr<ImputationSource> source;
  std::string source_name = iopt.source;
  if (data.missing_count() == 0) {
    source = std::make_unique<CompleteDataSource>(data);
    source_name = "complete";
  } else if (iopt.source == "fixed") {
    auto cd = std::make_shared<const ChainData>(ChainData::from_dataset(data, cfg.standardize));
    ChainState st = init_state(cd, copt.G, prior, cfg, root.substream(1));
    for (long t = 0; t < cfg.burn_in; ++t) sweep(st, prior);
    source = std::make_unique<FixedParamsSource>(st, data);
  } else {
    source = std::make_unique<ChainSource>(data, copt.G, prior, cfg, iopt.ilb_thin, root.substream(1));
  }
  IlbConfig ic;
  ic.B = iopt.B;
  ic.threads = common.threads;
  const auto result = ilb_run(*source, data, loss, ic, root.substream(2));
  std::vector<std::string> names;
  if (std::holds_alternative<QuadraticRegressionLoss>(loss)) names = {"theta0", "theta1", "theta2"};
  write_ilb_csv(result, out / "ilb_samples.csv", names);
  json summary = ilb_summary_json(result, iopt.level);
  summary["loss_spec"] = loss_to_string(loss, columns);
  summary["seed"] = common.seed;
  summary["source"] = source_name;
  summary["config"] = {{"data", data_json(dopt)}, {"chain", chain_json(copt, prior)}, {"ilb_thin", iopt.ilb_thin}};
  write_json(out / "ilb_summary.json", summary);
  std::cout << json{{"command", "ilb"}, {"loss", summary["loss_spec"]}, {"mean", summary["mean"]},
                    {"interval", summary["interval"]}}
                   .dump()
            << '\n';
  return kOk;
}

int cmd_simulate(const Common& common, const ChainOptions& copt, const SimOptions& sopt) {
  ScenarioSpec spec;
  spec.id = sopt.scenario;
  spec.mode = parse_outcome_mode(sopt.mode);
  spec.population_size = sopt.population;
  spec.sample_size = sopt.sample_size;
  spec.validate();
  EngineConfig engine;
  engine.G = copt.G;
  if (copt.a != 0.0) engine.a = copt.a;
  engine.chain = make_chain_config(copt);
  engine.B = sopt.B;
  engine.run_ilb = !sopt.no_ilb;
  engine.run_baselines = !sopt.no_baselines;
  engine.threads = common.threads;
  engine.validate();
  if (sopt.reps < 1) throw ValidationError("cli", "reps must be >= 1");
  const fs::path out = ensure_out(common.out);
  const auto report = run_replications(spec, sopt.reps, engine, common.seed, [&](long r) {
    if (copt.log_every > 0) std::cerr << json{{"event", "replication_done"}, {"replication", r}}.dump() << '\n';
  });
  report.write_csv(out / "replications.csv");
  report.write_boxplot_csv(out / "boxplot.csv");
  write_json(out / "report.json", report.to_json());
  std::cout << json{{"command", "simulate"},
                    {"coverage", report.to_json()["coverage"]},
                    {"non_null_avg", report.non_null_avg()}}
                   .dump()
            << '\n';
  return kOk;
}

int cmd_check(const Common& common, const CheckOptions& opt) {
  VerificationOptions vo;
  vo.seed = common.seed;
  if (opt.inject_fault == "alpha_kappa_sign") {
    vo.fault.alpha_kappa_sign = true;
  } else if (!opt.inject_fault.empty()) {
    throw ValidationError("cli", "unknown fault '" + opt.inject_fault + "'");
  }
  if (opt.quick) {
    vo.sampler_draws = 200000;
    vo.geweke_chains = 200;
    vo.conjugate_keep = 5000;
    vo.prior_recovery_draws = 20000;
  }
  std::vector<std::string> suites;
  for (const auto& s : opt.suites) {
    if (s == "all") {
      const auto all = suite_names();
      suites.insert(suites.end(), all.begin(), all.end());
    } else {
      suites.push_back(s);
    }
  }
  bool ok = true;
  json all = json::array();
  for (const auto& s : suites) {
    const auto rep = run_suite(s, vo);
    for (const auto& c : rep.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << s << " " << c.name << " : " << c.detail << '\n';
    ok = ok && rep.passed();
    all.push_back(rep.to_json());
  }
  if (!common.out.empty()) write_json(ensure_out(common.out) / "check.json", {{"seed", vo.seed}, {"suites", all}});
  std::cout << (ok ? "check passed" : "check FAILED") << '\n';
  return ok ? kOk : kRuntime;
}

void report_error(const std::string& module, const std::string& message) {
  std::cerr << json{{"event", "error"}, {"module", module}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Bayesian multiple imputation with sparse conditional Gaussian mixtures", "mixim"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; flags override its values");
  app.allow_config_extras(false);
  Common common;
  app.add_option("--seed", common.seed, "Random seed");
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", common.out, "Output directory");

  DataOptions impute_data, ilb_data;
  ChainOptions impute_chain, ilb_chain, sim_chain;
  IlbOptions ilb_opt;
  SimOptions sim_opt;
  CheckOptions check_opt;
  sim_chain.keep = 1000;

  auto* impute = app.add_subcommand("impute", "Fit the mixture and write m completed datasets");
  add_data_options(impute, impute_data);
  add_chain_options(impute, impute_chain);
  impute->add_option("--m", impute_chain.m, "Number of completed datasets")->check(CLI::PositiveNumber);

  auto* ilb = app.add_subcommand("ilb", "Imputed loss-likelihood bootstrap for a loss-defined parameter");
  add_data_options(ilb, ilb_data);
  add_chain_options(ilb, ilb_chain);
  ilb->add_option("--loss", ilb_opt.loss, "mean:COL, quantile:COL:TAU or quadreg:YCOL:XCOL")->required();
  ilb->add_option("--B", ilb_opt.B, "Bootstrap replicates");
  ilb->add_option("--ilb-thin", ilb_opt.ilb_thin, "Sweeps between successive imputations");
  ilb->add_option("--source", ilb_opt.source, "Imputation source")->check(CLI::IsMember({"chain", "fixed"}));
  ilb->add_option("--level", ilb_opt.level, "Credible level");

  auto* simulate = app.add_subcommand("simulate", "Scenario replication harness");
  add_chain_options(simulate, sim_chain);
  simulate->add_option("--scenario", sim_opt.scenario, "Scenario 1-4")->check(CLI::Range(1, 4));
  simulate->add_option("--mode", sim_opt.mode, "Outcome mode")->check(CLI::IsMember({"continuous", "mixed"}));
  simulate->add_option("--reps", sim_opt.reps, "Replications")->check(CLI::PositiveNumber);
  simulate->add_option("--population", sim_opt.population, "Finite population size");
  simulate->add_option("--sample-size", sim_opt.sample_size, "Sample size");
  simulate->add_option("--B", sim_opt.B, "ILB replicates per replication");
  simulate->add_flag("--no-ilb", sim_opt.no_ilb, "Skip the ILB intervals");
  simulate->add_flag("--no-baselines", sim_opt.no_baselines, "Skip the baseline imputers");

  auto* check = app.add_subcommand("check", "Run statistical verification suites");
  check->add_option("--suite", check_opt.suites, "samplers, geweke, conjugate, prior_recovery or all")
      ->check(CLI::IsMember({"all", "samplers", "geweke", "conjugate", "prior_recovery"}));
  check->add_flag("--quick", check_opt.quick, "Smaller sample sizes");
  check->add_option("--inject-fault", check_opt.inject_fault)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("cli", e.what());
    return kValidation;
  }

  try {
    if (*impute) return cmd_impute(common, impute_data, impute_chain);
    if (*ilb) return cmd_ilb(common, ilb_data, ilb_chain, ilb_opt);
    if (*simulate) return cmd_simulate(common, sim_chain, sim_opt);
    if (*check) return cmd_check(common, check_opt);
  } catch (const ValidationError& e) {
    report_error(e.module(), e.what());
    return kValidation;
  } catch (const Error& e) {
    report_error(e.module(), e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    report_error("cli", e.what());
    return kRuntime;
  }
  return kValidation;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace mixim::cli
