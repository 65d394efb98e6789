#include "splitee/cli.hpp"

#include "splitee/activity.hpp"
#include "splitee/errors.hpp"
#include "splitee/io.hpp"
#include "splitee/model_zoo.hpp"
#include "splitee/sim_harness.hpp"
#include "splitee/stacked.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <set>

namespace splitee::cli {

namespace fs = std::filesystem;

std::vector<std::string> known_models() { return {"mean", "linear", "logistic", "activity"}; }

TwoStageSystem make_named_system(const std::string& model, const Dataset& data,
                                 std::vector<std::string> covariates) {
  if (model == "activity") {
    if (covariates.empty()) {
      std::set<std::string> reserved{"W", "Y", "score"};
      for (const auto& c : activity::component_names()) reserved.insert(c);
      for (const auto& name : data.names()) {
        if (!reserved.count(name)) covariates.push_back(name);
      }
    }
    return activity::make_activity_system(data, std::move(covariates));
  }
  for (const auto& name : pair_model_names()) {
    if (name == model) return make_pair_system(parse_pair_model(model));
  }
  std::string known;
  for (const auto& m : known_models()) known += (known.empty() ? "" : ", ") + m;
  fail(ErrorKind::InvalidArgument, "unknown model '" + model + "'; known models: " + known);
}

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  double level = 0.95;
  int threads = 0;
  int max_iterations = SolverConfig{}.max_iterations;
  double tolerance = SolverConfig{}.residual_tolerance;

  SolverConfig solver() const {
    SolverConfig cfg;
    cfg.max_iterations = max_iterations;
    cfg.residual_tolerance = tolerance;
    cfg.validate();
    return cfg;
  }
};

std::uint64_t resolve_seed(const Common& common, std::ostream& out) {
  if (common.seed) return *common.seed;
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  out << "seed: " << seed << " (generated; pass --seed " << seed << " to reproduce)\n";
  return seed;
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) fail(ErrorKind::FileNotFound, "cannot open '" + path + "'");
}

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::FileNotFound, "cannot create directory '" + dir + "'");
}

void prepare_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) prepare_dir(parent.string());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FileNotFound, "cannot write '" + path + "'");
  return out;
}

std::vector<std::string> coordinate_names(const TwoStageSystem& system) {
  std::vector<std::string> names = system.theta_names;
  names.insert(names.end(), system.beta_names.begin(), system.beta_names.end());
  return names;
}

void write_estimates(const std::string& path, const TwoStageSystem& system, const Vector& estimate,
                     const Vector& se, const std::vector<Interval>& intervals) {
  auto out = open_out(path);
  out << "parameter,estimate,se,lower,upper\n";
  const auto names = coordinate_names(system);
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto k = static_cast<Index>(j);
    out << names[j] << ',' << format_double(estimate[k]) << ',' << format_double(se[k]) << ','
        << format_double(intervals[j].lower) << ',' << format_double(intervals[j].upper) << '\n';
  }
}

void write_matrix(const std::string& path, const std::vector<std::string>& names, const Matrix& m) {
  auto out = open_out(path);
  out << "parameter";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
}

void print_estimates(std::ostream& out, const TwoStageSystem& system, const Vector& estimate,
                     const Vector& se, const std::vector<Interval>& intervals, double level) {
  const auto names = coordinate_names(system);
  out << "parameter estimate se lower upper (level " << format_double(level) << ")\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto k = static_cast<Index>(j);
    out << names[j] << ' ' << format_double(estimate[k]) << ' ' << format_double(se[k]) << ' '
        << format_double(intervals[j].lower) << ' ' << format_double(intervals[j].upper) << '\n';
  }
}

Dataset load_bound(const std::string& input, const std::string& model,
                   const std::vector<std::string>& covariates, TwoStageSystem& system) {
  const Dataset raw = read_csv(input);
  system = make_named_system(model, raw, covariates);
  return system.bind(raw);
}

void validate_model_name(const std::string& model, const std::vector<std::string>& allowed) {
  for (const auto& m : allowed) {
    if (m == model) return;
  }
  std::string known;
  for (const auto& m : allowed) known += (known.empty() ? "" : ", ") + m;
  fail(ErrorKind::InvalidArgument, "unknown model '" + model + "'; known models: " + known);
}

// ---- subcommands ---------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string model;
  std::vector<std::string> covariates;
  std::string output_dir;
  std::string splits_file;
  double pi = 0.5;
  Index B = 1;
};

int cmd_fit(const FitArgs& a, const Common& c, std::ostream& out) {
  validate_model_name(a.model, known_models());
  require_file(a.input);
  if (!a.splits_file.empty()) require_file(a.splits_file);
  prepare_dir(a.output_dir);
  const SolverConfig cfg = c.solver();

  TwoStageSystem system;
  const Dataset data = load_bound(a.input, a.model, a.covariates, system);
  SplitAssignment splits;
  if (!a.splits_file.empty()) {
    splits = read_splits(a.splits_file);
  } else {
    if (a.B < 1) fail(ErrorKind::InvalidArgument, "B must be >= 1");
    const std::uint64_t seed = resolve_seed(c, out);
    splits = generate_valid_splits(data.rows(), a.B, a.pi, seed,
                                   default_split_rule(system.dim_theta(), system.dim_beta()));
  }

  const SplitSampleFit fit = fit_split_sample(system, data, splits, cfg, c.threads);
  const Vector est = fit.stacked_estimate();
  const Vector se = fit.covariance.standard_errors();
  const auto intervals = fit.intervals(c.level);

  const fs::path dir(a.output_dir);
  write_estimates((dir / "estimates.csv").string(), system, est, se, intervals);
  write_matrix((dir / "covariance.csv").string(), coordinate_names(system), fit.covariance.cov);
  {
    auto f = open_out((dir / "per_split.csv").string());
    write_per_split_csv(f, system, fit.estimate.per_split);
  }
  out << "model: " << system.name << ", n: " << data.rows() << ", B: " << splits.B()
      << ", B_used: " << fit.estimate.B_used << '\n';
  for (const auto& s : fit.estimate.per_split) {
    if (s.failed) out << "split " << s.b << " failed: " << s.failure << '\n';
  }
  print_estimates(out, system, est, se, intervals, c.level);
  return 0;
}

struct StackedArgs {
  std::string input;
  std::string model;
  std::vector<std::string> covariates;
  std::string output_dir;
};

int cmd_stacked(const StackedArgs& a, const Common& c, std::ostream& out) {
  validate_model_name(a.model, known_models());
  require_file(a.input);
  prepare_dir(a.output_dir);
  const SolverConfig cfg = c.solver();

  TwoStageSystem system;
  const Dataset data = load_bound(a.input, a.model, a.covariates, system);
  const StackedEstimate st = fit_stacked(system, data, cfg);
  const Vector est = st.estimate();
  const Vector se = st.standard_errors();
  const auto intervals = st.intervals(c.level);

  const fs::path dir(a.output_dir);
  write_estimates((dir / "estimates.csv").string(), system, est, se, intervals);
  write_matrix((dir / "covariance.csv").string(), coordinate_names(system), st.cov);
  out << "model: " << system.name << ", n: " << data.rows() << " (stacked)\n";
  print_estimates(out, system, est, se, intervals, c.level);
  return 0;
}

struct SimulateArgs {
  std::string model;
  Index n = 1000;
  std::string output;
};

int cmd_simulate(const SimulateArgs& a, const Common& c, std::ostream& out) {
  validate_model_name(a.model, known_models());
  prepare_parent(a.output);
  const std::uint64_t seed = resolve_seed(c, out);
  const Dataset data = a.model == "activity"
                           ? activity::simulate_activity(activity::ActivitySimSpec::defaults(), a.n, seed)
                           : simulate_pair(parse_pair_model(a.model), a.n, seed);
  write_csv(a.output, data);
  out << "wrote " << data.rows() << " rows to " << a.output << '\n';
  return 0;
}

struct CoverageArgs {
  std::string model = "linear";
  std::vector<Index> n_list{50, 100, 250, 500, 1000};
  std::vector<Index> B_list{1, 25};
  Index reps = 2000;
  double pi = 0.5;
  std::string target;
  bool stacked = false;
  std::string output_dir;
};

int cmd_coverage(const CoverageArgs& a, const Common& c, std::ostream& out) {
  validate_model_name(a.model, pair_model_names());
  prepare_dir(a.output_dir);
  CoverageConfig cfg;
  cfg.model = parse_pair_model(a.model);
  cfg.n_list = a.n_list;
  cfg.B_list = a.B_list;
  cfg.replications = a.reps;
  cfg.pi = a.pi;
  cfg.level = c.level;
  cfg.target = a.target;
  cfg.include_stacked = a.stacked;
  cfg.threads = c.threads;
  cfg.solver = c.solver();
  cfg.validate();
  cfg.master_seed = resolve_seed(c, out);

  const CoverageReport report = run_coverage(cfg);
  const fs::path dir(a.output_dir);
  {
    auto f = open_out((dir / "replications.csv").string());
    write_replications_csv(f, report);
  }
  {
    auto f = open_out((dir / "summary.csv").string());
    write_summary_csv(f, report);
  }
  {
    auto f = open_out((dir / "summary.txt").string());
    write_summary_text(f, report);
  }
  write_summary_text(out, report);
  return 0;
}

struct ScoreBuildArgs {
  std::string input;
  std::vector<std::string> covariates;
  std::string output;
  double pi = 1.0;
};

int cmd_score_build(const ScoreBuildArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  require_file(a.input);
  prepare_parent(a.output);
  if (!(a.pi > 0.0 && a.pi <= 1.0)) fail(ErrorKind::InvalidArgument, "pi must lie in (0, 1]");
  const SolverConfig cfg = c.solver();

  TwoStageSystem system;
  const Dataset data = load_bound(a.input, "activity", a.covariates, system);
  Vector weights = Vector::Ones(data.rows());
  if (a.pi < 1.0) {
    const std::uint64_t seed = resolve_seed(c, out);
    weights = generate_valid_splits(data.rows(), 1, a.pi, seed,
                                    default_split_rule(system.dim_theta(), system.dim_beta()))
                  .column(0);
  }
  ParamEstimate fit;
  try {
    fit = solve_weighted(system.stage1, data, weights, system.stage1_start(data, weights, cfg), cfg);
  } catch (const Error& e) {
    throw e.with_context(1, std::nullopt);
  }
  if (!fit.converged) fail(ErrorKind::InvalidArgument, "score model did not converge");

  ScoreFile file;
  file.covariates.assign(system.columns.begin() + 2 + activity::kComponents, system.columns.end());
  file.params = activity::ActivityScoreParams::from_theta(fit.value);
  const auto ranges = activity::ObservedRanges::from_dataset(data);
  file.scaling = activity::build_score_scaling(file.params, ranges);
  for (const auto& w : activity::check_shapes(file.params, ranges).warnings) {
    err << "warning: " << w << '\n';
  }
  write_score_file(a.output, file);
  out << "score model: n = " << data.rows() << ", fitted rows = " << (weights.array() > 0).count()
      << ", iterations = " << fit.iterations << ", T = " << format_double(file.scaling.total) << '\n';
  const auto& names = activity::component_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    out << names[k] << ": max points " << format_double(file.scaling.maximum[k] * file.scaling.factor)
        << " at " << format_double(file.scaling.argmax[k]) << '\n';
  }
  return 0;
}

struct ScoreApplyArgs {
  std::string input;
  std::string params;
  std::string output;
};

int cmd_score_apply(const ScoreApplyArgs& a, std::ostream& out) {
  require_file(a.input);
  require_file(a.params);
  prepare_parent(a.output);
  const ScoreFile file = read_score_file(a.params);
  const Dataset data = read_csv(a.input);
  const auto& comps = activity::component_names();
  const Dataset x = data.select(std::vector<std::string>(comps.begin(), comps.end()));

  std::vector<std::string> names = data.names();
  const auto existing = data.find("score");
  if (!existing) names.push_back("score");
  RowMatrix values(data.rows(), static_cast<Index>(names.size()));
  values.leftCols(data.cols()) = data.values();
  const Index col = existing ? *existing : data.cols();
  for (Index i = 0; i < data.rows(); ++i) {
    activity::ActivityRecord rec;
    for (Index k = 0; k < activity::kComponents; ++k) rec[static_cast<std::size_t>(k)] = x.row(i)[k];
    values(i, col) = activity::score(rec, file.params, file.scaling);
  }
  write_csv(a.output, Dataset(std::move(names), std::move(values)));
  out << "scored " << data.rows() << " rows to " << a.output << '\n';
  return 0;
}

struct BSweepArgs {
  std::string input;
  std::string model;
  std::vector<std::string> covariates;
  Index B_max = 50;
  double pi = 0.5;
  std::string target;
  std::string output;
  std::string per_split;
};

int cmd_b_sweep(const BSweepArgs& a, const Common& c, std::ostream& out) {
  validate_model_name(a.model, known_models());
  require_file(a.input);
  prepare_parent(a.output);
  if (!a.per_split.empty()) prepare_parent(a.per_split);
  const SolverConfig cfg = c.solver();

  TwoStageSystem system;
  const Dataset data = load_bound(a.input, a.model, a.covariates, system);
  const Index target = a.target.empty() ? system.dim_theta() : coordinate_index(system, a.target);
  const std::uint64_t seed = resolve_seed(c, out);
  const BSweepReport report =
      run_b_sweep(system, data, a.B_max, a.pi, seed, c.level, target, cfg, c.threads);
  {
    auto f = open_out(a.output);
    write_b_sweep_csv(f, report);
  }
  if (!a.per_split.empty()) {
    auto f = open_out(a.per_split);
    write_per_split_csv(f, system, report.per_split);
  }
  const auto& last = report.rows.back();
  out << report.target_name << ": B = " << last.B << ", running mean "
      << format_double(last.running_mean) << ", interval [" << format_double(last.interval.lower)
      << ", " << format_double(last.interval.upper) << "]\n";
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool seeded) {
  if (seeded) sub->add_option("--seed", c.seed, "Master seed (generated and printed when absent)");
  sub->add_option("--level", c.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--threads", c.threads, "Worker threads (0: all available)");
  sub->add_option("--max-iter", c.max_iterations, "Newton iteration limit");
  sub->add_option("--tol", c.tolerance, "Residual tolerance (inf-norm)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Split-sample two-stage M-estimation"};
  app.name("splitee");
  app.set_config("--config", "", "TOML/INI file of option values (flags take precedence)");
  app.require_subcommand(1);

  Common common;

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Multi-split fit with influence-based intervals");
  fit_cmd->add_option("--input", fit.input, "Observation CSV")->required();
  fit_cmd->add_option("--model", fit.model, "mean | linear | logistic | activity")->required();
  fit_cmd->add_option("--covariates", fit.covariates, "Activity model covariate columns")->delimiter(',');
  fit_cmd->add_option("--output-dir", fit.output_dir, "Directory for estimates/covariance/per-split CSVs")
      ->required();
  fit_cmd->add_option("--pi", fit.pi, "First-stage membership probability");
  fit_cmd->add_option("--B", fit.B, "Number of splits");
  fit_cmd->add_option("--splits", fit.splits_file, "CSV of 0/1 split indicators (one column per split)");
  add_common(fit_cmd, common, true);

  StackedArgs stacked;
  auto* stacked_cmd = app.add_subcommand("stacked", "Full-data stacked estimating-equation fit");
  stacked_cmd->add_option("--input", stacked.input, "Observation CSV")->required();
  stacked_cmd->add_option("--model", stacked.model, "mean | linear | logistic | activity")->required();
  stacked_cmd->add_option("--covariates", stacked.covariates, "Activity model covariate columns")
      ->delimiter(',');
  stacked_cmd->add_option("--output-dir", stacked.output_dir, "Directory for output CSVs")->required();
  add_common(stacked_cmd, common, false);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a synthetic dataset");
  sim_cmd->add_option("--model", sim.model, "mean | linear | logistic | activity")->required();
  sim_cmd->add_option("--n", sim.n, "Rows")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--output", sim.output, "Output CSV")->required();
  add_common(sim_cmd, common, true);

  CoverageArgs cov;
  auto* cov_cmd = app.add_subcommand("coverage", "Monte Carlo interval coverage study");
  cov_cmd->add_option("--model", cov.model, "mean | linear | logistic");
  cov_cmd->add_option("--n", cov.n_list, "Sample sizes")->delimiter(',');
  cov_cmd->add_option("--b,--B", cov.B_list, "Split counts")->delimiter(',');
  cov_cmd->add_option("--reps", cov.reps, "Replications per cell");
  cov_cmd->add_option("--pi", cov.pi, "First-stage membership probability");
  cov_cmd->add_option("--target", cov.target, "Coordinate to cover (default: first beta)");
  cov_cmd->add_flag("--stacked", cov.stacked, "Also record the stacked interval");
  cov_cmd->add_option("--output-dir", cov.output_dir, "Directory for report files")->required();
  add_common(cov_cmd, common, true);

  ScoreBuildArgs build;
  auto* build_cmd = app.add_subcommand("score-build", "Fit the activity score and write its parameter file");
  build_cmd->add_option("--input", build.input, "Activity CSV")->required();
  build_cmd->add_option("--covariates", build.covariates, "Covariate columns")->delimiter(',');
  build_cmd->add_option("--output", build.output, "Parameter file (JSON)")->required();
  build_cmd->add_option("--pi", build.pi, "Fit on a Bernoulli(pi) subset (1: all rows)");
  add_common(build_cmd, common, true);

  ScoreApplyArgs apply;
  auto* apply_cmd = app.add_subcommand("score-apply", "Append a 0-100 score column");
  apply_cmd->add_option("--input", apply.input, "Activity CSV")->required();
  apply_cmd->add_option("--params", apply.params, "Parameter file from score-build")->required();
  apply_cmd->add_option("--output", apply.output, "Scored CSV")->required();

  BSweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("b-sweep", "Running mean and interval as B grows");
  sweep_cmd->add_option("--input", sweep.input, "Observation CSV")->required();
  sweep_cmd->add_option("--model", sweep.model, "mean | linear | logistic | activity")->required();
  sweep_cmd->add_option("--covariates", sweep.covariates, "Activity model covariate columns")
      ->delimiter(',');
  sweep_cmd->add_option("--b-max,--B-max", sweep.B_max, "Largest B")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--pi", sweep.pi, "First-stage membership probability");
  sweep_cmd->add_option("--target", sweep.target, "Coordinate (default: first beta)");
  sweep_cmd->add_option("--output", sweep.output, "Curve CSV (B, running_mean, se, lower, upper)")
      ->required();
  sweep_cmd->add_option("--per-split", sweep.per_split, "Per-split estimates CSV");
  add_common(sweep_cmd, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, common, out);
    if (stacked_cmd->parsed()) return cmd_stacked(stacked, common, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, common, out);
    if (cov_cmd->parsed()) return cmd_coverage(cov, common, out);
    if (build_cmd->parsed()) return cmd_score_build(build, common, out, err);
    if (apply_cmd->parsed()) return cmd_score_apply(apply, out);
    if (sweep_cmd->parsed()) return cmd_b_sweep(sweep, common, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"splitee"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace splitee::cli
