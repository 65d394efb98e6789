// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "oracles.hpp"
#include "splitee/activity.hpp"
#include "splitee/cli.hpp"
#include "splitee/io.hpp"
#include "splitee/model_zoo.hpp"
#include "splitee/seeding.hpp"
#include "splitee/sim_harness.hpp"
#include "splitee/stacked.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace splitee;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMasterSeed = 1;
constexpr Index kReplications = 2000;
constexpr double kLinearTolerance = 2.0;    // percentage points
constexpr double kLogisticTolerance = 2.5;  // percentage points

// Published coverage (%), keyed by (n, B).
const std::map<std::pair<Index, Index>, double> kLinearTable{
    {{50, 1}, 92.60},   {{50, 25}, 90.45},   {{100, 1}, 93.70},  {{100, 25}, 92.85},
    {{250, 1}, 94.90},  {{250, 25}, 94.15},  {{500, 1}, 94.70},  {{500, 25}, 95.15},
    {{1000, 1}, 95.10}, {{1000, 25}, 94.95}};
const std::map<std::pair<Index, Index>, double> kLogisticTable{
    {{100, 1}, 88.95}, {{100, 25}, 85.40}, {{250, 1}, 93.85},  {{250, 25}, 90.40},
    {{500, 1}, 93.40}, {{500, 25}, 94.00}, {{1000, 1}, 94.20}, {{1000, 25}, 94.55}};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void report(int id, const Outcome& o, std::vector<bool>& all) {
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  all.push_back(o.pass);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CoverageReport table_run(PairModel model, std::vector<Index> n_list) {
  CoverageConfig cfg;
  cfg.model = model;
  cfg.n_list = std::move(n_list);
  cfg.B_list = {1, 25};
  cfg.replications = kReplications;
  cfg.master_seed = kMasterSeed;
  return run_coverage(cfg);
}

void print_cells(const CoverageReport& r, const std::map<std::pair<Index, Index>, double>& table) {
  for (const auto& c : r.cells) {
    const auto it = table.find({c.n, c.B});
    std::cout << "    n=" << c.n << " B=" << c.B << " coverage=" << fmt(c.coverage) << " mc_se="
              << fmt(c.mc_se, 3) << " failures=" << c.failures
              << (it != table.end() ? " reference=" + fmt(it->second) : std::string(" reference=none"))
              << (c.unstable ? " unstable" : "") << '\n';
  }
}

Outcome compare_table(const CoverageReport& r, const std::map<std::pair<Index, Index>, double>& table,
                      double tolerance) {
  Outcome o;
  double worst = 0.0;
  for (const auto& [key, reference] : table) {
    const CoverageCell& c = r.cell(key.first, key.second);
    const double diff = std::abs(c.coverage - reference);
    worst = std::max(worst, diff);
    if (diff > tolerance) {
      o.pass = false;
      o.detail += "n=" + std::to_string(key.first) + ",B=" + std::to_string(key.second) + " off by " +
                  fmt(diff, 3) + "; ";
    }
  }
  o.detail += "max |coverage - reference| = " + fmt(worst, 3) + " points (tolerance " + fmt(tolerance, 2) +
              ", " + std::to_string(kReplications) + " replications)";
  return o;
}

// ---- criterion 4 -----------------------------------------------------------

Outcome stacked_equivalence() {
  const TwoStageSystem sys = make_linear_pair();
  int below = 0;
  std::vector<double> gap2, gap200;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const Dataset data = simulate_linear({}, 2000, derive_seed(kMasterSeed, {4, k, 0}));
    const StackedEstimate st = fit_stacked(sys, data);
    const SplitAssignment splits = generate_valid_splits(2000, 200, 0.5, derive_seed(kMasterSeed, {4, k, 1}),
                                                         default_split_rule(3, 1));
    const AggregatedEstimate agg = fit_multi_split(sys, data, splits);
    const EquivalenceReport r200 = equivalence_gap(agg, st, 0.5);
    if (r200.gap_relative_to_se < 0.5) ++below;
    gap200.push_back(r200.gap_relative_to_se);
    const IndicatorMatrix two = splits.indicators.leftCols(2);
    gap2.push_back(equivalence_gap(fit_multi_split(sys, data, SplitAssignment::from_indicators(two)), st, 0.5)
                       .gap_relative_to_se);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[24] + v[25]);
  };
  const double m2 = median(gap2), m200 = median(gap200);
  Outcome o;
  o.pass = below >= 45 && m200 < m2;
  o.detail = "gap < 0.5 SE in " + std::to_string(below) + "/50 runs (need 45); median gap/SE " + fmt(m200, 3) +
             " at B=200 vs " + fmt(m2, 3) + " at B=2";
  return o;
}

// ---- criterion 5 -----------------------------------------------------------

Outcome oracle_equivalence() {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    // Linear: stacked and single split vs normal equations.
    const Dataset lin = simulate_linear({}, 60, derive_seed(kMasterSeed, {5, k}));
    const Matrix X = lin.values().rightCols(3);
    const Vector W = lin.column("W"), Y = lin.column("Y");
    const StackedEstimate st = fit_stacked(make_linear_pair(), lin);
    const auto full = oracle::linear_two_stage(X, W, Y, Vector::Ones(60));
    worst = std::max(worst, (st.theta_hat - full.theta).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(st.beta_hat[0] - full.beta));
    const Vector delta =
        generate_valid_splits(60, 1, 0.5, derive_seed(kMasterSeed, {5, k, 1}), default_split_rule(3, 1)).column(0);
    const SplitEstimate one = fit_single_split(make_linear_pair(), lin, delta);
    const auto half = oracle::linear_two_stage(X, W, Y, delta);
    worst = std::max(worst, (one.theta_hat - half.theta).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(one.beta_hat[0] - half.beta));

    // Logistic: theta by IRLS on the first part, beta by IRLS on f at that theta.
    const LogisticPairSpec spec;
    const Dataset logi = simulate_logistic(spec, 400, derive_seed(kMasterSeed, {5, k, 2}));
    const Vector d2 =
        generate_valid_splits(400, 1, 0.5, derive_seed(kMasterSeed, {5, k, 3}), default_split_rule(3, 1)).column(0);
    const SplitEstimate ls = fit_single_split(make_logistic_pair(spec), logi, d2);
    const Matrix LX = logi.values().rightCols(3);
    const Vector theta = oracle::irls_logistic(oracle::rows_where(LX, d2, 1.0),
                                               oracle::rows_where(logi.column("W"), d2, 1.0).col(0));
    const Matrix X0 = oracle::rows_where(LX, d2, 0.0);
    Matrix F(X0.rows(), 1);
    F.col(0) = (spec.a + spec.c * (X0 * theta).array().square()).matrix();
    const Vector beta = oracle::irls_logistic(F, oracle::rows_where(logi.column("Y"), d2, 0.0).col(0));
    worst = std::max(worst, (ls.theta_hat - theta).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(ls.beta_hat[0] - beta[0]));
  }
  Outcome o;
  o.pass = worst <= 1e-8;
  o.detail = "max |library - oracle| = " + fmt(worst, 3) + " over 10 linear and 10 logistic instances (tolerance 1e-8)";
  return o;
}

// ---- criterion 6 -----------------------------------------------------------

Outcome variance_checks(const CoverageReport& linear) {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Index n = 20 + static_cast<Index>(k) * 7;
    const Dataset data = simulate_mean({}, n, derive_seed(kMasterSeed, {6, k}));
    const Vector delta =
        generate_valid_splits(n, 1, 0.5, derive_seed(kMasterSeed, {6, k, 1}), default_split_rule(1, 1)).column(0);
    const SplitEstimate est = fit_single_split(make_mean_pair(), data, delta);
    const Matrix rows = influence_rows_single(make_mean_pair(), data, delta, est.theta_hat, est.beta_hat);
    const double sandwich = sandwich_covariance(rows).cov(0, 0);
    worst = std::max(worst, std::abs(sandwich - oracle::split_mean_variance(data.column("W"), delta)));
  }

  // Linear n = 1000, B = 25: mean sandwich variance against the Monte Carlo
  // variance of the estimates over the replications of the coverage run.
  std::vector<double> est, var;
  for (const auto& r : linear.records) {
    if (r.n != 1000 || r.B != 25 || r.failed) continue;
    est.push_back(r.estimate);
    var.push_back(r.se * r.se);
  }
  const Vector e = Eigen::Map<const Vector>(est.data(), static_cast<Index>(est.size()));
  const double mc = oracle::sample_variance(e);
  double mean_sandwich = 0.0;
  for (double v : var) mean_sandwich += v;
  mean_sandwich /= static_cast<double>(var.size());
  const double ratio = mean_sandwich / mc;

  Outcome o;
  o.pass = worst <= 1e-10 && std::abs(ratio - 1.0) <= 0.25;
  o.detail = "mean-pair max |sandwich - split-mean formula| = " + fmt(worst, 3) +
             " (tolerance 1e-10); linear n=1000 B=25 sandwich/MC variance = " + fmt(ratio, 4) + " over " +
             std::to_string(est.size()) + " replications (tolerance 25%)";
  return o;
}

// ---- criterion 7 -----------------------------------------------------------

std::vector<Vector> probes(const Vector& center, Index count, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vector> out;
  for (Index k = 0; k < count; ++k) {
    Vector v = center;
    for (Index j = 0; j < v.size(); ++j) v[j] += scale * normal(rng);
    out.push_back(v);
  }
  return out;
}

Outcome jacobian_checks() {
  std::string detail;
  double worst = 0.0;
  auto run = [&](const std::string& name, const TwoStageSystem& sys, const Dataset& data,
                 const Vector& theta, const Vector& beta, double scale) {
    const auto check = check_system_jacobians(sys, data, probes(theta, 100, scale, 71), probes(beta, 100, scale, 72));
    worst = std::max(worst, check.worst());
    detail += name + " " + fmt(check.worst(), 2) + " (" + std::to_string(check.probes) + " probes); ";
  };
  const Vector truth3 = Vector::Constant(3, 1.0 / std::sqrt(3.0));
  const Vector beta1 = Vector::Constant(1, 1.0 / std::sqrt(3.0));
  run("mean", make_mean_pair(), simulate_mean({}, 100, 1), Vector::Constant(1, 1.0), Vector::Constant(1, 2.0), 1.0);
  run("linear", make_linear_pair(), simulate_linear({}, 100, 1), truth3, beta1, 0.5);
  run("logistic", make_logistic_pair(), simulate_logistic({}, 100, 1), truth3, beta1, 0.5);
  const Dataset raw = activity::simulate_activity(activity::ActivitySimSpec::defaults(), 2000, 1);
  const TwoStageSystem act = activity::make_activity_system(raw, {"sex", "age"});
  run("activity", act, act.bind(raw), activity::ActivitySimSpec::defaults().truth.to_theta(),
      Vector{{-0.03, 0.3, 0.3, 0.5}}, 0.05);
  Outcome o;
  o.pass = worst <= 1e-5;
  o.detail = "max relative error vs central differences: " + detail + "tolerance 1e-5";
  return o;
}

// ---- criterion 8 -----------------------------------------------------------

Outcome score_properties() {
  using namespace activity;
  const Dataset raw = simulate_activity(ActivitySimSpec::defaults(), 20000, derive_seed(kMasterSeed, {8}));
  const TwoStageSystem sys = make_activity_system(raw, {"sex", "age"});
  const Dataset data = sys.bind(raw);
  const Vector w = Vector::Ones(data.rows());
  const ParamEstimate fit = solve_weighted(sys.stage1, data, w, sys.stage1_start(data, w, {}));
  const ActivityScoreParams params = ActivityScoreParams::from_theta(fit.value);
  const ObservedRanges ranges = ObservedRanges::from_dataset(data);
  const ScoreScaling scaling = build_score_scaling(params, ranges);

  bool in_range = true;
  double row_max = 0.0;
  for (Index i = 0; i < data.rows(); ++i) {
    ActivityRecord x{};
    for (Index k = 0; k < kComponents; ++k) x[static_cast<std::size_t>(k)] = data.row(i)[2 + k];
    const double s = score(x, params, scaling);
    in_range = in_range && s >= 0.0 && s <= 100.0;
    row_max = std::max(row_max, s);
  }
  const double top = score(optimal_record(scaling), params, scaling);

  // Z-invariance through the second-stage regressor.
  bool z_invariant = true;
  RowMatrix shifted = data.values();
  shifted.col(data.cols() - 1).array() -= 2.0;
  shifted.col(data.cols() - 2).array() = 1.0 - shifted.col(data.cols() - 2).array();
  const Dataset other(data.names(), shifted);
  Vector theta_z = fit.value;
  theta_z.tail(3).array() += 1.0;
  for (Index i = 0; i < 2000; ++i) {
    const double a = sys.stage2.transform->value(data.row(i), fit.value);
    z_invariant = z_invariant && a == sys.stage2.transform->value(other.row(i), fit.value) &&
                  a == sys.stage2.transform->value(data.row(i), theta_z);
  }

  bool monotone = true;
  double half_err = 0.0;
  for (Index j = 0; j < kAerobic; ++j) {
    const double hi = ranges.max(j);
    double prev = marginal(j, 0.0, params);
    for (int g = 1; g <= 1000; ++g) {
      const double v = marginal(j, hi * g / 1000.0, params);
      monotone = monotone && v >= prev;
      prev = v;
    }
    const auto u = static_cast<std::size_t>(j);
    half_err = std::max(half_err, std::abs(marginal(j, params.c[u], params) - params.d[u] / 2.0));
  }

  Outcome o;
  o.pass = fit.converged && in_range && std::abs(top - 100.0) <= 1e-9 && z_invariant && monotone &&
           half_err <= 1e-12;
  o.detail = std::string("fitted on n=20000: scores in [0,100] ") + (in_range ? "yes" : "NO") +
             "; all-optimal record scores " + fmt(top, 17) + " (row max " + fmt(row_max, 4) +
             "); Z-invariant " + (z_invariant ? "yes" : "NO") + "; aerobic nondecreasing " +
             (monotone ? "yes" : "NO") + "; max |marginal(c) - d/2| = " + fmt(half_err, 2);
  return o;
}

// ---- criterion 9 -----------------------------------------------------------

struct CliRun {
  int code = 0;
  std::string out;
  std::map<std::string, std::string> files;
};

CliRun run_cli(std::vector<std::string> args, const fs::path& dir, const std::vector<std::string>& files) {
  for (auto& a : args) {
    const auto pos = a.find("@OUT");
    if (pos != std::string::npos) a.replace(pos, 4, dir.string());
  }
  fs::create_directories(dir);
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  for (const auto& f : files) r.files[f] = testutil::slurp(dir / f);
  // Paths differ between runs; compare everything else.
  std::string::size_type p;
  while ((p = r.out.find(dir.string())) != std::string::npos) r.out.replace(p, dir.string().size(), "@OUT");
  return r;
}

Outcome cli_determinism() {
  const fs::path root = testutil::temp_dir("acceptance");
  write_csv((root / "linear.csv").string(), simulate_linear({}, 400, 3));
  write_csv((root / "activity.csv").string(),
            activity::simulate_activity(activity::ActivitySimSpec::defaults(), 20000, 4));
  write_csv((root / "logistic.csv").string(), simulate_logistic({}, 400, 5));
  const std::string lin = (root / "linear.csv").string();
  const std::string logi = (root / "logistic.csv").string();
  const std::string act = (root / "activity.csv").string();

  // Build a parameter file once so score-apply has input.
  {
    std::ostringstream o, e;
    cli::run({"score-build", "--input", act, "--output", (root / "params.json").string(), "--threads", "1"}, o, e);
  }
  const std::string params = (root / "params.json").string();

  struct Command {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::string> files;
    bool threaded = true;
  };
  const std::vector<Command> commands{
      {"fit", {"fit", "--input", lin, "--model", "linear", "--B", "25", "--seed", "9", "--output-dir", "@OUT"},
       {"estimates.csv", "covariance.csv", "per_split.csv"}},
      {"stacked", {"stacked", "--input", logi, "--model", "logistic", "--output-dir", "@OUT"}, {"estimates.csv", "covariance.csv"}},
      {"simulate", {"simulate", "--model", "logistic", "--n", "500", "--seed", "9", "--output", "@OUT/d.csv"}, {"d.csv"}},
      {"coverage",
       {"coverage", "--model", "logistic", "--n", "100,250", "--B", "1,5", "--reps", "50", "--stacked", "--seed",
        "9", "--output-dir", "@OUT"},
       {"replications.csv", "summary.csv", "summary.txt"}},
      {"score-build", {"score-build", "--input", act, "--pi", "0.5", "--seed", "9", "--output", "@OUT/p.json"}, {"p.json"}},
      {"score-apply", {"score-apply", "--input", act, "--params", params, "--output", "@OUT/s.csv"}, {"s.csv"}, false},
      {"b-sweep",
       {"b-sweep", "--input", act, "--model", "activity", "--B-max", "8", "--seed", "9", "--output", "@OUT/c.csv",
        "--per-split", "@OUT/p.csv"},
       {"c.csv", "p.csv"}},
  };

  Outcome o;
  int k = 0;
  for (const auto& c : commands) {
    std::vector<CliRun> runs;
    for (const char* threads : {"1", "1", "4", "4"}) {
      std::vector<std::string> args = c.args;
      if (c.threaded) {
        args.push_back("--threads");
        args.push_back(threads);
      }
      runs.push_back(run_cli(args, root / ("run" + std::to_string(k++)), c.files));
    }
    bool same = runs[0].code == 0;
    for (const auto& r : runs) same = same && r.code == runs[0].code && r.out == runs[0].out && r.files == runs[0].files;
    for (const auto& f : c.files) same = same && !runs[0].files.at(f).empty();
    o.pass = o.pass && same;
    o.detail += c.name + (same ? " ok" : " DIFFERS") + "; ";
  }
  o.detail += "each command run twice at 1 thread and twice at 4 threads";
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  std::vector<bool> results;
  const auto t0 = std::chrono::steady_clock::now();

  const CoverageReport linear = table_run(PairModel::Linear, {50, 100, 250, 500, 1000});
  std::cout << "linear coverage (" << fmt(seconds_since(t0), 3) << " s)\n";
  print_cells(linear, kLinearTable);
  report(1, compare_table(linear, kLinearTable, kLinearTolerance), results);

  const auto t1 = std::chrono::steady_clock::now();
  const CoverageReport logistic = table_run(PairModel::Logistic, {50, 100, 250, 500, 1000});
  std::cout << "logistic coverage (" << fmt(seconds_since(t1), 3) << " s)\n";
  print_cells(logistic, kLogisticTable);
  {
    Outcome o = compare_table(logistic, kLogisticTable, kLogisticTolerance);
    const CoverageCell& a = logistic.cell(50, 1);
    const CoverageCell& b = logistic.cell(50, 25);
    const bool flagged = a.unstable && b.unstable;
    o.pass = o.pass && flagged;
    o.detail += "; n=50 reported with " + std::to_string(a.failures) + "/" + std::to_string(b.failures) +
                " failures (B=1/25), flagged unstable " + (flagged ? "yes" : "NO");
    report(2, o, results);
  }

  {
    Outcome o;
    for (Index B : {1, 25}) {
      const CoverageCell& c = linear.cell(50, B);
      const bool below = 95.0 - c.coverage > c.mc_se;
      o.pass = o.pass && below;
      o.detail += "B=" + std::to_string(B) + ": 95 - " + fmt(c.coverage) + " = " + fmt(95.0 - c.coverage, 3) +
                  (below ? " > " : " <= ") + "MC SE " + fmt(c.mc_se, 3) + "; ";
    }
    report(3, o, results);
  }

  report(4, stacked_equivalence(), results);
  report(5, oracle_equivalence(), results);
  report(6, variance_checks(linear), results);
  report(7, jacobian_checks(), results);
  report(8, score_properties(), results);
  report(9, cli_determinism(), results);

  const auto passed = std::count(results.begin(), results.end(), true);
  std::cout << passed << "/" << results.size() << " criteria passed (" << fmt(seconds_since(t0), 4) << " s)\n";
  return passed == static_cast<long>(results.size()) ? 0 : 1;
}
