#include "splitee/sim_harness.hpp"

#include "splitee/errors.hpp"
#include "splitee/io.hpp"
#include "splitee/seeding.hpp"
#include "splitee/stacked.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace splitee {

const char* to_string(PairModel model) {
  switch (model) {
    case PairModel::Mean: return "mean";
    case PairModel::Linear: return "linear";
    case PairModel::Logistic: return "logistic";
  }
  return "unknown";
}

std::vector<std::string> pair_model_names() { return {"mean", "linear", "logistic"}; }

PairModel parse_pair_model(const std::string& name) {
  if (name == "mean") return PairModel::Mean;
  if (name == "linear") return PairModel::Linear;
  if (name == "logistic") return PairModel::Logistic;
  fail(ErrorKind::InvalidArgument, "unknown model '" + name + "'; known models: mean, linear, logistic");
}

TwoStageSystem make_pair_system(PairModel model) {
  switch (model) {
    case PairModel::Mean: return make_mean_pair();
    case PairModel::Linear: return make_linear_pair();
    case PairModel::Logistic: return make_logistic_pair();
  }
  fail(ErrorKind::InvalidArgument, "unknown model");
}

Dataset simulate_pair(PairModel model, Index n, std::uint64_t seed) {
  switch (model) {
    case PairModel::Mean: return simulate_mean({}, n, seed);
    case PairModel::Linear: return simulate_linear({}, n, seed);
    case PairModel::Logistic: return simulate_logistic({}, n, seed);
  }
  fail(ErrorKind::InvalidArgument, "unknown model");
}

Vector pair_truth(PairModel model) {
  if (model == PairModel::Mean) {
    const MeanPairSpec spec;
    return Vector{{spec.theta, spec.beta}};
  }
  Vector theta;
  double beta0 = 0.0;
  if (model == PairModel::Linear) {
    const LinearPairSpec spec;
    theta = spec.theta;
    beta0 = spec.beta0;
  } else {
    const LogisticPairSpec spec;
    theta = spec.theta;
    beta0 = spec.beta0;
  }
  Vector out(theta.size() + 1);
  out << theta, beta0;
  return out;
}

Index coordinate_index(const TwoStageSystem& system, const std::string& name) {
  for (std::size_t j = 0; j < system.theta_names.size(); ++j) {
    if (system.theta_names[j] == name) return static_cast<Index>(j);
  }
  for (std::size_t j = 0; j < system.beta_names.size(); ++j) {
    if (system.beta_names[j] == name) return system.dim_theta() + static_cast<Index>(j);
  }
  std::string known;
  for (const auto& n : system.theta_names) known += (known.empty() ? "" : ", ") + n;
  for (const auto& n : system.beta_names) known += ", " + n;
  fail(ErrorKind::InvalidArgument, "unknown coordinate '" + name + "'; known: " + known);
}

std::string coordinate_name(const TwoStageSystem& system, Index index) {
  if (index < 0 || index >= system.dim_total()) {
    fail(ErrorKind::InvalidArgument, "coordinate index out of range");
  }
  if (index < system.dim_theta()) return system.theta_names[static_cast<std::size_t>(index)];
  return system.beta_names[static_cast<std::size_t>(index - system.dim_theta())];
}

void CoverageConfig::validate() const {
  if (replications < 1) fail(ErrorKind::InvalidArgument, "replications must be >= 1");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
  if (!(pi > 0.0 && pi < 1.0)) fail(ErrorKind::InvalidArgument, "pi must lie in (0, 1)");
  if (n_list.empty() || B_list.empty()) fail(ErrorKind::InvalidArgument, "n and B lists must be nonempty");
  for (Index n : n_list) {
    if (n < 2) fail(ErrorKind::InvalidArgument, "sample sizes must be >= 2");
  }
  for (Index B : B_list) {
    if (B < 1) fail(ErrorKind::InvalidArgument, "split counts must be >= 1");
  }
  solver.validate();
}

std::uint64_t coverage_data_seed(std::uint64_t master, Index n, Index rep) {
  return derive_seed(master, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)});
}

std::uint64_t coverage_split_seed(std::uint64_t master, Index n, Index rep, Index B) {
  return derive_seed(master, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep),
                              static_cast<std::uint64_t>(B), 1});
}

const CoverageCell& CoverageReport::cell(Index n, Index B) const {
  for (const auto& c : cells) {
    if (c.n == n && c.B == B) return c;
  }
  fail(ErrorKind::InvalidArgument, "no cell n=" + std::to_string(n) + ", B=" + std::to_string(B));
}

namespace {

ReplicationRecord run_replication(const CoverageConfig& config, const TwoStageSystem& system,
                                  Index target, double truth, Index n, Index B, Index rep) {
  ReplicationRecord r;
  r.n = n;
  r.B = B;
  r.rep = rep;
  r.data_seed = coverage_data_seed(config.master_seed, n, rep);
  r.split_seed = coverage_split_seed(config.master_seed, n, rep, B);

  const Dataset data = simulate_pair(config.model, n, r.data_seed);
  try {
    const SplitRule rule = default_split_rule(system.dim_theta(), system.dim_beta());
    const SplitAssignment splits = generate_valid_splits(n, B, config.pi, r.split_seed, rule);
    const SplitSampleFit fit = fit_split_sample(system, data, splits, config.solver, 1);
    r.failed_splits = static_cast<Index>(fit.estimate.failed_splits().size());
    r.estimate = fit.stacked_estimate()[target];
    const double var = fit.covariance.cov(target, target);
    r.interval = wald_interval(r.estimate, var, config.level);
    r.se = std::sqrt(var);
    if (!std::isfinite(r.estimate) || !std::isfinite(r.interval.lower) ||
        !std::isfinite(r.interval.upper)) {
      fail(ErrorKind::NonFiniteEvaluation, "non-finite estimate or interval");
    }
    r.hit = r.interval.contains(truth);
  } catch (const std::exception& e) {
    r.failed = true;
    r.failure = e.what();
    r.estimate = r.se = 0.0;
    r.interval = {};
    r.hit = false;
  }

  if (config.include_stacked) {
    try {
      const StackedEstimate st = fit_stacked(system, data, config.solver);
      r.stacked_estimate = st.estimate()[target];
      r.stacked_interval = wald_interval(r.stacked_estimate, st.cov(target, target), config.level);
      if (!std::isfinite(r.stacked_interval.lower) || !std::isfinite(r.stacked_interval.upper)) {
        fail(ErrorKind::NonFiniteEvaluation, "non-finite stacked interval");
      }
      r.stacked_hit = r.stacked_interval.contains(truth);
    } catch (const std::exception&) {
      r.stacked_failed = true;
      r.stacked_estimate = 0.0;
      r.stacked_interval = {};
      r.stacked_hit = false;
    }
  }
  return r;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

CoverageCell summarize_cell(const CoverageReport& report, Index n, Index B) {
  CoverageCell c;
  c.n = n;
  c.B = B;
  double width = 0.0;
  for (const auto& r : report.records) {
    if (r.n != n || r.B != B) continue;
    if (r.failed) {
      ++c.failures;
    } else {
      ++c.successes;
      c.hits += r.hit ? 1 : 0;
      width += r.interval.width();
    }
    if (report.config.include_stacked && !r.stacked_failed) {
      ++c.stacked_successes;
      c.stacked_hits += r.stacked_hit ? 1 : 0;
    }
  }
  if (c.successes > 0) {
    const double p = static_cast<double>(c.hits) / static_cast<double>(c.successes);
    c.coverage = 100.0 * p;
    c.mc_se = 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(c.successes));
    c.mean_width = width / static_cast<double>(c.successes);
  }
  if (c.stacked_successes > 0) {
    c.stacked_coverage =
        100.0 * static_cast<double>(c.stacked_hits) / static_cast<double>(c.stacked_successes);
  }
  const Index total = c.successes + c.failures;
  c.unstable = (report.config.model == PairModel::Logistic && n < 100) ||
               static_cast<double>(c.failures) > 0.01 * static_cast<double>(total);
  return c;
}

CoverageReport run_coverage(const CoverageConfig& config) {
  config.validate();
  const TwoStageSystem system = make_pair_system(config.model);

  CoverageReport report;
  report.config = config;
  report.target_index = config.target.empty() ? system.dim_theta()
                                              : coordinate_index(system, config.target);
  report.truth = pair_truth(config.model)[report.target_index];

  struct Item {
    Index n, B, rep;
  };
  std::vector<Item> items;
  for (Index n : config.n_list) {
    for (Index B : config.B_list) {
      for (Index rep = 0; rep < config.replications; ++rep) items.push_back({n, B, rep});
    }
  }
  report.records.resize(items.size());

  const Index count = static_cast<Index>(items.size());
#ifdef _OPENMP
  const int nthreads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#endif
  for (Index k = 0; k < count; ++k) {
    const Item& it = items[static_cast<std::size_t>(k)];
    report.records[static_cast<std::size_t>(k)] = run_replication(
        config, system, report.target_index, report.truth, it.n, it.B, it.rep);
  }

  for (Index n : config.n_list) {
    for (Index B : config.B_list) report.cells.push_back(summarize_cell(report, n, B));
  }
  return report;
}

void write_replications_csv(std::ostream& out, const CoverageReport& report) {
  const bool stacked = report.config.include_stacked;
  out << "n,B,rep,data_seed,split_seed,failed,failed_splits,estimate,se,lower,upper,hit";
  if (stacked) out << ",stacked_failed,stacked_estimate,stacked_lower,stacked_upper,stacked_hit";
  out << ",failure\n";
  for (const auto& r : report.records) {
    out << r.n << ',' << r.B << ',' << r.rep << ',' << r.data_seed << ',' << r.split_seed << ','
        << (r.failed ? 1 : 0) << ',' << r.failed_splits << ',' << format_double(r.estimate) << ','
        << format_double(r.se) << ',' << format_double(r.interval.lower) << ','
        << format_double(r.interval.upper) << ',' << (r.hit ? 1 : 0);
    if (stacked) {
      out << ',' << (r.stacked_failed ? 1 : 0) << ',' << format_double(r.stacked_estimate) << ','
          << format_double(r.stacked_interval.lower) << ','
          << format_double(r.stacked_interval.upper) << ',' << (r.stacked_hit ? 1 : 0);
    }
    out << ',' << sanitize(r.failure) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const CoverageReport& report) {
  const bool stacked = report.config.include_stacked;
  const TwoStageSystem system = make_pair_system(report.config.model);
  out << "model,target,truth,level,n,B,replications,successes,failures,hits,coverage,mc_se,"
         "mean_width,unstable";
  if (stacked) out << ",stacked_successes,stacked_hits,stacked_coverage";
  out << '\n';
  for (const auto& c : report.cells) {
    out << to_string(report.config.model) << ',' << coordinate_name(system, report.target_index)
        << ',' << format_double(report.truth) << ',' << format_double(report.config.level) << ','
        << c.n << ',' << c.B << ',' << (c.successes + c.failures) << ',' << c.successes << ','
        << c.failures << ',' << c.hits << ',' << format_double(c.coverage) << ','
        << format_double(c.mc_se) << ',' << format_double(c.mean_width) << ','
        << (c.unstable ? 1 : 0);
    if (stacked) {
      out << ',' << c.stacked_successes << ',' << c.stacked_hits << ','
          << format_double(c.stacked_coverage);
    }
    out << '\n';
  }
}

void write_summary_text(std::ostream& out, const CoverageReport& report) {
  const auto& cfg = report.config;
  const TwoStageSystem system = make_pair_system(cfg.model);
  out << "model: " << to_string(cfg.model) << '\n'
      << "target: " << coordinate_name(system, report.target_index) << " = "
      << format_double(report.truth) << '\n'
      << "level: " << format_double(cfg.level) << '\n'
      << "pi: " << format_double(cfg.pi) << '\n'
      << "replications: " << cfg.replications << '\n'
      << "master_seed: " << cfg.master_seed << '\n'
      << "cells:\n";
  for (const auto& c : report.cells) {
    out << "  - n: " << c.n << ", B: " << c.B << ", coverage: " << format_double(c.coverage)
        << ", mc_se: " << format_double(c.mc_se) << ", mean_width: " << format_double(c.mean_width)
        << ", failures: " << c.failures;
    if (cfg.include_stacked) out << ", stacked_coverage: " << format_double(c.stacked_coverage);
    if (c.unstable) out << ", unstable: true";
    out << '\n';
  }
}

BSweepReport run_b_sweep(const TwoStageSystem& system, const Dataset& data, Index B_max, double pi,
                         std::uint64_t seed, double level, Index target_index,
                         const SolverConfig& config, int threads) {
  if (B_max < 1) fail(ErrorKind::InvalidArgument, "B_max must be >= 1");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
  BSweepReport out;
  out.target_index = target_index;
  out.target_name = coordinate_name(system, target_index);
  out.level = level;
  out.splits = generate_valid_splits(data.rows(), B_max, pi, seed,
                                     default_split_rule(system.dim_theta(), system.dim_beta()));

  // Fit every split (in parallel) and form its influence rows; the prefix
  // accumulation below is sequential in b.
  const auto count = static_cast<std::size_t>(B_max);
  out.per_split.resize(count);
  std::vector<Matrix> rows(count);
  std::vector<std::optional<Error>> errors(count);
#ifdef _OPENMP
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#endif
  for (Index b = 0; b < B_max; ++b) {
    const auto u = static_cast<std::size_t>(b);
    try {
      SplitEstimate est = fit_single_split(system, data, out.splits.column(b), config, b);
      if (est.failed) fail(ErrorKind::InvalidArgument, "split " + std::to_string(b) + ": " + est.failure);
      rows[u] = influence_rows_single(system, data, out.splits.column(b), est.theta_hat,
                                      est.beta_hat, config);
      out.per_split[u] = std::move(est);
    } catch (const Error& e) {
      errors[u] = e;
    }
  }
  (void)threads;
  for (const auto& e : errors) {
    if (e) throw *e;
  }

  InfluenceAccumulator acc(data.rows(), system.dim_total());
  double sum = 0.0;
  for (Index b = 0; b < B_max; ++b) {
    const auto u = static_cast<std::size_t>(b);
    const auto& est = out.per_split[u];
    sum += target_index < system.dim_theta() ? est.theta_hat[target_index]
                                             : est.beta_hat[target_index - system.dim_theta()];
    acc.add(rows[u]);
    const SandwichCovariance cov = sandwich_covariance(acc.mean());
    BSweepRow row;
    row.B = b + 1;
    row.running_mean = sum / static_cast<double>(b + 1);
    const double var = cov.cov(target_index, target_index);
    row.se = std::sqrt(std::max(0.0, var));
    row.interval = wald_interval(row.running_mean, var, level);
    out.rows.push_back(row);
  }
  out.final_mean = out.rows.back().running_mean;
  return out;
}

void write_b_sweep_csv(std::ostream& out, const BSweepReport& report) {
  out << "B,running_mean,se,lower,upper\n";
  for (const auto& r : report.rows) {
    out << r.B << ',' << format_double(r.running_mean) << ',' << format_double(r.se) << ','
        << format_double(r.interval.lower) << ',' << format_double(r.interval.upper) << '\n';
  }
}

void write_per_split_csv(std::ostream& out, const TwoStageSystem& system,
                         const std::vector<SplitEstimate>& per_split) {
  out << "b,failed";
  for (const auto& n : system.theta_names) out << ',' << n;
  for (const auto& n : system.beta_names) out << ',' << n;
  out << '\n';
  for (const auto& s : per_split) {
    out << s.b << ',' << (s.failed ? 1 : 0);
    for (Index j = 0; j < system.dim_theta(); ++j) {
      out << ',' << format_double(s.failed ? 0.0 : s.theta_hat[j]);
    }
    for (Index j = 0; j < system.dim_beta(); ++j) {
      out << ',' << format_double(s.failed ? 0.0 : s.beta_hat[j]);
    }
    out << '\n';
  }
}

}  // namespace splitee
