#include "mixim/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mixim/csv.hpp"
#include "mixim/distributions.hpp"
#include "mixim/errors.hpp"
#include "mixim/ilb.hpp"
#include "mixim/parallel.hpp"
#include "mixim/stats.hpp"

namespace mixim {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Population scenario1(long N, RngStream& rng) {
  Eigen::Matrix4d sigma;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sigma(i, j) = 3.0 * std::pow(-0.5, std::abs(i - j));
  const Eigen::Matrix4d L = sigma.llt().matrixL();
  const Eigen::Vector4d mu1(2, 4, 1, 0), mu2(-2, 7, -3, 0);
  Population pop;
  pop.data.x.resize(N, 2);
  pop.y_star.resize(N, 2);
  for (Index i = 0; i < N; ++i) {
    const bool second = rng.uniform() < 0.6;
    Eigen::Vector4d e;
    for (int k = 0; k < 4; ++k) e[k] = rng.normal();
    const Eigen::Vector4d v = (second ? mu2 : mu1) + L * e;
    pop.y_star(i, 0) = v[0];
    pop.y_star(i, 1) = v[1];
    pop.data.x(i, 0) = v[2];
    pop.data.x(i, 1) = v[3];
  }
  return pop;
}

Population scenario234(int id, long N, RngStream& rng) {
  const double lambda[4] = {0.2, 0.3, 0.2, 0.3};
  const Eigen::Vector2d mu[4] = {{-1, 0.5}, {1, 1}, {0.5, -1}, {0, 0}};
  Eigen::Matrix2d cov;
  cov << 0.5, 0.1, 0.1, 0.5;
  const Eigen::Matrix2d L = cov.llt().matrixL();
  Population pop;
  pop.data.x.resize(N, 2);
  pop.y_star.resize(N, 2);
  VectorXd u1(N), u2(N);
  for (Index i = 0; i < N; ++i) {
    const int g = sample_categorical(std::span<const double>(lambda, 4), rng);
    const Eigen::Vector2d e(rng.normal(), rng.normal());
    const Eigen::Vector2d x = mu[g] + L * e;
    pop.data.x.row(i) = x.transpose();
    u1[i] = 1.0 + 2.0 * x[0] + x[1] + rng.normal();
    u2[i] = 1.0 + x[0] + 2.0 * x[1] + rng.normal();
  }
  const double c1 = stats::quantile(std::vector<double>(u1.data(), u1.data() + N), 0.6);
  const double c2 = stats::quantile(std::vector<double>(u2.data(), u2.data() + N), 0.6);
  for (Index i = 0; i < N; ++i) {
    const double x1 = pop.data.x(i, 0), x2 = pop.data.x(i, 1);
    const double e1 = id == 4 ? rng.gamma(1.0) : rng.normal();
    const double e2 = id == 4 ? rng.gamma(1.0) : rng.normal();
    const bool hi1 = u1[i] > c1, hi2 = u2[i] > c2;
    if (id == 2) {
      pop.y_star(i, 0) = (hi1 ? 2.0 + x1 + x2 : -2.0 + 0.5 * x1 - x2) + e1;
      pop.y_star(i, 1) = (hi2 ? 10.0 - x1 - x2 : 6.0 - 0.5 * x1 + 2.0 * x2) + e2;
    } else {
      pop.y_star(i, 0) = (hi1 ? 2.0 + x1 * x1 + x2 * x2 : -2.0 + 0.5 * x1 - x2 * x2) + e1;
      pop.y_star(i, 1) = (hi2 ? 10.0 - x1 * x1 - x2 : 6.0 - 0.5 * x1 + 2.0 * x2 * x2) + e2;
    }
  }
  return pop;
}

std::vector<double> nan_vector(Index p) { return std::vector<double>(static_cast<std::size_t>(p), kNaN); }

Index missing_in_column(const Mask& mask, Index column) {
  Index m = 0;
  for (Index i = 0; i < mask.rows(); ++i) m += mask(i, column) == 0;
  if (m == 0) throw ValidationError("simbench", "column " + std::to_string(column) + " has no missing cells");
  return m;
}

}  // namespace

std::string to_string(OutcomeMode mode) { return mode == OutcomeMode::Continuous ? "continuous" : "mixed"; }

OutcomeMode parse_outcome_mode(const std::string& text) {
  if (text == "continuous") return OutcomeMode::Continuous;
  if (text == "mixed") return OutcomeMode::Mixed;
  throw ValidationError("simbench", "unknown outcome mode '" + text + "'");
}

void ScenarioSpec::validate() const {
  if (id < 1 || id > 4) throw ValidationError("simbench", "scenario id must be 1..4");
  if (sample_size < 1 || population_size < sample_size) {
    throw ValidationError("simbench", "need 1 <= sample_size <= population_size");
  }
}

nlohmann::json ScenarioSpec::to_json() const {
  return {{"id", id}, {"mode", to_string(mode)}, {"population_size", population_size}, {"sample_size", sample_size}};
}

Population generate_scenario(const ScenarioSpec& spec, RngStream& rng) {
  spec.validate();
  Population pop = spec.id == 1 ? scenario1(spec.population_size, rng)
                                : scenario234(spec.id, spec.population_size, rng);
  auto& d = pop.data;
  d.x_names = {"x1", "x2"};
  d.y_names = {"y1", "y2"};
  d.delta = Mask::Ones(spec.population_size, 2);
  if (spec.mode == OutcomeMode::Continuous) {
    d.kinds = {VariableKind::continuous(), VariableKind::continuous()};
    d.y = pop.y_star;
  } else {
    d.kinds = {VariableKind::binary(), VariableKind::count()};
    d.y.resize(spec.population_size, 2);
    for (Index i = 0; i < spec.population_size; ++i) {
      d.y(i, 0) = d.kinds[0].to_response(pop.y_star(i, 0));
      d.y(i, 1) = d.kinds[1].to_response(pop.y_star(i, 1));
    }
  }
  return pop;
}

Dataset draw_sample(const Dataset& population, long n, RngStream& rng) {
  const Index N = population.n();
  if (n < 1 || n > N) throw ValidationError("simbench", "sample size out of range");
  std::vector<Index> idx(static_cast<std::size_t>(N));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < n; ++i) {
    const Index j = i + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(N - i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(n));
  Dataset s = population;
  s.x = population.x(idx, Eigen::all);
  s.y = population.y(idx, Eigen::all);
  s.delta = population.delta(idx, Eigen::all);
  return s;
}

double response_probability(int k, double x1, double x2) {
  return k == 0 ? logistic(1.5 - 0.5 * x1) : logistic(1.0 - 0.5 * x2);
}

Dataset apply_missingness(const Dataset& sample, RngStream& rng) {
  if (sample.q() < 2 || sample.p() < 2) throw ValidationError("simbench", "missingness model needs x1, x2, y1, y2");
  Dataset out = sample;
  for (Index i = 0; i < out.n(); ++i) {
    for (int k = 0; k < 2; ++k) {
      const bool observed = rng.uniform() < response_probability(k, out.x(i, 0), out.x(i, 1));
      out.delta(i, k) = observed ? 1 : 0;
      if (!observed) out.y(i, k) = kNaN;
    }
  }
  return out;
}

double metric_mae(const MatrixXd& truth, const MatrixXd& imputed, const Mask& mask, Index column) {
  const Index m = missing_in_column(mask, column);
  double s = 0.0;
  for (Index i = 0; i < mask.rows(); ++i)
    if (!mask(i, column)) s += std::abs(imputed(i, column) - truth(i, column));
  return s / static_cast<double>(m);
}

double metric_mce(const MatrixXd& truth, const MatrixXd& imputed, const Mask& mask, Index column) {
  const Index m = missing_in_column(mask, column);
  double s = 0.0;
  for (Index i = 0; i < mask.rows(); ++i)
    if (!mask(i, column)) s += imputed(i, column) != truth(i, column);
  return s / static_cast<double>(m);
}

double metric_mape(const MatrixXd& truth, const MatrixXd& imputed, const Mask& mask, Index column) {
  const Index m = missing_in_column(mask, column);
  double s = 0.0;
  for (Index i = 0; i < mask.rows(); ++i)
    if (!mask(i, column)) s += std::abs(imputed(i, column) - truth(i, column)) / (1.0 + truth(i, column));
  return s / static_cast<double>(m);
}

double population_mean_estimate(const Dataset& masked, const MatrixXd& imputed, Index column) {
  double s = 0.0;
  for (Index i = 0; i < masked.n(); ++i) s += masked.observed(i, column) ? masked.y(i, column) : imputed(i, column);
  return s / static_cast<double>(masked.n());
}

MatrixXd point_imputation(const Dataset& masked, const MatrixXd& posterior_mean) {
  MatrixXd out = masked.y;
  for (Index k = 0; k < masked.p(); ++k) {
    const auto tag = masked.kinds[static_cast<std::size_t>(k)].tag();
    for (Index i = 0; i < masked.n(); ++i) {
      if (masked.observed(i, k)) continue;
      const double m = posterior_mean(i, k);
      if (tag == VariableKind::Tag::Binary) {
        out(i, k) = m > 0.5 ? 1.0 : 0.0;
      } else if (tag == VariableKind::Tag::Count) {
        out(i, k) = std::max(0.0, std::round(m));
      } else {
        out(i, k) = m;
      }
    }
  }
  return out;
}

std::string to_string(Baseline method) {
  return method == Baseline::ColumnMean ? "column_mean" : "single_gaussian";
}

Dataset baseline_impute(const Dataset& masked, Baseline method, const ChainConfig& chain, RngStream rng) {
  masked.validate();
  Dataset out = masked;
  if (method == Baseline::ColumnMean) {
    for (Index k = 0; k < masked.p(); ++k) {
      double sum = 0.0;
      Index cnt = 0;
      for (Index i = 0; i < masked.n(); ++i)
        if (masked.observed(i, k)) sum += masked.y(i, k), ++cnt;
      if (cnt == 0) throw ValidationError("simbench", "column '" + masked.y_names[static_cast<std::size_t>(k)] + "' has no observed cells");
      double fill = sum / static_cast<double>(cnt);
      const auto tag = masked.kinds[static_cast<std::size_t>(k)].tag();
      if (tag == VariableKind::Tag::Binary) fill = fill > 0.5 ? 1.0 : 0.0;
      if (tag == VariableKind::Tag::Count) fill = std::round(fill);
      for (Index i = 0; i < masked.n(); ++i)
        if (!masked.observed(i, k)) out.y(i, k) = fill;
    }
  } else {
    ChainConfig cfg = chain;
    cfg.m_imputations = 1;
    const auto prior = PriorConfig::defaults(1, masked.p(), masked.q());
    const auto res = run_chain(masked, 1, prior, cfg, rng);
    out.y = point_imputation(masked, res.imputed_mean);
  }
  out.delta.setOnes();
  return out;
}

void EngineConfig::validate() const {
  if (G < 1) throw ValidationError("simbench", "G must be >= 1");
  if (a && !(*a > 0.0)) throw ValidationError("simbench", "a must be positive");
  if (B < 2) throw ValidationError("simbench", "B must be >= 2");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("simbench", "level must lie in (0, 1)");
  if (threads < 1) throw ValidationError("simbench", "threads must be >= 1");
  chain.validate();
  if (run_ilb && B > chain.saved_draws()) {
    throw ValidationError("simbench", "B must not exceed keep / thin: each ILB replicate uses its own saved draw");
  }
}

nlohmann::json EngineConfig::to_json() const {
  nlohmann::json j{{"G", G},         {"chain", chain.to_json()}, {"B", B},
                   {"level", level}, {"run_ilb", run_ilb},       {"run_baselines", run_baselines}};
  j["a"] = a ? *a : 1.0 / G;
  j["chain"].erase("m_imputations");
  return j;
}

// ---------------------------------------------------------------------------

ReplicationRecord run_replication(const ScenarioSpec& spec, const EngineConfig& engine, RngStream rng, long index) {
  RngStream pop_rng = rng.substream(1), sample_rng = rng.substream(2), miss_rng = rng.substream(3);
  const Population pop = generate_scenario(spec, pop_rng);
  const Dataset sample = draw_sample(pop.data, spec.sample_size, sample_rng);
  const Dataset masked = apply_missingness(sample, miss_rng);
  const Index p = masked.p();

  ReplicationRecord rec;
  rec.index = index;
  rec.missing_rate = static_cast<double>(masked.missing_count()) / static_cast<double>(masked.y.size());
  rec.population_mean.resize(static_cast<std::size_t>(p));
  for (Index k = 0; k < p; ++k) rec.population_mean[static_cast<std::size_t>(k)] = pop.data.y.col(k).mean();

  ChainConfig cfg = engine.chain;
  cfg.m_imputations = engine.run_ilb ? engine.B : 1;
  PriorConfig prior = PriorConfig::defaults(engine.G, p, masked.q());
  if (engine.a) prior.a = *engine.a;
  const ChainResult chain = run_chain(masked, engine.G, prior, cfg, rng.substream(4));
  rec.non_null_avg = chain.diagnostics.mean_non_null_kept;

  const MatrixXd point = point_imputation(masked, chain.imputed_mean);
  rec.mae = nan_vector(p), rec.mce = nan_vector(p), rec.mape = nan_vector(p);
  rec.mean_estimate = nan_vector(p);
  for (Index k = 0; k < p; ++k) {
    const auto s = static_cast<std::size_t>(k);
    const auto tag = masked.kinds[s].tag();
    if (tag == VariableKind::Tag::Continuous) rec.mae[s] = metric_mae(sample.y, point, masked.delta, k);
    if (tag == VariableKind::Tag::Binary) rec.mce[s] = metric_mce(sample.y, point, masked.delta, k);
    if (tag == VariableKind::Tag::Count) rec.mape[s] = metric_mape(sample.y, point, masked.delta, k);
    rec.mean_estimate[s] = population_mean_estimate(masked, point, k);
  }

  rec.ci_lower = nan_vector(p), rec.ci_upper = nan_vector(p);
  rec.covered.assign(static_cast<std::size_t>(p), 0);
  if (engine.run_ilb) {
    for (Index k = 0; k < p; ++k) {
      const auto s = static_cast<std::size_t>(k);
      PrecollectedSource source(chain.draws);
      IlbConfig ic;
      ic.B = engine.B;
      const auto res = ilb_run(source, masked, MeanLoss{masked.q() + k}, ic, rng.substream(10 + static_cast<std::uint64_t>(k)));
      const auto sum = res.summary(engine.level);
      rec.ci_lower[s] = sum.lower[0];
      rec.ci_upper[s] = sum.upper[0];
      rec.covered[s] = rec.ci_lower[s] <= rec.population_mean[s] && rec.population_mean[s] <= rec.ci_upper[s];
    }
  }

  rec.mae_column_mean = nan_vector(p), rec.mae_single_gaussian = nan_vector(p);
  rec.mean_estimate_column_mean = nan_vector(p), rec.mean_estimate_single_gaussian = nan_vector(p);
  if (engine.run_baselines) {
    const Dataset cm = baseline_impute(masked, Baseline::ColumnMean, cfg, rng.substream(5));
    const Dataset sg = baseline_impute(masked, Baseline::SingleGaussian, cfg, rng.substream(6));
    for (Index k = 0; k < p; ++k) {
      const auto s = static_cast<std::size_t>(k);
      if (masked.kinds[s].tag() == VariableKind::Tag::Continuous) {
        rec.mae_column_mean[s] = metric_mae(sample.y, cm.y, masked.delta, k);
        rec.mae_single_gaussian[s] = metric_mae(sample.y, sg.y, masked.delta, k);
      }
      rec.mean_estimate_column_mean[s] = population_mean_estimate(masked, cm.y, k);
      rec.mean_estimate_single_gaussian[s] = population_mean_estimate(masked, sg.y, k);
    }
  }
  return rec;
}

ReplicationReport run_replications(const ScenarioSpec& spec, long R, const EngineConfig& engine, std::uint64_t seed,
                                   const std::function<void(long)>& on_done) {
  spec.validate();
  engine.validate();
  if (R < 1) throw ValidationError("simbench", "R must be >= 1");
  ReplicationReport report;
  report.spec = spec;
  report.engine = engine;
  report.seed = seed;
  report.records.resize(static_cast<std::size_t>(R));
  const RngStream root(seed, 0);
  parallel_for(static_cast<std::size_t>(R), engine.threads, [&](std::size_t r) {
    try {
      report.records[r] = run_replication(spec, engine, root.substream(r), static_cast<long>(r));
    } catch (const Error& e) {
      throw NumericalError(e.module(), "replication " + std::to_string(r) + ": " + e.what());
    }
    if (on_done) on_done(static_cast<long>(r));
  });
  return report;
}

std::vector<double> ReplicationReport::coverage() const {
  if (records.empty()) return {};
  std::vector<double> c(records.front().covered.size(), 0.0);
  for (const auto& r : records)
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += r.covered[k];
  for (auto& v : c) v /= static_cast<double>(records.size());
  return c;
}

double ReplicationReport::non_null_avg() const {
  double s = 0.0;
  for (const auto& r : records) s += r.non_null_avg;
  return records.empty() ? 0.0 : s / static_cast<double>(records.size());
}

double ReplicationReport::median(std::vector<double> ReplicationRecord::*field, Index column) const {
  std::vector<double> v;
  for (const auto& r : records) {
    const double x = (r.*field)[static_cast<std::size_t>(column)];
    if (!std::isnan(x)) v.push_back(x);
  }
  return v.empty() ? kNaN : stats::quantile(std::move(v), 0.5);
}

nlohmann::json ReplicationReport::to_json() const {
  auto per_column = [&](std::vector<double> ReplicationRecord::*field) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t k = 0; !records.empty() && k < records.front().mae.size(); ++k) {
      const double m = median(field, static_cast<Index>(k));
      j["y" + std::to_string(k + 1)] = std::isnan(m) ? nlohmann::json(nullptr) : nlohmann::json(m);
    }
    return j;
  };
  const auto cov = coverage();
  nlohmann::json coverage_json = nlohmann::json::object();
  for (std::size_t k = 0; k < cov.size(); ++k) coverage_json["y" + std::to_string(k + 1)] = cov[k];
  return {{"scenario", spec.to_json()},
          {"engine", engine.to_json()},
          {"seed", seed},
          {"replications", records.size()},
          {"coverage", coverage_json},
          {"non_null_avg", non_null_avg()},
          {"median_metrics",
           {{"engine", {{"mae", per_column(&ReplicationRecord::mae)},
                        {"mce", per_column(&ReplicationRecord::mce)},
                        {"mape", per_column(&ReplicationRecord::mape)}}},
            {"column_mean", {{"mae", per_column(&ReplicationRecord::mae_column_mean)}}},
            {"single_gaussian", {{"mae", per_column(&ReplicationRecord::mae_single_gaussian)}}}}}};
}

void ReplicationReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("simbench", "cannot write " + path.string());
  const std::size_t p = records.empty() ? 0 : records.front().mae.size();
  std::vector<std::string> header{"replication", "missing_rate", "non_null_avg"};
  const char* fields[] = {"population_mean", "mae", "mce", "mape", "mean_estimate", "ci_lower", "ci_upper", "covered",
                          "mae_column_mean", "mae_single_gaussian"};
  for (const char* f : fields)
    for (std::size_t k = 0; k < p; ++k) header.push_back(std::string(f) + "_y" + std::to_string(k + 1));
  csv::write_row(out, header);
  auto fmt = [](double v) { return std::isnan(v) ? std::string("NA") : csv::format_double(v); };
  for (const auto& r : records) {
    std::vector<std::string> row{std::to_string(r.index + 1), fmt(r.missing_rate), fmt(r.non_null_avg)};
    for (const auto* v : {&r.population_mean, &r.mae, &r.mce, &r.mape, &r.mean_estimate, &r.ci_lower, &r.ci_upper})
      for (double x : *v) row.push_back(fmt(x));
    for (int c : r.covered) row.push_back(std::to_string(c));
    for (const auto* v : {&r.mae_column_mean, &r.mae_single_gaussian})
      for (double x : *v) row.push_back(fmt(x));
    csv::write_row(out, row);
  }
  if (!out) throw IoError("simbench", "write failed for " + path.string());
}

void ReplicationReport::write_boxplot_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("simbench", "cannot write " + path.string());
  csv::write_row(out, {"replication", "method", "column", "metric", "value"});
  auto emit = [&](const ReplicationRecord& r, const char* method, const char* metric, const std::vector<double>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (std::isnan(v[k])) continue;
      csv::write_row(out, {std::to_string(r.index + 1), method, "y" + std::to_string(k + 1), metric,
                           csv::format_double(v[k])});
    }
  };
  for (const auto& r : records) {
    emit(r, "engine", "mae", r.mae);
    emit(r, "engine", "mce", r.mce);
    emit(r, "engine", "mape", r.mape);
    emit(r, "engine", "mean_estimate", r.mean_estimate);
    emit(r, "column_mean", "mae", r.mae_column_mean);
    emit(r, "column_mean", "mean_estimate", r.mean_estimate_column_mean);
    emit(r, "single_gaussian", "mae", r.mae_single_gaussian);
    emit(r, "single_gaussian", "mean_estimate", r.mean_estimate_single_gaussian);
  }
  if (!out) throw IoError("simbench", "write failed for " + path.string());
}

}  // namespace mixim
