#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixim/data.hpp"
#include "mixim/gibbs.hpp"
#include "mixim/model.hpp"
#include "mixim/rng.hpp"

namespace mixim {

enum class OutcomeMode { Continuous, Mixed };

std::string to_string(OutcomeMode mode);
OutcomeMode parse_outcome_mode(const std::string& text);

struct ScenarioSpec {
  int id = 1;
  OutcomeMode mode = OutcomeMode::Continuous;
  long population_size = 10000;
  long sample_size = 1000;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Complete finite population; `y_star` keeps the latent responses (equal to
/// data.y in continuous mode).
struct Population {
  Dataset data;
  Eigen::MatrixXd y_star;
};

/// Columns x1, x2 and responses y1, y2 (binary and count in mixed mode).
Population generate_scenario(const ScenarioSpec& spec, RngStream& rng);

/// Simple random sample without replacement.
Dataset draw_sample(const Dataset& population, long n, RngStream& rng);

/// P(delta_k = 1 | x) for k = 0, 1: logit 1.5 - 0.5 x1 and 1 - 0.5 x2.
double response_probability(int k, double x1, double x2);

/// Independent Bernoulli response indicators; masked cells set to NaN.
Dataset apply_missingness(const Dataset& sample, RngStream& rng);

// Metrics over the missing cells of one response column (throw when none).
double metric_mae(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed, const Mask& mask, Eigen::Index column);
double metric_mce(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed, const Mask& mask, Eigen::Index column);
double metric_mape(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed, const Mask& mask,
                   Eigen::Index column);

/// n^{-1} sum {delta y + (1 - delta) yhat}.
double population_mean_estimate(const Dataset& masked, const Eigen::MatrixXd& imputed, Eigen::Index column);

/// Single point imputation from the posterior mean of the draws: the mean for
/// continuous cells, majority vote for binary, rounded mean for count.
Eigen::MatrixXd point_imputation(const Dataset& masked, const Eigen::MatrixXd& posterior_mean);

enum class Baseline { ColumnMean, SingleGaussian };
std::string to_string(Baseline method);

/// ColumnMean: observed column mean (mode for binary, rounded mean for count).
/// SingleGaussian: run_chain with G = 1, then point_imputation.
Dataset baseline_impute(const Dataset& masked, Baseline method, const ChainConfig& chain, RngStream rng);

inline ChainConfig desk_scale_chain() {
  ChainConfig c;
  c.burn_in = 500;
  c.keep = 1000;
  return c;
}

struct EngineConfig {
  int G = 7;
  /// Prior shrinkage concentration; defaults to 1/G when unset.
  std::optional<double> a;
  ChainConfig chain = desk_scale_chain();
  long B = 500;
  double level = 0.95;
  bool run_ilb = true;
  bool run_baselines = true;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct ReplicationRecord {
  long index = 0;
  double missing_rate = 0.0;
  double non_null_avg = 0.0;
  // Per response column; NaN where a metric does not apply.
  std::vector<double> population_mean;
  std::vector<double> mae, mce, mape;
  std::vector<double> mean_estimate;
  std::vector<double> ci_lower, ci_upper;
  std::vector<int> covered;
  std::vector<double> mae_column_mean, mae_single_gaussian;
  std::vector<double> mean_estimate_column_mean, mean_estimate_single_gaussian;
};

struct ReplicationReport {
  ScenarioSpec spec;
  EngineConfig engine;
  std::uint64_t seed = 0;
  std::vector<ReplicationRecord> records;

  std::vector<double> coverage() const;
  double non_null_avg() const;
  /// Median over replications of a per-column metric selected by `field`.
  double median(std::vector<double> ReplicationRecord::*field, Eigen::Index column) const;

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
  /// Long format: replication, method, column, metric, value.
  void write_boxplot_csv(const std::filesystem::path& path) const;
};

/// One population -> sample -> missingness -> impute -> ILB pipeline.
ReplicationRecord run_replication(const ScenarioSpec& spec, const EngineConfig& engine, RngStream rng, long index);

/// R independent replications on substreams of `seed`; records are ordered by
/// replication index whatever the thread count.
ReplicationReport run_replications(const ScenarioSpec& spec, long R, const EngineConfig& engine, std::uint64_t seed,
                                   const std::function<void(long)>& on_done = {});

}  // namespace mixim
