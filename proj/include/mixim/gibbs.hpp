#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixim/data.hpp"
#include "mixim/model.hpp"
#include "mixim/rng.hpp"

namespace mixim {

/// Single puts every row in the reference component and lets the sampler open
/// the others; KMeans spreads the rows over all G components.
enum class InitStrategy { Single, KMeans, Random };

std::string to_string(InitStrategy s);
InitStrategy parse_init_strategy(const std::string& s);

/// Test-only kernel mutations used to check that the verification suites
/// have power. Never set in production runs.
struct FaultInjection {
  bool alpha_kappa_sign = false;  // flips kappa in the alpha full conditional
};

struct ChainConfig {
  long burn_in = 500;
  long keep = 1500;
  long thin = 1;
  long m_imputations = 10;
  InitStrategy init = InitStrategy::Single;
  /// Centre and scale covariates and continuous responses before fitting;
  /// imputations are mapped back to the input scale.
  bool standardize = true;
  /// Emit one structured log line to stderr every this many sweeps (0 = silent).
  long log_every = 0;
  FaultInjection fault;

  long saved_draws() const { return keep / thin; }
  void validate() const;
  nlohmann::json to_json() const;
};

/// Model-scale view of a Dataset plus the affine maps back to the input scale.
struct ChainData {
  Eigen::MatrixXd x;  // n x q, possibly standardized
  Eigen::MatrixXd y;  // n x p; continuous columns possibly standardized, NaN where missing
  Mask delta;
  std::vector<VariableKind> kinds;
  Eigen::VectorXd x_center, x_scale;
  Eigen::VectorXd y_center, y_scale;  // identity for discrete columns

  // Distinct missingness patterns and the pattern id of each row.
  std::vector<RowPattern> patterns;
  std::vector<int> row_pattern;

  Eigen::Index n() const { return y.rows(); }
  Eigen::Index p() const { return y.cols(); }
  Eigen::Index q() const { return x.cols(); }

  static ChainData from_dataset(const Dataset& data, bool standardize);
  /// Response-scale value of a latent model-scale coordinate.
  double to_response(Eigen::Index k, double latent) const;
};

/// All latent quantities at one iteration. Component indices are 0-based and
/// component 0 is the reference of the gate.
struct ChainState {
  std::shared_ptr<const ChainData> data;
  ModelParams params;
  std::vector<int> z;
  Eigen::MatrixXd omega;   // n x G
  Eigen::MatrixXd y_star;  // n x p
  RngStream rng;
  long iteration = 0;
  double last_loglik = 0.0;
  long u_proposals = 0;
  long u_accepts = 0;
  FaultInjection fault;

  int G() const { return params.G(); }
  /// Type invariants: z range, omega positivity, y* consistent with observed cells.
  void check_invariants() const;
};

ChainState init_state(std::shared_ptr<const ChainData> data, int G, const PriorConfig& prior,
                      const ChainConfig& config, RngStream rng);

// Single full-conditional updates. Each recomputes the gate offsets
// C_ig = log sum_{h != g} u_h exp(x_i^T alpha_h) from the current parameters.
void update_omega(ChainState& state);
void update_alpha(ChainState& state, const PriorConfig& prior);
void update_u(ChainState& state, const PriorConfig& prior);
/// Per-component block omega_g -> alpha_g -> u_g for g = 1..G-1; the sweep uses this.
void update_mixing(ChainState& state, const PriorConfig& prior);
void update_regression(ChainState& state, const PriorConfig& prior);
void update_sigma(ChainState& state, const PriorConfig& prior);
void update_z(ChainState& state);
void update_ystar_observed(ChainState& state);
void update_ymis(ChainState& state);

/// One full sweep in the fixed scan order.
void sweep(ChainState& state, const PriorConfig& prior);

/// Log MH acceptance ratio for the independent proposal of log u on (-inf, 2).
double u_log_acceptance_ratio(double log_u_proposed, double log_u_current, double a);

int non_null_count(const ChainState& state);
int non_null_count(const std::vector<int>& z, int G);

/// Completed response matrix (input scale) from the current latent state.
Eigen::MatrixXd completed_responses(const ChainState& state, const Dataset& original);
Dataset completed_dataset(const ChainState& state, const Dataset& original);

struct ChainDiagnostics {
  std::vector<long> iteration;
  std::vector<double> loglik;
  std::vector<int> non_null;
  double mean_non_null_kept = 0.0;
  double u_acceptance_rate = 0.0;

  void write_trace_csv(const std::filesystem::path& path) const;
  nlohmann::json summary() const;
};

struct ChainResult {
  ImputationDraws draws;
  ChainDiagnostics diagnostics;
  ModelParams final_params;
  /// Posterior mean of each completed response cell over the saved draws
  /// (observed cells equal the input).
  Eigen::MatrixXd imputed_mean;
  ChainState final_state;
};

/// Burn-in, then `keep` sweeps of which every `thin`-th is saved; the
/// m_imputations completed datasets are taken at evenly spaced saved draws.
ChainResult run_chain(const Dataset& data, int G, const PriorConfig& prior, const ChainConfig& config,
                      RngStream rng);

// ---------------------------------------------------------------------------
// Posterior-predictive sources of completed datasets.

class ImputationSource {
 public:
  virtual ~ImputationSource() = default;
  /// Next completed response matrix (n x p, input scale).
  virtual Eigen::MatrixXd next(RngStream& rng) = 0;
};

/// Consumes a pre-collected set of completed datasets in order.
class PrecollectedSource : public ImputationSource {
 public:
  explicit PrecollectedSource(const ImputationDraws& draws) : draws_(draws) {}
  Eigen::MatrixXd next(RngStream& rng) override;

 private:
  const ImputationDraws& draws_;
  std::size_t cursor_ = 0;
};

/// Runs a Gibbs chain and hands out the state every `thin` sweeps after burn-in.
class ChainSource : public ImputationSource {
 public:
  ChainSource(const Dataset& data, int G, const PriorConfig& prior, const ChainConfig& config, long thin,
              RngStream rng);
  Eigen::MatrixXd next(RngStream& rng) override;

 private:
  const Dataset& data_;
  PriorConfig prior_;
  long thin_;
  ChainState state_;
};

/// Imputes every replicate from one fixed posterior draw of the parameters
/// (and the latent values of observed discrete cells from the same state).
class FixedParamsSource : public ImputationSource {
 public:
  FixedParamsSource(const ChainState& snapshot, const Dataset& data);
  Eigen::MatrixXd next(RngStream& rng) override;

 private:
  ChainState snapshot_;
  const Dataset& data_;
};

/// Returns the observed responses unchanged; data must be complete.
class CompleteDataSource : public ImputationSource {
 public:
  explicit CompleteDataSource(const Dataset& data);
  Eigen::MatrixXd next(RngStream& rng) override;

 private:
  const Dataset& data_;
};

}  // namespace mixim
