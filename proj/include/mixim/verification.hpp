#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixim/gibbs.hpp"
#include "mixim/model.hpp"
#include "mixim/rng.hpp"

namespace mixim {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string name;
  std::vector<CheckResult> checks;

  bool passed() const;
  nlohmann::json to_json() const;
};

struct VerificationOptions {
  std::uint64_t seed = 20240917;
  FaultInjection fault;
  long sampler_draws = 1000000;
  // Geweke: independent successive-conditional chains started at joint draws.
  long geweke_chains = 500;
  long geweke_cycles = 20;
  long geweke_reference = 4000;
  double geweke_min_p = 0.005;
  long conjugate_keep = 20000;
  long prior_recovery_draws = 100000;
};

/// Moment, symmetry and transform checks of every sampler against analytic or
/// quadrature oracles.
SuiteReport check_samplers(const VerificationOptions& opts);

/// Joint-distribution ("getting it right") test of the full sweep at
/// p = q = 1, G = 2, n = 20 with a fixed missingness pattern, for a continuous
/// and a binary response.
SuiteReport check_geweke(const VerificationOptions& opts);

/// G = 1, complete continuous data, flat-ish coefficient prior: chain means of
/// (b, B, Sigma) against the closed-form conjugate posterior means.
SuiteReport check_conjugate(const VerificationOptions& opts);

/// Prior-only chain of the u update against direct Ga(a, 1) draws truncated to u < e^2.
SuiteReport check_prior_recovery(const VerificationOptions& opts);

std::vector<std::string> suite_names();
SuiteReport run_suite(const std::string& name, const VerificationOptions& opts);

// Shared fixtures.

/// Independent draw of all parameters from the prior (u truncated to u < e^2).
ModelParams draw_from_prior(const PriorConfig& prior, int G, Eigen::Index p, Eigen::Index q, RngStream& rng);

}  // namespace mixim
