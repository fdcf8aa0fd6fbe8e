#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixim/distributions.hpp"

namespace mixim {

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Measurement scale of a response column. Discrete kinds are thresholded
/// views of a latent Gaussian coordinate.
class VariableKind {
 public:
  enum class Tag { Continuous, Binary, Count };

  static VariableKind continuous() { return VariableKind(Tag::Continuous, {}); }
  static VariableKind binary() { return VariableKind(Tag::Binary, {}); }
  /// Count with cutpoints a_1 < a_2 < ... < a_K, so value j <-> a_j < y* <= a_{j+1}
  /// with a_0 = -inf and a_{K+1} = +inf. An empty list means a_{j+1} = j for all j.
  static VariableKind count(std::vector<double> cutpoints = {});
  /// Parse "continuous", "binary", "count" or "count:a1;a2;...".
  static VariableKind parse(const std::string& text);

  Tag tag() const { return tag_; }
  bool is_discrete() const { return tag_ != Tag::Continuous; }
  const std::vector<double>& cutpoints() const { return cutpoints_; }
  std::string to_string() const;

  /// True when `value` is a legal observation of this kind.
  bool admits(double value) const;
  /// Latent interval encoding an observed discrete value.
  TruncationInterval interval(double value) const;
  /// Response-scale value of a latent draw.
  double to_response(double latent) const;

  bool operator==(const VariableKind&) const = default;

 private:
  VariableKind(Tag tag, std::vector<double> cutpoints) : tag_(tag), cutpoints_(std::move(cutpoints)) {}
  Tag tag_;
  std::vector<double> cutpoints_;
};

/// Covariates x (n x q, fully observed), responses y (n x p) with mask delta
/// (1 = observed). Cells with delta = 0 hold NaN.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  Mask delta;
  std::vector<VariableKind> kinds;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;

  Eigen::Index n() const { return y.rows(); }
  Eigen::Index p() const { return y.cols(); }
  Eigen::Index q() const { return x.cols(); }
  bool observed(Eigen::Index i, Eigen::Index k) const { return delta(i, k) != 0; }
  Eigen::Index missing_count() const;

  /// Throws ValidationError on any shape, mask, covariate or kind violation.
  void validate() const;
};

/// Observed and missing response indices of one row, each ascending.
struct RowPattern {
  std::vector<int> obs;
  std::vector<int> mis;
};

RowPattern split_pattern(const Dataset& data, Eigen::Index row);
RowPattern split_pattern(const Eigen::Ref<const Eigen::Matrix<std::uint8_t, 1, Eigen::Dynamic>>& delta_row);

/// Completed datasets drawn from the posterior predictive.
struct ImputationDraws {
  std::vector<Dataset> datasets;
  std::vector<long> source_iterations;
  std::size_t m() const { return datasets.size(); }
};

/// Column roles for CSV input. Columns not listed as responses are covariates
/// unless `covariates` is non-empty, in which case unlisted columns are ignored.
struct Schema {
  std::vector<std::string> covariates;
  std::vector<std::pair<std::string, VariableKind>> responses;
  std::string missing_token = "NA";
};

Dataset parse_dataset(std::istream& in, const Schema& schema);
Dataset read_dataset(const std::filesystem::path& path, const Schema& schema);

/// Covariate columns then response columns; masked cells written as the token.
void write_dataset(std::ostream& out, const Dataset& data, const std::string& missing_token = "NA");
void write_dataset(const std::filesystem::path& path, const Dataset& data,
                   const std::string& missing_token = "NA");

/// Writes imputed_001.csv ... and manifest.json. `manifest` is merged into the
/// manifest object alongside seed, config hash, iterations and created_at.
/// created_at honours SOURCE_DATE_EPOCH for reproducible output.
void write_imputations(const ImputationDraws& draws, const std::filesystem::path& dir,
                       std::uint64_t seed, const nlohmann::json& config);

/// FNV-1a hash of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// ISO-8601 UTC timestamp; SOURCE_DATE_EPOCH overrides the clock when set.
std::string timestamp_utc();

}  // namespace mixim
