#include "mixim/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "mixim/csv.hpp"
#include "mixim/errors.hpp"

namespace mixim {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_number(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

bool is_nonnegative_integer(double v) { return v >= 0.0 && std::floor(v) == v && std::isfinite(v); }

}  // namespace

// ---------------------------------------------------------------------------
// VariableKind

VariableKind VariableKind::count(std::vector<double> cutpoints) {
  for (std::size_t j = 1; j < cutpoints.size(); ++j) {
    if (!(cutpoints[j - 1] < cutpoints[j])) {
      throw ValidationError("data_model", "count cutpoints must be strictly increasing");
    }
  }
  for (double c : cutpoints) {
    if (!std::isfinite(c)) throw ValidationError("data_model", "count cutpoints must be finite");
  }
  return VariableKind(Tag::Count, std::move(cutpoints));
}

VariableKind VariableKind::parse(const std::string& text) {
  const std::string t = trim(text);
  if (t == "continuous") return continuous();
  if (t == "binary") return binary();
  if (t == "count") return count();
  if (t.rfind("count:", 0) == 0) {
    std::vector<double> cuts;
    std::stringstream ss(t.substr(6));
    std::string item;
    while (std::getline(ss, item, ';')) {
      double v;
      if (!parse_number(trim(item), v)) throw ValidationError("data_model", "bad cutpoint '" + item + "'");
      cuts.push_back(v);
    }
    if (cuts.empty()) throw ValidationError("data_model", "count: empty cutpoint list");
    return count(std::move(cuts));
  }
  throw ValidationError("data_model", "unknown variable kind '" + text + "'");
}

std::string VariableKind::to_string() const {
  switch (tag_) {
    case Tag::Continuous:
      return "continuous";
    case Tag::Binary:
      return "binary";
    case Tag::Count: {
      if (cutpoints_.empty()) return "count";
      std::string s = "count:";
      for (std::size_t j = 0; j < cutpoints_.size(); ++j) {
        if (j) s += ';';
        s += csv::format_double(cutpoints_[j]);
      }
      return s;
    }
  }
  return "continuous";
}

bool VariableKind::admits(double value) const {
  switch (tag_) {
    case Tag::Continuous:
      return std::isfinite(value);
    case Tag::Binary:
      return value == 0.0 || value == 1.0;
    case Tag::Count:
      return is_nonnegative_integer(value) &&
             (cutpoints_.empty() || value <= static_cast<double>(cutpoints_.size()));
  }
  return false;
}

TruncationInterval VariableKind::interval(double value) const {
  switch (tag_) {
    case Tag::Continuous:
      return {};
    case Tag::Binary:
      return value > 0.5 ? TruncationInterval{0.0, kInf} : TruncationInterval{-kInf, 0.0};
    case Tag::Count: {
      const auto j = static_cast<std::size_t>(value);
      if (cutpoints_.empty()) {
        return {j == 0 ? -kInf : value - 1.0, value};
      }
      return {j == 0 ? -kInf : cutpoints_[j - 1], j < cutpoints_.size() ? cutpoints_[j] : kInf};
    }
  }
  return {};
}

double VariableKind::to_response(double latent) const {
  switch (tag_) {
    case Tag::Continuous:
      return latent;
    case Tag::Binary:
      return latent > 0.0 ? 1.0 : 0.0;
    case Tag::Count:
      if (cutpoints_.empty()) return latent <= 0.0 ? 0.0 : std::ceil(latent);
      return static_cast<double>(std::lower_bound(cutpoints_.begin(), cutpoints_.end(), latent) -
                                 cutpoints_.begin());
  }
  return latent;
}

// ---------------------------------------------------------------------------
// Dataset

Eigen::Index Dataset::missing_count() const {
  return static_cast<Eigen::Index>((delta.array() == 0).count());
}

void Dataset::validate() const {
  if (n() < 1) throw ValidationError("data_model", "dataset has no rows");
  if (p() < 1) throw ValidationError("data_model", "dataset has no response columns");
  if (x.rows() != n()) throw ValidationError("data_model", "covariate and response row counts differ");
  if (delta.rows() != n() || delta.cols() != p()) throw ValidationError("data_model", "mask shape mismatch");
  if (static_cast<Eigen::Index>(kinds.size()) != p()) {
    throw ValidationError("data_model", "one variable kind required per response");
  }
  auto yname = [&](Eigen::Index k) {
    return k < static_cast<Eigen::Index>(y_names.size()) ? y_names[k] : "y" + std::to_string(k + 1);
  };
  auto xname = [&](Eigen::Index j) {
    return j < static_cast<Eigen::Index>(x_names.size()) ? x_names[j] : "x" + std::to_string(j + 1);
  };
  for (Eigen::Index j = 0; j < q(); ++j) {
    for (Eigen::Index i = 0; i < n(); ++i) {
      if (!std::isfinite(x(i, j))) {
        throw ValidationError("data_model", "missing or non-finite covariate at row " + std::to_string(i + 1) +
                                                ", column " + xname(j));
      }
    }
  }
  for (Eigen::Index k = 0; k < p(); ++k) {
    for (Eigen::Index i = 0; i < n(); ++i) {
      if (delta(i, k) > 1) throw ValidationError("data_model", "mask entries must be 0 or 1");
      if (observed(i, k) && !kinds[k].admits(y(i, k))) {
        throw ValidationError("data_model", "value " + csv::format_double(y(i, k)) + " at row " +
                                                std::to_string(i + 1) + ", column " + yname(k) +
                                                " is not a valid " + kinds[k].to_string() + " observation");
      }
    }
  }
}

RowPattern split_pattern(const Eigen::Ref<const Eigen::Matrix<std::uint8_t, 1, Eigen::Dynamic>>& delta_row) {
  RowPattern pattern;
  for (Eigen::Index k = 0; k < delta_row.size(); ++k) {
    (delta_row[k] ? pattern.obs : pattern.mis).push_back(static_cast<int>(k));
  }
  return pattern;
}

RowPattern split_pattern(const Dataset& data, Eigen::Index row) { return split_pattern(data.delta.row(row)); }

// ---------------------------------------------------------------------------
// CSV I/O

Dataset parse_dataset(std::istream& in, const Schema& schema) {
  const auto rows = csv::parse(in);
  if (rows.empty()) throw ValidationError("data_model", "empty CSV (header row required)");
  const auto& header = rows.front();
  std::vector<std::string> names;
  for (const auto& h : header) names.push_back(trim(h));

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ValidationError("data_model", "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - names.begin());
  };

  if (schema.responses.empty()) throw ValidationError("data_model", "schema lists no response columns");
  std::vector<std::size_t> ycols;
  Dataset data;
  for (const auto& [name, kind] : schema.responses) {
    ycols.push_back(column_of(name));
    data.y_names.push_back(name);
    data.kinds.push_back(kind);
  }
  std::vector<std::size_t> xcols;
  if (!schema.covariates.empty()) {
    for (const auto& name : schema.covariates) {
      xcols.push_back(column_of(name));
      data.x_names.push_back(name);
    }
  } else {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (std::find(ycols.begin(), ycols.end(), j) == ycols.end()) {
        xcols.push_back(j);
        data.x_names.push_back(names[j]);
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  data.x.resize(n, static_cast<Eigen::Index>(xcols.size()));
  data.y.resize(n, static_cast<Eigen::Index>(ycols.size()));
  data.delta.resize(n, static_cast<Eigen::Index>(ycols.size()));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i) + 1];
    if (r.size() != names.size()) {
      throw ValidationError("data_model", "row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) +
                                              " fields, header has " + std::to_string(names.size()));
    }
    for (std::size_t j = 0; j < xcols.size(); ++j) {
      const std::string cell = trim(r[xcols[j]]);
      double v;
      if (cell == schema.missing_token) {
        throw ValidationError("data_model", "missing covariate at row " + std::to_string(i + 1) + ", column " +
                                                data.x_names[j] + " (covariates must be fully observed)");
      }
      if (!parse_number(cell, v)) {
        throw ValidationError("data_model", "cannot parse '" + cell + "' at row " + std::to_string(i + 1) +
                                                ", column " + data.x_names[j]);
      }
      data.x(i, static_cast<Eigen::Index>(j)) = v;
    }
    for (std::size_t k = 0; k < ycols.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const std::string cell = trim(r[ycols[k]]);
      if (cell == schema.missing_token) {
        data.y(i, kk) = std::numeric_limits<double>::quiet_NaN();
        data.delta(i, kk) = 0;
        continue;
      }
      double v;
      if (!parse_number(cell, v)) {
        throw ValidationError("data_model", "cannot parse '" + cell + "' at row " + std::to_string(i + 1) +
                                                ", column " + data.y_names[k]);
      }
      data.y(i, kk) = v;
      data.delta(i, kk) = 1;
    }
  }
  data.validate();
  return data;
}

Dataset read_dataset(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("data_model", "cannot open " + path.string());
  return parse_dataset(in, schema);
}

void write_dataset(std::ostream& out, const Dataset& data, const std::string& missing_token) {
  csv::Row header;
  for (Eigen::Index j = 0; j < data.q(); ++j) {
    header.push_back(j < static_cast<Eigen::Index>(data.x_names.size()) ? data.x_names[j]
                                                                        : "x" + std::to_string(j + 1));
  }
  for (Eigen::Index k = 0; k < data.p(); ++k) {
    header.push_back(k < static_cast<Eigen::Index>(data.y_names.size()) ? data.y_names[k]
                                                                        : "y" + std::to_string(k + 1));
  }
  csv::write_row(out, header);
  csv::Row row;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < data.q(); ++j) row.push_back(csv::format_double(data.x(i, j)));
    for (Eigen::Index k = 0; k < data.p(); ++k) {
      row.push_back(data.observed(i, k) ? csv::format_double(data.y(i, k)) : missing_token);
    }
    csv::write_row(out, row);
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::string& missing_token) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("data_model", "cannot write " + path.string());
  write_dataset(out, data, missing_token);
  if (!out) throw IoError("data_model", "write failed for " + path.string());
}

std::string config_hash(const nlohmann::json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string timestamp_utc() {
  std::time_t t;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_imputations(const ImputationDraws& draws, const std::filesystem::path& dir, std::uint64_t seed,
                       const nlohmann::json& config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("data_model", "cannot create directory " + dir.string() + ": " + ec.message());
  std::vector<std::string> files;
  for (std::size_t d = 0; d < draws.m(); ++d) {
    const auto& completed = draws.datasets[d];
    if (completed.missing_count() != 0) {
      throw ValidationError("data_model", "imputed dataset " + std::to_string(d + 1) + " still has missing cells");
    }
    completed.validate();
    char name[32];
    std::snprintf(name, sizeof(name), "imputed_%03zu.csv", d + 1);
    write_dataset(dir / name, completed);
    files.emplace_back(name);
  }
  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["config"] = config;
  manifest["config_hash"] = config_hash(config);
  manifest["iterations"] = draws.source_iterations;
  manifest["files"] = files;
  manifest["created_at"] = timestamp_utc();
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("data_model", "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace mixim
