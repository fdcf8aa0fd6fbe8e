#include "doctest.h"

#include <cmath>
#include <vector>

#include "mixim/rng.hpp"
#include "mixim/stats.hpp"

namespace st = mixim::stats;

TEST_CASE("kolmogorov survival function reference values") {
  CHECK(st::kolmogorov_sf(1.0) == doctest::Approx(0.26999967).epsilon(1e-6));
  CHECK(st::kolmogorov_sf(0.5) == doctest::Approx(0.96394524).epsilon(1e-6));
  CHECK(st::kolmogorov_sf(2.0) == doctest::Approx(0.00067093).epsilon(1e-4));
  CHECK(st::kolmogorov_sf(0.0) == 1.0);
}

TEST_CASE("two-sample KS statistic on small samples") {
  const auto r = st::ks_two_sample({1, 2, 3, 4}, {2.5, 3.5, 4.5, 5.5, 6.5});
  // ECDF gap is largest after 4: 1 - 0.4.
  CHECK(r.statistic == doctest::Approx(0.6));
  const auto same = st::ks_two_sample({1, 2, 3}, {1, 2, 3});
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0));
}

TEST_CASE("type 7 quantiles") {
  const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(st::quantile(v, 0.0) == 1.0);
  CHECK(st::quantile(v, 1.0) == 9.0);
  CHECK(st::quantile(v, 0.5) == doctest::Approx(3.5));
  CHECK(st::quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(st::quantile(v, 0.9) == doctest::Approx(6.9));
}

TEST_CASE("mean and unbiased variance") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(st::mean(v) == 5.0);
  CHECK(st::variance(v) == doctest::Approx(32.0 / 7.0));
}

TEST_CASE("batch means on iid data recover sd / sqrt(n)") {
  mixim::RngStream r(9, 0);
  std::vector<double> v(100000);
  for (auto& x : v) x = r.normal();
  CHECK(st::batch_means_se(v) == doctest::Approx(1.0 / std::sqrt(100000.0)).epsilon(0.3));
}

TEST_CASE("batch means inflate for an AR(1) series") {
  mixim::RngStream r(10, 0);
  std::vector<double> v(100000);
  double prev = 0.0;
  for (auto& x : v) x = prev = 0.9 * prev + r.normal();
  // long-run sd / sqrt(n) = (1 / (1 - 0.9)) / sqrt(n)
  CHECK(st::batch_means_se(v) == doctest::Approx(10.0 / std::sqrt(100000.0)).epsilon(0.3));
}
