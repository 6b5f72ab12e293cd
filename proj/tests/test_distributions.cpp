#include <doctest.h>

#include "misirt/distributions.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

using namespace misirt;

TEST_CASE("normal cdf at reference points") {
  CHECK(normal_cdf(0.0) == 0.5);
  // adaptive quadrature of the normal density at 40 digits
  CHECK(normal_cdf(1.0) == doctest::Approx(0.84134474606854294859).epsilon(1e-15));
  CHECK(normal_cdf(-2.4) == doctest::Approx(0.0081975359245961314334).epsilon(1e-14));
  CHECK(normal_cdf(-2.2) == doctest::Approx(0.013903447513498604313).epsilon(1e-14));
  CHECK(normal_cdf(0.3) == doctest::Approx(0.61791142218895263307).epsilon(1e-15));
  CHECK(normal_cdf(-7.5) == doctest::Approx(3.1908916729108962278e-14).epsilon(1e-12));
}

TEST_CASE("normal cdf symmetry and monotonicity") {
  RandomStream rng(11, 0);
  double prev_x = -9.0;
  for (int k = 0; k < 2000; ++k) {
    const double x = 16.0 * rng.uniform() - 8.0;
    CHECK(normal_cdf(x) + normal_cdf(-x) == doctest::Approx(1.0).epsilon(1e-15));
    const double lo = std::min(prev_x, x), hi = std::max(prev_x, x);
    CHECK(normal_cdf(lo) <= normal_cdf(hi));
    prev_x = x;
  }
}

TEST_CASE("log normal cdf stays finite in the far lower tail") {
  for (double x : {-1.0, -5.0, -20.0}) {
    CHECK(log_normal_cdf(x) == doctest::Approx(std::log(testing::phi_ref(x))).epsilon(1e-10));
  }
  for (double x : {-40.0, -200.0, -1e4}) {
    const double v = log_normal_cdf(x);
    CHECK(std::isfinite(v));
    const double leading = -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(v == doctest::Approx(leading).epsilon(1e-3));
  }
  CHECK(log_normal_cdf(10.0) == doctest::Approx(-testing::upper_ref(10.0)).epsilon(1e-6));
}

TEST_CASE("normal quantile inverts the cdf") {
  RandomStream rng(12, 0);
  for (int k = 0; k < 1000; ++k) {
    const double p = rng.uniform();
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.0) == -kInf);
  CHECK(normal_quantile(1.0) == kInf);
  CHECK_THROWS_AS(normal_quantile(1.5), std::invalid_argument);
}

TEST_CASE("random streams replay and separate") {
  RandomStream a(5, 3), b(5, 3), c(5, 4);
  bool differs = false;
  for (int k = 0; k < 100; ++k) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
  }
  CHECK(differs);
  RandomStream u(6, 0);
  for (int k = 0; k < 100000; ++k) {
    const double v = u.uniform();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("untruncated draws are standard normal") {
  RandomStream rng(21, 0);
  std::vector<double> draws(20000);
  for (double& x : draws) x = sample_truncated_normal(0.0, 1.0, -kInf, kInf, rng);
  CHECK(testing::ks_statistic(draws, testing::phi_ref) < testing::ks_critical_0001(draws.size()));
}

TEST_CASE("half-normal mean") {
  RandomStream rng(22, 0);
  double sum = 0.0;
  const int n = 1000000;
  for (int k = 0; k < n; ++k) sum += sample_truncated_normal(0.0, 1.0, 0.0, kInf, rng);
  CHECK(std::abs(sum / n - std::sqrt(2.0 / std::numbers::pi)) < 0.01);
}

namespace {

// Truncated normal cdf through whichever tail keeps precision.
double truncated_cdf_ref(double x, double mean, double sd, double lower, double upper) {
  const double l = (lower - mean) / sd, u = (upper - mean) / sd, z = (x - mean) / sd;
  if (z <= l) return 0.0;
  if (z >= u) return 1.0;
  if (l > 0.0) {
    return (testing::upper_ref(l) - testing::upper_ref(z)) /
           (testing::upper_ref(l) - testing::upper_ref(u));
  }
  return (testing::phi_ref(z) - testing::phi_ref(l)) / (testing::phi_ref(u) - testing::phi_ref(l));
}

struct TruncCase {
  double mean, sd, lower, upper;
};

}  // namespace

TEST_CASE("truncated normal draws match the analytic cdf") {
  const std::vector<TruncCase> cases{
      {0.0, 1.0, 0.0, kInf},    {2.0, 0.5, -1.0, 1.5}, {-5.0, 1.0, 0.0, kInf},
      {0.0, 1.0, 8.0, kInf},    {1.0, 2.0, -kInf, -3.0}, {0.0, 1.0, -0.1, 0.1},
      {3.0, 1.0, -kInf, -6.0},
  };
  RandomStream rng(23, 0);
  for (const auto& c : cases) {
    CAPTURE(c.mean);
    CAPTURE(c.lower);
    CAPTURE(c.upper);
    std::vector<double> draws(20000);
    for (double& x : draws) {
      x = sample_truncated_normal(c.mean, c.sd, c.lower, c.upper, rng);
      REQUIRE(x > c.lower);
      REQUIRE(x < c.upper);
    }
    const double d = testing::ks_statistic(draws, [&](double x) {
      return truncated_cdf_ref(x, c.mean, c.sd, c.lower, c.upper);
    });
    CHECK(d < testing::ks_critical_0001(draws.size()));
    for (double x : {draws[0], draws[1], draws[2]}) {
      CHECK(truncated_normal_cdf(x, c.mean, c.sd, c.lower, c.upper) ==
            doctest::Approx(truncated_cdf_ref(x, c.mean, c.sd, c.lower, c.upper)).epsilon(1e-8));
    }
  }
}

TEST_CASE("bound is respected far from the mean") {
  RandomStream rng(24, 0);
  for (int k = 0; k < 100000; ++k) REQUIRE(sample_truncated_normal(-5.0, 1.0, 0.0, kInf, rng) > 0.0);
}

TEST_CASE("truncated moments against numerical integration") {
  const std::vector<TruncCase> cases{{0.0, 1.0, 0.0, kInf}, {2.0, 0.5, -1.0, 1.5}, {-3.0, 1.0, 0.0, kInf}};
  for (const auto& c : cases) {
    const double lo = std::isfinite(c.lower) ? c.lower : c.mean - 40.0 * c.sd;
    const double hi = std::isfinite(c.upper) ? c.upper : c.mean + 40.0 * c.sd;
    const int n = 200000;
    const double h = (hi - lo) / n;
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double x = lo + h * k;
      const double w = (k == 0 || k == n) ? 0.5 : 1.0;
      const double z = (x - c.mean) / c.sd;
      const double f = w * std::exp(-0.5 * z * z);
      m0 += f;
      m1 += f * x;
      m2 += f * x * x;
    }
    const double mean = m1 / m0;
    CHECK(truncated_normal_mean(c.mean, c.sd, c.lower, c.upper) == doctest::Approx(mean).epsilon(1e-7));
    CHECK(truncated_normal_variance(c.mean, c.sd, c.lower, c.upper) ==
          doctest::Approx(m2 / m0 - mean * mean).epsilon(1e-6));
  }
}

TEST_CASE("truncated normal rejects an empty interval") {
  RandomStream rng(25, 0);
  CHECK_THROWS_AS(sample_truncated_normal(0.0, 1.0, 1.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_truncated_normal(0.0, 0.0, 0.0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("bernoulli") {
  RandomStream rng(31, 0);
  for (int k = 0; k < 1000; ++k) {
    REQUIRE(sample_bernoulli(0.0, rng) == 0);
    REQUIRE(sample_bernoulli(1.0, rng) == 1);
  }
  const int n = 1000000;
  int ones = 0;
  for (int k = 0; k < n; ++k) ones += sample_bernoulli(0.3, rng);
  CHECK(std::abs(static_cast<double>(ones) / n - 0.3) < 0.002);
}

TEST_CASE("inverse gamma log density") {
  CHECK(inverse_gamma_logpdf(1.0, 1.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
  // integral of the density over (0, inf) by substitution x = exp(u)
  double total = 0.0;
  const double lo = -12.0, hi = 14.0;
  const int n = 400000;
  const double h = (hi - lo) / n;
  for (int k = 0; k <= n; ++k) {
    const double u = lo + h * k;
    const double w = (k == 0 || k == n) ? 0.5 : 1.0;
    total += w * std::exp(inverse_gamma_logpdf(std::exp(u), 2.0, 3.0) + u);
  }
  CHECK(total * h == doctest::Approx(1.0).epsilon(1e-9));
  const double mode = 3.0 / (2.0 + 1.0);
  CHECK(inverse_gamma_logpdf(mode, 2.0, 3.0) > inverse_gamma_logpdf(mode * 1.001, 2.0, 3.0));
  CHECK(inverse_gamma_logpdf(mode, 2.0, 3.0) > inverse_gamma_logpdf(mode * 0.999, 2.0, 3.0));
}

TEST_CASE("bivariate conditional") {
  const auto indep = bivariate_conditional(0.3, -0.2, {2.0, 0.0, 1.5}, 1, 4.0);
  CHECK(indep.mean == doctest::Approx(0.3));
  CHECK(indep.var == doctest::Approx(2.0));

  const auto c = bivariate_conditional(0.0, 0.0, {1.0, 0.8, 1.0}, 1, 1.0);
  CHECK(c.mean == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(c.var == doctest::Approx(0.36).epsilon(1e-15));

  const auto at_mean = bivariate_conditional(0.7, -1.1, {1.0, 0.5, 2.0}, 1, -1.1);
  CHECK(at_mean.mean == doctest::Approx(0.7));

  const auto other = bivariate_conditional(0.0, 0.0, {1.0, 0.4, 1.2}, 0, 0.5);
  CHECK(other.mean == doctest::Approx(0.2));
  CHECK(other.var == doctest::Approx(1.2 - 0.16));
}
