#include <doctest.h>

#include "misirt/diagnostics.hpp"
#include "misirt/distributions.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

using namespace misirt;

namespace {
std::vector<double> normal_chain(std::size_t n, double mean, std::uint64_t stream) {
  RandomStream rng(61, stream);
  std::vector<double> out(n);
  for (double& x : out) x = mean + rng.normal();
  return out;
}
}  // namespace

TEST_CASE("identical chains give R-hat near one") {
  const auto c = normal_chain(1000, 0.0, 0);
  const double r = gelman_rubin({std::span<const double>(c), std::span<const double>(c)});
  CHECK(std::abs(r - 1.0) <= 0.01);
}

TEST_CASE("separated chains give R-hat above two") {
  const auto c0 = normal_chain(1000, 0.0, 1), c1 = normal_chain(1000, 5.0, 2);
  const double r = gelman_rubin({std::span<const double>(c0), std::span<const double>(c1)});
  CHECK(r > 2.0);
}

TEST_CASE("hand-evaluated R-hat") {
  const std::vector<double> c0{0, 0, 2, 2}, c1{1, 1, 3, 3};
  const double r = gelman_rubin({std::span<const double>(c0), std::span<const double>(c1)});
  CHECK(r == doctest::Approx(1.14564392373896).epsilon(1e-13));
}

TEST_CASE("R-hat is invariant to affine maps of the draws") {
  RandomStream rng(62, 0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<double>> chains(3, std::vector<double>(50));
    for (auto& c : chains) {
      const double shift = rng.normal();
      for (double& x : c) x = shift + rng.normal();
    }
    const double scale = 0.1 + 10.0 * rng.uniform(), offset = 5.0 * rng.normal();
    auto moved = chains;
    for (auto& c : moved) {
      for (double& x : c) x = scale * x + offset;
    }
    const double r0 = gelman_rubin({chains[0], chains[1], chains[2]});
    const double r1 = gelman_rubin({moved[0], moved[1], moved[2]});
    CHECK(r1 == doctest::Approx(r0).epsilon(1e-10));
  }
}

TEST_CASE("R-hat from streaming summaries matches the direct formula") {
  std::vector<std::vector<double>> chains{normal_chain(300, 0.0, 3), normal_chain(300, 0.3, 4)};
  std::vector<RunningSummary> summaries(2, RunningSummary(300));
  for (std::size_t c = 0; c < 2; ++c) {
    for (double x : chains[c]) summaries[c].add(x);
  }
  CHECK(gelman_rubin_from_summaries(summaries) ==
        doctest::Approx(gelman_rubin({chains[0], chains[1]})).epsilon(1e-12));
}

TEST_CASE("R-hat preconditions") {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  CHECK_THROWS_AS(gelman_rubin({std::span<const double>(a)}), std::invalid_argument);
  CHECK_THROWS_AS(gelman_rubin({std::span<const double>(a), std::span<const double>(b)}),
                  std::invalid_argument);
}

TEST_CASE("R-hat report and trace") {
  const auto c0 = normal_chain(1000, 0.0, 5), c1 = normal_chain(1000, 0.0, 6);
  const auto d0 = normal_chain(1000, 0.0, 7), d1 = normal_chain(1000, 4.0, 8);
  const std::vector<std::string> names{"x", "y"};
  const std::vector<std::vector<std::span<const double>>> chains{{c0, d0}, {c1, d1}};
  const auto report = rhat_report(names, chains, 250, 5000, 2);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].pass);
  CHECK_FALSE(report.entries[1].pass);
  CHECK_FALSE(report.all_pass());
  CHECK(report.max_rhat() == report.entries[1].rhat);
  REQUIRE(report.trace.size() == 8);
  CHECK(report.trace[0].iteration == 5500);
  CHECK(report.trace[3].iteration == 7000);
  CHECK(report.trace[3].rhat == doctest::Approx(report.entries[0].rhat));
}

TEST_CASE("running summary and pooled estimate") {
  RunningSummary constant(100);
  for (int k = 0; k < 100; ++k) constant.add(2.5);
  const std::vector<RunningSummary> one{constant};
  const auto p = pool(one);
  CHECK(p.mean == doctest::Approx(2.5));
  CHECK(p.sd == 0.0);
  CHECK(p.mcse == 0.0);

  RunningSummary low(50), high(50);
  for (int k = 0; k < 50; ++k) {
    low.add(0.0);
    high.add(2.0);
  }
  const std::vector<RunningSummary> both{low, high};
  CHECK(pool(both).mean == doctest::Approx(1.0));
}

TEST_CASE("batch-means MCSE of iid draws is close to 1/sqrt(M)") {
  const std::size_t M = 40000;
  RandomStream rng(63, 0);
  for (int trial = 0; trial < 5; ++trial) {
    RunningSummary s(M);
    for (std::size_t k = 0; k < M; ++k) s.add(rng.normal());
    const std::vector<RunningSummary> one{s};
    const auto p = pool(one);
    CHECK(p.mcse == doctest::Approx(1.0 / std::sqrt(static_cast<double>(M))).epsilon(0.2));
    CHECK(p.sd == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("bias and MAE") {
  const std::vector<double> truth{0.3, -0.2};
  const auto exact = bias_mae({{0.3, -0.2}, {0.3, -0.2}}, truth);
  CHECK(exact.mean_bias == 0.0);
  CHECK(exact.mean_mae == 0.0);

  const std::vector<double> zero{0.0};
  const auto cancel = bias_mae({{-1.0}, {1.0}}, zero);
  CHECK(cancel.mean_bias == 0.0);
  CHECK(cancel.mean_mae == 1.0);

  const std::vector<double> t2{1.0, 2.0};
  const auto r = bias_mae({{1.5, 1.8}}, t2);
  CHECK(r.mean_bias == doctest::Approx(0.15).epsilon(1e-14));
  CHECK(r.mean_mae == doctest::Approx(0.35).epsilon(1e-14));

  CHECK_THROWS(bias_mae({{1.0}}, t2));
}
