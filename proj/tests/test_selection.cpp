#include <doctest.h>

#include "misirt/distributions.hpp"
#include "misirt/selection.hpp"
#include "test_support.hpp"

#include <cmath>
#include <optional>
#include <vector>

using namespace misirt;
using testing::make_dataset;

namespace {
constexpr std::optional<int> NA = std::nullopt;

SelectionReport report_with(double dic, double lpml, std::size_t n = 10, std::size_t j = 4) {
  SelectionReport r;
  r.dic = dic;
  r.lpml = lpml;
  r.n_persons = n;
  r.n_items = j;
  return r;
}
}  // namespace

TEST_CASE("missingness loglik at pi = 0.5 everywhere") {
  const Dataset d = make_dataset({{1, NA, 0}, {NA, NA, 1}});
  Table<std::uint8_t> y(2, 3, 0);
  y(0, 0) = 1;
  y(1, 2) = 1;
  const std::vector<double> tau{0.0, 0.0}, zeta{0.0, 0.0, 0.0};
  const auto ll = missingness_loglik(d, y, tau, zeta, {0.0, 0.0, 0.0});
  CHECK(ll.total == doctest::Approx(6.0 * std::log(0.5)).epsilon(1e-15));
  CHECK(ll.per_cell.size() == 6);
}

TEST_CASE("missingness loglik of a single missing cell") {
  const Dataset d = make_dataset({{NA}});
  Table<std::uint8_t> y(1, 1, 1);
  const std::vector<double> tau{0.0}, zeta{0.0};
  const auto ll = missingness_loglik(d, y, tau, zeta, {-2.2, 0.02, -0.2});
  CHECK(ll.total == doctest::Approx(-4.8039216668706719).epsilon(1e-14));
}

TEST_CASE("missingness loglik is the complete-data loglik minus its response part") {
  RandomStream rng(51, 0);
  std::vector<std::vector<std::optional<int>>> rows(6, std::vector<std::optional<int>>(5));
  Table<std::uint8_t> y(6, 5);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      y(i, j) = rng.uniform() < 0.5 ? 1 : 0;
      if (rng.uniform() > 0.3) rows[i][j] = y(i, j);
    }
  }
  const Dataset d = make_dataset(rows);
  ItemParams items;
  PersonParams persons;
  for (int j = 0; j < 5; ++j) {
    items.a.push_back(0.5 + rng.uniform());
    items.b.push_back(rng.normal());
    items.zeta.push_back(rng.normal());
  }
  for (int i = 0; i < 6; ++i) {
    persons.theta.push_back(rng.normal());
    persons.tau.push_back(rng.normal());
  }
  const Gammas g{-1.1, 0.04, -0.2};
  double response_part = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      const double eta = items.a[j] * (persons.theta[i] - items.b[j]);
      response_part += std::log(testing::phi_ref(y(i, j) ? eta : -eta));
    }
  }
  const double full = complete_data_loglik(d, y, items, persons, g);
  CHECK(missingness_loglik(d, y, persons.tau, items.zeta, g).total ==
        doctest::Approx(full - response_part).epsilon(1e-12));
}

TEST_CASE("DIC arithmetic") {
  const std::vector<double> one{-7.5};
  const auto single = compute_dic(one);
  CHECK(single.p_d == 0.0);
  CHECK(single.dic == single.d_hat);

  const std::vector<double> two{-10.0, -12.0};
  const auto r = compute_dic(two);
  CHECK(r.d_hat == 20.0);
  CHECK(r.d_bar == 22.0);
  CHECK(r.p_d == 2.0);
  CHECK(r.dic == 24.0);
}

TEST_CASE("DIC effective parameter count is never negative") {
  RandomStream rng(52, 0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> ll(1 + static_cast<std::size_t>(rng.uniform() * 50.0));
    for (double& v : ll) v = -1000.0 * rng.uniform();
    CHECK(compute_dic(ll).p_d >= 0.0);
  }
}

TEST_CASE("LPML arithmetic") {
  const auto same = compute_lpml({{-1.3, -0.2}, {-1.3, -0.2}, {-1.3, -0.2}});
  CHECK(same.log_cpo[0] == doctest::Approx(-1.3).epsilon(1e-15));
  CHECK(same.log_cpo[1] == doctest::Approx(-0.2).epsilon(1e-15));

  const auto hm = compute_lpml({{std::log(0.2)}, {std::log(0.8)}});
  CHECK(std::exp(hm.log_cpo[0]) == doctest::Approx(0.32).epsilon(1e-15));
  CHECK(hm.lpml == doctest::Approx(std::log(0.32)).epsilon(1e-15));

  const auto extreme = compute_lpml({{-800.0}, {-1.0}});
  CHECK(std::isfinite(extreme.lpml));
  CHECK(extreme.lpml == doctest::Approx(-800.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("streaming CPO agrees with the batch computation in any split") {
  RandomStream rng(53, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cells = 1 + static_cast<std::size_t>(rng.uniform() * 6.0);
    const std::size_t draws = 2 + static_cast<std::size_t>(rng.uniform() * 40.0);
    std::vector<std::vector<double>> ll(draws, std::vector<double>(cells));
    for (auto& row : ll) {
      for (double& v : row) v = -20.0 * rng.uniform() * rng.uniform();
    }
    const std::size_t split = static_cast<std::size_t>(rng.uniform() * static_cast<double>(draws));
    CpoAccumulator first(cells), second(cells);
    for (std::size_t m = 0; m < draws; ++m) (m < split ? first : second).add_draw(ll[m]);
    first.merge(second);
    const auto streamed = lpml_from_accumulator(first);
    const auto batch = compute_lpml(ll);
    CHECK(first.n_draws() == draws);
    CHECK(streamed.lpml == doctest::Approx(batch.lpml).epsilon(1e-12));
  }
}

TEST_CASE("selection report collects DIC and LPML") {
  CpoAccumulator acc(2);
  const std::vector<double> d1{std::log(0.2), -1.0}, d2{std::log(0.8), -1.0};
  acc.add_draw(d1);
  acc.add_draw(d2);
  const std::vector<double> totals{-10.0, -12.0};
  const auto r = make_selection_report(totals, acc, 1, 2, MissingnessMode::Ignorable);
  CHECK(r.dic == 24.0);
  CHECK(r.p_d == 2.0);
  CHECK(r.lpml == doctest::Approx(std::log(0.32) - 1.0).epsilon(1e-14));
  CHECK(r.n_draws == 2);
  CHECK(r.model_mode == "ignorable");
}

TEST_CASE("model comparison") {
  const auto same = compare(report_with(100.0, -50.0), report_with(100.0, -50.0));
  CHECK(same.delta_dic == 0.0);
  CHECK(same.delta_lpml == 0.0);
  CHECK(same.preferred == "indistinguishable");

  // reported application: DIC 5504 vs 5857, LPML -2895 vs -3016
  const auto pisa = compare(report_with(5504.0, -2895.0, 493, 17), report_with(5857.0, -3016.0, 493, 17));
  CHECK(pisa.delta_dic == -353.0);
  CHECK(pisa.delta_lpml == 121.0);
  CHECK(pisa.preferred == "nonignorable");

  CHECK(compare(report_with(110.0, -60.0), report_with(100.0, -50.0)).preferred == "ignorable");
  CHECK(compare(report_with(90.0, -60.0), report_with(100.0, -50.0)).preferred == "conflicting");
  CHECK_THROWS_AS(compare(report_with(1.0, -1.0, 10, 4), report_with(1.0, -1.0, 11, 4)), DataError);
}
