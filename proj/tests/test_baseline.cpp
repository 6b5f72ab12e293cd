#include <doctest.h>

#include "misirt/baseline.hpp"
#include "misirt/sampler.hpp"
#include "test_support.hpp"

#include <cmath>
#include <optional>
#include <vector>

using namespace misirt;
using testing::make_dataset;

namespace {
constexpr std::optional<int> NA = std::nullopt;

Dataset complete_data(std::size_t N, std::size_t J, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  std::vector<std::vector<std::optional<int>>> rows(N, std::vector<std::optional<int>>(J));
  for (auto& row : rows) {
    const double theta = rng.normal();
    for (std::size_t j = 0; j < J; ++j) {
      const double b = -1.0 + 0.5 * static_cast<double>(j);
      row[j] = rng.uniform() < testing::phi_ref(1.2 * (theta - b)) ? 1 : 0;
    }
  }
  return make_dataset(rows);
}
}  // namespace

TEST_CASE("complete data passes through unchanged") {
  const Dataset d = make_dataset({{1, 0}, {0, 0}, {1, 1}});
  const auto cc = listwise_delete(d);
  CHECK(cc.data == d);
  CHECK(cc.person_index == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("rows with a missing cell are dropped in order") {
  const auto cc = listwise_delete(make_dataset({{1, 0}, {NA, NA}, {0, 1}}));
  CHECK(cc.data.n_persons() == 2);
  CHECK(cc.person_index == std::vector<std::size_t>{0, 2});
  CHECK(cc.data.response(1, 1) == Response::Correct);

  const auto partial = listwise_delete(make_dataset({{1, NA}, {0, 0}, {NA, 1}, {1, 1}}));
  CHECK(partial.person_index == std::vector<std::size_t>{1, 3});
  CHECK(partial.data.item_ids() == std::vector<std::string>{"item1", "item2"});
}

TEST_CASE("nothing left to fit") {
  CHECK_THROWS_AS(listwise_delete(make_dataset({{1, NA}, {NA, 0}})), DataError);
}

TEST_CASE("assessment-shaped fixture keeps its 173 complete respondents") {
  const Dataset d = testing::pisa_shaped_dataset(2024);
  CHECK(d.n_persons() == 493);
  CHECK(d.n_items() == 17);
  CHECK(d.missing_count() == 1919);
  CHECK(d.missing_proportion() == doctest::Approx(0.229).epsilon(0.002));
  const auto cc = listwise_delete(d);
  CHECK(cc.data.n_persons() == 173);
  CHECK(cc.data.missing_count() == 0);
}

TEST_CASE("step 4 and 5 conditionals on a single item") {
  const Dataset d = make_dataset({{1}, {0}});
  GibbsState s;
  s.items = {{1.1}, {0.2}, {0.0}};
  s.persons = {{0.3, -0.5}, {0.0, 0.0}};
  s.z = Table<double>(2, 1);
  s.z(0, 0) = 0.8;
  s.z(1, 0) = -0.4;
  s.w = Table<double>(2, 1);
  s.y = Table<std::uint8_t>(2, 1);
  const Priors p;
  // var = 1 / (1 + 0.1^2 + 0.7^2), mean = var * (0.8 * 0.1 + 0.4 * 0.7)
  const auto a = a_conditionals(s, d, p)[0];
  CHECK(a.var == doctest::Approx(1.0 / 1.5).epsilon(1e-15));
  CHECK(a.mean == doctest::Approx(0.24).epsilon(1e-14));
  // var = 1 / (1 + 2 * 1.21), mean = var * 1.1 * (1.1 * -0.2 - 0.4)
  const auto b = b_conditionals(s, d, p)[0];
  CHECK(b.var == doctest::Approx(1.0 / 3.42).epsilon(1e-15));
  CHECK(b.mean == doctest::Approx(-0.682 / 3.42).epsilon(1e-14));
}

TEST_CASE("response-only draws carry item parameters only") {
  const auto cc = listwise_delete(complete_data(60, 4, 91));
  SamplerConfig c;
  c.n_iterations = 600;
  c.burn_in = 300;
  c.n_chains = 2;
  const auto store = fit_irt_only(cc, c);
  const auto& names = store.chains[0].names;
  CHECK(names.size() == 8);
  CHECK(names.back() == "b.4");
  for (std::size_t j = 1; j <= 4; ++j) {
    for (double v : store.chains[1].column("a." + std::to_string(j))) REQUIRE(v > 0.0);
  }
  CHECK_THROWS(selection_report(store));
  const auto summary = summarize(store);
  CHECK(summary.block("theta").size() == 60);
  CHECK(summary.block("tau").empty());
}

TEST_CASE("on complete data the response-only fit agrees with the ignorable full model") {
  const Dataset d = complete_data(150, 5, 92);
  SamplerConfig c;
  c.n_iterations = 6000;
  c.burn_in = 1000;
  c.n_chains = 2;
  c.seed = 5;
  const auto irt = summarize(fit_irt_only(listwise_delete(d), c));
  c.seed = 6;
  const auto full = summarize(run_chains(d, {MissingnessMode::Ignorable}, c));
  for (std::size_t j = 1; j <= 5; ++j) {
    for (const char* block : {"a.", "b."}) {
      const auto& x = irt.at(block + std::to_string(j));
      const auto& y = full.at(block + std::to_string(j));
      CAPTURE(x.name);
      CHECK(std::abs(x.eap - y.eap) <= 4.0 * std::hypot(x.mcse, y.mcse));
    }
  }
}
