#include "misirt/model.hpp"

#include "misirt/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace misirt {

Dataset::Dataset(std::size_t n_persons, std::size_t n_items, std::vector<Response> cells,
                 std::vector<std::string> item_ids)
    : responses_(n_persons, n_items),
      cum_missing_(n_persons, n_items, 0),
      observed_per_item_(n_items, 0),
      item_ids_(std::move(item_ids)) {
  if (cells.size() != n_persons * n_items) {
    throw DataError("dataset: cell count does not match " + std::to_string(n_persons) + "x" +
                    std::to_string(n_items));
  }
  if (item_ids_.empty()) {
    for (std::size_t j = 0; j < n_items; ++j) item_ids_.push_back("item" + std::to_string(j + 1));
  }
  if (item_ids_.size() != n_items) throw DataError("dataset: item id count mismatch");
  std::copy(cells.begin(), cells.end(), responses_.values().begin());
  for (std::size_t i = 0; i < n_persons; ++i) {
    int running = 0;
    for (std::size_t j = 0; j < n_items; ++j) {
      const Response cell = responses_(i, j);
      if (cell != Response::Incorrect && cell != Response::Correct && cell != Response::Missing) {
        throw DataError("dataset: invalid response code");
      }
      cum_missing_(i, j) = running;
      if (cell == Response::Missing) {
        ++running;
        ++missing_count_;
      } else {
        ++observed_per_item_[j];
      }
    }
  }
}

double Dataset::missing_proportion() const {
  const std::size_t cells = n_persons() * n_items();
  return cells == 0 ? 0.0 : static_cast<double>(missing_count_) / static_cast<double>(cells);
}

std::size_t Dataset::missing_in_row(std::size_t i) const {
  const auto row = responses_.row(i);
  return static_cast<std::size_t>(std::count(row.begin(), row.end(), Response::Missing));
}

double Dataset::item_missing_proportion(std::size_t j) const {
  if (n_persons() == 0) return 0.0;
  return 1.0 - static_cast<double>(observed_per_item_[j]) / static_cast<double>(n_persons());
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (int shift = 0; shift < 64; shift += 8) mix((n_persons() >> shift) & 0xff);
  for (int shift = 0; shift < 64; shift += 8) mix((n_items() >> shift) & 0xff);
  for (Response r : responses_.values()) mix(static_cast<std::uint64_t>(r));
  return h;
}

int cumulative_prior_missing(std::span<const std::uint8_t> r_row, std::size_t j) {
  if (j > r_row.size()) throw std::out_of_range("cumulative_prior_missing: item index");
  return std::accumulate(r_row.begin(), r_row.begin() + static_cast<std::ptrdiff_t>(j), 0);
}

void ItemParams::validate() const {
  if (b.size() != a.size() || zeta.size() != a.size()) {
    throw std::invalid_argument("item parameters: inconsistent lengths");
  }
  for (double v : a) {
    if (!(v > 0.0)) throw std::invalid_argument("item parameters: discrimination must be positive");
  }
}

void StructuralParams::validate() const {
  if (!gammas().satisfies_sign_constraints()) {
    throw std::invalid_argument("structural parameters: need gamma0 < 0, gamma1 > 0, gamma2 < 0");
  }
  if (!covariance_positive_definite()) {
    throw std::invalid_argument("structural parameters: covariance block not positive definite");
  }
}

std::string to_string(MissingnessMode mode) {
  return mode == MissingnessMode::Nonignorable ? "nonignorable" : "ignorable";
}

MissingnessMode parse_mode(const std::string& text) {
  if (text == "nonignorable") return MissingnessMode::Nonignorable;
  if (text == "ignorable") return MissingnessMode::Ignorable;
  throw std::invalid_argument("unknown missingness mode '" + text + "'");
}

double prob_correct(double theta, double a, double b) { return normal_cdf(a * (theta - b)); }

double prob_missing(double tau, double zeta, const Gammas& g, int cum_missing, int y) {
  return normal_cdf(missingness_index(tau, zeta, g, cum_missing, y));
}

double imputation_prob(double p, double pi11, double pi10) {
  const double num = p * pi11;
  const double den = num + (1.0 - p) * pi10;
  if (!(den > 0.0)) throw NumericalError("imputation_prob: zero denominator");
  return num / den;
}

namespace {

void check_shapes(const Dataset& data, const ItemParams& items, const PersonParams& persons) {
  if (items.size() != data.n_items() || persons.size() != data.n_persons() ||
      persons.tau.size() != data.n_persons()) {
    throw std::invalid_argument("parameter dimensions do not match the dataset");
  }
}

// log P(Y_ij = y) + log P(R_ij = r | y) for one cell.
double cell_loglik(double theta, double tau, double a, double b, double zeta, const Gammas& g,
                   int cum, int y, int r) {
  const double u = a * (theta - b);
  const double v = missingness_index(tau, zeta, g, cum, y);
  return log_normal_cdf(y == 1 ? u : -u) + log_normal_cdf(r == 1 ? v : -v);
}

}  // namespace

double complete_data_loglik(const Dataset& data, const Table<std::uint8_t>& y_complete,
                            const ItemParams& items, const PersonParams& persons,
                            const Gammas& gammas) {
  check_shapes(data, items, persons);
  if (y_complete.rows() != data.n_persons() || y_complete.cols() != data.n_items()) {
    throw std::invalid_argument("complete_data_loglik: completed matrix has wrong shape");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    for (std::size_t j = 0; j < data.n_items(); ++j) {
      if (!data.missing(i, j) &&
          y_complete(i, j) != static_cast<std::uint8_t>(data.response(i, j))) {
        throw std::invalid_argument("complete_data_loglik: completion disagrees with an observed cell");
      }
      total += cell_loglik(persons.theta[i], persons.tau[i], items.a[j], items.b[j], items.zeta[j],
                           gammas, data.cum_missing(i, j), y_complete(i, j),
                           data.missing_indicator(i, j));
    }
  }
  return total;
}

double observed_data_loglik_exhaustive(const Dataset& data, const ItemParams& items,
                                       const PersonParams& persons, const Gammas& gammas,
                                       std::size_t max_missing_per_person) {
  check_shapes(data, items, persons);
  const std::size_t J = data.n_items();
  double total = 0.0;
  std::vector<std::size_t> missing_cols;
  std::vector<double> terms;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    missing_cols.clear();
    double fixed = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      if (data.missing(i, j)) {
        missing_cols.push_back(j);
        continue;
      }
      fixed += cell_loglik(persons.theta[i], persons.tau[i], items.a[j], items.b[j], items.zeta[j],
                           gammas, data.cum_missing(i, j),
                           data.response(i, j) == Response::Correct ? 1 : 0, 0);
    }
    if (missing_cols.size() > max_missing_per_person) {
      throw DataError("observed_data_loglik_exhaustive: person " + std::to_string(i) + " has " +
                      std::to_string(missing_cols.size()) + " missing cells (bound " +
                      std::to_string(max_missing_per_person) + ")");
    }
    const std::size_t patterns = std::size_t{1} << missing_cols.size();
    terms.assign(patterns, fixed);
    for (std::size_t pattern = 0; pattern < patterns; ++pattern) {
      for (std::size_t k = 0; k < missing_cols.size(); ++k) {
        const std::size_t j = missing_cols[k];
        const int y = static_cast<int>((pattern >> k) & 1u);
        terms[pattern] += cell_loglik(persons.theta[i], persons.tau[i], items.a[j], items.b[j],
                                      items.zeta[j], gammas, data.cum_missing(i, j), y, 1);
      }
    }
    const double peak = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - peak);
    total += peak + std::log(acc);
  }
  return total;
}

}  // namespace misirt
