#pragma once

// Data types and probability kernels of the probit response model and the
// selection-type missingness model.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace misirt {

/// Thrown when input data violates a model precondition (bad shapes,
/// items without observed responses, malformed files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a computation reaches a degenerate numerical state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major rows x cols array.
template <typename T>
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  std::span<T> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool operator==(const Table&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

enum class Response : std::uint8_t { Incorrect = 0, Correct = 1, Missing = 2 };

/// Observed response matrix. Columns are in administration order; the
/// cumulative not-reached statistic depends on it.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t n_persons, std::size_t n_items, std::vector<Response> cells,
          std::vector<std::string> item_ids = {});

  std::size_t n_persons() const { return responses_.rows(); }
  std::size_t n_items() const { return responses_.cols(); }

  Response response(std::size_t i, std::size_t j) const { return responses_(i, j); }
  bool missing(std::size_t i, std::size_t j) const { return responses_(i, j) == Response::Missing; }
  /// Missingness indicator R_ij in {0, 1}.
  std::uint8_t missing_indicator(std::size_t i, std::size_t j) const { return missing(i, j) ? 1 : 0; }
  /// Number of missing cells before item j in person i's row.
  int cum_missing(std::size_t i, std::size_t j) const { return cum_missing_(i, j); }

  const Table<Response>& responses() const { return responses_; }
  const Table<int>& cum_missing_table() const { return cum_missing_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }

  std::size_t missing_count() const { return missing_count_; }
  double missing_proportion() const;
  std::size_t observed_count(std::size_t j) const { return observed_per_item_[j]; }
  std::size_t missing_in_row(std::size_t i) const;
  double item_missing_proportion(std::size_t j) const;

  /// Content hash over dimensions and cells (FNV-1a, 64 bit).
  std::uint64_t content_hash() const;

  bool operator==(const Dataset& other) const { return responses_ == other.responses_; }

 private:
  Table<Response> responses_;
  Table<int> cum_missing_;
  std::vector<std::size_t> observed_per_item_;
  std::vector<std::string> item_ids_;
  std::size_t missing_count_ = 0;
};

/// Missingness indicators of one person. Returns sum_{h<j} R_ih (0-based j);
/// zero for the first item.
int cumulative_prior_missing(std::span<const std::uint8_t> r_row, std::size_t j);

struct ItemParams {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> zeta;

  std::size_t size() const { return a.size(); }
  void validate() const;
};

struct PersonParams {
  std::vector<double> theta;
  std::vector<double> tau;

  std::size_t size() const { return theta.size(); }
};

/// Coefficients of the missingness regression.
struct Gammas {
  double g0;
  double g1;
  double g2;

  bool satisfies_sign_constraints() const { return g0 < 0.0 && g1 > 0.0 && g2 < 0.0; }
};

/// Missingness regression plus the (theta, tau) covariance block. The
/// ability variance is fixed at 1 and both means at 0.
struct StructuralParams {
  double gamma0 = -1.0;
  double gamma1 = 0.05;
  double gamma2 = -0.1;
  double sigma_theta_tau = 0.0;
  double sigma_tau_sq = 1.0;

  Gammas gammas() const { return {gamma0, gamma1, gamma2}; }
  bool covariance_positive_definite() const {
    return sigma_tau_sq > 0.0 && sigma_theta_tau * sigma_theta_tau < sigma_tau_sq;
  }
  void validate() const;
};

enum class MissingnessMode { Nonignorable, Ignorable };
enum class Link { Probit };

struct ModelSpec {
  MissingnessMode mode = MissingnessMode::Nonignorable;
  Link link = Link::Probit;
};

std::string to_string(MissingnessMode mode);
MissingnessMode parse_mode(const std::string& text);

/// Phi(a (theta - b)).
double prob_correct(double theta, double a, double b);

/// Probit index gamma0 - tau + zeta + gamma1 * cum_missing + gamma2 * y.
inline double missingness_index(double tau, double zeta, const Gammas& g, int cum_missing, int y) {
  return g.g0 - tau + zeta + g.g1 * cum_missing + g.g2 * y;
}

/// P(R_ij = 1 | tau, zeta, gammas, prior missing count, y).
double prob_missing(double tau, double zeta, const Gammas& g, int cum_missing, int y);

/// Posterior probability that a missing response is correct:
/// p pi11 / (p pi11 + (1 - p) pi10). Throws NumericalError on a zero
/// denominator.
double imputation_prob(double p, double pi11, double pi10);

/// Log-likelihood of the completed data (Y, R). `y_complete` holds 0/1 for
/// every cell; at observed cells it must agree with the dataset.
double complete_data_loglik(const Dataset& data, const Table<std::uint8_t>& y_complete,
                            const ItemParams& items, const PersonParams& persons,
                            const Gammas& gammas);

/// Observed-data log-likelihood obtained by summing the complete-data
/// likelihood over every completion of the missing cells (per person, in
/// log space). Throws DataError if a person has more than
/// `max_missing_per_person` missing cells.
double observed_data_loglik_exhaustive(const Dataset& data, const ItemParams& items,
                                       const PersonParams& persons, const Gammas& gammas,
                                       std::size_t max_missing_per_person = 20);

}  // namespace misirt
