#pragma once

// Marginal maximum likelihood for the item parameters (a, b, zeta) with
// gamma and the (theta, tau) covariance held fixed. The two latent traits
// are integrated out on a rotated Gauss-Hermite product grid; a missing
// response is summed out analytically inside the integrand.

#include "misirt/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace misirt {

/// Nodes and normalized weights of the K-point Gauss-Hermite rule for
/// N(0, 1), nodes ascending.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussHermite gauss_hermite_normal(std::size_t K);

struct QuadratureGrid {
  std::vector<double> theta;
  std::vector<double> tau;
  std::vector<double> weight;

  std::size_t size() const { return weight.size(); }
};

/// K x K product rule rotated by the Cholesky factor of
/// [[1, sigma_theta_tau], [sigma_theta_tau, sigma_tau_sq]]. Throws
/// std::invalid_argument if K < 2 or the matrix is not positive definite.
QuadratureGrid build_grid(std::size_t K, double sigma_theta_tau, double sigma_tau_sq);

struct MmlConfig {
  std::size_t K = 21;
  double tol = 1e-8;
  std::size_t max_iter = 200;
  /// When false only the response part enters the likelihood; zeta is then
  /// not estimated and missing cells drop out.
  bool include_missingness = true;
  /// Relative step of the central differences behind the Hessian.
  double fd_step = 1e-4;
};

struct MmlEstimate {
  std::vector<double> a_hat;
  std::vector<double> b_hat;
  std::vector<double> zeta_hat;
  double loglik = 0.0;
  /// Item-major (a_1, b_1, zeta_1, a_2, ...). NaN for parameters that were
  /// not estimated or when the information matrix could not be inverted.
  std::vector<double> std_errors;
  bool converged = false;
  std::size_t n_iterations = 0;
  double gradient_norm = 0.0;
  bool include_missingness = true;

  ItemParams items() const { return {a_hat, b_hat, zeta_hat}; }
  double se_a(std::size_t j) const { return std_errors[3 * j]; }
  double se_b(std::size_t j) const { return std_errors[3 * j + 1]; }
  double se_zeta(std::size_t j) const { return std_errors[3 * j + 2]; }
};

/// sum_i log sum_k w_k prod_j l_ij(node k).
double marginal_loglik(const ItemParams& items, const Dataset& data, const Gammas& gammas,
                       const QuadratureGrid& grid, bool include_missingness = true);

/// Gradient of marginal_loglik in item-major (log a_j, b_j, zeta_j).
std::vector<double> marginal_gradient(const ItemParams& items, const Dataset& data,
                                      const Gammas& gammas, const QuadratureGrid& grid,
                                      bool include_missingness = true);

/// Negative Hessian of marginal_loglik in (log a, b, zeta) from central
/// differences of the analytic gradient. Rows and columns follow the
/// item-major layout; without missingness the zeta rows are dropped, leaving
/// (log a_1, b_1, log a_2, ...). Not symmetrized.
Eigen::MatrixXd observed_information(const ItemParams& items, const Dataset& data,
                                     const Gammas& gammas, const QuadratureGrid& grid,
                                     bool include_missingness = true, double fd_step = 1e-4);

/// Throws DataError for an item with fewer than two distinct observed
/// responses, or when the dataset is empty.
void check_mml_preconditions(const Dataset& data);

MmlEstimate fit_mml(const Dataset& data, const Gammas& gammas, double sigma_theta_tau,
                    double sigma_tau_sq, const MmlConfig& config = {});

/// Standard errors from the inverse observed information, with the delta
/// method for a = exp(log a). Throws NumericalError if the information
/// matrix is singular or not positive definite.
std::vector<double> asymptotic_se(const MmlEstimate& estimate, const Dataset& data,
                                  const Gammas& gammas, const QuadratureGrid& grid,
                                  double fd_step = 1e-4);

}  // namespace misirt
