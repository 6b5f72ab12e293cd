#pragma once

// Random streams, normal-family special functions and the handful of
// samplers used by the Gibbs sampler, the MML code and the simulator.

#include <cstdint>
#include <limits>
#include <random>

namespace misirt {

/// Seedable stream of random variates. A stream is identified by
/// (seed, stream_id); the same pair always replays the same sequence and
/// distinct ids give independent sequences. Not shareable across threads.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Standard exponential (rate 1).
  double exponential();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_pdf(double x);
double normal_log_pdf(double x);

/// Standard normal CDF, full double precision in both tails.
double normal_cdf(double x);

/// normal_cdf clamped to [1e-300, 1 - 1e-16]; use wherever the value is
/// about to go through a logarithm.
double normal_cdf_clamped(double x);

/// log Phi(x), finite for every finite x (asymptotic series in the far
/// lower tail).
double log_normal_cdf(double x);

/// Inverse of the standard normal CDF for p in (0, 1).
double normal_quantile(double p);

/// Draw from N(mean, sd^2) restricted to (lower, upper). Either bound may
/// be infinite. Throws std::invalid_argument when lower >= upper or sd <= 0.
double sample_truncated_normal(double mean, double sd, double lower, double upper,
                               RandomStream& rng);

/// Mean of N(mean, sd^2) truncated to (lower, upper).
double truncated_normal_mean(double mean, double sd, double lower, double upper);

/// Variance of N(mean, sd^2) truncated to (lower, upper).
double truncated_normal_variance(double mean, double sd, double lower, double upper);

/// CDF of the truncated normal at x.
double truncated_normal_cdf(double x, double mean, double sd, double lower, double upper);

int sample_bernoulli(double p, RandomStream& rng);

/// Log density of the inverse gamma distribution with the given shape and
/// scale: shape*log(scale) - lgamma(shape) - (shape+1)*log(x) - scale/x.
double inverse_gamma_logpdf(double x, double shape, double scale);

/// Symmetric 2x2 covariance matrix.
struct Covariance2 {
  double var1;
  double cov;
  double var2;

  bool positive_definite() const { return var1 > 0.0 && var1 * var2 - cov * cov > 0.0; }
};

struct ConditionalNormal {
  double mean;
  double var;
};

/// Conditional distribution of one component of a bivariate normal given
/// the other. `given_component` is the index (0 or 1) of the component
/// being conditioned on; the result describes the other one.
ConditionalNormal bivariate_conditional(double mu1, double mu2, const Covariance2& sigma,
                                        int given_component, double given_value);

}  // namespace misirt
