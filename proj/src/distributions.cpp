#include "misirt/distributions.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace misirt {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

// Beyond this many standard deviations the inverse-CDF route loses
// precision and the exponential-proposal rejection sampler takes over.
constexpr double kTailCutoff = 5.0;

std::uint32_t low_word(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t high_word(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

// Standard normal restricted to [a, inf), a > 0. Robert's exponential
// proposal with the optimal rate.
double upper_tail_draw(double a, RandomStream& rng) {
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential() / rate;
    const double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

// Standard normal restricted to (a, b), a < b.
double standard_truncated(double a, double b, RandomStream& rng) {
  if (std::isinf(a) && std::isinf(b)) return rng.normal();
  if (a >= kTailCutoff) {
    if (std::isinf(b)) return upper_tail_draw(a, rng);
    if ((b - a) * b <= 2.0) {
      for (;;) {
        const double z = a + (b - a) * rng.uniform();
        if (rng.uniform() <= std::exp(0.5 * (a * a - z * z))) return z;
      }
    }
    for (;;) {
      const double z = upper_tail_draw(a, rng);
      if (z < b) return z;
    }
  }
  if (b <= -kTailCutoff) return -standard_truncated(-b, -a, rng);

  const double u = rng.uniform();
  if (a > 0.0) {
    // Work with upper-tail probabilities to keep relative precision.
    const double pa = normal_cdf(-a);
    const double pb = normal_cdf(-b);
    return -normal_quantile(pb + u * (pa - pb));
  }
  const double pa = normal_cdf(a);
  const double pb = normal_cdf(b);
  return normal_quantile(pa + u * (pb - pa));
}

// Probability mass of the standard normal on (a, b), computed on the side
// of zero that avoids cancellation.
double interval_mass(double a, double b) {
  if (a > 0.0) return normal_cdf(-a) - normal_cdf(-b);
  return normal_cdf(b) - normal_cdf(a);
}

double pdf_or_zero(double x) { return std::isinf(x) ? 0.0 : normal_pdf(x); }
double x_pdf_or_zero(double x) { return std::isinf(x) ? 0.0 : x * normal_pdf(x); }

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{low_word(seed), high_word(seed), low_word(stream_id), high_word(stream_id),
                    0x9e3779b9u};
  engine_.seed(seq);
}

double RandomStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::exponential() { return -std::log(uniform()); }

double normal_pdf(double x) { return std::exp(normal_log_pdf(x)); }

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_cdf_clamped(double x) {
  return std::clamp(normal_cdf(x), 1e-300, 1.0 - 1e-16);
}

double log_normal_cdf(double x) {
  if (x > -37.0) {
    if (x > 5.0) return std::log1p(-normal_cdf(-x));
    return std::log(normal_cdf(x));
  }
  // Mills-ratio series: Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8)
  const double inv2 = 1.0 / (x * x);
  const double series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
  return -0.5 * x * x - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw std::invalid_argument("normal_quantile: p outside [0, 1]");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double sample_truncated_normal(double mean, double sd, double lower, double upper,
                               RandomStream& rng) {
  if (!(sd > 0.0)) throw std::invalid_argument("sample_truncated_normal: sd must be positive");
  if (!(lower < upper)) throw std::invalid_argument("sample_truncated_normal: empty interval");
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double x = mean + sd * standard_truncated(a, b, rng);
    if (x > lower && x < upper) return x;
  }
  // Only reachable when the interval is narrower than the rounding grid.
  return std::nextafter(lower, upper);
}

double truncated_normal_mean(double mean, double sd, double lower, double upper) {
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  return mean + sd * (pdf_or_zero(a) - pdf_or_zero(b)) / interval_mass(a, b);
}

double truncated_normal_variance(double mean, double sd, double lower, double upper) {
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  const double mass = interval_mass(a, b);
  const double shift = (pdf_or_zero(a) - pdf_or_zero(b)) / mass;
  return sd * sd * (1.0 + (x_pdf_or_zero(a) - x_pdf_or_zero(b)) / mass - shift * shift);
}

double truncated_normal_cdf(double x, double mean, double sd, double lower, double upper) {
  if (x <= lower) return 0.0;
  if (x >= upper) return 1.0;
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  const double z = (x - mean) / sd;
  return interval_mass(a, z) / interval_mass(a, b);
}

int sample_bernoulli(double p, RandomStream& rng) { return rng.uniform() < p ? 1 : 0; }

double inverse_gamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0.0)) throw std::invalid_argument("inverse_gamma_logpdf: x must be positive");
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

ConditionalNormal bivariate_conditional(double mu1, double mu2, const Covariance2& sigma,
                                        int given_component, double given_value) {
  if (!sigma.positive_definite()) {
    throw std::invalid_argument("bivariate_conditional: covariance not positive definite");
  }
  if (given_component == 1) {
    return {mu1 + sigma.cov / sigma.var2 * (given_value - mu2),
            sigma.var1 - sigma.cov * sigma.cov / sigma.var2};
  }
  if (given_component == 0) {
    return {mu2 + sigma.cov / sigma.var1 * (given_value - mu1),
            sigma.var2 - sigma.cov * sigma.cov / sigma.var1};
  }
  throw std::invalid_argument("bivariate_conditional: given_component must be 0 or 1");
}

}  // namespace misirt
