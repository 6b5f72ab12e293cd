#include "misirt/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace misirt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double positive_normal(double mean, double var, RandomStream& rng) {
  return sample_truncated_normal(mean, std::sqrt(var), 0.0, kInf, rng);
}

double negative_normal(double mean, double var, RandomStream& rng) {
  return sample_truncated_normal(mean, std::sqrt(var), -kInf, 0.0, rng);
}

// log of Phi(hi) - Phi(lo) for standardized bounds.
double log_interval_mass(double lo, double hi) {
  if (lo > 0.0) return std::log(normal_cdf(-lo) - normal_cdf(-hi));
  return std::log(normal_cdf(hi) - normal_cdf(lo));
}

struct PersonMoments {
  double theta_theta = 0.0;
  double tau_tau = 0.0;
  double theta_tau = 0.0;
  double n = 0.0;
};

PersonMoments person_moments(std::span<const double> theta, std::span<const double> tau) {
  PersonMoments m;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m.theta_theta += theta[i] * theta[i];
    m.tau_tau += tau[i] * tau[i];
    m.theta_tau += theta[i] * tau[i];
  }
  m.n = static_cast<double>(theta.size());
  return m;
}

// sum_i log N(tau_i; cov * theta_i, cond_var)
double tau_given_theta_loglik(const PersonMoments& m, double cov, double cond_var) {
  const double ss = m.tau_tau - 2.0 * cov * m.theta_tau + cov * cov * m.theta_theta;
  return -0.5 * m.n * std::log(2.0 * std::numbers::pi * cond_var) - 0.5 * ss / cond_var;
}

double sigma_theta_tau_log_target(const PersonMoments& m, double cov, double sigma_tau_sq,
                                  const Priors& priors) {
  if (!(cov > 0.0 && cov < priors.sigma_theta_tau_upper)) return kNegInf;
  const double cond_var = sigma_tau_sq - cov * cov;
  if (!(cond_var > 0.0)) return kNegInf;
  return tau_given_theta_loglik(m, cov, cond_var);
}

double sigma_tau_sq_log_target(const PersonMoments& m, double var, double cov,
                               const Priors& priors) {
  const double cond_var = var - cov * cov;
  if (!(var > 0.0 && cond_var > 0.0)) return kNegInf;
  return tau_given_theta_loglik(m, cov, cond_var) +
         inverse_gamma_logpdf(var, priors.sigma_tau_sq_shape, priors.sigma_tau_sq_scale);
}

double jitter(double value, RandomStream& rng) {
  if (value == 0.0) return rng.uniform() - 0.5;
  return value * (0.5 + rng.uniform());
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_iterations == 0) throw std::invalid_argument("sampler config: n_iterations must be positive");
  if (burn_in >= n_iterations) throw std::invalid_argument("sampler config: burn_in must be < n_iterations");
  if (thin == 0) throw std::invalid_argument("sampler config: thin must be >= 1");
  if (n_chains == 0) throw std::invalid_argument("sampler config: n_chains must be >= 1");
  if (!(proposal_var_s01 > 0.0) || !(proposal_var_s02 > 0.0)) {
    throw std::invalid_argument("sampler config: proposal variances must be positive");
  }
  const Priors& p = priors;
  for (double v : {p.a_var, p.b_var, p.zeta_var, p.gamma0_var, p.gamma1_var, p.gamma2_var,
                   p.sigma_theta_tau_upper, p.sigma_tau_sq_shape, p.sigma_tau_sq_scale}) {
    if (!(v > 0.0)) throw std::invalid_argument("sampler config: prior scales must be positive");
  }
}

std::size_t SamplerConfig::retained_per_chain() const {
  return (n_iterations - burn_in + thin - 1) / thin;
}

GibbsState initial_state(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                         std::size_t chain_id, RandomStream& rng) {
  const std::size_t N = data.n_persons();
  const std::size_t J = data.n_items();
  const bool nonignorable = spec.mode == MissingnessMode::Nonignorable;
  GibbsState s;
  s.items.a.assign(J, 1.0);
  s.items.b.assign(J, 0.0);
  s.items.zeta.assign(J, 0.0);
  s.persons.theta.assign(N, 0.0);
  s.persons.tau.assign(N, 0.0);
  s.structural = StructuralParams{-1.0, 0.05, -0.1, nonignorable ? 0.5 : 0.0, 1.0};

  if (chain_id > 0 && config.overdispersed_starts) {
    for (auto* block : {&s.items.a, &s.items.b, &s.items.zeta, &s.persons.theta, &s.persons.tau}) {
      for (double& v : *block) v = jitter(v, rng);
    }
    StructuralParams& st = s.structural;
    st.gamma0 = jitter(st.gamma0, rng);
    st.gamma1 = jitter(st.gamma1, rng);
    st.gamma2 = jitter(st.gamma2, rng);
    if (nonignorable) {
      st.sigma_theta_tau = jitter(st.sigma_theta_tau, rng);
      do {
        st.sigma_tau_sq = jitter(1.0, rng);
      } while (!st.covariance_positive_definite());
    }
  }

  s.z = Table<double>(N, J, 0.0);
  s.w = Table<double>(N, J, 0.0);
  s.y = Table<std::uint8_t>(N, J, 0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      switch (data.response(i, j)) {
        case Response::Correct: s.y(i, j) = 1; break;
        case Response::Incorrect: s.y(i, j) = 0; break;
        case Response::Missing: s.y(i, j) = static_cast<std::uint8_t>(sample_bernoulli(0.5, rng)); break;
      }
    }
  }
  return s;
}

void step_z(GibbsState& s, const Dataset& data, RandomStream& rng) {
  const auto& a = s.items.a;
  const auto& b = s.items.b;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const double theta = s.persons.theta[i];
    auto z = s.z.row(i);
    const auto y = s.y.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double mean = a[j] * (theta - b[j]);
      z[j] = y[j] ? sample_truncated_normal(mean, 1.0, 0.0, kInf, rng)
                  : sample_truncated_normal(mean, 1.0, -kInf, 0.0, rng);
    }
  }
}

void step_w(GibbsState& s, const Dataset& data, RandomStream& rng) {
  const Gammas g = s.structural.gammas();
  const auto& zeta = s.items.zeta;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const double tau = s.persons.tau[i];
    auto w = s.w.row(i);
    const auto y = s.y.row(i);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double mean = missingness_index(tau, zeta[j], g, data.cum_missing(i, j), y[j]);
      w[j] = data.missing(i, j) ? sample_truncated_normal(mean, 1.0, 0.0, kInf, rng)
                                : sample_truncated_normal(mean, 1.0, -kInf, 0.0, rng);
    }
  }
}

void step_augment(GibbsState& s, const Dataset& data, RandomStream& rng) {
  step_z(s, data, rng);
  step_w(s, data, rng);
}

std::vector<ConditionalNormal> theta_conditionals(const GibbsState& s, const Dataset& data) {
  const auto& a = s.items.a;
  const auto& b = s.items.b;
  const StructuralParams& st = s.structural;
  const double cond_var = 1.0 - st.sigma_theta_tau * st.sigma_theta_tau / st.sigma_tau_sq;
  const double slope = st.sigma_theta_tau / st.sigma_tau_sq;
  double sum_a2 = 0.0;
  for (double v : a) sum_a2 += v * v;
  const double var = 1.0 / (1.0 / cond_var + sum_a2);
  std::vector<ConditionalNormal> out(data.n_persons());
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const auto z = s.z.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) acc += a[j] * (z[j] + a[j] * b[j]);
    const double prior_mean = slope * s.persons.tau[i];
    out[i] = {var * (prior_mean / cond_var + acc), var};
  }
  return out;
}

std::vector<ConditionalNormal> tau_conditionals(const GibbsState& s, const Dataset& data) {
  const StructuralParams& st = s.structural;
  const Gammas g = st.gammas();
  const auto& zeta = s.items.zeta;
  const double cond_var = st.sigma_tau_sq - st.sigma_theta_tau * st.sigma_theta_tau;
  const double J = static_cast<double>(data.n_items());
  const double var = 1.0 / (1.0 / cond_var + J);
  std::vector<ConditionalNormal> out(data.n_persons());
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const auto w = s.w.row(i);
    const auto y = s.y.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      acc += g.g0 + zeta[j] + g.g1 * data.cum_missing(i, j) + g.g2 * y[j] - w[j];
    }
    const double prior_mean = st.sigma_theta_tau * s.persons.theta[i];
    out[i] = {var * (prior_mean / cond_var + acc), var};
  }
  return out;
}

std::vector<ConditionalNormal> a_conditionals(const GibbsState& s, const Dataset& data,
                                              const Priors& priors) {
  const std::size_t J = data.n_items();
  std::vector<double> cross(J, 0.0), square(J, 0.0);
  const auto& b = s.items.b;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const double theta = s.persons.theta[i];
    const auto z = s.z.row(i);
    for (std::size_t j = 0; j < J; ++j) {
      const double d = theta - b[j];
      cross[j] += z[j] * d;
      square[j] += d * d;
    }
  }
  std::vector<ConditionalNormal> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double var = 1.0 / (1.0 / priors.a_var + square[j]);
    out[j] = {var * (priors.a_mean / priors.a_var + cross[j]), var};
  }
  return out;
}

std::vector<ConditionalNormal> b_conditionals(const GibbsState& s, const Dataset& data,
                                              const Priors& priors) {
  const std::size_t J = data.n_items();
  const double N = static_cast<double>(data.n_persons());
  std::vector<double> sum_z(J, 0.0);
  double sum_theta = 0.0;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    sum_theta += s.persons.theta[i];
    const auto z = s.z.row(i);
    for (std::size_t j = 0; j < J; ++j) sum_z[j] += z[j];
  }
  std::vector<ConditionalNormal> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double a = s.items.a[j];
    const double var = 1.0 / (1.0 / priors.b_var + N * a * a);
    out[j] = {var * (priors.b_mean / priors.b_var + a * (a * sum_theta - sum_z[j])), var};
  }
  return out;
}

std::vector<ConditionalNormal> zeta_conditionals(const GibbsState& s, const Dataset& data,
                                                 const Priors& priors) {
  const std::size_t J = data.n_items();
  const Gammas g = s.structural.gammas();
  const double N = static_cast<double>(data.n_persons());
  std::vector<double> acc(J, 0.0);
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const double tau = s.persons.tau[i];
    const auto w = s.w.row(i);
    const auto y = s.y.row(i);
    for (std::size_t j = 0; j < J; ++j) {
      acc[j] += w[j] - g.g0 + tau - g.g1 * data.cum_missing(i, j) - g.g2 * y[j];
    }
  }
  const double var = 1.0 / (1.0 / priors.zeta_var + N);
  std::vector<ConditionalNormal> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    out[j] = {var * (priors.zeta_mean / priors.zeta_var + acc[j]), var};
  }
  return out;
}

ConditionalNormal gamma0_conditional(const GibbsState& s, const Dataset& data, const Priors& priors) {
  const StructuralParams& st = s.structural;
  const auto& zeta = s.items.zeta;
  double acc = 0.0;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const double tau = s.persons.tau[i];
    const auto w = s.w.row(i);
    const auto y = s.y.row(i);
    for (std::size_t j = 0; j < w.size(); ++j) {
      acc += w[j] + tau - zeta[j] - st.gamma1 * data.cum_missing(i, j) - st.gamma2 * y[j];
    }
  }
  const double cells = static_cast<double>(data.n_persons() * data.n_items());
  const double var = 1.0 / (1.0 / priors.gamma0_var + cells);
  return {var * (priors.gamma0_mean / priors.gamma0_var + acc), var};
}

ConditionalNormal gamma1_conditional(const GibbsState& s, const Dataset& data, const Priors& priors) {
  const StructuralParams& st = s.structural;
  const auto& zeta = s.items.zeta;
  double cross = 0.0;
  double square = 0.0;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const double tau = s.persons.tau[i];
    const auto w = s.w.row(i);
    const auto y = s.y.row(i);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = data.cum_missing(i, j);
      if (g == 0.0) continue;
      cross += g * (w[j] - st.gamma0 + tau - zeta[j] - st.gamma2 * y[j]);
      square += g * g;
    }
  }
  const double var = 1.0 / (1.0 / priors.gamma1_var + square);
  return {var * (priors.gamma1_mean / priors.gamma1_var + cross), var};
}

ConditionalNormal gamma2_conditional(const GibbsState& s, const Dataset& data, const Priors& priors) {
  const StructuralParams& st = s.structural;
  const auto& zeta = s.items.zeta;
  double cross = 0.0;
  double square = 0.0;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    const double tau = s.persons.tau[i];
    const auto w = s.w.row(i);
    const auto y = s.y.row(i);
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (y[j] == 0) continue;
      cross += w[j] - st.gamma0 + tau - zeta[j] - st.gamma1 * data.cum_missing(i, j);
      square += 1.0;
    }
  }
  const double var = 1.0 / (1.0 / priors.gamma2_var + square);
  return {var * (priors.gamma2_mean / priors.gamma2_var + cross), var};
}

double imputation_probability(const GibbsState& s, const Dataset& data, std::size_t i, std::size_t j) {
  const Gammas g = s.structural.gammas();
  const double u = s.items.a[j] * (s.persons.theta[i] - s.items.b[j]);
  // pi10 and pi11 share the index up to the gamma2 term.
  const double v0 = missingness_index(s.persons.tau[i], s.items.zeta[j], g, data.cum_missing(i, j), 0);
  const double p = normal_cdf(u);
  const double pi11 = normal_cdf(v0 + g.g2);
  const double pi10 = normal_cdf(v0);
  if (p * pi11 + (1.0 - p) * pi10 > 1e-280) return imputation_prob(p, pi11, pi10);
  const double log_odds = log_normal_cdf(u) + log_normal_cdf(v0 + g.g2) - log_normal_cdf(-u) -
                          log_normal_cdf(v0);
  return 1.0 / (1.0 + std::exp(-log_odds));
}

void step_theta(GibbsState& s, const Dataset& data, RandomStream& rng) {
  const auto cond = theta_conditionals(s, data);
  for (std::size_t i = 0; i < cond.size(); ++i) {
    s.persons.theta[i] = cond[i].mean + std::sqrt(cond[i].var) * rng.normal();
  }
}

void step_tau(GibbsState& s, const Dataset& data, RandomStream& rng) {
  const auto cond = tau_conditionals(s, data);
  for (std::size_t i = 0; i < cond.size(); ++i) {
    s.persons.tau[i] = cond[i].mean + std::sqrt(cond[i].var) * rng.normal();
  }
}

void step_persons(GibbsState& s, const Dataset& data, RandomStream& rng) {
  step_theta(s, data, rng);
  step_tau(s, data, rng);
}

void step_a(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  const auto cond = a_conditionals(s, data, priors);
  for (std::size_t j = 0; j < cond.size(); ++j) s.items.a[j] = positive_normal(cond[j].mean, cond[j].var, rng);
}

void step_b(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  const auto cond = b_conditionals(s, data, priors);
  for (std::size_t j = 0; j < cond.size(); ++j) {
    s.items.b[j] = cond[j].mean + std::sqrt(cond[j].var) * rng.normal();
  }
}

void step_zeta(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  const auto cond = zeta_conditionals(s, data, priors);
  for (std::size_t j = 0; j < cond.size(); ++j) {
    s.items.zeta[j] = cond[j].mean + std::sqrt(cond[j].var) * rng.normal();
  }
}

void step_items(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  step_a(s, data, priors, rng);
  step_b(s, data, priors, rng);
  step_zeta(s, data, priors, rng);
}

void step_impute(GibbsState& s, const Dataset& data, RandomStream& rng) {
  const Gammas g = s.structural.gammas();
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    for (std::size_t j = 0; j < data.n_items(); ++j) {
      if (!data.missing(i, j)) continue;
      const int y = sample_bernoulli(imputation_probability(s, data, i, j), rng);
      s.y(i, j) = static_cast<std::uint8_t>(y);
      const double u = s.items.a[j] * (s.persons.theta[i] - s.items.b[j]);
      const double v = missingness_index(s.persons.tau[i], s.items.zeta[j], g, data.cum_missing(i, j), y);
      s.z(i, j) = y ? sample_truncated_normal(u, 1.0, 0.0, kInf, rng)
                    : sample_truncated_normal(u, 1.0, -kInf, 0.0, rng);
      s.w(i, j) = sample_truncated_normal(v, 1.0, 0.0, kInf, rng);
    }
  }
}

void step_gamma0(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  const ConditionalNormal c = gamma0_conditional(s, data, priors);
  s.structural.gamma0 = negative_normal(c.mean, c.var, rng);
}

void step_gamma1(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  const ConditionalNormal c = gamma1_conditional(s, data, priors);
  s.structural.gamma1 = positive_normal(c.mean, c.var, rng);
}

void step_gamma2(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  const ConditionalNormal c = gamma2_conditional(s, data, priors);
  s.structural.gamma2 = negative_normal(c.mean, c.var, rng);
}

void step_gammas(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng) {
  step_gamma0(s, data, priors, rng);
  step_gamma1(s, data, priors, rng);
  step_gamma2(s, data, priors, rng);
}

double sigma_theta_tau_log_ratio(std::span<const double> theta, std::span<const double> tau,
                                 double current, double proposed, double sigma_tau_sq,
                                 double proposal_sd, const Priors& priors) {
  const PersonMoments m = person_moments(theta, tau);
  const double upper = std::sqrt(sigma_tau_sq);
  const double target_new = sigma_theta_tau_log_target(m, proposed, sigma_tau_sq, priors);
  if (target_new == kNegInf) return kNegInf;
  const double target_old = sigma_theta_tau_log_target(m, current, sigma_tau_sq, priors);
  if (target_old == kNegInf) return kInf;
  // q(current | proposed) / q(proposed | current) reduces to the ratio of
  // the truncated proposal's normalizing constants.
  const double correction =
      log_interval_mass(-current / proposal_sd, (upper - current) / proposal_sd) -
      log_interval_mass(-proposed / proposal_sd, (upper - proposed) / proposal_sd);
  return target_new - target_old + correction;
}

double sigma_tau_sq_log_ratio(std::span<const double> theta, std::span<const double> tau,
                              double current, double proposed, double sigma_theta_tau,
                              double proposal_sd, const Priors& priors) {
  const PersonMoments m = person_moments(theta, tau);
  const double lower = sigma_theta_tau * sigma_theta_tau;
  const double target_new = sigma_tau_sq_log_target(m, proposed, sigma_theta_tau, priors);
  if (target_new == kNegInf) return kNegInf;
  const double target_old = sigma_tau_sq_log_target(m, current, sigma_theta_tau, priors);
  if (target_old == kNegInf) return kInf;
  const double correction = log_normal_cdf((current - lower) / proposal_sd) -
                            log_normal_cdf((proposed - lower) / proposal_sd);
  return target_new - target_old + correction;
}

bool step_sigma_theta_tau(GibbsState& s, const SamplerConfig& config, RandomStream& rng) {
  StructuralParams& st = s.structural;
  const double sd = std::sqrt(config.proposal_var_s01);
  const double proposed =
      sample_truncated_normal(st.sigma_theta_tau, sd, 0.0, std::sqrt(st.sigma_tau_sq), rng);
  const double log_ratio = sigma_theta_tau_log_ratio(s.persons.theta, s.persons.tau,
                                                     st.sigma_theta_tau, proposed, st.sigma_tau_sq,
                                                     sd, config.priors);
  if (std::log(rng.uniform()) < log_ratio) {
    st.sigma_theta_tau = proposed;
    return true;
  }
  return false;
}

bool step_sigma_tau_sq(GibbsState& s, const SamplerConfig& config, RandomStream& rng) {
  StructuralParams& st = s.structural;
  const double sd = std::sqrt(config.proposal_var_s02);
  const double lower = st.sigma_theta_tau * st.sigma_theta_tau;
  const double proposed = sample_truncated_normal(st.sigma_tau_sq, sd, lower, kInf, rng);
  const double log_ratio = sigma_tau_sq_log_ratio(s.persons.theta, s.persons.tau, st.sigma_tau_sq,
                                                  proposed, st.sigma_theta_tau, sd, config.priors);
  if (std::log(rng.uniform()) < log_ratio) {
    st.sigma_tau_sq = proposed;
    return true;
  }
  return false;
}

CovarianceAcceptance step_covariance(GibbsState& s, const SamplerConfig& config, RandomStream& rng) {
  CovarianceAcceptance out;
  out.sigma_theta_tau = step_sigma_theta_tau(s, config, rng);
  out.sigma_tau_sq = step_sigma_tau_sq(s, config, rng);
  return out;
}

std::vector<double> ChainDraws::column(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = values[r * names.size() + c];
  return out;
}

std::size_t ChainDraws::column_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no stored parameter '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> ChainDraws::column(const std::string& name) const {
  return column(column_index(name));
}

double ChainDraws::acceptance_rate_sigma_theta_tau() const {
  return mh_proposals == 0 ? 0.0
                           : static_cast<double>(accepted_sigma_theta_tau) / static_cast<double>(mh_proposals);
}

double ChainDraws::acceptance_rate_sigma_tau_sq() const {
  return mh_proposals == 0 ? 0.0
                           : static_cast<double>(accepted_sigma_tau_sq) / static_cast<double>(mh_proposals);
}

std::vector<double> DrawStore::pooled(const std::string& name) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto col = c.column(name);
    out.insert(out.end(), col.begin(), col.end());
  }
  return out;
}

const ParameterSummary& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no summary for '" + name + "'");
}

std::vector<double> PosteriorSummary::block(const std::string& prefix) const {
  std::vector<double> out;
  const std::string head = prefix + ".";
  for (const auto& p : parameters) {
    if (p.name.rfind(head, 0) == 0) out.push_back(p.eap);
  }
  return out;
}

std::vector<std::string> parameter_names(std::size_t n_persons, std::size_t n_items,
                                         SweepKind kind, bool with_persons) {
  std::vector<std::string> names;
  auto indexed = [&names](const std::string& prefix, std::size_t count) {
    for (std::size_t k = 1; k <= count; ++k) names.push_back(prefix + "." + std::to_string(k));
  };
  indexed("a", n_items);
  indexed("b", n_items);
  if (kind == SweepKind::Full) {
    indexed("zeta", n_items);
    for (const char* n : {"gamma0", "gamma1", "gamma2", "sigma.theta.tau", "sigma2.tau"}) {
      names.emplace_back(n);
    }
  }
  if (with_persons) {
    indexed("theta", n_persons);
    if (kind == SweepKind::Full) indexed("tau", n_persons);
  }
  return names;
}

void check_fit_preconditions(const Dataset& data) {
  if (data.n_persons() == 0 || data.n_items() == 0) throw DataError("dataset is empty");
  for (std::size_t j = 0; j < data.n_items(); ++j) {
    if (data.observed_count(j) == 0) {
      throw DataError("item '" + data.item_ids()[j] + "' has no observed responses");
    }
  }
}

ChainDraws run_chain(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                     std::size_t chain_id, SweepKind kind) {
  config.validate();
  check_fit_preconditions(data);
  if (kind == SweepKind::ResponseOnly && data.missing_count() > 0) {
    throw DataError("response-only sweeps need complete data");
  }
  const std::size_t N = data.n_persons();
  const std::size_t J = data.n_items();
  const bool full = kind == SweepKind::Full;
  const bool nonignorable = full && spec.mode == MissingnessMode::Nonignorable;

  RandomStream rng(config.seed, chain_id);
  ModelSpec effective = spec;
  if (!full) effective.mode = MissingnessMode::Ignorable;
  GibbsState s = initial_state(data, effective, config, chain_id, rng);

  ChainDraws out;
  out.chain_id = chain_id;
  out.kind = kind;
  out.mode = effective.mode;
  out.n_persons = N;
  out.n_items = J;
  out.names = parameter_names(N, J, kind, config.store_person_draws);
  const std::size_t retained = config.retained_per_chain();
  out.values.reserve(retained * out.names.size());
  out.iterations.reserve(retained);
  out.summaries.assign(out.names.size(), RunningSummary(retained));
  out.theta_summary.assign(N, RunningSummary(retained));
  if (full) {
    out.tau_summary.assign(N, RunningSummary(retained));
    out.cpo = CpoAccumulator(N * J);
    out.missingness_loglik.reserve(retained);
  }

  std::vector<double> row(out.names.size());
  std::vector<double> cell_ll(full ? N * J : 0);

  for (std::size_t iter = 1; iter <= config.n_iterations; ++iter) {
    step_z(s, data, rng);
    if (full) step_w(s, data, rng);
    step_theta(s, data, rng);
    step_a(s, data, config.priors, rng);
    step_b(s, data, config.priors, rng);
    if (full) {
      step_impute(s, data, rng);
      step_tau(s, data, rng);
      step_zeta(s, data, config.priors, rng);
      step_gamma0(s, data, config.priors, rng);
      step_gamma1(s, data, config.priors, rng);
      step_gamma2(s, data, config.priors, rng);
      if (nonignorable) {
        const CovarianceAcceptance acc = step_covariance(s, config, rng);
        ++out.mh_proposals;
        out.accepted_sigma_theta_tau += acc.sigma_theta_tau ? 1 : 0;
        out.accepted_sigma_tau_sq += acc.sigma_tau_sq ? 1 : 0;
      }
    }

    if (iter <= config.burn_in || (iter - config.burn_in - 1) % config.thin != 0) continue;

    std::size_t c = 0;
    for (double v : s.items.a) row[c++] = v;
    for (double v : s.items.b) row[c++] = v;
    if (full) {
      for (double v : s.items.zeta) row[c++] = v;
      const StructuralParams& st = s.structural;
      for (double v : {st.gamma0, st.gamma1, st.gamma2, st.sigma_theta_tau, st.sigma_tau_sq}) {
        row[c++] = v;
      }
    }
    if (config.store_person_draws) {
      for (double v : s.persons.theta) row[c++] = v;
      if (full) {
        for (double v : s.persons.tau) row[c++] = v;
      }
    }
    out.values.insert(out.values.end(), row.begin(), row.end());
    out.iterations.push_back(iter);
    for (std::size_t k = 0; k < row.size(); ++k) out.summaries[k].add(row[k]);
    for (std::size_t i = 0; i < N; ++i) out.theta_summary[i].add(s.persons.theta[i]);
    if (full) {
      for (std::size_t i = 0; i < N; ++i) out.tau_summary[i].add(s.persons.tau[i]);
      const double ll = missingness_loglik(data, s.y, s.persons.tau, s.items.zeta,
                                           s.structural.gammas(), cell_ll);
      out.missingness_loglik.push_back(ll);
      out.cpo.add_draw(cell_ll);
    }
  }
  return out;
}

DrawStore run_chains(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                     SweepKind kind) {
  config.validate();
  check_fit_preconditions(data);
  DrawStore store;
  store.chains.resize(config.n_chains);
  std::vector<std::exception_ptr> errors(config.n_chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t c = next++; c < config.n_chains; c = next++) {
      try {
        store.chains[c] = run_chain(data, spec, config, c, kind);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(config.jobs, 1, config.n_chains);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return store;
}

namespace {

ParameterSummary summarize_one(const std::string& name, std::span<const RunningSummary> chains) {
  const PooledEstimate pooled = pool(chains);
  ParameterSummary p{name, pooled.mean, pooled.sd, pooled.mcse,
                     std::numeric_limits<double>::quiet_NaN()};
  if (chains.size() >= 2 && chains.front().count() >= 2) {
    bool equal = true;
    for (const auto& c : chains) equal = equal && c.count() == chains.front().count();
    if (equal) p.rhat = gelman_rubin_from_summaries(chains);
  }
  return p;
}

}  // namespace

PosteriorSummary summarize(const DrawStore& draws) {
  if (draws.chains.empty() || draws.chains.front().rows() == 0) {
    throw std::invalid_argument("summarize: empty draw store");
  }
  const ChainDraws& first = draws.chains.front();
  PosteriorSummary out;
  std::vector<RunningSummary> per_chain(draws.n_chains());
  for (std::size_t k = 0; k < first.names.size(); ++k) {
    for (std::size_t c = 0; c < draws.n_chains(); ++c) per_chain[c] = draws.chains[c].summaries.at(k);
    out.parameters.push_back(summarize_one(first.names[k], per_chain));
  }
  const bool has_theta =
      std::find(first.names.begin(), first.names.end(), "theta.1") != first.names.end();
  if (!has_theta) {
    for (std::size_t i = 0; i < first.n_persons; ++i) {
      for (std::size_t c = 0; c < draws.n_chains(); ++c) per_chain[c] = draws.chains[c].theta_summary.at(i);
      out.parameters.push_back(summarize_one("theta." + std::to_string(i + 1), per_chain));
    }
    if (first.kind == SweepKind::Full) {
      for (std::size_t i = 0; i < first.n_persons; ++i) {
        for (std::size_t c = 0; c < draws.n_chains(); ++c) per_chain[c] = draws.chains[c].tau_summary.at(i);
        out.parameters.push_back(summarize_one("tau." + std::to_string(i + 1), per_chain));
      }
    }
  }
  return out;
}

RhatReport rhat_report(const DrawStore& draws, std::size_t checkpoint) {
  const ChainDraws& first = draws.chains.at(0);
  std::vector<std::vector<std::vector<double>>> columns(draws.n_chains());
  std::vector<std::vector<std::span<const double>>> spans(draws.n_chains());
  for (std::size_t c = 0; c < draws.n_chains(); ++c) {
    columns[c].reserve(first.names.size());
    for (std::size_t k = 0; k < first.names.size(); ++k) {
      columns[c].push_back(draws.chains[c].column(k));
      spans[c].emplace_back(columns[c].back());
    }
  }
  const std::size_t start = first.iterations.empty() ? 0 : first.iterations.front() - 1;
  const std::size_t thin =
      first.iterations.size() >= 2 ? first.iterations[1] - first.iterations[0] : 1;
  return misirt::rhat_report(first.names, spans, checkpoint, start, thin);
}

SelectionReport selection_report(const DrawStore& draws) {
  const ChainDraws& first = draws.chains.at(0);
  if (first.kind != SweepKind::Full) {
    throw std::invalid_argument("selection_report: draws carry no missingness model");
  }
  std::vector<double> lls;
  CpoAccumulator cpo;
  for (const auto& c : draws.chains) {
    lls.insert(lls.end(), c.missingness_loglik.begin(), c.missingness_loglik.end());
    cpo.merge(c.cpo);
  }
  return make_selection_report(lls, cpo, first.n_persons, first.n_items, first.mode);
}

}  // namespace misirt
