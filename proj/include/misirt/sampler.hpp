#pragma once

// Data-augmented Gibbs sampler with Metropolis steps for the covariance
// block. One sweep runs the thirteen conditional updates in a fixed order:
//
//   1  Z      response augmentation          8  zeta   item missing propensity
//   2  W      missingness augmentation       9  gamma0 intercept
//   3  theta  ability                       10  gamma1 not-reached effect
//   4  a      discrimination                11  gamma2 response effect
//   5  b      difficulty                    12  sigma_theta_tau (MH)
//   6  Y_mis  imputation                    13  sigma_tau^2     (MH)
//   7  tau    person missing trait
//
// Steps 12-13 are skipped in ignorable mode, where sigma_theta_tau stays 0.

#include "misirt/diagnostics.hpp"
#include "misirt/distributions.hpp"
#include "misirt/model.hpp"
#include "misirt/selection.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace misirt {

/// Prior hyperparameters. Normal priors are given as (mean, variance);
/// a, gamma0, gamma1, gamma2 are truncated to their sign constraint.
struct Priors {
  double a_mean = 0.0, a_var = 1.0;
  double b_mean = 0.0, b_var = 1.0;
  double zeta_mean = 0.0, zeta_var = 1.0;
  double gamma0_mean = 0.0, gamma0_var = 1.0;
  double gamma1_mean = 0.0, gamma1_var = 1.0;
  double gamma2_mean = 0.0, gamma2_var = 1.0;
  /// sigma_theta_tau ~ Uniform(0, sigma_theta_tau_upper)
  double sigma_theta_tau_upper = 1.0;
  /// sigma_tau^2 ~ InverseGamma(shape, scale)
  double sigma_tau_sq_shape = 0.00005;
  double sigma_tau_sq_scale = 0.00005;
};

struct SamplerConfig {
  std::size_t n_iterations = 20000;
  std::size_t burn_in = 15000;
  std::size_t thin = 1;
  std::size_t n_chains = 1;
  std::uint64_t seed = 1;
  double proposal_var_s01 = 0.01;
  double proposal_var_s02 = 0.01;
  Priors priors;
  /// Keep theta/tau draws in the store (memory N x retained per chain).
  bool store_person_draws = false;
  /// Jitter starting values of chains other than chain 0.
  bool overdispersed_starts = true;
  /// Upper bound on chains run concurrently.
  std::size_t jobs = 1;
  /// Spacing (in retained draws) of the R-hat trace.
  std::size_t rhat_checkpoint = 500;

  void validate() const;
  std::size_t retained_per_chain() const;
};

/// Everything one sweep reads and writes.
struct GibbsState {
  ItemParams items;
  PersonParams persons;
  StructuralParams structural;
  Table<double> z;            // response augmentation, Z >= 0 iff Y = 1
  Table<double> w;            // missingness augmentation, W >= 0 iff R = 1
  Table<std::uint8_t> y;      // observed responses plus current imputations
};

/// Starting values; chain_id > 0 gets jittered starts when requested.
GibbsState initial_state(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                         std::size_t chain_id, RandomStream& rng);

// Full-conditional moments of the normal steps at the current state. The
// a, gamma0, gamma1 and gamma2 draws are these normals truncated to the
// parameter's sign constraint.
std::vector<ConditionalNormal> theta_conditionals(const GibbsState& s, const Dataset& data);
std::vector<ConditionalNormal> tau_conditionals(const GibbsState& s, const Dataset& data);
std::vector<ConditionalNormal> a_conditionals(const GibbsState& s, const Dataset& data,
                                              const Priors& priors);
std::vector<ConditionalNormal> b_conditionals(const GibbsState& s, const Dataset& data,
                                              const Priors& priors);
std::vector<ConditionalNormal> zeta_conditionals(const GibbsState& s, const Dataset& data,
                                                 const Priors& priors);
ConditionalNormal gamma0_conditional(const GibbsState& s, const Dataset& data, const Priors& priors);
ConditionalNormal gamma1_conditional(const GibbsState& s, const Dataset& data, const Priors& priors);
ConditionalNormal gamma2_conditional(const GibbsState& s, const Dataset& data, const Priors& priors);

/// P(Y_ij = 1 | everything else) for a missing cell.
double imputation_probability(const GibbsState& s, const Dataset& data, std::size_t i, std::size_t j);

// Individual conditional updates. Each touches only the quantities named.
void step_z(GibbsState& s, const Dataset& data, RandomStream& rng);
void step_w(GibbsState& s, const Dataset& data, RandomStream& rng);
void step_augment(GibbsState& s, const Dataset& data, RandomStream& rng);
void step_theta(GibbsState& s, const Dataset& data, RandomStream& rng);
void step_tau(GibbsState& s, const Dataset& data, RandomStream& rng);
void step_persons(GibbsState& s, const Dataset& data, RandomStream& rng);
void step_a(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);
void step_b(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);
void step_zeta(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);
void step_items(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);
/// Redraws every missing response from its imputation probability and
/// refreshes Z and W at those cells so the augmentation stays consistent
/// with the new response.
void step_impute(GibbsState& s, const Dataset& data, RandomStream& rng);
void step_gamma0(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);
void step_gamma1(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);
void step_gamma2(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);
void step_gammas(GibbsState& s, const Dataset& data, const Priors& priors, RandomStream& rng);

struct CovarianceAcceptance {
  bool sigma_theta_tau = false;
  bool sigma_tau_sq = false;
};

/// Log of the Metropolis ratio for moving sigma_theta_tau from `current`
/// to `proposed`, including the truncated-proposal correction.
double sigma_theta_tau_log_ratio(std::span<const double> theta, std::span<const double> tau,
                                 double current, double proposed, double sigma_tau_sq,
                                 double proposal_sd, const Priors& priors);

/// Same for sigma_tau^2 with sigma_theta_tau held at its new value.
double sigma_tau_sq_log_ratio(std::span<const double> theta, std::span<const double> tau,
                              double current, double proposed, double sigma_theta_tau,
                              double proposal_sd, const Priors& priors);

bool step_sigma_theta_tau(GibbsState& s, const SamplerConfig& config, RandomStream& rng);
bool step_sigma_tau_sq(GibbsState& s, const SamplerConfig& config, RandomStream& rng);
CovarianceAcceptance step_covariance(GibbsState& s, const SamplerConfig& config, RandomStream& rng);

/// Which conditional updates make up a sweep.
enum class SweepKind {
  Full,          // all thirteen steps (12-13 only in nonignorable mode)
  ResponseOnly,  // steps 1, 3, 4, 5 with a N(0, 1) ability prior
};

/// Retained draws of one chain.
struct ChainDraws {
  std::size_t chain_id = 0;
  SweepKind kind = SweepKind::Full;
  MissingnessMode mode = MissingnessMode::Nonignorable;
  std::size_t n_persons = 0;
  std::size_t n_items = 0;
  std::vector<std::string> names;        // column names
  std::vector<double> values;            // retained row x column
  std::vector<std::size_t> iterations;   // 1-based sweep index of each row
  std::vector<double> missingness_loglik;  // per retained row (Full sweeps only)
  CpoAccumulator cpo;                    // per cell (Full sweeps only)
  std::vector<RunningSummary> summaries;   // one per column
  std::vector<RunningSummary> theta_summary;
  std::vector<RunningSummary> tau_summary;
  std::size_t mh_proposals = 0;
  std::size_t accepted_sigma_theta_tau = 0;
  std::size_t accepted_sigma_tau_sq = 0;

  std::size_t rows() const { return iterations.size(); }
  std::size_t columns() const { return names.size(); }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * names.size(), names.size()};
  }
  std::vector<double> column(std::size_t c) const;
  std::vector<double> column(const std::string& name) const;
  std::size_t column_index(const std::string& name) const;
  double acceptance_rate_sigma_theta_tau() const;
  double acceptance_rate_sigma_tau_sq() const;
};

struct DrawStore {
  std::vector<ChainDraws> chains;

  std::size_t n_chains() const { return chains.size(); }
  /// Draws of one column across all chains, chain by chain.
  std::vector<double> pooled(const std::string& name) const;
};

struct ParameterSummary {
  std::string name;
  double eap = 0.0;
  double post_sd = 0.0;
  double mcse = 0.0;
  double rhat = 0.0;  // NaN with a single chain
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& at(const std::string& name) const;
  /// Posterior means of a block ("a", "b", "zeta", "theta", "tau") in index order.
  std::vector<double> block(const std::string& prefix) const;
};

std::vector<std::string> parameter_names(std::size_t n_persons, std::size_t n_items,
                                         SweepKind kind, bool with_persons);

/// Runs one chain of the given kind. Deterministic in (config.seed, chain_id).
ChainDraws run_chain(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                     std::size_t chain_id, SweepKind kind = SweepKind::Full);

/// Runs config.n_chains chains (up to config.jobs at a time) and merges the
/// results in chain order.
DrawStore run_chains(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                     SweepKind kind = SweepKind::Full);

/// EAP, posterior SD, batch-means MCSE and R-hat for every column, plus
/// theta/tau from the streaming summaries when they were not stored.
PosteriorSummary summarize(const DrawStore& draws);

/// R-hat per stored column with the checkpoint trace.
RhatReport rhat_report(const DrawStore& draws, std::size_t checkpoint);

SelectionReport selection_report(const DrawStore& draws);

/// Rejects empty datasets and items with no observed response.
void check_fit_preconditions(const Dataset& data);

}  // namespace misirt
