#pragma once

// Convergence diagnostics over chains and recovery scoring for simulation
// studies.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace misirt {

/// Streaming mean/variance (Welford) plus fixed-size batch means for the
/// Monte-Carlo standard error. The batch size is chosen up front from the
/// expected number of values.
class RunningSummary {
 public:
  RunningSummary() = default;
  explicit RunningSummary(std::size_t expected_count);

  void add(double x);

  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  /// Sample variance (n - 1 denominator); 0 for fewer than two values.
  double variance() const;
  std::size_t batch_size() const { return batch_size_; }
  const std::vector<double>& batch_means() const { return batch_means_; }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  std::size_t batch_size_ = 1;
  std::size_t batch_fill_ = 0;
  double batch_sum_ = 0.0;
  std::vector<double> batch_means_;
};

struct PooledEstimate {
  double mean = 0.0;
  double sd = 0.0;
  double mcse = 0.0;
  std::size_t count = 0;
};

/// Pools per-chain summaries: mean and sd over all values, MCSE from the
/// batch-means variance averaged over chains.
PooledEstimate pool(std::span<const RunningSummary> chains);

/// Classic between/within potential scale reduction factor for one
/// parameter; every chain must have the same length (>= 2). Throws
/// std::invalid_argument for fewer than two chains.
double gelman_rubin(const std::vector<std::span<const double>>& chains);

/// Same statistic from per-chain means and sample variances.
double gelman_rubin_from_moments(std::span<const double> means, std::span<const double> variances,
                                 std::size_t length);

double gelman_rubin_from_summaries(std::span<const RunningSummary> chains);

inline constexpr double kRhatThreshold = 1.1;

struct RhatEntry {
  std::string parameter;
  double rhat = 0.0;
  bool pass = false;
};

struct RhatTracePoint {
  std::size_t iteration = 0;
  std::string parameter;
  double rhat = 0.0;
};

struct RhatReport {
  std::vector<RhatEntry> entries;
  std::vector<RhatTracePoint> trace;

  bool all_pass() const;
  double max_rhat() const;
};

/// `chains[c][p]` is the draw sequence of parameter p in chain c. The trace
/// is evaluated on prefixes whose lengths are multiples of `checkpoint`
/// (plus the full length); `first_iteration` and `thin` map prefix lengths
/// back to iteration numbers.
RhatReport rhat_report(const std::vector<std::string>& names,
                       const std::vector<std::vector<std::span<const double>>>& chains,
                       std::size_t checkpoint, std::size_t first_iteration = 0,
                       std::size_t thin = 1);

struct BiasMae {
  double mean_bias = 0.0;
  double mean_mae = 0.0;
};

/// `estimates[l][k]` is replication l's estimate of parameter k.
BiasMae bias_mae(const std::vector<std::vector<double>>& estimates, std::span<const double> truth);

struct RecoveryBlock {
  std::string parameter;
  bool available = false;  // false renders as a dash (block not estimated)
  double bias = 0.0;
  double mae = 0.0;
};

struct RecoveryReport {
  std::string design;
  std::string method;
  double mean_missing_proportion = 0.0;
  std::size_t replications = 0;
  std::vector<RecoveryBlock> blocks;
  /// Per replication, per block (same order as `blocks`) mean bias.
  std::vector<std::vector<double>> replication_bias;
  std::vector<std::string> failures;

  const RecoveryBlock* find(const std::string& parameter) const;
};

}  // namespace misirt
