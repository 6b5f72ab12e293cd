#include "misirt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace misirt {

RunningSummary::RunningSummary(std::size_t expected_count)
    : batch_size_(std::max<std::size_t>(
          1, static_cast<std::size_t>(std::sqrt(static_cast<double>(expected_count))))) {}

void RunningSummary::add(double x) {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
  batch_sum_ += x;
  if (++batch_fill_ == batch_size_) {
    batch_means_.push_back(batch_sum_ / static_cast<double>(batch_size_));
    batch_sum_ = 0.0;
    batch_fill_ = 0;
  }
}

double RunningSummary::variance() const {
  return count_ < 2 ? 0.0 : m2_ / static_cast<double>(count_ - 1);
}

PooledEstimate pool(std::span<const RunningSummary> chains) {
  PooledEstimate out;
  double m2 = 0.0;
  for (const auto& c : chains) {
    if (c.count() == 0) continue;
    const std::size_t n = out.count + c.count();
    const double delta = c.mean() - out.mean;
    out.mean += delta * static_cast<double>(c.count()) / static_cast<double>(n);
    m2 += c.variance() * static_cast<double>(c.count() - 1) +
          delta * delta * static_cast<double>(out.count) * static_cast<double>(c.count()) /
              static_cast<double>(n);
    out.count = n;
  }
  if (out.count == 0) throw std::invalid_argument("pool: no values");
  out.sd = out.count < 2 ? 0.0 : std::sqrt(m2 / static_cast<double>(out.count - 1));

  double weighted_bm = 0.0;
  bool batches_ok = true;
  for (const auto& c : chains) {
    if (c.count() == 0) continue;
    const auto& bm = c.batch_means();
    if (bm.size() < 2) {
      batches_ok = false;
      break;
    }
    double bm_mean = 0.0;
    for (double v : bm) bm_mean += v;
    bm_mean /= static_cast<double>(bm.size());
    double ss = 0.0;
    for (double v : bm) ss += (v - bm_mean) * (v - bm_mean);
    const double sigma2 = static_cast<double>(c.batch_size()) * ss / static_cast<double>(bm.size() - 1);
    weighted_bm += sigma2 * static_cast<double>(c.count());
  }
  if (batches_ok) {
    const double sigma2 = weighted_bm / static_cast<double>(out.count);
    out.mcse = std::sqrt(sigma2 / static_cast<double>(out.count));
  } else {
    out.mcse = out.sd / std::sqrt(static_cast<double>(out.count));
  }
  out.mcse = std::min(out.mcse, out.sd);
  return out;
}

double gelman_rubin_from_moments(std::span<const double> means, std::span<const double> variances,
                                 std::size_t length) {
  const std::size_t m = means.size();
  if (m < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  if (variances.size() != m) throw std::invalid_argument("gelman_rubin: moment count mismatch");
  if (length < 2) throw std::invalid_argument("gelman_rubin: chains need at least two draws");
  const double n = static_cast<double>(length);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(m);
  double between = 0.0;
  for (double v : means) between += (v - grand) * (v - grand);
  between *= n / static_cast<double>(m - 1);
  double within = 0.0;
  for (double v : variances) within += v;
  within /= static_cast<double>(m);
  if (within <= 0.0) {
    return between <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  const double pooled = (n - 1.0) / n * within +
                        (static_cast<double>(m) + 1.0) / (static_cast<double>(m) * n) * between;
  return std::sqrt(pooled / within);
}

double gelman_rubin(const std::vector<std::span<const double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  const std::size_t n = chains.front().size();
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains differ in length");
    if (n < 2) throw std::invalid_argument("gelman_rubin: chains need at least two draws");
    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    means.push_back(mean);
    vars.push_back(ss / static_cast<double>(n - 1));
  }
  return gelman_rubin_from_moments(means, vars, n);
}

double gelman_rubin_from_summaries(std::span<const RunningSummary> chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  std::vector<double> means, vars;
  const std::size_t n = chains.front().count();
  for (const auto& c : chains) {
    if (c.count() != n) throw std::invalid_argument("gelman_rubin: chains differ in length");
    means.push_back(c.mean());
    vars.push_back(c.variance());
  }
  return gelman_rubin_from_moments(means, vars, n);
}

bool RhatReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const RhatEntry& e) { return e.pass; });
}

double RhatReport::max_rhat() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.rhat);
  return worst;
}

RhatReport rhat_report(const std::vector<std::string>& names,
                       const std::vector<std::vector<std::span<const double>>>& chains,
                       std::size_t checkpoint, std::size_t first_iteration, std::size_t thin) {
  if (chains.size() < 2) throw std::invalid_argument("rhat_report: need at least two chains");
  RhatReport report;
  for (std::size_t p = 0; p < names.size(); ++p) {
    std::vector<std::span<const double>> per_chain;
    for (const auto& chain : chains) per_chain.push_back(chain.at(p));
    const double r = gelman_rubin(per_chain);
    report.entries.push_back({names[p], r, r < kRhatThreshold});

    const std::size_t n = per_chain.front().size();
    if (checkpoint == 0) continue;
    std::vector<std::size_t> lengths;
    for (std::size_t len = checkpoint; len < n; len += checkpoint) lengths.push_back(len);
    lengths.push_back(n);
    for (std::size_t len : lengths) {
      if (len < 2) continue;
      std::vector<std::span<const double>> prefix;
      for (const auto& c : per_chain) prefix.push_back(c.first(len));
      report.trace.push_back({first_iteration + len * thin, names[p], gelman_rubin(prefix)});
    }
  }
  return report;
}

BiasMae bias_mae(const std::vector<std::vector<double>>& estimates, std::span<const double> truth) {
  BiasMae out;
  if (estimates.empty()) return out;
  const std::size_t K = truth.size();
  if (K == 0) throw std::invalid_argument("bias_mae: empty truth");
  for (const auto& rep : estimates) {
    if (rep.size() != K) throw std::invalid_argument("bias_mae: shape mismatch");
    for (std::size_t k = 0; k < K; ++k) {
      const double err = rep[k] - truth[k];
      out.mean_bias += err;
      out.mean_mae += std::abs(err);
    }
  }
  const double denom = static_cast<double>(K * estimates.size());
  out.mean_bias /= denom;
  out.mean_mae /= denom;
  return out;
}

const RecoveryBlock* RecoveryReport::find(const std::string& parameter) const {
  for (const auto& b : blocks) {
    if (b.parameter == parameter) return &b;
  }
  return nullptr;
}

}  // namespace misirt
