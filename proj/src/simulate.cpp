#include "misirt/simulate.hpp"

#include "misirt/baseline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace misirt {

namespace {

template <typename Fn>
void for_each_index(std::size_t n, std::size_t jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&]() {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Realized proportions reported per rho row (0, 0.4, 0.8) for designs 1..5.
constexpr double kTabulated[3][5] = {
    {0.093, 0.173, 0.264, 0.370, 0.463},
    {0.098, 0.178, 0.266, 0.371, 0.480},
    {0.097, 0.180, 0.267, 0.365, 0.464},
};

struct BlockAccumulator {
  double bias = 0.0;
  double abs = 0.0;
  std::size_t count = 0;

  void add(double estimate, double truth) {
    bias += estimate - truth;
    abs += std::abs(estimate - truth);
    ++count;
  }
};

}  // namespace

const std::array<DesignColumn, 5>& design_columns() {
  static const std::array<DesignColumn, 5> columns{{
      {{-2.2, 0.02, -0.2}, 0.096},
      {{-1.6, 0.04, -0.2}, 0.178},
      {{-1.1, 0.04, -0.2}, 0.266},
      {{-0.65, 0.05, -0.25}, 0.371},
      {{-0.2, 0.05, -0.25}, 0.472},
  }};
  return columns;
}

double tabulated_missing_proportion(std::size_t column, double rho) {
  if (column < 1 || column > 5) throw std::invalid_argument("design column must be 1..5");
  for (std::size_t r = 0; r < kDesignRhos.size(); ++r) {
    if (std::abs(rho - kDesignRhos[r]) < 1e-12) return kTabulated[r][column - 1];
  }
  return design_columns()[column - 1].nominal_proportion;
}

SimDesign SimDesign::from_grid(std::size_t column, double rho) {
  if (column < 1 || column > 5) {
    throw std::invalid_argument("design index must be between 1 and 5, got " + std::to_string(column));
  }
  SimDesign d;
  d.column = column;
  d.gamma = design_columns()[column - 1].gamma;
  d.rho = rho;
  d.validate();
  return d;
}

void SimDesign::validate() const {
  if (n_persons == 0 || n_items == 0) throw std::invalid_argument("design needs persons and items");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("design rho must lie in [0, 1)");
  if (!gamma.satisfies_sign_constraints()) {
    throw std::invalid_argument("design gamma violates gamma0 < 0, gamma1 > 0, gamma2 < 0");
  }
}

std::string SimDesign::label() const {
  std::ostringstream os;
  if (column != 0) {
    os << "design" << column;
  } else {
    os << "gamma(" << gamma.g0 << "," << gamma.g1 << "," << gamma.g2 << ")";
  }
  os << "_rho" << rho;
  return os.str();
}

double SimDesign::expected_missing_proportion() const {
  if (column == 0) return std::numeric_limits<double>::quiet_NaN();
  return tabulated_missing_proportion(column, rho);
}

SimTruth draw_truth(const SimDesign& design, RandomStream& rng) {
  design.validate();
  const std::size_t J = design.n_items;
  const std::size_t N = design.n_persons;
  SimTruth t;
  t.items.a.resize(J);
  t.items.b.resize(J);
  t.items.zeta.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    t.items.a[j] = 0.5 + rng.uniform();
    t.items.b[j] = rng.normal();
    t.items.zeta[j] = rng.normal();
  }
  t.persons.theta.resize(N);
  t.persons.tau.resize(N);
  const double rest = std::sqrt(1.0 - design.rho * design.rho);
  for (std::size_t i = 0; i < N; ++i) {
    const double theta = rng.normal();
    t.persons.theta[i] = theta;
    t.persons.tau[i] = design.rho * theta + rest * rng.normal();
  }
  t.structural = StructuralParams{design.gamma.g0, design.gamma.g1, design.gamma.g2, design.rho, 1.0};
  return t;
}

Dataset gen_dataset(SimTruth& truth, RandomStream& rng) {
  const std::size_t N = truth.persons.theta.size();
  const std::size_t J = truth.items.a.size();
  const Gammas g = truth.structural.gammas();
  Table<std::uint8_t> y(N, J);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      const double p = prob_correct(truth.persons.theta[i], truth.items.a[j], truth.items.b[j]);
      y(i, j) = static_cast<std::uint8_t>(sample_bernoulli(p, rng));
    }
  }
  std::vector<Response> cells(N * J);
  std::size_t missing = 0;
  for (std::size_t i = 0; i < N; ++i) {
    int cum = 0;
    for (std::size_t j = 0; j < J; ++j) {
      const double pi = prob_missing(truth.persons.tau[i], truth.items.zeta[j], g, cum, y(i, j));
      const bool r = sample_bernoulli(pi, rng) == 1;
      cells[i * J + j] = r ? Response::Missing : (y(i, j) ? Response::Correct : Response::Incorrect);
      cum += r ? 1 : 0;
      missing += r ? 1 : 0;
    }
  }
  truth.missing_proportion = static_cast<double>(missing) / static_cast<double>(N * J);
  return Dataset(N, J, std::move(cells));
}

Replication simulate_replication(const SimDesign& design, std::size_t index) {
  RandomStream rng(design.seed, index);
  Replication r;
  r.index = index;
  r.truth = draw_truth(design, rng);
  r.data = gen_dataset(r.truth, rng);
  return r;
}

std::uint64_t replication_fit_seed(std::uint64_t design_seed, std::size_t index) {
  std::uint64_t x = design_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string to_string(RecoveryMethod method) {
  return method == RecoveryMethod::Proposed ? "proposed" : "listwise";
}

RecoveryMethod parse_method(const std::string& text) {
  if (text == "proposed") return RecoveryMethod::Proposed;
  if (text == "listwise") return RecoveryMethod::Listwise;
  throw std::invalid_argument("unknown method '" + text + "' (expected proposed or listwise)");
}

ReplicationFit fit_replication(const SimDesign& design, std::size_t index, RecoveryMethod method,
                               MissingnessMode mode, const SamplerConfig& config) {
  ReplicationFit fit;
  fit.index = index;
  fit.method = method;
  fit.mode = mode;
  try {
    Replication rep = simulate_replication(design, index);
    fit.truth = rep.truth;
    SamplerConfig cfg = config;
    cfg.seed = replication_fit_seed(design.seed, index);
    if (method == RecoveryMethod::Proposed) {
      ModelSpec spec;
      spec.mode = mode;
      const DrawStore draws = run_chains(rep.data, spec, cfg);
      fit.summary = summarize(draws);
      fit.selection = selection_report(draws);
      fit.person_index.resize(rep.data.n_persons());
      for (std::size_t i = 0; i < fit.person_index.size(); ++i) fit.person_index[i] = i;
    } else {
      const CompleteCaseDataset cc = listwise_delete(rep.data);
      fit.person_index = cc.person_index;
      fit.summary = summarize(fit_irt_only(cc, cfg));
    }
  } catch (const std::exception& e) {
    fit.summary.reset();
    fit.selection.reset();
    fit.error = e.what();
  }
  return fit;
}

const std::vector<std::string>& recovery_blocks() {
  static const std::vector<std::string> blocks{"a", "b", "theta", "zeta", "tau", "gamma0",
                                               "gamma1", "gamma2", "sigma.theta.tau", "sigma2.tau"};
  return blocks;
}

namespace {

std::vector<BlockAccumulator> accumulate(const ReplicationFit& fit) {
  const auto& names = recovery_blocks();
  std::vector<BlockAccumulator> acc(names.size());
  if (!fit.summary) return acc;
  const PosteriorSummary& s = *fit.summary;
  const SimTruth& t = fit.truth;
  const bool full = fit.method == RecoveryMethod::Proposed;
  auto indexed = [&](std::size_t block, const std::string& prefix, const std::vector<double>& truth,
                     const std::vector<std::size_t>* map) {
    const std::vector<double> est = s.block(prefix);
    for (std::size_t k = 0; k < est.size(); ++k) {
      acc[block].add(est[k], truth[map ? (*map)[k] : k]);
    }
  };
  indexed(0, "a", t.items.a, nullptr);
  indexed(1, "b", t.items.b, nullptr);
  indexed(2, "theta", t.persons.theta, &fit.person_index);
  if (!full) return acc;
  indexed(3, "zeta", t.items.zeta, nullptr);
  indexed(4, "tau", t.persons.tau, &fit.person_index);
  acc[5].add(s.at("gamma0").eap, t.structural.gamma0);
  acc[6].add(s.at("gamma1").eap, t.structural.gamma1);
  acc[7].add(s.at("gamma2").eap, t.structural.gamma2);
  acc[8].add(s.at("sigma.theta.tau").eap, t.structural.sigma_theta_tau);
  acc[9].add(s.at("sigma2.tau").eap, t.structural.sigma_tau_sq);
  return acc;
}

}  // namespace

std::vector<RecoveryBlock> score_replication(const ReplicationFit& fit) {
  const auto& names = recovery_blocks();
  const auto acc = accumulate(fit);
  std::vector<RecoveryBlock> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    RecoveryBlock b{names[k], acc[k].count > 0, 0.0, 0.0};
    if (b.available) {
      b.bias = acc[k].bias / static_cast<double>(acc[k].count);
      b.mae = acc[k].abs / static_cast<double>(acc[k].count);
    }
    out.push_back(b);
  }
  return out;
}

RecoveryReport score_recovery(const SimDesign& design, RecoveryMethod method,
                              const std::vector<ReplicationFit>& fits) {
  const auto& names = recovery_blocks();
  RecoveryReport report;
  report.design = design.label();
  report.method = to_string(method);
  std::vector<BlockAccumulator> total(names.size());
  double proportion = 0.0;
  for (const auto& fit : fits) {
    if (!fit.summary) {
      report.failures.push_back("replication " + std::to_string(fit.index + 1) + ": " + fit.error);
      continue;
    }
    ++report.replications;
    proportion += fit.truth.missing_proportion;
    const auto acc = accumulate(fit);
    std::vector<double> rep_bias;
    for (std::size_t k = 0; k < names.size(); ++k) {
      total[k].bias += acc[k].bias;
      total[k].abs += acc[k].abs;
      total[k].count += acc[k].count;
      rep_bias.push_back(acc[k].count ? acc[k].bias / static_cast<double>(acc[k].count)
                                      : std::numeric_limits<double>::quiet_NaN());
    }
    report.replication_bias.push_back(std::move(rep_bias));
  }
  if (report.replications > 0) {
    report.mean_missing_proportion = proportion / static_cast<double>(report.replications);
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    RecoveryBlock b{names[k], total[k].count > 0, 0.0, 0.0};
    if (b.available) {
      b.bias = total[k].bias / static_cast<double>(total[k].count);
      b.mae = total[k].abs / static_cast<double>(total[k].count);
    }
    report.blocks.push_back(b);
  }
  return report;
}

RecoveryReport run_recovery_study(const SimDesign& design, RecoveryMethod method,
                                  const SamplerConfig& config, std::size_t jobs) {
  design.validate();
  config.validate();
  std::vector<ReplicationFit> fits(design.replications);
  SamplerConfig cfg = config;
  if (jobs > 1) cfg.jobs = 1;
  for_each_index(design.replications, jobs, [&](std::size_t r) {
    fits[r] = fit_replication(design, r, method, MissingnessMode::Nonignorable, cfg);
  });
  return score_recovery(design, method, fits);
}

SelectionStudyRow selection_row(const ReplicationFit& nonignorable, const ReplicationFit& ignorable) {
  SelectionStudyRow row;
  row.index = nonignorable.index;
  if (!nonignorable.selection || !ignorable.selection) {
    row.error = !nonignorable.error.empty() ? nonignorable.error : ignorable.error;
    if (row.error.empty()) row.error = "missing selection report";
    return row;
  }
  const ModelComparison c = compare(*nonignorable.selection, *ignorable.selection);
  row.delta_dic = c.delta_dic;
  row.delta_lpml = c.delta_lpml;
  row.preferred = c.preferred;
  return row;
}

std::vector<SelectionStudyRow> run_selection_study(const SimDesign& design,
                                                   const SamplerConfig& config, std::size_t jobs) {
  design.validate();
  config.validate();
  std::vector<SelectionStudyRow> rows(design.replications);
  SamplerConfig cfg = config;
  if (jobs > 1) cfg.jobs = 1;
  for_each_index(design.replications, jobs, [&](std::size_t r) {
    const ReplicationFit non =
        fit_replication(design, r, RecoveryMethod::Proposed, MissingnessMode::Nonignorable, cfg);
    const ReplicationFit ign =
        fit_replication(design, r, RecoveryMethod::Proposed, MissingnessMode::Ignorable, cfg);
    rows[r] = selection_row(non, ign);
  });
  return rows;
}

}  // namespace misirt
