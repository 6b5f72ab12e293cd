#include "misirt/mml.hpp"

#include "misirt/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>

namespace misirt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellTerm {
  double value = 0.0;
  double d_loga = 0.0;
  double d_b = 0.0;
  double d_zeta = 0.0;
};

double log_add(double x, double y) {
  const double m = std::max(x, y);
  return m + std::log(std::exp(x - m) + std::exp(y - m));
}

// log l and its derivatives for one cell at one node. state: 0/1 observed
// response, 2 missing.
CellTerm cell_term(double theta, double tau, double a, double b, double zeta, const Gammas& g,
                   int state, int cum, bool with_missing) {
  CellTerm t;
  const double u = a * (theta - b);
  if (state == 2) {
    if (!with_missing) return t;
    const double v0 = missingness_index(tau, zeta, g, cum, 0);
    const double v1 = v0 + g.g2;
    const double lp = log_normal_cdf(u);
    const double lq = log_normal_cdf(-u);
    t.value = log_add(lp + log_normal_cdf(v1), lq + log_normal_cdf(v0));
    const double du = std::exp(normal_log_pdf(u) - t.value) * (normal_cdf(v1) - normal_cdf(v0));
    t.d_loga = du * u;
    t.d_b = -a * du;
    t.d_zeta = std::exp(lp + normal_log_pdf(v1) - t.value) + std::exp(lq + normal_log_pdf(v0) - t.value);
    return t;
  }
  const double s = state == 1 ? 1.0 : -1.0;
  t.value = log_normal_cdf(s * u);
  const double du = s * std::exp(normal_log_pdf(u) - t.value);
  t.d_loga = du * u;
  t.d_b = -a * du;
  if (with_missing) {
    const double v = missingness_index(tau, zeta, g, cum, state);
    const double lr = log_normal_cdf(-v);
    t.value += lr;
    t.d_zeta = -std::exp(normal_log_pdf(v) - lr);
  }
  return t;
}

// Shared machinery: compact per-item cell categories, per-item node tables
// and the person x node log-integrand.
class Evaluator {
 public:
  Evaluator(const Dataset& data, const Gammas& gammas, const QuadratureGrid& grid, bool with_missing)
      : data_(data), gammas_(gammas), grid_(grid), with_missing_(with_missing),
        N_(data.n_persons()), J_(data.n_items()), M_(grid.size()), category_(N_ * J_),
        categories_(J_) {
    for (std::size_t j = 0; j < J_; ++j) {
      std::map<std::pair<int, int>, int> index;
      for (std::size_t i = 0; i < N_; ++i) {
        const Response r = data.response(i, j);
        const int state = r == Response::Missing ? 2 : (r == Response::Correct ? 1 : 0);
        // g only matters when the missingness part is in the likelihood.
        const int cum = with_missing ? data.cum_missing(i, j) : 0;
        const auto key = std::make_pair(state, cum);
        auto it = index.find(key);
        if (it == index.end()) {
          it = index.emplace(key, static_cast<int>(categories_[j].size())).first;
          categories_[j].push_back(key);
        }
        category_[i * J_ + j] = it->second;
      }
    }
    log_weight_.resize(M_);
    for (std::size_t k = 0; k < M_; ++k) log_weight_[k] = std::log(grid.weight[k]);
  }

  std::size_t persons() const { return N_; }
  std::size_t items() const { return J_; }
  std::size_t nodes() const { return M_; }
  bool with_missing() const { return with_missing_; }

  // table[c * M + k] for the compact categories of item j.
  void item_table(std::size_t j, double a, double b, double zeta, std::vector<CellTerm>& table) const {
    const auto& cats = categories_[j];
    table.resize(cats.size() * M_);
    for (std::size_t c = 0; c < cats.size(); ++c) {
      for (std::size_t k = 0; k < M_; ++k) {
        table[c * M_ + k] = cell_term(grid_.theta[k], grid_.tau[k], a, b, zeta, gammas_,
                                      cats[c].first, cats[c].second, with_missing_);
      }
    }
  }

  int category(std::size_t i, std::size_t j) const { return category_[i * J_ + j]; }

  // L(i, k) = log w_k + sum_j log l_ij(k).
  void integrand(const std::vector<std::vector<CellTerm>>& tables, std::vector<double>& L) const {
    L.assign(N_ * M_, 0.0);
    for (std::size_t i = 0; i < N_; ++i) {
      double* row = L.data() + i * M_;
      for (std::size_t k = 0; k < M_; ++k) row[k] = log_weight_[k];
      for (std::size_t j = 0; j < J_; ++j) {
        const CellTerm* t = tables[j].data() + static_cast<std::size_t>(category(i, j)) * M_;
        for (std::size_t k = 0; k < M_; ++k) row[k] += t[k].value;
      }
    }
  }

  // Person log-likelihoods and node posteriors (in place of L).
  double normalize(std::vector<double>& L, bool want_posterior) const {
    double total = 0.0;
    for (std::size_t i = 0; i < N_; ++i) {
      double* row = L.data() + i * M_;
      const double top = *std::max_element(row, row + M_);
      double sum = 0.0;
      for (std::size_t k = 0; k < M_; ++k) sum += std::exp(row[k] - top);
      const double lse = top + std::log(sum);
      total += lse;
      if (want_posterior) {
        for (std::size_t k = 0; k < M_; ++k) row[k] = std::exp(row[k] - lse);
      }
    }
    return total;
  }

  // Objective restricted to item j given the cavity integrand (L without
  // item j's terms); optionally its gradient in (log a, b, zeta).
  double item_objective(std::size_t j, const std::vector<double>& cavity, double a, double b,
                        double zeta, double* grad, std::vector<CellTerm>& table) const {
    item_table(j, a, b, zeta, table);
    double total = 0.0;
    if (grad) grad[0] = grad[1] = grad[2] = 0.0;
    std::vector<double> work(M_);
    for (std::size_t i = 0; i < N_; ++i) {
      const double* row = cavity.data() + i * M_;
      const CellTerm* t = table.data() + static_cast<std::size_t>(category(i, j)) * M_;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < M_; ++k) {
        work[k] = row[k] + t[k].value;
        top = std::max(top, work[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < M_; ++k) {
        work[k] = std::exp(work[k] - top);
        sum += work[k];
      }
      total += top + std::log(sum);
      if (grad) {
        double g0 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t k = 0; k < M_; ++k) {
          g0 += work[k] * t[k].d_loga;
          g1 += work[k] * t[k].d_b;
          g2 += work[k] * t[k].d_zeta;
        }
        grad[0] += g0 / sum;
        grad[1] += g1 / sum;
        grad[2] += g2 / sum;
      }
    }
    return total;
  }

  double loglik(const ItemParams& items, std::vector<double>* grad) const {
    std::vector<std::vector<CellTerm>> tables(J_);
    for (std::size_t j = 0; j < J_; ++j) {
      item_table(j, items.a[j], items.b[j], items.zeta[j], tables[j]);
    }
    std::vector<double> L;
    integrand(tables, L);
    const double total = normalize(L, grad != nullptr);
    if (grad) {
      grad->assign(3 * J_, 0.0);
      for (std::size_t i = 0; i < N_; ++i) {
        const double* post = L.data() + i * M_;
        for (std::size_t j = 0; j < J_; ++j) {
          const CellTerm* t = tables[j].data() + static_cast<std::size_t>(category(i, j)) * M_;
          double g0 = 0.0, g1 = 0.0, g2 = 0.0;
          for (std::size_t k = 0; k < M_; ++k) {
            g0 += post[k] * t[k].d_loga;
            g1 += post[k] * t[k].d_b;
            g2 += post[k] * t[k].d_zeta;
          }
          (*grad)[3 * j] += g0;
          (*grad)[3 * j + 1] += g1;
          (*grad)[3 * j + 2] += g2;
        }
      }
    }
    return total;
  }

 private:
  const Dataset& data_;
  Gammas gammas_;
  const QuadratureGrid& grid_;
  bool with_missing_;
  std::size_t N_, J_, M_;
  std::vector<int> category_;
  std::vector<std::vector<std::pair<int, int>>> categories_;
  std::vector<double> log_weight_;
};

void check_items(const ItemParams& items, const Dataset& data) {
  const std::size_t J = data.n_items();
  if (items.a.size() != J || items.b.size() != J || items.zeta.size() != J) {
    throw std::invalid_argument("item parameter count does not match the dataset");
  }
}

// Active coordinates of the item-major (log a, b, zeta) vector.
std::vector<std::size_t> active_indices(std::size_t J, bool with_missing) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < J; ++j) {
    out.push_back(3 * j);
    out.push_back(3 * j + 1);
    if (with_missing) out.push_back(3 * j + 2);
  }
  return out;
}

ItemParams from_vector(const std::vector<double>& x) {
  const std::size_t J = x.size() / 3;
  ItemParams p;
  for (std::size_t j = 0; j < J; ++j) {
    p.a.push_back(std::exp(x[3 * j]));
    p.b.push_back(x[3 * j + 1]);
    p.zeta.push_back(x[3 * j + 2]);
  }
  return p;
}

std::vector<double> to_vector(const ItemParams& p) {
  std::vector<double> x;
  for (std::size_t j = 0; j < p.a.size(); ++j) {
    x.push_back(std::log(p.a[j]));
    x.push_back(p.b[j]);
    x.push_back(p.zeta[j]);
  }
  return x;
}

Eigen::MatrixXd information_at(const Evaluator& ev, const std::vector<double>& x, double fd_step) {
  const auto active = active_indices(ev.items(), ev.with_missing());
  const std::size_t P = active.size();
  Eigen::MatrixXd info(P, P);
  std::vector<double> gp, gm;
  for (std::size_t c = 0; c < P; ++c) {
    const double h = fd_step * std::max(1.0, std::abs(x[active[c]]));
    std::vector<double> xp = x, xm = x;
    xp[active[c]] += h;
    xm[active[c]] -= h;
    ev.loglik(from_vector(xp), &gp);
    ev.loglik(from_vector(xm), &gm);
    for (std::size_t r = 0; r < P; ++r) {
      info(r, c) = -(gp[active[r]] - gm[active[r]]) / (2.0 * h);
    }
  }
  return info;
}

double active_norm(const std::vector<double>& grad, const std::vector<std::size_t>& active) {
  double s = 0.0;
  for (std::size_t idx : active) s += grad[idx] * grad[idx];
  return std::sqrt(s);
}

}  // namespace

GaussHermite gauss_hermite_normal(std::size_t K) {
  if (K < 1) throw std::invalid_argument("gauss_hermite_normal: K must be positive");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t k = 1; k < K; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermite out;
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double v = solver.eigenvectors()(0, k);
    out.nodes.push_back(solver.eigenvalues()(k));
    out.weights.push_back(v * v);
    total += v * v;
  }
  for (double& w : out.weights) w /= total;
  // Symmetrize against eigen-solver rounding.
  for (std::size_t k = 0; k < K / 2; ++k) {
    const double n = 0.5 * (out.nodes[K - 1 - k] - out.nodes[k]);
    const double w = 0.5 * (out.weights[K - 1 - k] + out.weights[k]);
    out.nodes[k] = -n;
    out.nodes[K - 1 - k] = n;
    out.weights[k] = out.weights[K - 1 - k] = w;
  }
  if (K % 2 == 1) out.nodes[K / 2] = 0.0;
  return out;
}

QuadratureGrid build_grid(std::size_t K, double sigma_theta_tau, double sigma_tau_sq) {
  if (K < 2) throw std::invalid_argument("build_grid: K must be at least 2");
  const double cond = sigma_tau_sq - sigma_theta_tau * sigma_theta_tau;
  if (!(sigma_tau_sq > 0.0 && cond > 0.0)) {
    throw std::invalid_argument("build_grid: covariance matrix is not positive definite");
  }
  const double l22 = std::sqrt(cond);
  const GaussHermite gh = gauss_hermite_normal(K);
  QuadratureGrid grid;
  for (std::size_t p = 0; p < K; ++p) {
    for (std::size_t q = 0; q < K; ++q) {
      const double x1 = gh.nodes[p];
      const double x2 = gh.nodes[q];
      grid.theta.push_back(x1);
      grid.tau.push_back(sigma_theta_tau * x1 + l22 * x2);
      grid.weight.push_back(gh.weights[p] * gh.weights[q]);
    }
  }
  return grid;
}

double marginal_loglik(const ItemParams& items, const Dataset& data, const Gammas& gammas,
                       const QuadratureGrid& grid, bool include_missingness) {
  check_items(items, data);
  return Evaluator(data, gammas, grid, include_missingness).loglik(items, nullptr);
}

std::vector<double> marginal_gradient(const ItemParams& items, const Dataset& data,
                                      const Gammas& gammas, const QuadratureGrid& grid,
                                      bool include_missingness) {
  check_items(items, data);
  std::vector<double> grad;
  Evaluator(data, gammas, grid, include_missingness).loglik(items, &grad);
  return grad;
}

Eigen::MatrixXd observed_information(const ItemParams& items, const Dataset& data,
                                     const Gammas& gammas, const QuadratureGrid& grid,
                                     bool include_missingness, double fd_step) {
  check_items(items, data);
  const Evaluator ev(data, gammas, grid, include_missingness);
  return information_at(ev, to_vector(items), fd_step);
}

void check_mml_preconditions(const Dataset& data) {
  if (data.n_persons() == 0 || data.n_items() == 0) throw DataError("dataset is empty");
  for (std::size_t j = 0; j < data.n_items(); ++j) {
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < data.n_persons(); ++i) {
      const Response r = data.response(i, j);
      if (r != Response::Missing) seen[static_cast<int>(r)] = true;
    }
    if (!seen[0] || !seen[1]) {
      const std::string id = data.item_ids().empty() ? std::to_string(j + 1) : data.item_ids()[j];
      throw DataError("item '" + id + "' needs both correct and incorrect observed responses");
    }
  }
}

MmlEstimate fit_mml(const Dataset& data, const Gammas& gammas, double sigma_theta_tau,
                    double sigma_tau_sq, const MmlConfig& config) {
  check_mml_preconditions(data);
  if (!gammas.satisfies_sign_constraints()) {
    throw std::invalid_argument("fit_mml: gamma violates its sign constraints");
  }
  const std::size_t N = data.n_persons();
  const std::size_t J = data.n_items();
  const bool with_missing = config.include_missingness;
  const QuadratureGrid grid = build_grid(config.K, sigma_theta_tau, sigma_tau_sq);
  const Evaluator ev(data, gammas, grid, with_missing);
  const auto active = active_indices(J, with_missing);

  // Starting values from observed proportions.
  const double clamp_lo = 0.5 / static_cast<double>(N);
  std::vector<double> x(3 * J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    double correct = 0.0, observed = 0.0, missing = 0.0, cum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const Response r = data.response(i, j);
      cum += data.cum_missing(i, j);
      if (r == Response::Missing) {
        missing += 1.0;
      } else {
        observed += 1.0;
        correct += r == Response::Correct ? 1.0 : 0.0;
      }
    }
    const double p = std::clamp(correct / observed, clamp_lo, 1.0 - clamp_lo);
    x[3 * j + 1] = -std::sqrt(2.0) * normal_quantile(p);
    if (with_missing) {
      const double m = std::clamp(missing / static_cast<double>(N), clamp_lo, 1.0 - clamp_lo);
      x[3 * j + 2] = std::sqrt(1.0 + sigma_tau_sq) * normal_quantile(m) - gammas.g0 -
                     gammas.g1 * cum / static_cast<double>(N) - gammas.g2 * p;
    }
  }

  MmlEstimate est;
  est.include_missingness = with_missing;
  std::size_t iter = 0;
  double ll = ev.loglik(from_vector(x), nullptr);

  // Phase 1: item-block Newton sweeps on the exact conditional objective.
  const std::size_t dims = with_missing ? 3 : 2;
  std::vector<std::vector<CellTerm>> tables(J);
  std::vector<double> L;
  std::vector<CellTerm> scratch;
  while (iter < config.max_iter) {
    ++iter;
    for (std::size_t j = 0; j < J; ++j) ev.item_table(j, std::exp(x[3 * j]), x[3 * j + 1], x[3 * j + 2], tables[j]);
    ev.integrand(tables, L);
    const double before = ll;
    for (std::size_t j = 0; j < J; ++j) {
      std::vector<double> cavity = L;
      for (std::size_t i = 0; i < N; ++i) {
        const CellTerm* t = tables[j].data() + static_cast<std::size_t>(ev.category(i, j)) * grid.size();
        for (std::size_t k = 0; k < grid.size(); ++k) cavity[i * grid.size() + k] -= t[k].value;
      }
      double xj[3] = {x[3 * j], x[3 * j + 1], x[3 * j + 2]};
      auto objective = [&](const double* v, double* g) {
        return ev.item_objective(j, cavity, std::exp(v[0]), v[1], v[2], g, scratch);
      };
      double g[3];
      const double f0 = objective(xj, g);
      Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
      for (std::size_t d = 0; d < dims; ++d) {
        const double h = config.fd_step * std::max(1.0, std::abs(xj[d]));
        double xp[3] = {xj[0], xj[1], xj[2]}, xm[3] = {xj[0], xj[1], xj[2]};
        xp[d] += h;
        xm[d] -= h;
        double gp[3], gm[3];
        objective(xp, gp);
        objective(xm, gm);
        for (std::size_t r = 0; r < dims; ++r) H(r, d) = (gp[r] - gm[r]) / (2.0 * h);
      }
      const Eigen::MatrixXd negH = -0.5 * (H.topLeftCorner(dims, dims) + H.topLeftCorner(dims, dims).transpose());
      Eigen::VectorXd grad(dims);
      for (std::size_t d = 0; d < dims; ++d) grad(d) = g[d];
      Eigen::VectorXd step;
      Eigen::LLT<Eigen::MatrixXd> llt(negH);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(grad);
      } else {
        step = grad / std::max(1.0, grad.norm());
      }
      double t = 1.0;
      for (int back = 0; back < 40; ++back, t *= 0.5) {
        double xn[3] = {xj[0], xj[1], xj[2]};
        for (std::size_t d = 0; d < dims; ++d) xn[d] += t * step(d);
        const double f1 = objective(xn, nullptr);
        if (std::isfinite(f1) && f1 >= f0) {
          for (std::size_t d = 0; d < dims; ++d) x[3 * j + d] = xn[d];
          // Refresh the integrand with item j's new terms.
          ev.item_table(j, std::exp(x[3 * j]), x[3 * j + 1], x[3 * j + 2], tables[j]);
          for (std::size_t i = 0; i < N; ++i) {
            const CellTerm* tt = tables[j].data() + static_cast<std::size_t>(ev.category(i, j)) * grid.size();
            for (std::size_t k = 0; k < grid.size(); ++k) {
              L[i * grid.size() + k] = cavity[i * grid.size() + k] + tt[k].value;
            }
          }
          break;
        }
      }
    }
    ll = ev.loglik(from_vector(x), nullptr);
    if (std::abs(ll - before) < std::max(config.tol, 1e-3)) break;
  }

  // Phase 2: joint Newton steps on the full parameter vector.
  std::vector<double> grad;
  ll = ev.loglik(from_vector(x), &grad);
  double gnorm = active_norm(grad, active);
  bool done = false;
  while (iter < config.max_iter) {
    ++iter;
    const Eigen::MatrixXd info = information_at(ev, x, config.fd_step);
    const Eigen::MatrixXd sym = 0.5 * (info + info.transpose());
    Eigen::VectorXd g(active.size());
    for (std::size_t c = 0; c < active.size(); ++c) g(c) = grad[active[c]];
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    Eigen::VectorXd step = llt.info() == Eigen::Success ? Eigen::VectorXd(llt.solve(g))
                                                        : Eigen::VectorXd(g / std::max(1.0, g.norm()));
    double t = 1.0;
    bool moved = false;
    for (int back = 0; back < 40; ++back, t *= 0.5) {
      std::vector<double> xn = x;
      for (std::size_t c = 0; c < active.size(); ++c) xn[active[c]] += t * step(c);
      std::vector<double> gn;
      const double lln = ev.loglik(from_vector(xn), &gn);
      if (std::isfinite(lln) && lln >= ll - 1e-12 * std::abs(ll)) {
        const double change = lln - ll;
        x = xn;
        ll = lln;
        grad = gn;
        gnorm = active_norm(grad, active);
        moved = true;
        done = std::abs(change) < config.tol && gnorm <= 10.0 * config.tol;
        break;
      }
    }
    if (done || !moved) break;
  }

  const ItemParams fitted = from_vector(x);
  est.a_hat = fitted.a;
  est.b_hat = fitted.b;
  est.zeta_hat = fitted.zeta;
  if (!with_missing) std::fill(est.zeta_hat.begin(), est.zeta_hat.end(), kNaN);
  est.loglik = ll;
  est.gradient_norm = gnorm;
  est.n_iterations = iter;
  est.converged = gnorm <= 10.0 * config.tol;
  est.std_errors.assign(3 * J, kNaN);
  if (est.converged) {
    try {
      est.std_errors = asymptotic_se(est, data, gammas, grid, config.fd_step);
    } catch (const NumericalError&) {
      est.converged = false;
    }
  }
  return est;
}

std::vector<double> asymptotic_se(const MmlEstimate& estimate, const Dataset& data,
                                  const Gammas& gammas, const QuadratureGrid& grid, double fd_step) {
  const std::size_t J = data.n_items();
  const bool with_missing = estimate.include_missingness;
  ItemParams items = estimate.items();
  if (!with_missing) std::fill(items.zeta.begin(), items.zeta.end(), 0.0);
  const Eigen::MatrixXd info = observed_information(items, data, gammas, grid, with_missing, fd_step);
  const Eigen::MatrixXd sym = 0.5 * (info + info.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("observed information matrix is not positive definite");
  }
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
  const auto active = active_indices(J, with_missing);
  std::vector<double> se(3 * J, kNaN);
  for (std::size_t c = 0; c < active.size(); ++c) {
    const double var = cov(c, c);
    if (!(var > 0.0) || !std::isfinite(var)) {
      throw NumericalError("observed information matrix is singular");
    }
    se[active[c]] = std::sqrt(var);
  }
  for (std::size_t j = 0; j < J; ++j) se[3 * j] *= items.a[j];
  return se;
}

}  // namespace misirt
