#include "misirt/selection.hpp"

#include "misirt/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace misirt {

double missingness_loglik(const Dataset& data, const Table<std::uint8_t>& y_complete,
                          std::span<const double> tau, std::span<const double> zeta,
                          const Gammas& gammas, std::span<double> per_cell) {
  const std::size_t N = data.n_persons();
  const std::size_t J = data.n_items();
  if (tau.size() != N || zeta.size() != J || y_complete.rows() != N || y_complete.cols() != J ||
      per_cell.size() != N * J) {
    throw std::invalid_argument("missingness_loglik: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      const double v =
          missingness_index(tau[i], zeta[j], gammas, data.cum_missing(i, j), y_complete(i, j));
      const double term = log_normal_cdf(data.missing(i, j) ? v : -v);
      per_cell[i * J + j] = term;
      total += term;
    }
  }
  return total;
}

MissingnessLoglik missingness_loglik(const Dataset& data, const Table<std::uint8_t>& y_complete,
                                     std::span<const double> tau, std::span<const double> zeta,
                                     const Gammas& gammas) {
  MissingnessLoglik out;
  out.per_cell.resize(data.n_persons() * data.n_items());
  out.total = missingness_loglik(data, y_complete, tau, zeta, gammas, out.per_cell);
  return out;
}

DicResult compute_dic(std::span<const double> per_draw_logliks) {
  if (per_draw_logliks.empty()) throw std::invalid_argument("compute_dic: no draws");
  double sum = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (double ll : per_draw_logliks) {
    sum += ll;
    best = std::max(best, ll);
  }
  DicResult r;
  r.d_bar = -2.0 * sum / static_cast<double>(per_draw_logliks.size());
  r.d_hat = -2.0 * best;
  r.p_d = std::max(0.0, r.d_bar - r.d_hat);
  r.dic = r.d_hat + 2.0 * r.p_d;
  return r;
}

CpoAccumulator::CpoAccumulator(std::size_t n_cells)
    : u_max_(n_cells, -std::numeric_limits<double>::infinity()), scaled_sum_(n_cells, 0.0) {}

void CpoAccumulator::add_draw(std::span<const double> cell_logliks) {
  if (cell_logliks.size() != u_max_.size()) {
    throw std::invalid_argument("CpoAccumulator: cell count mismatch");
  }
  for (std::size_t c = 0; c < u_max_.size(); ++c) {
    const double u = -cell_logliks[c];
    if (u > u_max_[c]) {
      scaled_sum_[c] = scaled_sum_[c] * std::exp(u_max_[c] - u) + 1.0;
      u_max_[c] = u;
    } else {
      scaled_sum_[c] += std::exp(u - u_max_[c]);
    }
  }
  ++n_draws_;
}

void CpoAccumulator::merge(const CpoAccumulator& other) {
  if (other.n_draws_ == 0) return;
  if (n_draws_ == 0) {
    *this = other;
    return;
  }
  if (other.u_max_.size() != u_max_.size()) {
    throw std::invalid_argument("CpoAccumulator: cell count mismatch");
  }
  for (std::size_t c = 0; c < u_max_.size(); ++c) {
    const double top = std::max(u_max_[c], other.u_max_[c]);
    scaled_sum_[c] = scaled_sum_[c] * std::exp(u_max_[c] - top) +
                     other.scaled_sum_[c] * std::exp(other.u_max_[c] - top);
    u_max_[c] = top;
  }
  n_draws_ += other.n_draws_;
}

std::vector<double> CpoAccumulator::log_cpo() const {
  if (n_draws_ == 0) throw std::logic_error("CpoAccumulator: no draws");
  std::vector<double> out(u_max_.size());
  const double log_m = std::log(static_cast<double>(n_draws_));
  for (std::size_t c = 0; c < u_max_.size(); ++c) {
    out[c] = -u_max_[c] - (std::log(scaled_sum_[c]) - log_m);
  }
  return out;
}

LpmlResult compute_lpml(const std::vector<std::vector<double>>& per_draw_cell_logliks) {
  if (per_draw_cell_logliks.empty()) throw std::invalid_argument("compute_lpml: no draws");
  const std::size_t cells = per_draw_cell_logliks.front().size();
  const double M = static_cast<double>(per_draw_cell_logliks.size());
  LpmlResult r;
  r.log_cpo.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    double u_max = -std::numeric_limits<double>::infinity();
    for (const auto& draw : per_draw_cell_logliks) {
      if (draw.size() != cells) throw std::invalid_argument("compute_lpml: ragged input");
      u_max = std::max(u_max, -draw[c]);
    }
    double acc = 0.0;
    for (const auto& draw : per_draw_cell_logliks) acc += std::exp(-draw[c] - u_max);
    r.log_cpo[c] = -u_max - std::log(acc / M);
    r.lpml += r.log_cpo[c];
  }
  return r;
}

LpmlResult lpml_from_accumulator(const CpoAccumulator& acc) {
  LpmlResult r;
  r.log_cpo = acc.log_cpo();
  for (double v : r.log_cpo) r.lpml += v;
  return r;
}

SelectionReport make_selection_report(std::span<const double> per_draw_logliks,
                                      const CpoAccumulator& cpo, std::size_t n_persons,
                                      std::size_t n_items, MissingnessMode mode) {
  const DicResult dic = compute_dic(per_draw_logliks);
  LpmlResult lpml = lpml_from_accumulator(cpo);
  SelectionReport r;
  r.dic = dic.dic;
  r.p_d = dic.p_d;
  r.d_hat = dic.d_hat;
  r.d_bar = dic.d_bar;
  r.lpml = lpml.lpml;
  r.log_cpo = std::move(lpml.log_cpo);
  r.n_draws = per_draw_logliks.size();
  r.n_persons = n_persons;
  r.n_items = n_items;
  r.model_mode = to_string(mode);
  return r;
}

ModelComparison compare(const SelectionReport& nonignorable, const SelectionReport& ignorable) {
  if (nonignorable.n_persons != ignorable.n_persons || nonignorable.n_items != ignorable.n_items) {
    throw DataError("compare: reports were computed on datasets of different shape");
  }
  ModelComparison c;
  c.delta_dic = nonignorable.dic - ignorable.dic;
  c.delta_lpml = nonignorable.lpml - ignorable.lpml;
  if (c.delta_dic == 0.0 && c.delta_lpml == 0.0) {
    c.preferred = "indistinguishable";
  } else if (c.delta_dic <= 0.0 && c.delta_lpml >= 0.0) {
    c.preferred = "nonignorable";
  } else if (c.delta_dic >= 0.0 && c.delta_lpml <= 0.0) {
    c.preferred = "ignorable";
  } else {
    c.preferred = "conflicting";
  }
  return c;
}

}  // namespace misirt
