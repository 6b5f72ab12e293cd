#pragma once

// DIC and LPML on the missingness submodel R | Y.

#include "misirt/model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace misirt {

struct MissingnessLoglik {
  double total = 0.0;
  std::vector<double> per_cell;  // row-major persons x items
};

/// sum_ij r log(pi) + (1 - r) log(1 - pi) at one draw of (tau, zeta, gammas),
/// with `y_complete` holding that draw's completed responses.
MissingnessLoglik missingness_loglik(const Dataset& data, const Table<std::uint8_t>& y_complete,
                                     std::span<const double> tau, std::span<const double> zeta,
                                     const Gammas& gammas);

/// Allocation-free variant: writes the per-cell terms into `per_cell` and
/// returns the total.
double missingness_loglik(const Dataset& data, const Table<std::uint8_t>& y_complete,
                          std::span<const double> tau, std::span<const double> zeta,
                          const Gammas& gammas, std::span<double> per_cell);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double d_hat = 0.0;
  double d_bar = 0.0;
};

/// DIC with the max-over-draws plug-in, so p_d >= 0 by construction.
DicResult compute_dic(std::span<const double> per_draw_logliks);

/// Streaming log-CPO for a fixed set of cells. Each added draw contributes
/// its per-cell log-likelihoods; the harmonic mean is kept in log space
/// relative to the running maximum of -loglik.
class CpoAccumulator {
 public:
  CpoAccumulator() = default;
  explicit CpoAccumulator(std::size_t n_cells);

  void add_draw(std::span<const double> cell_logliks);
  void merge(const CpoAccumulator& other);

  std::size_t n_cells() const { return u_max_.size(); }
  std::size_t n_draws() const { return n_draws_; }
  std::vector<double> log_cpo() const;

 private:
  std::vector<double> u_max_;
  std::vector<double> scaled_sum_;
  std::size_t n_draws_ = 0;
};

struct LpmlResult {
  double lpml = 0.0;
  std::vector<double> log_cpo;
};

/// `per_draw_cell_logliks[m][c]` is the loglik of cell c at draw m.
LpmlResult compute_lpml(const std::vector<std::vector<double>>& per_draw_cell_logliks);
LpmlResult lpml_from_accumulator(const CpoAccumulator& acc);

struct SelectionReport {
  double dic = 0.0;
  double p_d = 0.0;
  double d_hat = 0.0;
  double d_bar = 0.0;
  double lpml = 0.0;
  std::vector<double> log_cpo;  // persons x items, row-major
  std::size_t n_draws = 0;
  std::size_t n_persons = 0;
  std::size_t n_items = 0;
  std::string model_mode;
};

SelectionReport make_selection_report(std::span<const double> per_draw_logliks,
                                      const CpoAccumulator& cpo, std::size_t n_persons,
                                      std::size_t n_items, MissingnessMode mode);

struct ModelComparison {
  double delta_dic = 0.0;   // nonignorable - ignorable
  double delta_lpml = 0.0;  // nonignorable - ignorable
  std::string preferred;    // "nonignorable", "ignorable", "indistinguishable" or "conflicting"
};

/// Throws DataError when the two reports describe different data shapes.
ModelComparison compare(const SelectionReport& nonignorable, const SelectionReport& ignorable);

}  // namespace misirt
