#pragma once

// Simulation designs, truth draws, data generation and the recovery /
// model-selection study drivers.

#include "misirt/diagnostics.hpp"
#include "misirt/distributions.hpp"
#include "misirt/model.hpp"
#include "misirt/sampler.hpp"
#include "misirt/selection.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace misirt {

/// One column of the missingness design grid.
struct DesignColumn {
  Gammas gamma;
  /// Nominal average missing proportion of the column.
  double nominal_proportion;
};

/// The five gamma columns, index 0..4 (design 1..5).
const std::array<DesignColumn, 5>& design_columns();

inline constexpr std::array<double, 3> kDesignRhos{0.0, 0.4, 0.8};

/// Realized proportion reported for design `column` (1-based) at one of the
/// tabulated rho values; the nominal proportion for any other rho.
double tabulated_missing_proportion(std::size_t column, double rho);

struct SimDesign {
  std::size_t n_persons = 500;
  std::size_t n_items = 20;
  double rho = 0.0;
  Gammas gamma{-2.2, 0.02, -0.2};
  std::size_t replications = 10;
  std::uint64_t seed = 1;
  /// 1..5 when taken from the grid, 0 for a custom gamma.
  std::size_t column = 1;

  /// Grid design `column` (1-based) at correlation rho. Throws
  /// std::invalid_argument on a bad index.
  static SimDesign from_grid(std::size_t column, double rho);
  void validate() const;
  std::string label() const;
  double expected_missing_proportion() const;
};

struct SimTruth {
  ItemParams items;
  PersonParams persons;
  StructuralParams structural;
  double missing_proportion = 0.0;
};

SimTruth draw_truth(const SimDesign& design, RandomStream& rng);

/// Draws complete responses, then the missingness indicators item by item
/// using the already realized indicators of earlier items, and masks the
/// missing cells. Records the realized missing proportion in `truth`.
Dataset gen_dataset(SimTruth& truth, RandomStream& rng);

struct Replication {
  std::size_t index = 0;
  SimTruth truth;
  Dataset data;
};

/// Replication `index` of a design; depends only on (design.seed, index).
Replication simulate_replication(const SimDesign& design, std::size_t index);

/// Seed used for the fits of replication `index`.
std::uint64_t replication_fit_seed(std::uint64_t design_seed, std::size_t index);

enum class RecoveryMethod { Proposed, Listwise };

std::string to_string(RecoveryMethod method);
RecoveryMethod parse_method(const std::string& text);

struct ReplicationFit {
  std::size_t index = 0;
  RecoveryMethod method = RecoveryMethod::Proposed;
  MissingnessMode mode = MissingnessMode::Nonignorable;
  SimTruth truth;
  std::optional<PosteriorSummary> summary;       // empty when the fit failed
  std::optional<SelectionReport> selection;      // proposed method only
  std::vector<std::size_t> person_index;          // persons entering the fit
  std::string error;
};

/// Simulates replication `index` and fits it. Failures are recorded in
/// `error` instead of thrown.
ReplicationFit fit_replication(const SimDesign& design, std::size_t index, RecoveryMethod method,
                               MissingnessMode mode, const SamplerConfig& config);

/// Parameter blocks in report order.
const std::vector<std::string>& recovery_blocks();

/// Mean bias and MAE of each block for one replication. Blocks the method
/// does not estimate come back unavailable.
std::vector<RecoveryBlock> score_replication(const ReplicationFit& fit);

/// Pools per-replication fits into a report: bias and MAE are averaged over
/// every parameter of a block and every successful replication.
RecoveryReport score_recovery(const SimDesign& design, RecoveryMethod method,
                              const std::vector<ReplicationFit>& fits);

/// design.replications fits (up to `jobs` at once) scored into a report.
RecoveryReport run_recovery_study(const SimDesign& design, RecoveryMethod method,
                                  const SamplerConfig& config, std::size_t jobs = 1);

struct SelectionStudyRow {
  std::size_t index = 0;
  double delta_dic = 0.0;
  double delta_lpml = 0.0;
  std::string preferred;
  std::string error;
};

SelectionStudyRow selection_row(const ReplicationFit& nonignorable, const ReplicationFit& ignorable);

/// Fits both modes to every replication and records DIC/LPML differences.
std::vector<SelectionStudyRow> run_selection_study(const SimDesign& design,
                                                   const SamplerConfig& config,
                                                   std::size_t jobs = 1);

}  // namespace misirt
