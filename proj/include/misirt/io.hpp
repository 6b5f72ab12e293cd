#pragma once

// CSV and JSON input/output for datasets, draws, summaries and reports.

#include "misirt/diagnostics.hpp"
#include "misirt/mml.hpp"
#include "misirt/model.hpp"
#include "misirt/sampler.hpp"
#include "misirt/selection.hpp"
#include "misirt/simulate.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace misirt {

/// Shortest decimal text that round-trips the value; "NA" for NaN.
std::string format_double(double x);

/// Response matrix CSV: a header row of item ids, then one row per person
/// with cells 0, 1 or NA. Column order is administration order. Errors are
/// DataError with the offending row and column.
Dataset parse_dataset_csv(std::istream& in, const std::string& source = "<input>");
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

void write_draws_csv(std::ostream& out, const ChainDraws& draws);

/// Reads a draws CSV back as (names, row-major values).
struct DrawTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};
DrawTable read_draws_csv(const std::filesystem::path& path);

/// parameter,eap,post_sd,mcse,rhat
void write_summary_csv(std::ostream& out, const PosteriorSummary& summary);

/// One row per item with EAP, posterior SD and MCSE of a, b and (when
/// estimated) zeta.
void write_item_table_csv(std::ostream& out, const PosteriorSummary& summary,
                          const std::vector<std::string>& item_ids);

/// Missingness and covariance parameters with EAP, posterior SD, MCSE and
/// R-hat.
void write_structural_csv(std::ostream& out, const PosteriorSummary& summary);

void write_rhat_trace_csv(std::ostream& out, const RhatReport& report);

/// design,method,missing_proportion,replications,parameter,bias,mae with
/// "-" for blocks the method does not estimate.
void write_recovery_csv(std::ostream& out, const std::vector<RecoveryReport>& reports);

void write_selection_study_csv(std::ostream& out, const std::vector<SelectionStudyRow>& rows);

/// item,a_hat,se_a,b_hat,se_b,zeta_hat,se_zeta
void write_mml_csv(std::ostream& out, const MmlEstimate& estimate,
                   const std::vector<std::string>& item_ids);

nlohmann::json to_json(const SelectionReport& report);
SelectionReport selection_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SamplerConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
SamplerConfig sampler_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimTruth& truth);
nlohmann::json to_json(const SimDesign& design);
nlohmann::json to_json(const ModelComparison& comparison);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes text to a file, creating parent directories. Throws
/// std::runtime_error when the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace misirt
