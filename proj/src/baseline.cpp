#include "misirt/baseline.hpp"

namespace misirt {

CompleteCaseDataset listwise_delete(const Dataset& data) {
  const std::size_t J = data.n_items();
  CompleteCaseDataset out;
  std::vector<Response> cells;
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    if (data.missing_in_row(i) != 0) continue;
    out.person_index.push_back(i);
    for (std::size_t j = 0; j < J; ++j) cells.push_back(data.response(i, j));
  }
  if (out.person_index.empty()) {
    throw DataError("listwise deletion left no complete cases");
  }
  out.data = Dataset(out.person_index.size(), J, std::move(cells), data.item_ids());
  return out;
}

DrawStore fit_irt_only(const CompleteCaseDataset& data, const SamplerConfig& config) {
  ModelSpec spec;
  spec.mode = MissingnessMode::Ignorable;
  return run_chains(data.data, spec, config, SweepKind::ResponseOnly);
}

}  // namespace misirt
