#include "misirt/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace misirt {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        field += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t k = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (k == s.size()) return false;
  for (; k < s.size(); ++k) {
    if (s[k] < '0' || s[k] > '9') return false;
  }
  return true;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(where + ": '" + s + "' is not a number");
  }
  return v;
}

double eap_or_nan(const PosteriorSummary& s, const std::string& name, double ParameterSummary::*field) {
  for (const auto& p : s.parameters) {
    if (p.name == name) return p.*field;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

bool has_parameter(const PosteriorSummary& s, const std::string& name) {
  for (const auto& p : s.parameters) {
    if (p.name == name) return true;
  }
  return false;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Dataset parse_dataset_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw DataError(source + ": empty file (expected a header row of item ids)");
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j].empty()) {
      throw DataError(source + ": header column " + std::to_string(j + 1) + " has an empty item id");
    }
  }
  const std::size_t J = header.size();
  std::vector<Response> cells;
  std::size_t N = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != J) {
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " + std::to_string(J));
    }
    for (std::size_t j = 0; j < J; ++j) {
      const std::string& f = fields[j];
      const std::string where = source + ": row " + std::to_string(line_no) + ", column " +
                                std::to_string(j + 1) + " (" + header[j] + ")";
      if (f == "0") {
        cells.push_back(Response::Incorrect);
      } else if (f == "1") {
        cells.push_back(Response::Correct);
      } else if (f == "NA") {
        cells.push_back(Response::Missing);
      } else if (is_integer(f)) {
        throw DataError(where + ": value '" + f +
                        "' is not dichotomous; recode polytomous items so that only full credit "
                        "counts as correct (1) and everything else as incorrect (0)");
      } else {
        throw DataError(where + ": invalid value '" + f + "' (expected 0, 1 or NA)");
      }
    }
    ++N;
  }
  if (N == 0) throw DataError(source + ": no data rows");
  return Dataset(N, J, std::move(cells), header);
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_dataset_csv(in, path.string());
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const auto& ids = data.item_ids();
  for (std::size_t j = 0; j < ids.size(); ++j) out << (j ? "," : "") << csv_field(ids[j]);
  out << '\n';
  for (std::size_t i = 0; i < data.n_persons(); ++i) {
    for (std::size_t j = 0; j < data.n_items(); ++j) {
      if (j) out << ',';
      switch (data.response(i, j)) {
        case Response::Incorrect: out << '0'; break;
        case Response::Correct: out << '1'; break;
        case Response::Missing: out << "NA"; break;
      }
    }
    out << '\n';
  }
}

void write_draws_csv(std::ostream& out, const ChainDraws& draws) {
  out << "iteration";
  for (const auto& n : draws.names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < draws.rows(); ++r) {
    out << draws.iterations[r];
    for (double v : draws.row(r)) out << ',' << format_double(v);
    out << '\n';
  }
}

DrawTable read_draws_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open draws file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty draws file");
  auto header = split_csv_line(line);
  std::size_t skip = (!header.empty() && header[0] == "iteration") ? 1 : 0;
  DrawTable t;
  t.names.assign(header.begin() + static_cast<std::ptrdiff_t>(skip), header.end());
  t.columns.resize(t.names.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(line_no) + " has the wrong field count");
    }
    for (std::size_t c = 0; c < t.names.size(); ++c) {
      t.columns[c].push_back(parse_double(fields[c + skip], path.string() + ": row " +
                                                              std::to_string(line_no)));
    }
  }
  return t;
}

void write_summary_csv(std::ostream& out, const PosteriorSummary& summary) {
  out << "parameter,eap,post_sd,mcse,rhat\n";
  for (const auto& p : summary.parameters) {
    out << p.name << ',' << format_double(p.eap) << ',' << format_double(p.post_sd) << ','
        << format_double(p.mcse) << ',' << format_double(p.rhat) << '\n';
  }
}

void write_item_table_csv(std::ostream& out, const PosteriorSummary& summary,
                          const std::vector<std::string>& item_ids) {
  const bool with_zeta = has_parameter(summary, "zeta.1");
  std::vector<std::string> blocks{"a", "b"};
  if (with_zeta) blocks.emplace_back("zeta");
  out << "item";
  for (const auto& b : blocks) out << ',' << b << "_eap," << b << "_sd," << b << "_mcse";
  out << '\n';
  for (std::size_t j = 0; j < item_ids.size(); ++j) {
    out << csv_field(item_ids[j]);
    for (const auto& b : blocks) {
      const std::string name = b + "." + std::to_string(j + 1);
      out << ',' << format_double(eap_or_nan(summary, name, &ParameterSummary::eap)) << ','
          << format_double(eap_or_nan(summary, name, &ParameterSummary::post_sd)) << ','
          << format_double(eap_or_nan(summary, name, &ParameterSummary::mcse));
    }
    out << '\n';
  }
}

void write_structural_csv(std::ostream& out, const PosteriorSummary& summary) {
  out << "parameter,eap,post_sd,mcse,rhat\n";
  for (const char* name : {"gamma0", "gamma1", "gamma2", "sigma.theta.tau", "sigma2.tau"}) {
    if (!has_parameter(summary, name)) continue;
    const auto& p = summary.at(name);
    out << p.name << ',' << format_double(p.eap) << ',' << format_double(p.post_sd) << ','
        << format_double(p.mcse) << ',' << format_double(p.rhat) << '\n';
  }
}

void write_rhat_trace_csv(std::ostream& out, const RhatReport& report) {
  out << "iteration,parameter,rhat\n";
  for (const auto& t : report.trace) {
    out << t.iteration << ',' << t.parameter << ',' << format_double(t.rhat) << '\n';
  }
}

void write_recovery_csv(std::ostream& out, const std::vector<RecoveryReport>& reports) {
  out << "design,method,missing_proportion,replications,parameter,bias,mae\n";
  for (const auto& r : reports) {
    for (const auto& b : r.blocks) {
      out << r.design << ',' << r.method << ',' << format_double(r.mean_missing_proportion) << ','
          << r.replications << ',' << b.parameter << ',';
      if (b.available) {
        out << format_double(b.bias) << ',' << format_double(b.mae);
      } else {
        out << "-,-";
      }
      out << '\n';
    }
  }
}

void write_selection_study_csv(std::ostream& out, const std::vector<SelectionStudyRow>& rows) {
  out << "replication,delta_dic,delta_lpml,preferred,error\n";
  for (const auto& r : rows) {
    out << r.index + 1 << ',' << format_double(r.delta_dic) << ',' << format_double(r.delta_lpml)
        << ',' << r.preferred << ',' << csv_field(r.error) << '\n';
  }
}

void write_mml_csv(std::ostream& out, const MmlEstimate& estimate,
                   const std::vector<std::string>& item_ids) {
  out << "item,a_hat,se_a,b_hat,se_b,zeta_hat,se_zeta\n";
  for (std::size_t j = 0; j < estimate.a_hat.size(); ++j) {
    out << csv_field(j < item_ids.size() ? item_ids[j] : std::to_string(j + 1)) << ','
        << format_double(estimate.a_hat[j]) << ',' << format_double(estimate.se_a(j)) << ','
        << format_double(estimate.b_hat[j]) << ',' << format_double(estimate.se_b(j)) << ','
        << format_double(estimate.zeta_hat[j]) << ',' << format_double(estimate.se_zeta(j)) << '\n';
  }
}

nlohmann::json to_json(const SelectionReport& r) {
  return {{"dic", r.dic},         {"p_d", r.p_d},           {"d_hat", r.d_hat},
          {"d_bar", r.d_bar},     {"lpml", r.lpml},         {"n_draws", r.n_draws},
          {"n_persons", r.n_persons}, {"n_items", r.n_items}, {"model_mode", r.model_mode}};
}

SelectionReport selection_from_json(const nlohmann::json& j) {
  SelectionReport r;
  r.dic = j.at("dic").get<double>();
  r.p_d = j.at("p_d").get<double>();
  r.d_hat = j.at("d_hat").get<double>();
  r.d_bar = j.at("d_bar").get<double>();
  r.lpml = j.at("lpml").get<double>();
  r.n_draws = j.at("n_draws").get<std::size_t>();
  r.n_persons = j.at("n_persons").get<std::size_t>();
  r.n_items = j.at("n_items").get<std::size_t>();
  r.model_mode = j.at("model_mode").get<std::string>();
  return r;
}

nlohmann::json to_json(const SamplerConfig& c) {
  const Priors& p = c.priors;
  return {
      {"n_iterations", c.n_iterations},
      {"burn_in", c.burn_in},
      {"thin", c.thin},
      {"n_chains", c.n_chains},
      {"seed", c.seed},
      {"proposal_var_s01", c.proposal_var_s01},
      {"proposal_var_s02", c.proposal_var_s02},
      {"store_person_draws", c.store_person_draws},
      {"overdispersed_starts", c.overdispersed_starts},
      {"jobs", c.jobs},
      {"rhat_checkpoint", c.rhat_checkpoint},
      {"priors",
       {{"a_mean", p.a_mean},
        {"a_var", p.a_var},
        {"b_mean", p.b_mean},
        {"b_var", p.b_var},
        {"zeta_mean", p.zeta_mean},
        {"zeta_var", p.zeta_var},
        {"gamma0_mean", p.gamma0_mean},
        {"gamma0_var", p.gamma0_var},
        {"gamma1_mean", p.gamma1_mean},
        {"gamma1_var", p.gamma1_var},
        {"gamma2_mean", p.gamma2_mean},
        {"gamma2_var", p.gamma2_var},
        {"sigma_theta_tau_upper", p.sigma_theta_tau_upper},
        {"sigma_tau_sq_shape", p.sigma_tau_sq_shape},
        {"sigma_tau_sq_scale", p.sigma_tau_sq_scale}}},
  };
}

SamplerConfig sampler_config_from_json(const nlohmann::json& j) {
  SamplerConfig c;
  Priors& p = c.priors;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_iterations") c.n_iterations = value.get<std::size_t>();
    else if (key == "burn_in") c.burn_in = value.get<std::size_t>();
    else if (key == "thin") c.thin = value.get<std::size_t>();
    else if (key == "n_chains") c.n_chains = value.get<std::size_t>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "proposal_var_s01") c.proposal_var_s01 = value.get<double>();
    else if (key == "proposal_var_s02") c.proposal_var_s02 = value.get<double>();
    else if (key == "store_person_draws") c.store_person_draws = value.get<bool>();
    else if (key == "overdispersed_starts") c.overdispersed_starts = value.get<bool>();
    else if (key == "jobs") c.jobs = value.get<std::size_t>();
    else if (key == "rhat_checkpoint") c.rhat_checkpoint = value.get<std::size_t>();
    else if (key == "priors") {
      for (const auto& [pk, pv] : value.items()) {
        const double v = pv.get<double>();
        if (pk == "a_mean") p.a_mean = v;
        else if (pk == "a_var") p.a_var = v;
        else if (pk == "b_mean") p.b_mean = v;
        else if (pk == "b_var") p.b_var = v;
        else if (pk == "zeta_mean") p.zeta_mean = v;
        else if (pk == "zeta_var") p.zeta_var = v;
        else if (pk == "gamma0_mean") p.gamma0_mean = v;
        else if (pk == "gamma0_var") p.gamma0_var = v;
        else if (pk == "gamma1_mean") p.gamma1_mean = v;
        else if (pk == "gamma1_var") p.gamma1_var = v;
        else if (pk == "gamma2_mean") p.gamma2_mean = v;
        else if (pk == "gamma2_var") p.gamma2_var = v;
        else if (pk == "sigma_theta_tau_upper") p.sigma_theta_tau_upper = v;
        else if (pk == "sigma_tau_sq_shape") p.sigma_tau_sq_shape = v;
        else if (pk == "sigma_tau_sq_scale") p.sigma_tau_sq_scale = v;
        else throw std::invalid_argument("unknown prior setting '" + pk + "'");
      }
    } else {
      throw std::invalid_argument("unknown sampler setting '" + key + "'");
    }
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const SimTruth& t) {
  return {{"a", t.items.a},
          {"b", t.items.b},
          {"zeta", t.items.zeta},
          {"theta", t.persons.theta},
          {"tau", t.persons.tau},
          {"gamma0", t.structural.gamma0},
          {"gamma1", t.structural.gamma1},
          {"gamma2", t.structural.gamma2},
          {"sigma_theta_tau", t.structural.sigma_theta_tau},
          {"sigma_tau_sq", t.structural.sigma_tau_sq},
          {"missing_proportion", t.missing_proportion}};
}

nlohmann::json to_json(const SimDesign& d) {
  nlohmann::json j = {{"n_persons", d.n_persons},
                      {"n_items", d.n_items},
                      {"rho", d.rho},
                      {"gamma0", d.gamma.g0},
                      {"gamma1", d.gamma.g1},
                      {"gamma2", d.gamma.g2},
                      {"replications", d.replications},
                      {"seed", d.seed},
                      {"label", d.label()}};
  if (d.column != 0) {
    j["design"] = d.column;
    j["expected_missing_proportion"] = d.expected_missing_proportion();
  }
  return j;
}

nlohmann::json to_json(const ModelComparison& c) {
  return {{"delta_dic", c.delta_dic}, {"delta_lpml", c.delta_lpml}, {"preferred", c.preferred}};
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed JSON: " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace misirt
