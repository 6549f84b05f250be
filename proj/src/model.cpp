#include "mdgp/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mdgp/error.hpp"
#include "mdgp/inference.hpp"
#include "mdgp/warnings.hpp"

namespace mdgp {

namespace {

using nlohmann::json;

std::vector<std::string> continuous_columns(const FormulaColumns &cols) {
  std::vector<std::string> out;
  for (const auto &c : cols.covariates)
    if (c.kind == ColumnKind::Continuous) out.push_back(c.name);
  return out;
}

json matrix_json(const Eigen::MatrixXd &M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(row);
  }
  return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception &e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

Dataset load_training_data(const RunConfig &config) {
  if (config.data.empty()) throw ConfigError("'data' is required");
  const auto cols = formula_columns(config.formula);
  std::vector<ColumnSpec> specs = cols.covariates;
  specs.push_back({cols.response, ColumnKind::Continuous});
  if (config.likelihood == Likelihood::BetaBinomial)
    specs.push_back({config.trials, ColumnKind::Continuous});
  return load_csv(config.data, specs);
}

PreparedData prepare_training(const RunConfig &config, const Dataset &raw) {
  const auto cols = formula_columns(config.formula);
  std::vector<std::string> scaled = continuous_columns(cols);
  if (config.likelihood == Likelihood::Gaussian) scaled.push_back(cols.response);
  PreparedData out;
  out.scaling = Standardization::fit(raw, scaled);
  const Dataset std_data = out.scaling.apply(raw);
  const CovariateSpace space = make_space(std_data, cols.names());
  out.expr = parse_formula(config.formula, space, config.custom_matrices);
  out.inputs = std_data.covariates(space);
  out.response_name = cols.response;
  out.response = prepare_response(config.likelihood, cols.response,
                                  config.trials, out.scaling, raw);
  return out;
}

Eigen::MatrixXd prepare_inputs(const KernelExpr &expr,
                               const Standardization &scaling,
                               const Dataset &raw) {
  return scaling.apply(raw).covariates(expr.space());
}

ResponseData prepare_response(Likelihood likelihood, const std::string &response,
                              const std::string &trials,
                              const Standardization &scaling,
                              const Dataset &raw) {
  ResponseData out;
  out.values = scaling.apply(raw).vector(response);
  if (likelihood == Likelihood::BetaBinomial) {
    for (double t : raw.column(trials).values) {
      if (t < 0 || std::round(t) != t)
        throw DataError("trials must be non-negative integers");
      out.trials.push_back(static_cast<int>(t));
    }
  }
  validate_responses(likelihood, out);
  return out;
}

std::vector<ColumnSpec> FittedModel::covariate_specs() const {
  std::vector<ColumnSpec> out;
  const auto &space = expr.space();
  for (std::size_t d = 0; d < space.size(); ++d)
    out.push_back({space.name(d), space.is_continuous(d)
                                      ? ColumnKind::Continuous
                                      : ColumnKind::Categorical});
  return out;
}

LevelMap FittedModel::levels() const {
  LevelMap out;
  for (const auto &dim : expr.space().dims())
    if (const auto *c = std::get_if<CategoricalDim>(&dim)) out[c->name] = c->labels;
  return out;
}

void write_draws_csv(const std::string &path, const PosteriorDraws &draws) {
  Column chain{"chain", ColumnKind::Continuous, {}, {}};
  Column iter{"iteration", ColumnKind::Continuous, {}, {}};
  const std::size_t per = std::max<std::size_t>(draws.draws_per_chain, 1);
  for (std::size_t s = 0; s < draws.size(); ++s) {
    chain.values.push_back(static_cast<double>(s / per + 1));
    iter.values.push_back(static_cast<double>(s % per + 1));
  }
  std::vector<Column> cols{chain, iter};
  for (std::size_t k = 0; k < draws.names.size(); ++k) {
    Column c{draws.names[k], ColumnKind::Continuous, {}, {}};
    const auto col = draws.values.col(static_cast<Eigen::Index>(k));
    c.values.assign(col.data(), col.data() + col.size());
    cols.push_back(std::move(c));
  }
  write_csv(path, Dataset(std::move(cols)));
}

PosteriorDraws read_draws_csv(const std::string &path) {
  const Dataset d = load_numeric_csv(path);
  const auto &cols = d.columns();
  if (cols.size() < 3 || cols[0].name != "chain" || cols[1].name != "iteration")
    throw DataError("'" + path + "' is not a draws file");
  PosteriorDraws out;
  const auto S = static_cast<Eigen::Index>(d.rows());
  out.values.resize(S, static_cast<Eigen::Index>(cols.size() - 2));
  for (std::size_t k = 2; k < cols.size(); ++k) {
    out.names.push_back(cols[k].name);
    for (Eigen::Index s = 0; s < S; ++s)
      out.values(s, static_cast<Eigen::Index>(k - 2)) =
          cols[k].values[static_cast<std::size_t>(s)];
  }
  double chains = 0;
  for (double c : cols[0].values) chains = std::max(chains, c);
  out.chains = static_cast<std::size_t>(chains);
  out.draws_per_chain = out.chains ? d.rows() / out.chains : 0;
  return out;
}

nlohmann::json diagnostics_json(const PosteriorDraws &draws) {
  json params = json::array();
  const auto &dg = draws.diagnostics;
  for (std::size_t k = 0; k < draws.names.size() && k < dg.mean.size(); ++k)
    params.push_back({{"name", draws.names[k]},
                      {"mean", dg.mean[k]},
                      {"sd", dg.sd[k]},
                      {"rhat", number_or_null(dg.rhat[k])},
                      {"ess_bulk", number_or_null(dg.ess_bulk[k])},
                      {"mcse_mean", number_or_null(dg.mcse_mean[k])}});
  json chains = json::array();
  for (const auto &s : draws.stats) {
    double depth = 0.0;
    for (int t : s.treedepth) depth += t;
    if (!s.treedepth.empty()) depth /= static_cast<double>(s.treedepth.size());
    chains.push_back({{"step_size", s.step_size},
                      {"divergences", s.divergences()},
                      {"mean_treedepth", depth},
                      {"total_leapfrogs", s.total_leapfrogs},
                      {"seconds", s.seconds}});
  }
  return {{"parameters", params},
          {"chains", chains},
          {"divergences", draws.divergences()},
          {"max_rhat", dg.mean.empty() ? json(nullptr) : number_or_null(dg.max_rhat())},
          {"draws", draws.size()}};
}

void save_model(const std::string &dir, const FittedModel &model) {
  std::filesystem::create_directories(dir);
  const auto &space = model.expr.space();
  json covariates = json::array();
  for (std::size_t d = 0; d < space.size(); ++d) {
    const auto &dim = space.dim(d);
    if (const auto *c = std::get_if<ContinuousDim>(&dim))
      covariates.push_back({{"name", c->name},
                            {"kind", "continuous"},
                            {"min", c->observed_min},
                            {"max", c->observed_max}});
    else
      covariates.push_back({{"name", space.name(d)},
                            {"kind", "categorical"},
                            {"levels", std::get<CategoricalDim>(dim).labels}});
  }
  const auto &b = model.basis;
  json eigen = json::array();
  for (std::size_t j = 0; j < model.expr.num_terms(); ++j) {
    json term = json::array();
    for (std::size_t r = 0; r < model.expr.term(j).categorical.size(); ++r) {
      const auto &e = b.eigen(j, r);
      term.push_back({{"values", std::vector<double>(e.values.data(),
                                                     e.values.data() + e.values.size())},
                      {"vectors", matrix_json(e.vectors)},
                      {"retained", e.retained}});
    }
    eigen.push_back(term);
  }
  json j = {{"formula", format_formula(model.expr)},
            {"likelihood", likelihood_name(model.config.likelihood)},
            {"response", model.response},
            {"trials", model.config.trials},
            {"covariates", covariates},
            {"standardization", model.scaling.to_json()},
            {"basis",
             {{"B", b.config().num_basis},
              {"c", b.config().scale},
              {"boundaries", b.boundaries()},
              {"M", b.num_columns()},
              {"M_full", b.full_count()},
              {"eigen", eigen}}},
            {"config", config_to_json(model.config)},
            {"chains", model.draws.chains},
            {"draws_per_chain", model.draws.draws_per_chain}};
  std::ofstream out(std::filesystem::path(dir) / "model.json");
  if (!out) throw DataError("cannot write model.json in '" + dir + "'");
  out << j.dump(2) << '\n';
  write_draws_csv((std::filesystem::path(dir) / "draws.csv").string(), model.draws);
}

FittedModel load_model(const std::string &dir) {
  const auto root = std::filesystem::path(dir);
  const json j = read_json((root / "model.json").string());
  FittedModel m;
  try {
    m.config = config_from_json(j.at("config"));
    std::vector<DimSpec> dims;
    for (const auto &c : j.at("covariates")) {
      const auto name = c.at("name").get<std::string>();
      if (c.at("kind") == "continuous")
        dims.push_back(ContinuousDim{name, c.at("min").get<double>(),
                                     c.at("max").get<double>()});
      else
        dims.push_back(CategoricalDim{name, c.at("levels").get<std::vector<std::string>>()});
    }
    m.expr = parse_formula(j.at("formula").get<std::string>(),
                           CovariateSpace(std::move(dims)),
                           m.config.custom_matrices);
    m.scaling = Standardization::from_json(j.at("standardization"));
    m.response = j.at("response").get<std::string>();
    const auto &bj = j.at("basis");
    BasisConfig bc = m.config.basis;
    bc.num_basis = bj.at("B").get<int>();
    bc.scale = bj.at("c").get<double>();
    m.basis = BasisExpansion(
        m.expr, bc, bj.at("boundaries").get<std::vector<std::vector<double>>>());
    if (m.basis.num_columns() != bj.at("M").get<std::size_t>())
      throw DataError("model.json basis size does not match its formula");
    const auto &eigen = bj.at("eigen");
    for (std::size_t t = 0; t < m.expr.num_terms(); ++t)
      for (std::size_t r = 0; r < m.expr.term(t).categorical.size(); ++r) {
        const auto &stored = eigen.at(t).at(r).at("vectors");
        const auto &e = m.basis.eigen(t, r);
        for (Eigen::Index a = 0; a < e.vectors.rows(); ++a)
          for (Eigen::Index c = 0; c < e.vectors.cols(); ++c)
            if (std::abs(stored.at(static_cast<std::size_t>(a))
                             .at(static_cast<std::size_t>(c))
                             .get<double>() -
                         e.vectors(a, c)) > 1e-9)
              throw DataError("model.json eigenbasis does not match its formula");
      }
  } catch (const json::exception &e) {
    throw DataError(std::string("malformed model.json: ") + e.what());
  }
  m.draws = read_draws_csv((root / "draws.csv").string());
  const auto expected =
      draw_names(m.expr, m.basis.num_columns(), m.config.likelihood);
  if (m.draws.names != expected)
    throw DataError("draws.csv columns do not match the model");
  return m;
}

}  // namespace mdgp
