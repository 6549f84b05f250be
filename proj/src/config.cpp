#include "mdgp/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

using nlohmann::json;

void check_keys(const json &j, const std::string &where,
                const std::set<std::string> &allowed) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto &[key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json &j, const char *key, T &out, const std::string &where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError("'" + std::string(key) + "' in " + where +
                      " has the wrong type");
  }
}

std::string resolve(const std::string &path, const std::string &base) {
  if (path.empty() || base.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

Eigen::MatrixXd matrix_from_json(const json &j, const std::string &name) {
  if (!j.is_array() || j.empty())
    throw ConfigError("custom matrix '" + name + "' must be a non-empty array");
  const auto C = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd M(C, C);
  for (Eigen::Index r = 0; r < C; ++r) {
    const auto &row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != C)
      throw ConfigError("custom matrix '" + name + "' must be square");
    for (Eigen::Index c = 0; c < C; ++c) {
      if (!row.at(static_cast<std::size_t>(c)).is_number())
        throw ConfigError("custom matrix '" + name + "' must be numeric");
      M(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return M;
}

json matrix_to_json(const Eigen::MatrixXd &M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(row);
  }
  return out;
}

void read_priors(const json &j, PriorSpec &p) {
  check_keys(j, "priors",
             {"magnitude", "lengthscale", "noise_variance", "dispersion",
              "intercept"});
  if (j.contains("magnitude")) {
    const auto &m = j.at("magnitude");
    check_keys(m, "priors.magnitude", {"df", "scale"});
    read(m, "df", p.magnitude.df, "priors.magnitude");
    read(m, "scale", p.magnitude.scale, "priors.magnitude");
  }
  auto lognormal = [&](const char *key, LogNormalPrior &out) {
    if (!j.contains(key)) return;
    const std::string where = std::string("priors.") + key;
    check_keys(j.at(key), where, {"mu", "sigma"});
    read(j.at(key), "mu", out.mu, where);
    read(j.at(key), "sigma", out.sigma, where);
  };
  lognormal("lengthscale", p.lengthscale);
  lognormal("dispersion", p.dispersion);
  if (j.contains("noise_variance")) {
    const auto &m = j.at("noise_variance");
    check_keys(m, "priors.noise_variance", {"shape", "scale"});
    read(m, "shape", p.noise_variance.shape, "priors.noise_variance");
    read(m, "scale", p.noise_variance.scale, "priors.noise_variance");
  }
  if (j.contains("intercept")) {
    const auto &m = j.at("intercept");
    check_keys(m, "priors.intercept", {"mu", "sd"});
    read(m, "mu", p.intercept.mu, "priors.intercept");
    read(m, "sd", p.intercept.sd, "priors.intercept");
  }
}

void read_sampler(const json &j, SamplerConfig &s) {
  check_keys(j, "sampler",
             {"chains", "iterations", "warmup", "target_accept",
              "max_treedepth", "seed", "init_radius", "threads"});
  read(j, "chains", s.chains, "sampler");
  read(j, "iterations", s.iterations, "sampler");
  read(j, "warmup", s.warmup, "sampler");
  read(j, "target_accept", s.target_accept, "sampler");
  read(j, "max_treedepth", s.max_treedepth, "sampler");
  read(j, "seed", s.seed, "sampler");
  read(j, "init_radius", s.init_radius, "sampler");
  read(j, "threads", s.threads, "sampler");
}

ThetaSpec read_theta(const json &j) {
  check_keys(j, "compare.theta", {"alpha", "ell", "sigma"});
  ThetaSpec t;
  read(j, "alpha", t.magnitude, "compare.theta");
  read(j, "ell", t.lengthscale, "compare.theta");
  read(j, "sigma", t.sigma, "compare.theta");
  return t;
}

}  // namespace

void RunConfig::validate() const {
  if (formula.empty()) throw ConfigError("'formula' is required");
  try {
    basis.validate();
    priors.validate();
    sampler.validate();
  } catch (const InvalidArgument &e) {
    throw ConfigError(e.what());
  }
  for (int B : compare.basis_sizes)
    if (B < 1) throw ConfigError("compare.B entries must be >= 1");
  for (int B : bench.basis_sizes)
    if (B < 1) throw ConfigError("bench.B entries must be >= 1");
  for (int n : bench.sizes)
    if (n < 6) throw ConfigError("bench.n entries must be >= 6");
  if (bench.iterations <= bench.warmup || bench.warmup < 0)
    throw ConfigError("bench.iterations must exceed bench.warmup");
  if (bench.chains < 1 || bench.repeats < 1)
    throw ConfigError("bench.chains and bench.repeats must be >= 1");
  if (compare.theta && compare.theta->sigma <= 0.0)
    throw ConfigError("compare.theta.sigma must be positive");
}

RunConfig config_from_json(const json &j, const std::string &base_dir) {
  check_keys(j, "config",
             {"formula", "likelihood", "data", "test_data", "trials",
              "custom_matrices", "basis", "priors", "sampler", "marginalized",
              "output_dir", "compare", "bench"});
  RunConfig c;
  read(j, "formula", c.formula, "config");
  if (j.contains("likelihood")) {
    std::string name;
    read(j, "likelihood", name, "config");
    c.likelihood = parse_likelihood(name);
  }
  read(j, "data", c.data, "config");
  read(j, "test_data", c.test_data, "config");
  read(j, "trials", c.trials, "config");
  read(j, "marginalized", c.marginalized, "config");
  read(j, "output_dir", c.output_dir, "config");
  c.data = resolve(c.data, base_dir);
  c.test_data = resolve(c.test_data, base_dir);
  c.output_dir = resolve(c.output_dir, base_dir);
  if (j.contains("custom_matrices")) {
    const auto &m = j.at("custom_matrices");
    if (!m.is_object()) throw ConfigError("'custom_matrices' must be an object");
    for (const auto &[name, value] : m.items())
      c.custom_matrices[name] = matrix_from_json(value, name);
  }
  if (j.contains("basis")) {
    const auto &b = j.at("basis");
    check_keys(b, "basis", {"B", "c", "max_total"});
    read(b, "B", c.basis.num_basis, "basis");
    read(b, "c", c.basis.scale, "basis");
    read(b, "max_total", c.basis.max_basis_total, "basis");
  }
  if (j.contains("priors")) read_priors(j.at("priors"), c.priors);
  if (j.contains("sampler")) read_sampler(j.at("sampler"), c.sampler);
  if (j.contains("compare")) {
    const auto &m = j.at("compare");
    check_keys(m, "compare", {"B", "oracle", "theta"});
    read(m, "B", c.compare.basis_sizes, "compare");
    if (m.contains("oracle")) {
      std::string o;
      read(m, "oracle", o, "compare");
      if (o == "fixed")
        c.compare.oracle = Oracle::Fixed;
      else if (o == "hmc")
        c.compare.oracle = Oracle::Hmc;
      else
        throw ConfigError("compare.oracle must be 'fixed' or 'hmc'");
    }
    if (m.contains("theta")) c.compare.theta = read_theta(m.at("theta"));
  }
  if (j.contains("bench")) {
    const auto &m = j.at("bench");
    check_keys(m, "bench",
               {"n", "B", "iterations", "warmup", "chains", "repeats"});
    read(m, "n", c.bench.sizes, "bench");
    read(m, "B", c.bench.basis_sizes, "bench");
    read(m, "iterations", c.bench.iterations, "bench");
    read(m, "warmup", c.bench.warmup, "bench");
    read(m, "chains", c.bench.chains, "bench");
    read(m, "repeats", c.bench.repeats, "bench");
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const RunConfig &c) {
  json j;
  j["formula"] = c.formula;
  j["likelihood"] = likelihood_name(c.likelihood);
  j["data"] = c.data;
  if (!c.test_data.empty()) j["test_data"] = c.test_data;
  j["trials"] = c.trials;
  if (!c.custom_matrices.empty()) {
    json m = json::object();
    for (const auto &[name, M] : c.custom_matrices) m[name] = matrix_to_json(M);
    j["custom_matrices"] = m;
  }
  j["basis"] = {{"B", c.basis.num_basis},
                {"c", c.basis.scale},
                {"max_total", c.basis.max_basis_total}};
  const auto &p = c.priors;
  j["priors"] = {
      {"magnitude", {{"df", p.magnitude.df}, {"scale", p.magnitude.scale}}},
      {"lengthscale", {{"mu", p.lengthscale.mu}, {"sigma", p.lengthscale.sigma}}},
      {"noise_variance",
       {{"shape", p.noise_variance.shape}, {"scale", p.noise_variance.scale}}},
      {"dispersion", {{"mu", p.dispersion.mu}, {"sigma", p.dispersion.sigma}}},
      {"intercept", {{"mu", p.intercept.mu}, {"sd", p.intercept.sd}}}};
  const auto &s = c.sampler;
  j["sampler"] = {{"chains", s.chains},
                  {"iterations", s.iterations},
                  {"warmup", s.warmup},
                  {"target_accept", s.target_accept},
                  {"max_treedepth", s.max_treedepth},
                  {"seed", s.seed},
                  {"init_radius", s.init_radius},
                  {"threads", s.threads}};
  j["marginalized"] = c.marginalized;
  j["output_dir"] = c.output_dir;
  json cmp = {{"B", c.compare.basis_sizes},
              {"oracle", c.compare.oracle == Oracle::Fixed ? "fixed" : "hmc"}};
  if (c.compare.theta)
    cmp["theta"] = {{"alpha", c.compare.theta->magnitude},
                    {"ell", c.compare.theta->lengthscale},
                    {"sigma", c.compare.theta->sigma}};
  j["compare"] = cmp;
  j["bench"] = {{"n", c.bench.sizes},
                {"B", c.bench.basis_sizes},
                {"iterations", c.bench.iterations},
                {"warmup", c.bench.warmup},
                {"chains", c.bench.chains},
                {"repeats", c.bench.repeats}};
  return j;
}

RunConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  const auto base = std::filesystem::path(path).parent_path().string();
  return config_from_json(j, base);
}

std::vector<std::string> FormulaColumns::names() const {
  std::vector<std::string> out;
  for (const auto &c : covariates) out.push_back(c.name);
  return out;
}

FormulaColumns formula_columns(const std::string &formula) {
  static const std::regex kResponse(R"(^\s*([A-Za-z0-9_.]+)\s*~)");
  static const std::regex kFactor(
      R"(\b(gp|zs|cs|bin|cat)\s*\(\s*([A-Za-z0-9_.]+))");
  FormulaColumns out;
  std::smatch m;
  if (!std::regex_search(formula, m, kResponse))
    throw FormulaError("formula must start with 'response ~'");
  out.response = m[1];
  for (auto it = std::sregex_iterator(formula.begin(), formula.end(), kFactor);
       it != std::sregex_iterator(); ++it) {
    const std::string name = (*it)[2];
    const auto kind = (*it)[1] == "gp" ? ColumnKind::Continuous
                                       : ColumnKind::Categorical;
    auto found = std::find_if(out.covariates.begin(), out.covariates.end(),
                              [&](const ColumnSpec &c) { return c.name == name; });
    if (found == out.covariates.end()) {
      out.covariates.push_back({name, kind});
    } else if (found->kind != kind) {
      throw FormulaError("covariate '" + name +
                         "' is used as both continuous and categorical");
    }
  }
  if (out.covariates.empty())
    throw FormulaError("formula names no covariates");
  for (const auto &c : out.covariates)
    if (c.name == out.response)
      throw FormulaError("response '" + out.response + "' is also a covariate");
  return out;
}

}  // namespace mdgp
