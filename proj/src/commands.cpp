#include "mdgp/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "mdgp/error.hpp"
#include "mdgp/exact_gp.hpp"
#include "mdgp/inference.hpp"
#include "mdgp/predict.hpp"
#include "mdgp/simulate.hpp"
#include "mdgp/warnings.hpp"

namespace mdgp {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_json(const std::filesystem::path &path, const json &j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

Column numeric(const std::string &name, const Eigen::VectorXd &v) {
  return {name, ColumnKind::Continuous,
          std::vector<double>(v.data(), v.data() + v.size()), {}};
}

json theta_json(const ThetaSpec &t) {
  return {{"alpha", t.magnitude}, {"ell", t.lengthscale}, {"sigma", t.sigma}};
}

/// Truth of the simulated design on the original scale of y.
ThetaSpec experiment1_theta() {
  return {{10.0, 10.0}, {{2.0}, {1.0}}, 5.0};
}

double response_sd(const PreparedData &prep) {
  return prep.scaling.has(prep.response_name)
             ? prep.scaling.scaling(prep.response_name).sd
             : 1.0;
}

/// Original-scale hyperparameters to the standardized model scale.
HyperParams standardize_theta(const ThetaSpec &spec, const PreparedData &prep) {
  const auto &expr = prep.expr;
  HyperParams theta = HyperParams::unit(expr);
  if (spec.magnitude.size() != expr.num_terms() ||
      spec.lengthscale.size() != expr.num_terms())
    throw ConfigError("compare.theta needs one alpha and ell entry per term");
  const double sd_y = response_sd(prep);
  for (std::size_t j = 0; j < expr.num_terms(); ++j) {
    const auto &term = expr.term(j);
    if (spec.lengthscale[j].size() != term.continuous.size())
      throw ConfigError("compare.theta.ell[" + std::to_string(j) +
                        "] needs one value per gp() factor");
    theta.magnitude[j] = spec.magnitude[j] / sd_y;
    for (std::size_t q = 0; q < term.continuous.size(); ++q) {
      const auto &name = expr.space().name(term.continuous[q].dim);
      const double sd = prep.scaling.has(name) ? prep.scaling.scaling(name).sd : 1.0;
      theta.lengthscale[j][q] = spec.lengthscale[j][q] / sd;
    }
  }
  theta.obs.sigma = spec.sigma / sd_y;
  theta.validate(expr);
  return theta;
}

/// mean_p E[log N(y_p | f_p, sigma^2)] for f_p ~ N(mu_p, v_p).
double expected_gaussian_loglik(const Eigen::VectorXd &y, const Eigen::VectorXd &mu,
                                const Eigen::VectorXd &var, double sigma) {
  const double s2 = sigma * sigma;
  double total = 0.0;
  for (Eigen::Index p = 0; p < y.size(); ++p) {
    const double r = y(p) - mu(p);
    total += -0.5 * std::log(2.0 * M_PI * s2) - 0.5 * r * r / s2 -
             0.5 * var(p) / s2;
  }
  return total / static_cast<double>(y.size());
}

/// One draw from N(mean, cov) through a clipped eigendecomposition.
Eigen::MatrixXd mvn_sqrt(const Eigen::MatrixXd &cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

struct TestSet {
  Eigen::MatrixXd inputs;
  ResponseData response;
};

TestSet load_test(const RunConfig &config, const PreparedData &prep,
                  const LevelMap &levels) {
  if (config.test_data.empty()) throw ConfigError("'test_data' is required");
  const auto cols = formula_columns(config.formula);
  auto specs = cols.covariates;
  specs.push_back({cols.response, ColumnKind::Continuous});
  const Dataset raw = load_csv(config.test_data, specs, levels);
  return {prepare_inputs(prep.expr, prep.scaling, raw),
          prepare_response(config.likelihood, cols.response, config.trials,
                           prep.scaling, raw)};
}

void require_gaussian(const RunConfig &config, const char *what) {
  if (config.likelihood != Likelihood::Gaussian)
    throw ConfigError(std::string(what) + " supports the gaussian likelihood only");
}

/// Sampled (xi, theta) for the Gaussian model with xi integrated out during
/// HMC and drawn afterwards from its conditional.
PosteriorDraws marginalized_draws(std::shared_ptr<const FeatureMap> features,
                                  const PreparedData &prep,
                                  const RunConfig &config) {
  const MarginalizedApproxPosterior target(features, prep.response.values,
                                           config.priors);
  PosteriorDraws theta_draws = hmc_sample(target, config.sampler);
  const std::size_t M = features->cols();
  PosteriorDraws out;
  out.names = draw_names(prep.expr, M, Likelihood::Gaussian);
  out.values.resize(theta_draws.values.rows(), static_cast<Eigen::Index>(out.names.size()));
  std::mt19937_64 rng(config.sampler.seed ^ 0x9e3779b97f4a7c15ULL);
  for (Eigen::Index s = 0; s < theta_draws.unconstrained.rows(); ++s) {
    Draw d;
    d.theta = target.unpack(theta_draws.unconstrained.row(s).transpose());
    d.xi = target.draw_xi(d.theta, rng);
    out.values.row(s) = encode_draw(d, Likelihood::Gaussian).transpose();
  }
  out.unconstrained = std::move(theta_draws.unconstrained);
  out.chains = theta_draws.chains;
  out.draws_per_chain = theta_draws.draws_per_chain;
  out.stats = std::move(theta_draws.stats);
  if (out.chains >= 2 && out.draws_per_chain >= 100)
    out.diagnostics = compute_diagnostics(out.values, out.chains);
  out.diagnostics.divergences = out.divergences();
  return out;
}

PosteriorDraws sample_approx(std::shared_ptr<const FeatureMap> features,
                             const PreparedData &prep, const RunConfig &config) {
  if (config.marginalized) {
    require_gaussian(config, "marginalized mode");
    return marginalized_draws(std::move(features), prep, config);
  }
  const ApproxPosterior target(std::move(features), prep.response,
                               config.likelihood, config.priors);
  return hmc_sample(target, config.sampler);
}

long long total_leapfrogs(const PosteriorDraws &draws) {
  long long n = 0;
  for (const auto &s : draws.stats) n += s.total_leapfrogs;
  return n;
}

}  // namespace

void run_simulate(const SimulateOptions &options) {
  const std::filesystem::path dir(options.output_dir);
  std::filesystem::create_directories(dir);
  json config;
  if (options.experiment == "exp1") {
    const auto e = simulate_experiment1(options.n_train, options.n_test, options.seed);
    write_csv((dir / "train.csv").string(), e.train);
    write_csv((dir / "test.csv").string(), e.test);
    const auto n_tr = e.f_train.size();
    const auto n_te = e.f_test.size();
    Eigen::VectorXd split(n_tr + n_te), f(n_tr + n_te), f1(n_tr + n_te),
        f2(n_tr + n_te);
    split << Eigen::VectorXd::Zero(n_tr), Eigen::VectorXd::Ones(n_te);
    f << e.f_train, e.f_test;
    f1 << e.f1_train, e.f1_test;
    f2 << e.f2_train, e.f2_test;
    Column set{"set", ColumnKind::Categorical, {}, {"train", "test"}};
    set.values.assign(split.data(), split.data() + split.size());
    write_csv((dir / "truth.csv").string(),
              Dataset({set, numeric("f", f), numeric("f1", f1), numeric("f2", f2)}));
    config = {{"formula", kExperiment1Formula},
              {"likelihood", "gaussian"},
              {"data", "train.csv"},
              {"test_data", "test.csv"},
              {"compare", {{"theta", theta_json(experiment1_theta())}}}};
  } else if (options.experiment == "beta_binomial") {
    const auto train = simulate_beta_binomial(options.per_group, options.seed);
    const auto test = simulate_beta_binomial(
        std::max(options.per_group / 4, 1), options.seed + 0x5bd1e995ULL);
    write_csv((dir / "train.csv").string(), train.data);
    write_csv((dir / "test.csv").string(), test.data);
    write_csv((dir / "truth.csv").string(),
              Dataset({train.data.column("x"), train.data.column("group"),
                       numeric("f", train.f), numeric("eta", train.eta)}));
    config = {{"formula", kBetaBinomialFormula},
              {"likelihood", "beta_binomial"},
              {"data", "train.csv"},
              {"test_data", "test.csv"},
              {"trials", "trials"}};
  } else {
    throw ConfigError("unknown experiment '" + options.experiment +
                      "' (expected exp1 or beta_binomial)");
  }
  config["sampler"] = {{"seed", options.seed}};
  write_json(dir / "config.json", config);
}

FitResult fit_model(const RunConfig &config, const Dataset &raw) {
  config.validate();
  const PreparedData prep = prepare_training(config, raw);
  auto features = std::make_shared<const FeatureMap>(
      build_feature_map(prep.inputs, prep.expr, config.basis));
  const auto start = Clock::now();
  PosteriorDraws draws = sample_approx(features, prep, config);
  FitResult out;
  out.seconds = seconds_since(start);
  out.model.config = config;
  out.model.expr = prep.expr;
  out.model.scaling = prep.scaling;
  out.model.basis = features->basis();
  out.model.response = prep.response_name;
  out.model.draws = std::move(draws);
  out.max_rhat = out.model.draws.diagnostics.mean.empty()
                     ? std::nan("")
                     : out.model.draws.diagnostics.max_rhat();
  return out;
}

FitResult run_fit(const RunConfig &config, bool dump_features) {
  const Dataset raw = load_training_data(config);
  FitResult fit = fit_model(config, raw);
  const std::filesystem::path dir(config.output_dir);
  save_model(dir.string(), fit.model);
  json diag = diagnostics_json(fit.model.draws);
  diag["seconds"] = fit.seconds;
  write_json(dir / "diagnostics.json", diag);
  write_json(dir / "config.json", config_to_json(config));
  if (dump_features) {
    const PreparedData prep = prepare_training(config, raw);
    const Eigen::MatrixXd psi = fit.model.basis.evaluate(prep.inputs);
    std::vector<Column> cols;
    for (Eigen::Index m = 0; m < psi.cols(); ++m)
      cols.push_back(numeric("psi_" + std::to_string(m + 1), psi.col(m)));
    write_csv((dir / "features.csv").string(), Dataset(std::move(cols)));
  }
  if (std::isfinite(fit.max_rhat) && fit.max_rhat > 1.05)
    warn("max R-hat " + std::to_string(fit.max_rhat) + " exceeds 1.05");
  return fit;
}

PredictResult run_predict(const PredictOptions &options) {
  const FittedModel model = load_model(options.model_dir);
  const Likelihood lik = model.config.likelihood;
  const auto header = csv_header(options.data);
  auto has_column = [&](const std::string &name) {
    return std::find(header.begin(), header.end(), name) != header.end();
  };
  auto specs = model.covariate_specs();
  const bool has_response = has_column(model.response);
  if (has_response) specs.push_back({model.response, ColumnKind::Continuous});
  if (lik == Likelihood::BetaBinomial) {
    if (!has_column(model.config.trials))
      throw DataError("beta-binomial prediction needs the '" +
                      model.config.trials + "' column");
    specs.push_back({model.config.trials, ColumnKind::Continuous});
  }
  const Dataset raw = load_csv(options.data, specs, model.levels());
  const Eigen::MatrixXd points = prepare_inputs(model.expr, model.scaling, raw);

  PredictResult result;
  result.points = static_cast<std::size_t>(points.rows());
  result.draws = model.draws.size();
  result.out_of_domain = model.basis.check_domain(points);

  const auto draws = decode_draws(model.expr, model.basis.num_columns(), lik,
                                  model.draws);
  Eigen::MatrixXd total, predictive;
  std::vector<Eigen::MatrixXd> components;
  std::optional<std::vector<int>> trials;
  {
    WarningCapture quiet;  // already reported by check_domain
    total = draws_f_at(model.basis, points, draws);
    for (std::size_t j = 0; j < model.expr.num_terms(); ++j)
      components.push_back(draws_component_at(model.basis, points, j, draws));
  }
  const auto obs = obs_params(draws);
  if (lik == Likelihood::BetaBinomial) {
    trials.emplace();
    for (double t : raw.column(model.config.trials).values) {
      if (t < 0 || std::round(t) != t)
        throw DataError("trials must be non-negative integers");
      trials->push_back(static_cast<int>(t));
    }
  }
  predictive = draws_predictive(lik, total, obs, trials, options.seed);

  double shift = 0.0, scale = 1.0;
  if (model.scaling.has(model.response)) {
    shift = model.scaling.scaling(model.response).mean;
    scale = model.scaling.scaling(model.response).sd;
  }
  if (has_response) {
    const ResponseData test = prepare_response(lik, model.response,
                                               model.config.trials,
                                               model.scaling, raw);
    const auto mode = options.log_mean_exp ? MlpdMode::LogMeanExp : MlpdMode::MeanLog;
    result.mlpd = mlpd(lik, test, total, obs, mode) - std::log(scale);
  }

  struct Quantity {
    std::string name;
    const Eigen::MatrixXd *values;
    double shift;
  };
  std::vector<Quantity> quantities{{"total", &total, shift}};
  std::vector<std::string> component_names;
  for (std::size_t j = 0; j < components.size(); ++j)
    component_names.push_back("component_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < components.size(); ++j)
    quantities.push_back({component_names[j], &components[j], 0.0});
  quantities.push_back({"predictive", &predictive, shift});
  // Beta-binomial counts are not standardized.
  if (lik == Likelihood::BetaBinomial) quantities.back().shift = 0.0;

  const std::filesystem::path dir(options.output_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "predictions.csv");
    if (!out) throw DataError("cannot write predictions.csv in '" + dir.string() + "'");
    out.precision(17);
    out << "draw,point_id,quantity,value\n";
    for (std::size_t s = 0; s < result.draws; ++s)
      for (std::size_t p = 0; p < result.points; ++p)
        for (const auto &q : quantities) {
          const bool counts = lik == Likelihood::BetaBinomial && q.name == "predictive";
          const double v = (*q.values)(static_cast<Eigen::Index>(s),
                                       static_cast<Eigen::Index>(p));
          out << s + 1 << ',' << p + 1 << ',' << q.name << ','
              << (counts ? v : q.shift + scale * v) << '\n';
        }
  }
  {
    std::ofstream out(dir / "summary.csv");
    if (!out) throw DataError("cannot write summary.csv in '" + dir.string() + "'");
    out.precision(17);
    out << "point_id,quantity,mean,sd,lower,upper\n";
    for (std::size_t p = 0; p < result.points; ++p)
      for (const auto &q : quantities) {
        const bool counts = lik == Likelihood::BetaBinomial && q.name == "predictive";
        const Eigen::VectorXd col = q.values->col(static_cast<Eigen::Index>(p));
        const Eigen::VectorXd v =
            counts ? col : (q.shift + scale * col.array()).matrix();
        const double mean = v.mean();
        const double sd = v.size() > 1
                              ? std::sqrt((v.array() - mean).square().sum() /
                                          static_cast<double>(v.size() - 1))
                              : 0.0;
        out << p + 1 << ',' << q.name << ',' << mean << ',' << sd << ','
            << mean - 2.0 * sd << ',' << mean + 2.0 * sd << '\n';
      }
  }
  json report = {{"points", result.points},
                 {"draws", result.draws},
                 {"out_of_domain", result.out_of_domain},
                 {"mlpd_mode", options.log_mean_exp ? "log_mean_exp" : "mean_log"}};
  report["mlpd"] = result.mlpd ? json(*result.mlpd) : json(nullptr);
  write_json(dir / "report.json", report);
  return result;
}

std::vector<CompareRow> run_compare(const RunConfig &config, bool write) {
  config.validate();
  require_gaussian(config, "compare");
  const Dataset raw = load_training_data(config);
  const PreparedData prep = prepare_training(config, raw);
  const TestSet test = load_test(config, prep, level_map(raw));
  const double log_sd_y = std::log(response_sd(prep));
  const Eigen::VectorXd &y = prep.response.values;
  const Eigen::VectorXd &y_test = test.response.values;
  const auto P = y_test.size();

  std::optional<HyperParams> theta;
  double exact_mlpd = 0.0;
  double exact_seconds = 0.0;
  {
    const auto start = Clock::now();
    if (config.compare.oracle == Oracle::Fixed) {
      if (!config.compare.theta)
        throw ConfigError("compare.oracle 'fixed' needs compare.theta");
      theta = standardize_theta(*config.compare.theta, prep);
      const Eigen::MatrixXd K = kernel_matrix(prep.expr, *theta, prep.inputs, prep.inputs);
      const auto post = exact_posterior_f(K, theta->obs.sigma, y);
      const auto pred = exact_predict(
          kernel_matrix(prep.expr, *theta, test.inputs, prep.inputs),
          kernel_matrix(prep.expr, *theta, test.inputs, test.inputs), post.ky, y);
      exact_mlpd = expected_gaussian_loglik(y_test, pred.mean, pred.cov.diagonal(),
                                            theta->obs.sigma) -
                   log_sd_y;
    } else {
      const ExactMarginalPosterior target(prep.expr, prep.inputs, y, config.priors);
      const PosteriorDraws d = hmc_sample(target, config.sampler);
      const auto S = static_cast<Eigen::Index>(d.size());
      Eigen::MatrixXd f_draws(S, P);
      std::vector<ObsParams> obs;
      std::mt19937_64 rng(config.sampler.seed ^ 0x2545f4914f6cdd1dULL);
      std::normal_distribution<double> normal;
      for (Eigen::Index s = 0; s < S; ++s) {
        const HyperParams th = target.unpack(d.unconstrained.row(s).transpose());
        const Eigen::MatrixXd K = kernel_matrix(prep.expr, th, prep.inputs, prep.inputs);
        const auto post = exact_posterior_f(K, th.obs.sigma, y);
        const auto pred = exact_predict(
            kernel_matrix(prep.expr, th, test.inputs, prep.inputs),
            kernel_matrix(prep.expr, th, test.inputs, test.inputs), post.ky, y);
        Eigen::VectorXd z(P);
        for (Eigen::Index p = 0; p < P; ++p) z(p) = normal(rng);
        f_draws.row(s) = (pred.mean + mvn_sqrt(pred.cov) * z).transpose();
        obs.push_back(th.obs);
      }
      exact_mlpd = mlpd(Likelihood::Gaussian, test.response, f_draws, obs) - log_sd_y;
    }
    exact_seconds = seconds_since(start);
  }

  std::vector<CompareRow> rows;
  for (int B : config.compare.basis_sizes) {
    RunConfig c = config;
    c.basis.num_basis = B;
    auto features = std::make_shared<const FeatureMap>(
        build_feature_map(prep.inputs, prep.expr, c.basis));
    CompareRow row;
    row.B = B;
    row.M = static_cast<std::size_t>(features->cols());
    row.mlpd_exact = exact_mlpd;
    row.seconds_exact = exact_seconds;
    const auto start = Clock::now();
    const Eigen::MatrixXd test_eval = [&] {
      WarningCapture quiet;
      return features->basis().evaluate(test.inputs);
    }();
    if (theta) {
      const Eigen::VectorXd sqrt_delta = features->deltas(*theta).cwiseSqrt();
      const Eigen::MatrixXd psi = features->evaluation() * sqrt_delta.asDiagonal();
      const Eigen::MatrixXd psi_test = test_eval * sqrt_delta.asDiagonal();
      const double s2 = theta->obs.sigma * theta->obs.sigma;
      Eigen::MatrixXd Z = psi.transpose() * psi;
      Z.diagonal().array() += s2;
      const SpdFactor zf = factorize_spd(Z);
      const Eigen::VectorXd mean_xi = zf.llt.solve(psi.transpose() * y);
      const Eigen::MatrixXd half = zf.llt.matrixL().solve(psi_test.transpose());
      const Eigen::VectorXd var = s2 * half.colwise().squaredNorm().transpose();
      row.mlpd_approx = expected_gaussian_loglik(y_test, psi_test * mean_xi, var,
                                                 theta->obs.sigma) -
                        log_sd_y;
      const Eigen::MatrixXd K = kernel_matrix(prep.expr, *theta, prep.inputs, prep.inputs);
      row.kernel_error = (approx_kernel_matrix(*features, *theta) - K).cwiseAbs().maxCoeff();
    } else {
      const PosteriorDraws d = sample_approx(features, prep, c);
      const auto draws = decode_draws(prep.expr, row.M, Likelihood::Gaussian, d);
      Eigen::MatrixXd f_draws;
      {
        WarningCapture quiet;
        f_draws = draws_f_at(features->basis(), test.inputs, draws);
      }
      row.mlpd_approx =
          mlpd(Likelihood::Gaussian, test.response, f_draws, obs_params(draws)) -
          log_sd_y;
      // Kernel error at the posterior mean of the hyperparameters.
      HyperParams mean_theta = HyperParams::unit(prep.expr);
      for (std::size_t j = 0; j < prep.expr.num_terms(); ++j) {
        mean_theta.magnitude[j] = 0.0;
        for (auto &l : mean_theta.lengthscale[j]) l = 0.0;
      }
      for (const auto &dr : draws)
        for (std::size_t j = 0; j < prep.expr.num_terms(); ++j) {
          mean_theta.magnitude[j] += dr.theta.magnitude[j] / static_cast<double>(draws.size());
          for (std::size_t q = 0; q < mean_theta.lengthscale[j].size(); ++q)
            mean_theta.lengthscale[j][q] +=
                dr.theta.lengthscale[j][q] / static_cast<double>(draws.size());
        }
      const Eigen::MatrixXd K =
          kernel_matrix(prep.expr, mean_theta, prep.inputs, prep.inputs);
      row.kernel_error =
          (approx_kernel_matrix(*features, mean_theta) - K).cwiseAbs().maxCoeff();
    }
    row.seconds_approx = seconds_since(start);
    row.gap = std::abs(row.mlpd_approx - row.mlpd_exact);
    rows.push_back(row);
  }

  if (write) {
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "compare.csv");
    if (!out) throw DataError("cannot write compare.csv in '" + dir.string() + "'");
    out.precision(10);
    out << "B,M,mlpd_approx,mlpd_exact,gap,kernel_max_abs_error,seconds_approx,"
           "seconds_exact\n";
    json table = json::array();
    for (const auto &r : rows) {
      out << r.B << ',' << r.M << ',' << r.mlpd_approx << ',' << r.mlpd_exact << ','
          << r.gap << ',' << r.kernel_error << ',' << r.seconds_approx << ','
          << r.seconds_exact << '\n';
      table.push_back({{"B", r.B},
                       {"M", r.M},
                       {"mlpd_approx", r.mlpd_approx},
                       {"mlpd_exact", r.mlpd_exact},
                       {"gap", r.gap},
                       {"kernel_max_abs_error", r.kernel_error},
                       {"seconds_approx", r.seconds_approx},
                       {"seconds_exact", r.seconds_exact}});
    }
    write_json(dir / "compare.json",
               {{"oracle", config.compare.oracle == Oracle::Fixed ? "fixed" : "hmc"},
                {"c", config.basis.scale},
                {"train_points", y.size()},
                {"test_points", P},
                {"rows", table}});
  }
  return rows;
}

std::vector<BenchRow> run_bench(const RunConfig &config, bool write) {
  config.validate();
  const auto &b = config.bench;
  RunConfig c = config;
  c.sampler.iterations = b.iterations;
  c.sampler.warmup = b.warmup;
  c.sampler.chains = b.chains;
  std::vector<BenchRow> rows;
  for (int B : b.basis_sizes)
    for (int n : b.sizes) {
      c.basis.num_basis = B;
      const int padded = (n + 5) / 6 * 6;
      const auto sim = simulate_experiment1(padded, 3, config.sampler.seed);
      std::vector<std::size_t> keep(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
      const PreparedData prep = prepare_training(c, sim.train.select(keep));
      auto features = std::make_shared<const FeatureMap>(
          build_feature_map(prep.inputs, prep.expr, c.basis));
      std::vector<std::pair<double, long long>> runs;
      BenchRow row;
      row.B = B;
      row.n = n;
      row.M = static_cast<std::size_t>(features->cols());
      for (int r = 0; r < b.repeats; ++r) {
        c.sampler.seed = config.sampler.seed + static_cast<std::uint64_t>(r);
        const auto start = Clock::now();
        const PosteriorDraws d = sample_approx(features, prep, c);
        runs.emplace_back(seconds_since(start), total_leapfrogs(d));
      }
      std::sort(runs.begin(), runs.end());
      row.seconds = runs[runs.size() / 2].first;
      row.leapfrogs = runs[runs.size() / 2].second;
      row.seconds_per_leapfrog =
          row.leapfrogs > 0 ? row.seconds / static_cast<double>(row.leapfrogs) : 0.0;
      rows.push_back(row);
    }
  if (write) {
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "bench.csv");
    if (!out) throw DataError("cannot write bench.csv in '" + dir.string() + "'");
    out.precision(10);
    out << "B,n,M,seconds,leapfrogs,seconds_per_leapfrog\n";
    for (const auto &r : rows)
      out << r.B << ',' << r.n << ',' << r.M << ',' << r.seconds << ','
          << r.leapfrogs << ',' << r.seconds_per_leapfrog << '\n';
  }
  return rows;
}

}  // namespace mdgp
