#include "mdgp/inference.hpp"

#include <cmath>
#include <limits>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t num_kernel_params(const KernelExpr &expr) {
  return expr.num_terms() + expr.num_lengthscales();
}

std::size_t num_obs_params(Likelihood likelihood) {
  return likelihood == Likelihood::Gaussian ? 1 : 2;
}

HyperParams kernel_from_log(const KernelExpr &expr, const double *u) {
  std::vector<double> packed(num_kernel_params(expr));
  for (std::size_t i = 0; i < packed.size(); ++i) packed[i] = std::exp(u[i]);
  return HyperParams::unpack_kernel(expr, packed);
}

void kernel_to_log(const HyperParams &theta, double *u) {
  const auto packed = theta.pack_kernel();
  for (std::size_t i = 0; i < packed.size(); ++i) u[i] = std::log(packed[i]);
}

// Log prior over packed log alpha / log ell, adding derivatives into grad.
double kernel_log_prior(const KernelExpr &expr, const PriorSpec &priors,
                        const double *u, double *grad) {
  double lp = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < expr.num_terms(); ++j) {
    const auto a = log_prior_log_magnitude(priors.magnitude, u[k]);
    lp += a.value;
    grad[k] += a.derivative;
    ++k;
    for (std::size_t q = 0; q < expr.term(j).continuous.size(); ++q, ++k) {
      const auto l = log_prior_log_lengthscale(priors.lengthscale, u[k]);
      lp += l.value;
      grad[k] += l.derivative;
    }
  }
  return lp;
}

// Maps d/d log delta_m onto the packed log kernel parameters:
//   d log delta / d log alpha_j = 2,
//   d log delta / d log ell_{j,q} = 1 - ell^2 lambda_{b_q}.
void chain_log_delta(const BasisExpansion &basis, const HyperParams &theta,
                     const Eigen::VectorXd &dlogdelta, double *grad) {
  const auto &expr = basis.expr();
  std::size_t k = 0;
  for (std::size_t j = 0; j < expr.num_terms(); ++j) {
    const auto &range = basis.slice(j);
    const std::size_t Q = expr.term(j).continuous.size();
    double total = 0.0;
    for (std::size_t m = range.begin; m < range.end; ++m)
      total += dlogdelta(static_cast<Eigen::Index>(m));
    grad[k++] += 2.0 * total;
    for (std::size_t q = 0; q < Q; ++q, ++k) {
      const double l2 = theta.lengthscale[j][q] * theta.lengthscale[j][q];
      double sum = 0.0;
      for (std::size_t m = range.begin; m < range.end; ++m)
        sum += dlogdelta(static_cast<Eigen::Index>(m)) *
               (1.0 - l2 * basis.column_eigenvalue(m, q));
      grad[k] += sum;
    }
  }
}

std::vector<std::string> kernel_names(const KernelExpr &expr) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < expr.num_terms(); ++j) {
    names.push_back("alpha[" + std::to_string(j + 1) + "]");
    for (std::size_t q = 0; q < expr.term(j).continuous.size(); ++q)
      names.push_back("ell[" + std::to_string(j + 1) + "," +
                      std::to_string(q + 1) + "]");
  }
  return names;
}

}  // namespace

std::vector<std::string> draw_names(const KernelExpr &expr, std::size_t M,
                                    Likelihood likelihood) {
  std::vector<std::string> names;
  for (std::size_t m = 0; m < M; ++m)
    names.push_back("xi[" + std::to_string(m + 1) + "]");
  for (auto &n : kernel_names(expr)) names.push_back(std::move(n));
  if (likelihood == Likelihood::Gaussian) {
    names.emplace_back("sigma");
  } else {
    names.emplace_back("gamma");
    names.emplace_back("w0");
  }
  return names;
}

Draw decode_draw(const KernelExpr &expr, std::size_t M, Likelihood likelihood,
                 const Eigen::Ref<const Eigen::VectorXd> &row) {
  const std::size_t nk = num_kernel_params(expr);
  if (static_cast<std::size_t>(row.size()) !=
      M + nk + num_obs_params(likelihood))
    throw DimensionError("draw row has the wrong length");
  Draw d;
  d.xi = row.head(static_cast<Eigen::Index>(M));
  std::vector<double> packed(nk);
  for (std::size_t i = 0; i < nk; ++i)
    packed[i] = row(static_cast<Eigen::Index>(M + i));
  d.theta = HyperParams::unpack_kernel(expr, packed);
  const auto o = static_cast<Eigen::Index>(M + nk);
  if (likelihood == Likelihood::Gaussian) {
    d.theta.obs.sigma = row(o);
  } else {
    d.theta.obs.gamma = row(o);
    d.theta.obs.intercept = row(o + 1);
  }
  return d;
}

Eigen::VectorXd encode_draw(const Draw &draw, Likelihood likelihood) {
  const auto packed = draw.theta.pack_kernel();
  const Eigen::Index M = draw.xi.size();
  const auto nk = static_cast<Eigen::Index>(packed.size());
  Eigen::VectorXd row(M + nk +
                      static_cast<Eigen::Index>(num_obs_params(likelihood)));
  row.head(M) = draw.xi;
  for (Eigen::Index i = 0; i < nk; ++i)
    row(M + i) = packed[static_cast<std::size_t>(i)];
  if (likelihood == Likelihood::Gaussian) {
    row(M + nk) = draw.theta.obs.sigma;
  } else {
    row(M + nk) = draw.theta.obs.gamma;
    row(M + nk + 1) = draw.theta.obs.intercept;
  }
  return row;
}

// ---------------------------------------------------------------------------
// ApproxPosterior
// ---------------------------------------------------------------------------

ApproxPosterior::ApproxPosterior(std::shared_ptr<const FeatureMap> features,
                                 ResponseData data, Likelihood likelihood,
                                 PriorSpec priors,
                                 std::optional<HyperParams> fixed)
    : features_(std::move(features)),
      data_(std::move(data)),
      likelihood_(likelihood),
      priors_(priors),
      fixed_(std::move(fixed)) {
  if (!features_) throw InvalidArgument("feature map is null");
  if (features_->rows() != data_.size())
    throw DimensionError("feature map rows and responses differ");
  priors_.validate();
  validate_responses(likelihood_, data_);
  if (fixed_) fixed_->validate(features_->basis().expr());
}

std::size_t ApproxPosterior::num_features() const {
  return static_cast<std::size_t>(features_->cols());
}

std::size_t ApproxPosterior::num_theta() const {
  if (fixed_) return 0;
  return num_kernel_params(features_->basis().expr()) +
         num_obs_params(likelihood_);
}

std::size_t ApproxPosterior::dimension() const {
  return num_features() + num_theta();
}

HyperParams ApproxPosterior::theta_from(const Eigen::VectorXd &q) const {
  if (fixed_) return *fixed_;
  const auto &expr = features_->basis().expr();
  const std::size_t M = num_features();
  HyperParams theta = kernel_from_log(expr, q.data() + M);
  const auto o = static_cast<Eigen::Index>(M + num_kernel_params(expr));
  if (likelihood_ == Likelihood::Gaussian) {
    theta.obs.sigma = std::exp(q(o));
  } else {
    theta.obs.gamma = inv_logit(q(o));
    theta.obs.intercept = q(o + 1);
  }
  return theta;
}

Draw ApproxPosterior::unpack(const Eigen::VectorXd &q) const {
  if (q.size() != static_cast<Eigen::Index>(dimension()))
    throw DimensionError("state has the wrong dimension");
  return {q.head(static_cast<Eigen::Index>(num_features())), theta_from(q)};
}

Eigen::VectorXd ApproxPosterior::pack(const Draw &draw) const {
  const std::size_t M = num_features();
  if (static_cast<std::size_t>(draw.xi.size()) != M)
    throw DimensionError("xi has the wrong length");
  Eigen::VectorXd q(static_cast<Eigen::Index>(dimension()));
  q.head(static_cast<Eigen::Index>(M)) = draw.xi;
  if (fixed_) return q;
  const auto &expr = features_->basis().expr();
  draw.theta.validate(expr);
  kernel_to_log(draw.theta, q.data() + M);
  const auto o = static_cast<Eigen::Index>(M + num_kernel_params(expr));
  if (likelihood_ == Likelihood::Gaussian) {
    q(o) = std::log(draw.theta.obs.sigma);
  } else {
    const double g = draw.theta.obs.gamma;
    q(o) = std::log(g) - std::log1p(-g);
    q(o + 1) = draw.theta.obs.intercept;
  }
  return q;
}

std::vector<std::string> ApproxPosterior::output_names() const {
  return draw_names(features_->basis().expr(), num_features(), likelihood_);
}

Eigen::VectorXd ApproxPosterior::constrain(const Eigen::VectorXd &q) const {
  return encode_draw(unpack(q), likelihood_);
}

Eigen::VectorXd ApproxPosterior::latent(const Eigen::VectorXd &q) const {
  const Draw d = unpack(q);
  const Eigen::VectorXd sqrt_delta =
      features_->deltas(d.theta).array().sqrt().matrix();
  return features_->evaluation() * sqrt_delta.cwiseProduct(d.xi);
}

double ApproxPosterior::log_density(const Eigen::VectorXd &q,
                                    Eigen::VectorXd &grad) const {
  if (q.size() != static_cast<Eigen::Index>(dimension()))
    throw DimensionError("state has the wrong dimension");
  grad.setZero(q.size());
  if (!q.allFinite()) return kNegInf;

  const auto &basis = features_->basis();
  const auto &expr = basis.expr();
  const auto M = static_cast<Eigen::Index>(num_features());
  const HyperParams theta = theta_from(q);
  if (likelihood_ == Likelihood::BetaBinomial &&
      !(theta.obs.gamma > 0.0 && theta.obs.gamma < 1.0))
    return kNegInf;
  if (likelihood_ == Likelihood::Gaussian &&
      !(theta.obs.sigma > 0.0 && std::isfinite(theta.obs.sigma)))
    return kNegInf;

  const auto xi = q.head(M);
  const Eigen::VectorXd delta = basis.deltas(theta);
  const Eigen::VectorXd sqrt_delta = delta.array().sqrt().matrix();
  const Eigen::VectorXd beta = sqrt_delta.cwiseProduct(xi);
  const Eigen::MatrixXd &psi = features_->evaluation();
  const Eigen::VectorXd f = psi * beta;

  double lp = -0.5 * xi.squaredNorm() - static_cast<double>(M) * kHalfLog2Pi;
  const Eigen::Index N = data_.size();
  Eigen::VectorXd g(N);
  ObsParamGradient obs_grad;
  for (Eigen::Index n = 0; n < N; ++n) {
    const Observation obs = data_.at(n);
    lp += loglik_point(likelihood_, obs, f(n), theta.obs);
    g(n) = dloglik_df(likelihood_, obs, f(n), theta.obs);
    if (!fixed_) {
      const auto d = dloglik_dparams(likelihood_, obs, f(n), theta.obs);
      obs_grad.sigma += d.sigma;
      obs_grad.gamma += d.gamma;
      obs_grad.intercept += d.intercept;
    }
  }
  if (!std::isfinite(lp)) return kNegInf;

  const Eigen::VectorXd v = psi.transpose() * g;
  grad.head(M) = sqrt_delta.cwiseProduct(v) - xi;
  if (fixed_) return lp;

  // d/d log delta_m = 1/2 sqrt(delta_m) xi_m v_m
  const Eigen::VectorXd dlogdelta =
      0.5 * beta.cwiseProduct(v);
  double *gk = grad.data() + M;
  chain_log_delta(basis, theta, dlogdelta, gk);
  lp += kernel_log_prior(expr, priors_, q.data() + M, gk);

  const auto o = M + static_cast<Eigen::Index>(num_kernel_params(expr));
  if (likelihood_ == Likelihood::Gaussian) {
    grad(o) += obs_grad.sigma * theta.obs.sigma;
    const auto p = log_prior_log_sigma(priors_.noise_variance, q(o));
    lp += p.value;
    grad(o) += p.derivative;
  } else {
    const double gm = theta.obs.gamma;
    grad(o) += obs_grad.gamma * gm * (1.0 - gm);
    const auto p = log_prior_logit_dispersion(priors_.dispersion, q(o));
    lp += p.value;
    grad(o) += p.derivative;
    grad(o + 1) += obs_grad.intercept;
    const auto w = log_prior_intercept(priors_.intercept, q(o + 1));
    lp += w.value;
    grad(o + 1) += w.derivative;
  }
  return std::isfinite(lp) ? lp : kNegInf;
}

// ---------------------------------------------------------------------------
// Woodbury
// ---------------------------------------------------------------------------

double woodbury_loglik(const Eigen::MatrixXd &psi, double sigma,
                       const Eigen::VectorXd &y) {
  if (psi.rows() != y.size())
    throw DimensionError("feature rows and responses differ");
  if (!(sigma > 0)) throw InvalidArgument("sigma must be positive");
  const auto N = static_cast<double>(psi.rows());
  const auto M = static_cast<double>(psi.cols());
  const double s2 = sigma * sigma;
  Eigen::MatrixXd Z = psi.transpose() * psi;
  Z.diagonal().array() += s2;
  Eigen::LLT<Eigen::MatrixXd> llt(Z);
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("Z = sigma^2 I + Psi^T Psi failed to factor");
  const Eigen::VectorXd z = psi.transpose() * y;
  const double quad = (y.squaredNorm() - z.dot(llt.solve(z))) / s2;
  const double log_det = 2.0 * (N - M) * std::log(sigma) +
                         2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -N * kHalfLog2Pi - 0.5 * log_det - 0.5 * quad;
}

double marginalized_loglik_woodbury(const FeatureMap &features,
                                    const HyperParams &theta,
                                    const Eigen::VectorXd &y) {
  return woodbury_loglik(features.features(theta), theta.obs.sigma, y);
}

MarginalizedApproxPosterior::MarginalizedApproxPosterior(
    std::shared_ptr<const FeatureMap> features, Eigen::VectorXd y,
    PriorSpec priors)
    : features_(std::move(features)), y_(std::move(y)), priors_(priors) {
  if (!features_) throw InvalidArgument("feature map is null");
  if (features_->rows() != y_.size())
    throw DimensionError("feature map rows and responses differ");
  priors_.validate();
  const Eigen::MatrixXd &psi = features_->evaluation();
  gram_ = psi.transpose() * psi;
  proj_y_ = psi.transpose() * y_;
  yty_ = y_.squaredNorm();
}

std::size_t MarginalizedApproxPosterior::dimension() const {
  return num_kernel_params(features_->basis().expr()) + 1;
}

HyperParams MarginalizedApproxPosterior::unpack(
    const Eigen::VectorXd &q) const {
  if (q.size() != static_cast<Eigen::Index>(dimension()))
    throw DimensionError("state has the wrong dimension");
  HyperParams theta = kernel_from_log(features_->basis().expr(), q.data());
  theta.obs.sigma = std::exp(q(q.size() - 1));
  return theta;
}

Eigen::VectorXd MarginalizedApproxPosterior::pack(
    const HyperParams &theta) const {
  theta.validate(features_->basis().expr());
  Eigen::VectorXd q(static_cast<Eigen::Index>(dimension()));
  kernel_to_log(theta, q.data());
  q(q.size() - 1) = std::log(theta.obs.sigma);
  return q;
}

std::vector<std::string> MarginalizedApproxPosterior::output_names() const {
  auto names = kernel_names(features_->basis().expr());
  names.emplace_back("sigma");
  return names;
}

Eigen::VectorXd MarginalizedApproxPosterior::constrain(
    const Eigen::VectorXd &q) const {
  return q.array().exp();
}

double MarginalizedApproxPosterior::log_density(const Eigen::VectorXd &q,
                                                Eigen::VectorXd &grad) const {
  if (q.size() != static_cast<Eigen::Index>(dimension()))
    throw DimensionError("state has the wrong dimension");
  grad.setZero(q.size());
  if (!q.allFinite()) return kNegInf;
  const auto &basis = features_->basis();
  const HyperParams theta = unpack(q);
  const double sigma = theta.obs.sigma;
  const double s2 = sigma * sigma;
  const auto N = static_cast<double>(features_->rows());
  const Eigen::Index M = features_->cols();

  const Eigen::VectorXd delta = basis.deltas(theta);
  const Eigen::VectorXd r = delta.array().sqrt().matrix();
  // Psi^T Psi = R G R with R = diag(sqrt(delta)).
  const Eigen::MatrixXd rgr = r.asDiagonal() * gram_ * r.asDiagonal();
  Eigen::MatrixXd Z = rgr;
  Z.diagonal().array() += s2;
  Eigen::LLT<Eigen::MatrixXd> llt(Z);
  if (llt.info() != Eigen::Success) return kNegInf;

  const Eigen::VectorXd z = r.cwiseProduct(proj_y_);
  const Eigen::VectorXd w = llt.solve(z);
  const double quad = (yty_ - z.dot(w)) / s2;
  const double log_det = 2.0 * (N - static_cast<double>(M)) * std::log(sigma) +
                         2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double lp = -N * kHalfLog2Pi - 0.5 * log_det - 0.5 * quad;

  // With a = K_y^-1 y:
  //   Psi-dagger^T a = (Psi-dagger^T y - G R w) / sigma^2
  //   diag(Psi-dagger^T K_y^-1 Psi-dagger) = diag(G - G R Z^-1 R G) / sigma^2
  const Eigen::VectorXd pa = (proj_y_ - gram_ * r.cwiseProduct(w)) / s2;
  const Eigen::MatrixXd rg = r.asDiagonal() * gram_;
  const Eigen::MatrixXd zinv_rg = llt.solve(rg);
  Eigen::VectorXd h(M);
  for (Eigen::Index m = 0; m < M; ++m)
    h(m) = (gram_(m, m) - rg.col(m).dot(zinv_rg.col(m))) / s2;
  const Eigen::VectorXd dlogdelta =
      0.5 * delta.cwiseProduct(pa.cwiseAbs2() - h);
  chain_log_delta(basis, theta, dlogdelta, grad.data());
  lp += kernel_log_prior(basis.expr(), priors_, q.data(), grad.data());

  // d/d sigma^2 = 1/2 (a^T a - tr(K_y^-1)), a = (y - Psi w) / sigma^2.
  const double ata =
      (yty_ - 2.0 * z.dot(w) + w.dot(rgr * w)) / (s2 * s2);
  const double trace_inv =
      (N - llt.solve(rgr).trace()) / s2;
  const Eigen::Index o = q.size() - 1;
  grad(o) += s2 * (ata - trace_inv);
  const auto p = log_prior_log_sigma(priors_.noise_variance, q(o));
  lp += p.value;
  grad(o) += p.derivative;
  return std::isfinite(lp) ? lp : kNegInf;
}

Eigen::VectorXd MarginalizedApproxPosterior::draw_xi(
    const HyperParams &theta, std::mt19937_64 &rng) const {
  const Eigen::VectorXd r = features_->deltas(theta).array().sqrt().matrix();
  const double s2 = theta.obs.sigma * theta.obs.sigma;
  Eigen::MatrixXd Z = r.asDiagonal() * gram_ * r.asDiagonal();
  Z.diagonal().array() += s2;
  Eigen::LLT<Eigen::MatrixXd> llt(Z);
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("Z = sigma^2 I + Psi^T Psi failed to factor");
  const Eigen::VectorXd mean = llt.solve(r.cwiseProduct(proj_y_));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd e(mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
  // Cov = sigma^2 Z^-1 = sigma^2 L^-T L^-1.
  return mean + theta.obs.sigma * llt.matrixU().solve(e);
}

}  // namespace mdgp
