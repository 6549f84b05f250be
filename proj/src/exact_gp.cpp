#include "mdgp/exact_gp.hpp"

#include <cmath>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;

std::span<const double> as_span(const Eigen::VectorXd &v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
}  // namespace

std::vector<std::string> LogDensity::output_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dimension(); ++i)
    names.push_back("q[" + std::to_string(i + 1) + "]");
  return names;
}

double SpdFactor::log_determinant() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

SpdFactor factorize_spd(const Eigen::MatrixXd &matrix) {
  if (matrix.rows() != matrix.cols())
    throw DimensionError("covariance matrix is not square");
  SpdFactor out;
  out.llt.compute(matrix);
  if (out.llt.info() == Eigen::Success && matrix.allFinite()) return out;
  const Eigen::Index n = matrix.rows();
  const double mean_diag = n > 0 ? matrix.diagonal().mean() : 0.0;
  out.jitter = 1e-8 * std::abs(mean_diag);
  Eigen::MatrixXd jittered = matrix;
  jittered.diagonal().array() += out.jitter;
  out.llt.compute(jittered);
  if (out.llt.info() != Eigen::Success || !matrix.allFinite())
    throw SingularCovariance(
        "covariance matrix is not positive definite after jitter");
  return out;
}

double mvn_logpdf(const Eigen::VectorXd &y, const Eigen::MatrixXd &cov) {
  if (y.size() != cov.rows())
    throw DimensionError("vector and covariance differ in size");
  const SpdFactor factor = factorize_spd(cov);
  const Eigen::VectorXd w = factor.llt.matrixL().solve(y);
  return -static_cast<double>(y.size()) * kHalfLog2Pi -
         0.5 * factor.log_determinant() - 0.5 * w.squaredNorm();
}

double marginal_loglik_gaussian(const Eigen::MatrixXd &K, double sigma,
                                const Eigen::VectorXd &y) {
  Eigen::MatrixXd ky = K;
  ky.diagonal().array() += sigma * sigma;
  return mvn_logpdf(y, ky);
}

ExactPosterior exact_posterior_f(const Eigen::MatrixXd &K, double sigma,
                                 const Eigen::VectorXd &y) {
  if (K.rows() != K.cols() || K.rows() != y.size())
    throw DimensionError("kernel matrix and responses differ in size");
  Eigen::MatrixXd ky = K;
  ky.diagonal().array() += sigma * sigma;
  ExactPosterior out;
  out.ky = factorize_spd(ky);
  out.mean = K * out.ky.llt.solve(y);
  out.cov = K - K * out.ky.llt.solve(K.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

GaussianMoments exact_predict(const Eigen::MatrixXd &k_cross,
                              const Eigen::MatrixXd &k_test,
                              const SpdFactor &ky, const Eigen::VectorXd &y) {
  if (k_cross.cols() != ky.size() || y.size() != ky.size())
    throw DimensionError("cross-kernel columns must match training size");
  if (k_test.rows() != k_cross.rows() || k_test.cols() != k_cross.rows())
    throw DimensionError("test kernel must be P x P");
  GaussianMoments out;
  out.mean = k_cross * ky.llt.solve(y);
  const Eigen::MatrixXd v = ky.llt.matrixL().solve(k_cross.transpose());
  out.cov = k_test - v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

GaussianMoments exact_predict_component(const Eigen::MatrixXd &k_cross_j,
                                        const Eigen::MatrixXd &k_test_j,
                                        const SpdFactor &ky,
                                        const Eigen::VectorXd &y) {
  return exact_predict(k_cross_j, k_test_j, ky, y);
}

GaussianMoments add_noise(GaussianMoments moments, double sigma) {
  moments.cov.diagonal().array() += sigma * sigma;
  return moments;
}

Eigen::MatrixXd term_kernel_matrix(const KernelExpr &expr, std::size_t j,
                                   const HyperParams &theta,
                                   const Eigen::MatrixXd &X1,
                                   const Eigen::MatrixXd &X2) {
  const auto D = static_cast<Eigen::Index>(expr.space().size());
  if (X1.cols() != D || X2.cols() != D)
    throw DimensionError("input columns do not match covariate space");
  Eigen::MatrixXd K(X1.rows(), X2.rows());
  for (Eigen::Index a = 0; a < X1.rows(); ++a) {
    const Eigen::VectorXd xa = X1.row(a).transpose();
    for (Eigen::Index b = 0; b < X2.rows(); ++b) {
      const Eigen::VectorXd xb = X2.row(b).transpose();
      K(a, b) = eval_term(expr, j, theta, as_span(xa), as_span(xb));
    }
  }
  return K;
}

Eigen::MatrixXd kernel_matrix(const KernelExpr &expr, const HyperParams &theta,
                              const Eigen::MatrixXd &X1,
                              const Eigen::MatrixXd &X2) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(X1.rows(), X2.rows());
  for (std::size_t j = 0; j < expr.num_terms(); ++j)
    K += term_kernel_matrix(expr, j, theta, X1, X2);
  return K;
}

// ---------------------------------------------------------------------------
// ExactMarginalPosterior
// ---------------------------------------------------------------------------

ExactMarginalPosterior::ExactMarginalPosterior(KernelExpr expr,
                                               Eigen::MatrixXd inputs,
                                               Eigen::VectorXd y,
                                               PriorSpec priors)
    : expr_(std::move(expr)),
      inputs_(std::move(inputs)),
      y_(std::move(y)),
      priors_(priors) {
  priors_.validate();
  const Eigen::Index N = inputs_.rows();
  if (y_.size() != N) throw DimensionError("inputs and responses differ");
  const std::size_t D = expr_.space().size();
  sq_dist_.resize(D);
  for (const auto &t : expr_.terms()) {
    for (const auto &e : t.continuous) {
      if (sq_dist_[e.dim].size() > 0) continue;
      const auto x = inputs_.col(static_cast<Eigen::Index>(e.dim));
      Eigen::MatrixXd d2(N, N);
      for (Eigen::Index a = 0; a < N; ++a)
        for (Eigen::Index b = 0; b < N; ++b)
          d2(a, b) = (x(a) - x(b)) * (x(a) - x(b));
      sq_dist_[e.dim] = std::move(d2);
    }
    Eigen::MatrixXd prod = Eigen::MatrixXd::Ones(N, N);
    for (const auto &c : t.categorical) {
      const auto d = static_cast<Eigen::Index>(kernel_dim(c));
      for (Eigen::Index a = 0; a < N; ++a)
        for (Eigen::Index b = 0; b < N; ++b)
          prod(a, b) *= categorical_value(c, level_index(inputs_(a, d)),
                                          level_index(inputs_(b, d)));
    }
    categorical_product_.push_back(std::move(prod));
  }
}

std::size_t ExactMarginalPosterior::dimension() const {
  return expr_.num_terms() + expr_.num_lengthscales() + 1;
}

HyperParams ExactMarginalPosterior::unpack(const Eigen::VectorXd &q) const {
  std::vector<double> packed(static_cast<std::size_t>(q.size() - 1));
  for (std::size_t i = 0; i < packed.size(); ++i)
    packed[i] = std::exp(q(static_cast<Eigen::Index>(i)));
  HyperParams theta = HyperParams::unpack_kernel(expr_, packed);
  theta.obs.sigma = std::exp(q(q.size() - 1));
  return theta;
}

Eigen::VectorXd ExactMarginalPosterior::pack(const HyperParams &theta) const {
  const auto packed = theta.pack_kernel();
  Eigen::VectorXd q(static_cast<Eigen::Index>(packed.size() + 1));
  for (std::size_t i = 0; i < packed.size(); ++i)
    q(static_cast<Eigen::Index>(i)) = std::log(packed[i]);
  q(q.size() - 1) = std::log(theta.obs.sigma);
  return q;
}

std::vector<std::string> ExactMarginalPosterior::output_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < expr_.num_terms(); ++j) {
    names.push_back("alpha[" + std::to_string(j + 1) + "]");
    for (std::size_t q = 0; q < expr_.term(j).continuous.size(); ++q)
      names.push_back("ell[" + std::to_string(j + 1) + "," +
                      std::to_string(q + 1) + "]");
  }
  names.push_back("sigma");
  return names;
}

Eigen::VectorXd ExactMarginalPosterior::constrain(
    const Eigen::VectorXd &q) const {
  return q.array().exp();
}

double ExactMarginalPosterior::log_density(const Eigen::VectorXd &q,
                                           Eigen::VectorXd &grad) const {
  if (q.size() != static_cast<Eigen::Index>(dimension()))
    throw DimensionError("state has the wrong dimension");
  grad.setZero(q.size());
  if (!q.allFinite()) return -std::numeric_limits<double>::infinity();
  const HyperParams theta = unpack(q);
  const Eigen::Index N = inputs_.rows();

  std::vector<Eigen::MatrixXd> term_k;
  Eigen::MatrixXd ky = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t j = 0; j < expr_.num_terms(); ++j) {
    const auto &t = expr_.term(j);
    Eigen::MatrixXd k = categorical_product_[j];
    k *= theta.magnitude[j] * theta.magnitude[j];
    for (std::size_t r = 0; r < t.continuous.size(); ++r) {
      const double l = theta.lengthscale[j][r];
      k.array() *= (-0.5 / (l * l) * sq_dist_[t.continuous[r].dim].array()).exp();
    }
    ky += k;
    term_k.push_back(std::move(k));
  }
  const double s2 = theta.obs.sigma * theta.obs.sigma;
  ky.diagonal().array() += s2;

  Eigen::LLT<Eigen::MatrixXd> llt(ky);
  if (llt.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd a = llt.solve(y_);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double lp = -static_cast<double>(N) * kHalfLog2Pi - 0.5 * log_det -
              0.5 * y_.dot(a);

  // d/dtheta = 0.5 * sum(W .* dK), W = a a^T - K_y^-1.
  Eigen::MatrixXd W = -llt.solve(Eigen::MatrixXd::Identity(N, N));
  W += a * a.transpose();

  Eigen::Index k = 0;
  for (std::size_t j = 0; j < expr_.num_terms(); ++j) {
    const auto &t = expr_.term(j);
    const auto u = q(k);
    grad(k) = (W.array() * term_k[j].array()).sum();  // dK/dlog alpha = 2 K_j
    const auto prior = log_prior_log_magnitude(priors_.magnitude, u);
    lp += prior.value;
    grad(k) += prior.derivative;
    ++k;
    for (std::size_t r = 0; r < t.continuous.size(); ++r) {
      const double l = theta.lengthscale[j][r];
      const auto &d2 = sq_dist_[t.continuous[r].dim];
      grad(k) = 0.5 * (W.array() * term_k[j].array() * d2.array()).sum() /
                (l * l);
      const auto lprior = log_prior_log_lengthscale(priors_.lengthscale, q(k));
      lp += lprior.value;
      grad(k) += lprior.derivative;
      ++k;
    }
  }
  grad(k) = W.trace() * s2;  // dK_y/dlog sigma = 2 sigma^2 I
  const auto sprior = log_prior_log_sigma(priors_.noise_variance, q(k));
  lp += sprior.value;
  grad(k) += sprior.derivative;
  return lp;
}

}  // namespace mdgp
