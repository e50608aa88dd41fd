#include "dais/blr.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace dais {

namespace {

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("matrix is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("beta must lie in [0, 1]");
  }
}

}  // namespace

BlrModel::BlrModel(Matrix X, Vector y, double sigma2, Vector mu_p,
                   Matrix Lambda_p)
    : X_(std::move(X)),
      y_(std::move(y)),
      sigma2_(sigma2),
      mu_p_(std::move(mu_p)),
      Lambda_p_(std::move(Lambda_p)) {
  if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
    throw std::invalid_argument("observation variance must be positive");
  }
  const Index d = mu_p_.size();
  if (d < 1) throw std::invalid_argument("model needs d >= 1");
  if (Lambda_p_.rows() != d || Lambda_p_.cols() != d) {
    throw std::invalid_argument("prior precision must be d x d");
  }
  if (X_.cols() != d && X_.rows() > 0) {
    throw std::invalid_argument("design matrix has " +
                                std::to_string(X_.cols()) + " columns, expected " +
                                std::to_string(d));
  }
  if (X_.rows() == 0) X_.resize(0, d);
  if (y_.size() != X_.rows()) {
    throw std::invalid_argument("targets and design matrix row counts differ");
  }
  if (!Lambda_p_.isApprox(Lambda_p_.transpose(), 1e-12)) {
    throw std::invalid_argument("prior precision must be symmetric");
  }
  if (Eigen::LLT<Matrix>(Lambda_p_).info() != Eigen::Success) {
    throw std::invalid_argument("prior precision must be positive definite");
  }
  Lambda_lld_ = (X_.transpose() * X_) / sigma2_;
  lld_shift_ = (X_.transpose() * y_) / sigma2_;
  yty_ = y_.squaredNorm();
}

BlrModel BlrModel::empty(Vector mu_p, Matrix Lambda_p, double sigma2) {
  const Index d = mu_p.size();
  return BlrModel(Matrix(0, d), Vector(0), sigma2, std::move(mu_p),
                  std::move(Lambda_p));
}

double BlrModel::log_likelihood(const Vector& theta) const {
  // -(n/2) log(2 pi s2) - |y - X theta|^2 / (2 s2), expanded via X^T X, X^T y.
  const double n = static_cast<double>(this->n());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2_) -
         0.5 * yty_ / sigma2_ + theta.dot(lld_shift_) -
         0.5 * theta.dot(Lambda_lld_ * theta);
}

Vector BlrModel::grad_log_likelihood(const Vector& theta) const {
  return lld_shift_ - Lambda_lld_ * theta;
}

std::shared_ptr<GeometricTarget> blr_target(const BlrModel& model) {
  auto shared = std::make_shared<const BlrModel>(model);
  return geometric_target(
      std::make_shared<const GaussianPrior>(model.mu_p(), model.Lambda_p()),
      std::make_shared<const BlrLikelihood>(shared));
}

MinibatchBlrTarget::MinibatchBlrTarget(std::shared_ptr<const BlrModel> model,
                                       std::size_t batch_size, Rng rng)
    : model_(std::move(model)),
      prior_(model_->mu_p(), model_->Lambda_p()),
      batch_size_(batch_size),
      rng_(rng) {
  if (batch_size_ == 0 || model_->n() == 0) {
    throw std::invalid_argument("mini-batch target needs data and batch size >= 1");
  }
}

double MinibatchBlrTarget::log_f(double beta, const Vector& theta) const {
  check_beta(beta);
  return prior_.log_density(theta) + beta * model_->log_likelihood(theta);
}

Vector MinibatchBlrTarget::grad_log_f(double beta, const Vector& theta) const {
  batch_ = sample_batch(model_->n(), batch_size_, rng_);
  return blr_minibatch_grad(*model_, beta, theta, batch_);
}

std::unique_ptr<AnnealedTarget> MinibatchBlrTarget::rebind(Rng stream) const {
  return std::make_unique<MinibatchBlrTarget>(model_, batch_size_, stream);
}

Matrix AnnealedGaussian::covariance() const {
  return Lambda.llt().solve(Matrix::Identity(Lambda.rows(), Lambda.cols()));
}

double AnnealedGaussian::log_det_Lambda() const { return log_det_spd(Lambda); }

AnnealedGaussian annealed_posterior(const BlrModel& model, double beta) {
  check_beta(beta);
  AnnealedGaussian g;
  g.beta = beta;
  g.Lambda = model.Lambda_p() + beta * model.Lambda_lld();
  const Vector rhs = model.Lambda_p() * model.mu_p() + beta * model.lld_shift();
  Eigen::LLT<Matrix> llt(g.Lambda);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure("annealed precision is not positive definite");
  }
  g.mu = llt.solve(rhs);
  return g;
}

AnnealedGaussian derive_posterior(const BlrModel& model) {
  return annealed_posterior(model, 1.0);
}

double exact_log_ml(const BlrModel& model) {
  const AnnealedGaussian post = derive_posterior(model);
  const double n = static_cast<double>(model.n());
  const double quad_post = post.mu.dot(post.Lambda * post.mu);
  const double quad_prior = model.mu_p().dot(model.Lambda_p() * model.mu_p());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * model.sigma2()) +
         0.5 * (log_det_spd(model.Lambda_p()) - post.log_det_Lambda()) +
         0.5 * quad_post - 0.5 * model.yty() / model.sigma2() -
         0.5 * quad_prior;
}

Vector blr_grad(const BlrModel& model, double beta, const Vector& theta) {
  check_beta(beta);
  return -(model.Lambda_p() * (theta - model.mu_p())) +
         beta * model.grad_log_likelihood(theta);
}

Vector blr_minibatch_grad(const BlrModel& model, double beta,
                          const Vector& theta, std::span<const Index> batch) {
  check_beta(beta);
  if (batch.empty()) throw std::invalid_argument("mini-batch must be non-empty");
  Vector acc = Vector::Zero(model.d());
  for (Index i : batch) {
    if (i < 0 || i >= model.n()) {
      throw std::invalid_argument("mini-batch row index " + std::to_string(i) +
                                  " out of range");
    }
    const auto x = model.X().row(i).transpose();
    acc += x * (model.y()[i] - x.dot(theta));
  }
  const double scale = beta * static_cast<double>(model.n()) /
                       (model.sigma2() * static_cast<double>(batch.size()));
  return -(model.Lambda_p() * (theta - model.mu_p())) + scale * acc;
}

std::vector<Index> sample_batch(Index n, std::size_t batch_size, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("cannot sample a batch from no data");
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> out(batch_size);
  for (auto& i : out) i = pick(rng);
  return out;
}

Matrix minibatch_noise_covariance(const BlrModel& model, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (model.n() == 0) throw std::invalid_argument("model has no observations");
  const Vector mu = derive_posterior(model).mu;
  const Index n = model.n();
  const Vector resid = model.y() - model.X() * mu;
  const double nn = static_cast<double>(n);
  // Single-row estimator g_i = n/s2 x_i r_i; its mean is X^T r / s2.
  Matrix G = model.X().array().colwise() * (resid.array() * (nn / model.sigma2()));
  const Eigen::RowVectorXd mean = G.colwise().mean();
  G.rowwise() -= mean;
  const Matrix cov = (G.transpose() * G) / nn;
  return cov / static_cast<double>(batch_size);
}

Matrix UpdateMatrices::transition() const {
  const Index d = A.rows();
  Matrix T(2 * d, 2 * d);
  T << A, B, C, D;
  return T;
}

Vector UpdateMatrices::offset() const {
  Vector t(c_vec.size() + e_vec.size());
  t << c_vec, e_vec;
  return t;
}

UpdateMatrices update_matrices(const BlrModel& model, double beta, double eta,
                               const Vector& mass) {
  check_beta(beta);
  if (!(eta >= 0.0)) throw std::invalid_argument("step size must be >= 0");
  const Index d = model.d();
  const Vector m = mass.size() == 0 ? Vector::Ones(d) : mass;
  if (m.size() != d) throw std::invalid_argument("mass length mismatch");
  const auto minv = m.cwiseInverse().asDiagonal();

  const Matrix Lambda = model.Lambda_p() + beta * model.Lambda_lld();
  // Lambda^beta mu^beta, without solving.
  const Vector shift = model.Lambda_p() * model.mu_p() + beta * model.lld_shift();
  const Matrix I = Matrix::Identity(d, d);
  const double e2 = eta * eta;

  UpdateMatrices u;
  u.C = -eta * Lambda;
  u.D = I - 0.5 * e2 * Lambda * minv;
  u.A = I - 0.5 * e2 * (minv * Lambda);
  u.B = eta * Matrix(minv) - 0.25 * e2 * eta * (minv * Lambda * minv);
  u.e_vec = eta * shift;
  u.c_vec = 0.5 * e2 * (minv * shift);
  return u;
}

double stochastic_penalty(const StepSizeScheme& steps, const Matrix& sigma_eps) {
  const double tr = sigma_eps.trace();
  double acc = 0.0;
  for (double eta : steps.per_step) acc += 0.5 * eta * eta * tr;
  return acc;
}

SlopePrediction theory_slope(double c) {
  return {2.0 * c - 1.0, c >= 0.25 && c < 0.5};
}

}  // namespace dais
