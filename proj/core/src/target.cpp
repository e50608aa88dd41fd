#include "dais/target.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dais {

std::unique_ptr<AnnealedTarget> AnnealedTarget::rebind(Rng) const {
  return nullptr;
}

GaussianPrior::GaussianPrior(Vector mean, Matrix precision)
    : mean_(std::move(mean)), precision_(std::move(precision)) {
  if (precision_.rows() != mean_.size() || precision_.cols() != mean_.size()) {
    throw std::invalid_argument("prior precision must be d x d");
  }
  if (!precision_.isApprox(precision_.transpose(), 1e-12)) {
    throw std::invalid_argument("prior precision must be symmetric");
  }
  chol_.compute(precision_);
  if (chol_.info() != Eigen::Success) {
    throw std::invalid_argument("prior precision must be positive definite");
  }
  log_det_precision_ =
      2.0 * chol_.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double GaussianPrior::log_density(const Vector& theta) const {
  const Vector diff = theta - mean_;
  const double d = static_cast<double>(dim());
  return -0.5 * d * std::log(2.0 * std::numbers::pi) +
         0.5 * log_det_precision_ - 0.5 * diff.dot(precision_ * diff);
}

Vector GaussianPrior::grad_log_density(const Vector& theta) const {
  return -(precision_ * (theta - mean_));
}

Vector GaussianPrior::sample(Rng& rng) const {
  // precision = L L^T, so L^-T z has covariance precision^-1.
  const Vector z = rng.normal_vector(dim());
  return mean_ + chol_.matrixU().solve(z);
}

GeometricTarget::GeometricTarget(std::shared_ptr<const GaussianPrior> prior,
                                 std::shared_ptr<const LogLikelihood> likelihood)
    : prior_(std::move(prior)), likelihood_(std::move(likelihood)) {
  if (!prior_ || !likelihood_) {
    throw std::invalid_argument("geometric target needs prior and likelihood");
  }
  if (prior_->dim() != likelihood_->dim()) {
    throw std::invalid_argument("prior and likelihood dimensions differ");
  }
}

namespace {
void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("beta must lie in [0, 1]");
  }
}
}  // namespace

double GeometricTarget::log_f(double beta, const Vector& theta) const {
  check_beta(beta);
  const double base = prior_->log_density(theta);
  if (beta == 0.0) return base;
  return base + beta * likelihood_->value(theta);
}

Vector GeometricTarget::grad_log_f(double beta, const Vector& theta) const {
  check_beta(beta);
  Vector g = prior_->grad_log_density(theta);
  if (beta != 0.0) g += beta * likelihood_->gradient(theta);
  return g;
}

std::shared_ptr<GeometricTarget> geometric_target(
    std::shared_ptr<const GaussianPrior> prior,
    std::shared_ptr<const LogLikelihood> likelihood) {
  return std::make_shared<GeometricTarget>(std::move(prior),
                                           std::move(likelihood));
}

GradientNoiseSpec::GradientNoiseSpec(Matrix covariance)
    : covariance_(std::move(covariance)) {
  if (covariance_.rows() != covariance_.cols()) {
    throw std::invalid_argument("noise covariance must be square");
  }
  if (!covariance_.isApprox(covariance_.transpose(), 1e-12) &&
      !covariance_.isZero(0.0)) {
    throw std::invalid_argument("noise covariance must be symmetric");
  }
  if (covariance_.size() == 0 || covariance_.isZero(0.0)) {
    factor_ = Matrix::Zero(covariance_.rows(), covariance_.cols());
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_);
  const Vector lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-12 * scale) {
    throw std::invalid_argument("noise covariance must be positive semi-definite");
  }
  factor_ = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

GradientNoiseSpec GradientNoiseSpec::diagonal(const Vector& variances) {
  return GradientNoiseSpec(Matrix(variances.asDiagonal()));
}

GradientNoiseSpec GradientNoiseSpec::isotropic(Index d, double variance) {
  return GradientNoiseSpec(Matrix::Identity(d, d) * variance);
}

Vector GradientNoiseSpec::draw(Rng& rng) const {
  return factor_ * rng.normal_vector(factor_.cols());
}

NoisyGradientTarget::NoisyGradientTarget(
    std::shared_ptr<const AnnealedTarget> inner, GradientNoiseSpec spec, Rng rng)
    : inner_(std::move(inner)), spec_(std::move(spec)), rng_(rng) {
  if (!inner_) throw std::invalid_argument("noisy_gradient needs a target");
  if (spec_.dim() != inner_->dim()) {
    throw std::invalid_argument("noise covariance dimension mismatch");
  }
}

Vector NoisyGradientTarget::grad_log_f(double beta, const Vector& theta) const {
  return inner_->grad_log_f(beta, theta) + spec_.draw(rng_);
}

std::unique_ptr<AnnealedTarget> NoisyGradientTarget::rebind(Rng stream) const {
  return std::make_unique<NoisyGradientTarget>(inner_, spec_, stream);
}

std::shared_ptr<NoisyGradientTarget> noisy_gradient(
    std::shared_ptr<const AnnealedTarget> target, GradientNoiseSpec spec,
    Rng rng) {
  return std::make_shared<NoisyGradientTarget>(std::move(target),
                                               std::move(spec), rng);
}

}  // namespace dais
