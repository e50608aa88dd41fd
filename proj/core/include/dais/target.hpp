#pragma once

#include <memory>

#include <Eigen/Cholesky>

#include "dais/rng.hpp"
#include "dais/types.hpp"

namespace dais {

/// An annealed family f_beta, beta in [0, 1], with a tractable base p_0.
///
/// Implementations are immutable and shareable across threads unless they
/// override rebind(), which signals per-call randomness (see
/// NoisyGradientTarget).
class AnnealedTarget {
 public:
  virtual ~AnnealedTarget() = default;

  virtual Index dim() const = 0;
  virtual double log_f(double beta, const Vector& theta) const = 0;
  virtual Vector grad_log_f(double beta, const Vector& theta) const = 0;
  virtual Vector sample_p0(Rng& rng) const = 0;
  virtual double log_p0(const Vector& theta) const = 0;

  /// Copy of this target whose internal randomness is driven by `stream`,
  /// or nullptr if the target has none and can be shared as-is.
  virtual std::unique_ptr<AnnealedTarget> rebind(Rng stream) const;
};

/// Gaussian N(mean, precision^-1).
class GaussianPrior {
 public:
  GaussianPrior(Vector mean, Matrix precision);

  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& precision() const { return precision_; }
  /// log |precision|
  double log_det_precision() const { return log_det_precision_; }

  double log_density(const Vector& theta) const;
  Vector grad_log_density(const Vector& theta) const;
  Vector sample(Rng& rng) const;

 private:
  Vector mean_;
  Matrix precision_;
  Eigen::LLT<Matrix> chol_;
  double log_det_precision_ = 0.0;
};

/// Log-likelihood component of a geometric path.
class LogLikelihood {
 public:
  virtual ~LogLikelihood() = default;
  virtual Index dim() const = 0;
  virtual double value(const Vector& theta) const = 0;
  virtual Vector gradient(const Vector& theta) const = 0;
};

/// Identically zero likelihood: f_1 = p_0.
class ZeroLikelihood final : public LogLikelihood {
 public:
  explicit ZeroLikelihood(Index d) : d_(d) {}
  Index dim() const override { return d_; }
  double value(const Vector&) const override { return 0.0; }
  Vector gradient(const Vector&) const override { return Vector::Zero(d_); }

 private:
  Index d_;
};

/// log f_beta(theta) = log p_0(theta) + beta * log p(D | theta).
class GeometricTarget final : public AnnealedTarget {
 public:
  GeometricTarget(std::shared_ptr<const GaussianPrior> prior,
                  std::shared_ptr<const LogLikelihood> likelihood);

  Index dim() const override { return prior_->dim(); }
  double log_f(double beta, const Vector& theta) const override;
  Vector grad_log_f(double beta, const Vector& theta) const override;
  Vector sample_p0(Rng& rng) const override { return prior_->sample(rng); }
  double log_p0(const Vector& theta) const override {
    return prior_->log_density(theta);
  }

  const GaussianPrior& prior() const { return *prior_; }
  const LogLikelihood& likelihood() const { return *likelihood_; }

 private:
  std::shared_ptr<const GaussianPrior> prior_;
  std::shared_ptr<const LogLikelihood> likelihood_;
};

std::shared_ptr<GeometricTarget> geometric_target(
    std::shared_ptr<const GaussianPrior> prior,
    std::shared_ptr<const LogLikelihood> likelihood);

/// Additive gradient noise covariance Sigma_eps (PSD).
class GradientNoiseSpec {
 public:
  /// Throws std::invalid_argument if the matrix is not symmetric PSD.
  explicit GradientNoiseSpec(Matrix covariance);
  static GradientNoiseSpec diagonal(const Vector& variances);
  static GradientNoiseSpec isotropic(Index d, double variance);

  const Matrix& covariance() const { return covariance_; }
  Index dim() const { return covariance_.rows(); }
  double trace() const { return covariance_.trace(); }
  bool is_zero() const { return covariance_.isZero(0.0); }

  /// eps ~ N(0, Sigma_eps)
  Vector draw(Rng& rng) const;

 private:
  Matrix covariance_;
  Matrix factor_;  // factor_ * factor_^T = covariance_
};

/// Wraps a target so each gradient call returns grad + eps with a fresh
/// eps ~ N(0, Sigma_eps). log_f is untouched. Not thread-safe: one instance
/// belongs to one chain; dais_bound_mc rebinds it per chain.
class NoisyGradientTarget final : public AnnealedTarget {
 public:
  NoisyGradientTarget(std::shared_ptr<const AnnealedTarget> inner,
                      GradientNoiseSpec spec, Rng rng);

  Index dim() const override { return inner_->dim(); }
  double log_f(double beta, const Vector& theta) const override {
    return inner_->log_f(beta, theta);
  }
  Vector grad_log_f(double beta, const Vector& theta) const override;
  Vector sample_p0(Rng& rng) const override { return inner_->sample_p0(rng); }
  double log_p0(const Vector& theta) const override {
    return inner_->log_p0(theta);
  }
  std::unique_ptr<AnnealedTarget> rebind(Rng stream) const override;

  const GradientNoiseSpec& spec() const { return spec_; }

 private:
  std::shared_ptr<const AnnealedTarget> inner_;
  GradientNoiseSpec spec_;
  mutable Rng rng_;
};

std::shared_ptr<NoisyGradientTarget> noisy_gradient(
    std::shared_ptr<const AnnealedTarget> target, GradientNoiseSpec spec,
    Rng rng);

}  // namespace dais
