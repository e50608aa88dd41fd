#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dais/rng.hpp"
#include "dais/schedule.hpp"
#include "dais/target.hpp"
#include "dais/types.hpp"

namespace dais {

/// Bayesian linear regression y ~ N(X theta, sigma2 I), theta ~ N(mu_p,
/// Lambda_p^-1). Sufficient statistics are cached at construction so
/// likelihood and gradient evaluations cost O(d^2).
class BlrModel {
 public:
  BlrModel(Matrix X, Vector y, double sigma2, Vector mu_p, Matrix Lambda_p);

  /// Model with no observations; the posterior equals the prior.
  static BlrModel empty(Vector mu_p, Matrix Lambda_p, double sigma2 = 1.0);

  Index n() const { return X_.rows(); }
  Index d() const { return mu_p_.size(); }
  const Matrix& X() const { return X_; }
  const Vector& y() const { return y_; }
  double sigma2() const { return sigma2_; }
  const Vector& mu_p() const { return mu_p_; }
  const Matrix& Lambda_p() const { return Lambda_p_; }

  /// sigma^-2 X^T X
  const Matrix& Lambda_lld() const { return Lambda_lld_; }
  /// sigma^-2 X^T y, i.e. Lambda_lld mu_* without forming mu_*.
  const Vector& lld_shift() const { return lld_shift_; }
  double yty() const { return yty_; }

  double log_likelihood(const Vector& theta) const;
  Vector grad_log_likelihood(const Vector& theta) const;

 private:
  Matrix X_;
  Vector y_;
  double sigma2_;
  Vector mu_p_;
  Matrix Lambda_p_;
  Matrix Lambda_lld_;
  Vector lld_shift_;
  double yty_ = 0.0;
};

class BlrLikelihood final : public LogLikelihood {
 public:
  explicit BlrLikelihood(std::shared_ptr<const BlrModel> model)
      : model_(std::move(model)) {}
  Index dim() const override { return model_->d(); }
  double value(const Vector& theta) const override {
    return model_->log_likelihood(theta);
  }
  Vector gradient(const Vector& theta) const override {
    return model_->grad_log_likelihood(theta);
  }

 private:
  std::shared_ptr<const BlrModel> model_;
};

/// Geometric annealing path from the model prior to its posterior.
std::shared_ptr<GeometricTarget> blr_target(const BlrModel& model);

/// Same path but every gradient call uses a fresh mini-batch of
/// `batch_size` rows drawn uniformly with replacement.
class MinibatchBlrTarget final : public AnnealedTarget {
 public:
  MinibatchBlrTarget(std::shared_ptr<const BlrModel> model,
                     std::size_t batch_size, Rng rng);

  Index dim() const override { return model_->d(); }
  double log_f(double beta, const Vector& theta) const override;
  Vector grad_log_f(double beta, const Vector& theta) const override;
  Vector sample_p0(Rng& rng) const override { return prior_.sample(rng); }
  double log_p0(const Vector& theta) const override {
    return prior_.log_density(theta);
  }
  std::unique_ptr<AnnealedTarget> rebind(Rng stream) const override;

 private:
  std::shared_ptr<const BlrModel> model_;
  GaussianPrior prior_;
  std::size_t batch_size_;
  mutable Rng rng_;
  mutable std::vector<Index> batch_;
};

/// Annealed Gaussian N(mu, Lambda^-1) with Lambda = Lambda_p + beta Lambda_lld.
struct AnnealedGaussian {
  double beta = 0.0;
  Vector mu;
  Matrix Lambda;

  Matrix covariance() const;
  double log_det_Lambda() const;
};

AnnealedGaussian annealed_posterior(const BlrModel& model, double beta);
AnnealedGaussian derive_posterior(const BlrModel& model);

/// log p(D), closed form with Cholesky log-determinants.
double exact_log_ml(const BlrModel& model);

/// Gradient of log f_beta: -Lambda_p (theta - mu_p) + beta/sigma2 X^T (y - X theta).
Vector blr_grad(const BlrModel& model, double beta, const Vector& theta);

/// Mini-batch estimate: the average of single-row estimators scaled by n.
/// Rows may repeat. Throws std::invalid_argument on an empty batch or an
/// out-of-range index.
Vector blr_minibatch_grad(const BlrModel& model, double beta,
                          const Vector& theta, std::span<const Index> batch);

/// `batch_size` row indices drawn uniformly with replacement.
std::vector<Index> sample_batch(Index n, std::size_t batch_size, Rng& rng);

/// Covariance of the mini-batch gradient error at theta = posterior mean,
/// beta = 1, for batches of `batch_size` rows drawn with replacement. This is
/// the Sigma_eps used when the additive noise model stands in for
/// subsampling.
Matrix minibatch_noise_covariance(const BlrModel& model, std::size_t batch_size);

/// The affine leapfrog map on the annealed Gaussian:
///   theta' = A theta + B v + c_vec,   v_hat = C theta + D v + e_vec.
/// With unit mass A = D = I - eta^2/2 Lambda, B = eta I - eta^3/4 Lambda,
/// C = -eta Lambda, c_vec = eta^2/2 Lambda mu, e_vec = eta Lambda mu.
struct UpdateMatrices {
  Matrix A, B, C, D;
  Vector c_vec, e_vec;

  /// [[A, B], [C, D]]
  Matrix transition() const;
  /// [c_vec; e_vec]
  Vector offset() const;
};

/// `mass` may be empty (identity). A diagonal M enters as M^-1 on the
/// position updates.
UpdateMatrices update_matrices(const BlrModel& model, double beta, double eta,
                               const Vector& mass = Vector());

/// Gaussian moments of the joint (theta, v) state after transition k, plus
/// the pre-refresh moments of v_hat_k (absent at k = 0).
struct JointMoments {
  std::size_t k = 0;
  Vector mu_theta;
  Vector mu_v;
  Matrix Sigma;  // 2d x 2d, (theta, v) ordering
  Vector mu_vhat;
  Matrix Sigma_vhat;
  bool noisy = false;

  Index d() const { return mu_theta.size(); }
  Matrix Sigma_theta() const { return Sigma.topLeftCorner(d(), d()); }
  Matrix Sigma_v() const { return Sigma.bottomRightCorner(d(), d()); }
  Matrix Sigma_cross() const { return Sigma.topRightCorner(d(), d()); }
  bool has_prerefresh() const { return mu_vhat.size() == d() && d() > 0; }
};

/// Moment trajectory k = 0..K together with the mass matrix it was run with.
struct MomentPath {
  std::vector<JointMoments> steps;
  Vector mass;

  const JointMoments& final() const { return steps.back(); }
  std::size_t K() const { return steps.size() - 1; }
};

/// Exact propagation of the joint Gaussian through leapfrog + refresh for
/// any gamma. With `sigma_eps`, each gradient call gets additive N(0,
/// Sigma_eps) noise, entering theta with weight eta^2/2 and v_hat with eta
/// (same draw). Throws NumericalFailure if a covariance loses PSD beyond
/// -1e-10 relative.
MomentPath propagate_moments(const BlrModel& model,
                             const AnnealingSchedule& schedule,
                             const StepSizeScheme& steps,
                             const TransitionConfig& config,
                             const std::optional<Matrix>& sigma_eps = std::nullopt);

/// sum_k E[log pi(v_hat_k) - log pi(v_{k-1})] from Gaussian moments.
double expected_kinetic_sum(std::span<const JointMoments> moments,
                            const Vector& mass);
double expected_kinetic_sum(const MomentPath& path);

/// E[L] in closed form.
double expected_bound(const BlrModel& model, const MomentPath& path,
                      const AnnealingSchedule& schedule);

struct GapBreakdown {
  double term1 = 0.0;  // mean error in the posterior metric
  double term2 = 0.0;  // covariance trace error
  double term3 = 0.0;  // log-det ratio minus expected kinetic sum
  double total = 0.0;
};

GapBreakdown gap_breakdown(const BlrModel& model, const MomentPath& path,
                           const AnnealingSchedule& schedule);

/// sum_k eta_k^2 / 2 * Tr(Sigma_eps).
double stochastic_penalty(const StepSizeScheme& steps, const Matrix& sigma_eps);

struct SlopePrediction {
  double slope = 0.0;
  /// The rate result covers 1/4 <= c < 1/2.
  bool valid = false;
};

/// Predicted log-log slope 2c - 1 of gap against K.
SlopePrediction theory_slope(double c);

}  // namespace dais
