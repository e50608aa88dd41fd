#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dais/blr.hpp"

namespace dais {

namespace {

constexpr double kPsdTolerance = 1e-10;

void check_psd(const Matrix& S, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
  const Vector lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (!lambda.allFinite() || lambda.minCoeff() < -kPsdTolerance * scale) {
    throw NumericalFailure("propagated covariance lost positive "
                           "semi-definiteness at step " + std::to_string(k),
                           k);
  }
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("matrix is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// E_q[log N(theta; mu_p, Lambda_p^-1)] for q with mean mu and covariance S.
double expected_log_prior(const BlrModel& model, const Vector& mu,
                          const Matrix& S) {
  const double d = static_cast<double>(model.d());
  const Vector diff = mu - model.mu_p();
  return -0.5 * d * std::log(2.0 * std::numbers::pi) +
         0.5 * log_det_spd(model.Lambda_p()) -
         0.5 * (model.Lambda_p() * S).trace() -
         0.5 * diff.dot(model.Lambda_p() * diff);
}

// E_q[log p(D | theta)].
double expected_log_likelihood(const BlrModel& model, const Vector& mu,
                               const Matrix& S) {
  return model.log_likelihood(mu) - 0.5 * (model.Lambda_lld() * S).trace();
}

void check_path(const BlrModel& model, const MomentPath& path,
                const AnnealingSchedule& schedule) {
  if (path.steps.empty()) throw std::invalid_argument("empty moment path");
  if (path.K() != schedule.steps()) {
    throw std::invalid_argument("moment path and schedule lengths differ");
  }
  for (const auto& m : path.steps) {
    if (m.d() != model.d() || m.Sigma.rows() != 2 * model.d()) {
      throw std::invalid_argument("moment dimension does not match the model");
    }
  }
  if (path.mass.size() != model.d()) {
    throw std::invalid_argument("moment path mass has the wrong length");
  }
}

}  // namespace

MomentPath propagate_moments(const BlrModel& model,
                             const AnnealingSchedule& schedule,
                             const StepSizeScheme& steps,
                             const TransitionConfig& config,
                             const std::optional<Matrix>& sigma_eps) {
  config.validate();
  if (schedule.steps() != steps.steps()) {
    throw std::invalid_argument("schedule and step sizes disagree on K");
  }
  const Index d = model.d();
  if (sigma_eps && (sigma_eps->rows() != d || sigma_eps->cols() != d)) {
    throw std::invalid_argument("noise covariance must be d x d");
  }
  if (sigma_eps) GradientNoiseSpec{*sigma_eps};  // PSD check

  MomentPath path;
  path.mass = config.mass_for(d);
  const Vector minv = path.mass.cwiseInverse();
  const double gamma = config.gamma;

  JointMoments m0;
  m0.k = 0;
  m0.mu_theta = model.mu_p();
  m0.mu_v = Vector::Zero(d);
  m0.Sigma = Matrix::Zero(2 * d, 2 * d);
  m0.Sigma.topLeftCorner(d, d) =
      model.Lambda_p().llt().solve(Matrix::Identity(d, d));
  m0.Sigma.bottomRightCorner(d, d) = path.mass.asDiagonal();
  m0.noisy = sigma_eps.has_value();
  path.steps.reserve(schedule.steps() + 1);
  path.steps.push_back(m0);

  Vector mu(2 * d);
  mu << m0.mu_theta, m0.mu_v;
  Matrix S = m0.Sigma;

  for (std::size_t k = 1; k <= schedule.steps(); ++k) {
    const double eta = steps.at(k);
    const UpdateMatrices u = update_matrices(model, schedule[k], eta, path.mass);
    const Matrix T = u.transition();
    mu = T * mu + u.offset();
    S = T * S * T.transpose();
    if (sigma_eps) {
      // Same eps enters theta (scaled eta^2/2 M^-1) and v_hat (scaled eta).
      Matrix G(2 * d, d);
      G.topRows(d) = (0.5 * eta * eta) * minv.asDiagonal();
      G.bottomRows(d) = eta * Matrix::Identity(d, d);
      S += G * (*sigma_eps) * G.transpose();
    }
    S = 0.5 * (S + S.transpose());

    JointMoments m;
    m.k = k;
    m.noisy = sigma_eps.has_value();
    m.mu_vhat = mu.tail(d);
    m.Sigma_vhat = S.bottomRightCorner(d, d);

    // v = gamma v_hat + sqrt(1 - gamma^2) eps, eps ~ N(0, M).
    mu.tail(d) *= gamma;
    S.bottomRows(d) *= gamma;
    S.rightCols(d) *= gamma;
    S.bottomRightCorner(d, d).diagonal() += (1.0 - gamma * gamma) * path.mass;

    check_psd(S, k);
    m.mu_theta = mu.head(d);
    m.mu_v = mu.tail(d);
    m.Sigma = S;
    path.steps.push_back(std::move(m));
  }
  return path;
}

double expected_kinetic_sum(std::span<const JointMoments> moments,
                            const Vector& mass) {
  if (moments.empty()) throw std::invalid_argument("no moments given");
  const Vector minv = mass.cwiseInverse();
  auto energy = [&minv](const Vector& mu, const Matrix& S) {
    return mu.dot(minv.cwiseProduct(mu)) + (minv.asDiagonal() * S).trace();
  };
  double acc = 0.0;
  for (std::size_t k = 1; k < moments.size(); ++k) {
    const JointMoments& cur = moments[k];
    const JointMoments& prev = moments[k - 1];
    if (!cur.has_prerefresh()) {
      throw std::invalid_argument("step " + std::to_string(k) +
                                  " lacks pre-refresh momentum moments");
    }
    if (cur.d() != mass.size()) throw std::invalid_argument("mass length mismatch");
    acc += -0.5 * energy(cur.mu_vhat, cur.Sigma_vhat) +
           0.5 * energy(prev.mu_v, prev.Sigma_v());
  }
  return acc;
}

double expected_kinetic_sum(const MomentPath& path) {
  return expected_kinetic_sum(path.steps, path.mass);
}

double expected_bound(const BlrModel& model, const MomentPath& path,
                      const AnnealingSchedule& schedule) {
  check_path(model, path, schedule);
  const JointMoments& first = path.steps.front();
  const JointMoments& last = path.final();
  const Matrix S_K = last.Sigma_theta();
  return expected_log_likelihood(model, last.mu_theta, S_K) +
         expected_log_prior(model, last.mu_theta, S_K) -
         expected_log_prior(model, first.mu_theta, first.Sigma_theta()) +
         expected_kinetic_sum(path);
}

GapBreakdown gap_breakdown(const BlrModel& model, const MomentPath& path,
                           const AnnealingSchedule& schedule) {
  check_path(model, path, schedule);
  const AnnealedGaussian post = derive_posterior(model);
  const JointMoments& last = path.final();
  const double d = static_cast<double>(model.d());
  const Vector diff = last.mu_theta - post.mu;

  GapBreakdown g;
  g.term1 = 0.5 * diff.dot(post.Lambda * diff);
  g.term2 = 0.5 * (post.Lambda * last.Sigma_theta()).trace() - 0.5 * d;
  g.term3 = 0.5 * (log_det_spd(model.Lambda_p()) - post.log_det_Lambda()) -
            expected_kinetic_sum(path);
  g.total = g.term1 + g.term2 + g.term3;
  return g;
}

}  // namespace dais
