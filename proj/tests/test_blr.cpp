#include <doctest.h>

#include <cmath>

#include <Eigen/LU>
#include <numeric>
#include <stdexcept>

#include "dais/blr.hpp"
#include "dais/harness.hpp"
#include "dais/sampler.hpp"
#include "oracles/recursions.hpp"

using namespace dais;

TEST_CASE("model validation") {
  CHECK_THROWS_AS(BlrModel(Matrix::Ones(2, 1), Vector::Ones(3), 1.0, Vector::Zero(1),
                           Matrix::Identity(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(BlrModel(Matrix::Ones(2, 1), Vector::Ones(2), 0.0, Vector::Zero(1),
                           Matrix::Identity(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(BlrModel(Matrix::Ones(2, 2), Vector::Ones(2), 1.0, Vector::Zero(1),
                           Matrix::Identity(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(BlrModel::empty(Vector::Zero(2), -Matrix::Identity(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("toy posterior by hand") {
  const BlrModel toy = toy_blr_model();
  const auto post = derive_posterior(toy);
  CHECK(post.Lambda(0, 0) == doctest::Approx(2.0));
  CHECK(post.mu[0] == doctest::Approx(0.5));
  const auto half = annealed_posterior(toy, 0.5);
  CHECK(half.Lambda(0, 0) == doctest::Approx(1.5));
  CHECK(half.mu[0] == doctest::Approx(1.0 / 3.0));
  CHECK(half.covariance()(0, 0) == doctest::Approx(1.0 / 1.5));
  CHECK(half.log_det_Lambda() == doctest::Approx(std::log(1.5)));
}

TEST_CASE("log marginal likelihood") {
  const BlrModel toy = toy_blr_model();
  CHECK(exact_log_ml(toy) == doctest::Approx(-1.515512).epsilon(1e-6));
  CHECK(std::abs(exact_log_ml(toy) - oracle::quadrature_log_ml_1d(toy)) < 1e-8);

  // Scalar closed form: y ~ N(0, s2 + x^2 / lambda).
  const BlrModel other(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, -0.7), 0.5,
                       Vector::Constant(1, 0.3), Matrix::Constant(1, 1, 4.0));
  const double mean = 2.0 * 0.3, var = 0.5 + 4.0 / 4.0;
  const double expect = -0.5 * std::log(2 * M_PI * var) - 0.5 * (-0.7 - mean) * (-0.7 - mean) / var;
  CHECK(exact_log_ml(other) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(oracle::quadrature_log_ml_1d(other) - expect) < 1e-8);

  const BlrModel none = BlrModel::empty(Vector::Zero(3), 2.0 * Matrix::Identity(3, 3));
  CHECK(std::abs(exact_log_ml(none)) < 1e-12);
  CHECK(derive_posterior(none).mu.isZero());
}

TEST_CASE("log marginal likelihood against the multivariate predictive") {
  const BlrModel m = gen_blr_data(6, 3, 21);
  const Matrix cov = m.sigma2() * Matrix::Identity(6, 6) +
                     m.X() * m.Lambda_p().inverse() * m.X().transpose();
  const Vector r = m.y() - m.X() * m.mu_p();
  const double expect = -0.5 * (6 * std::log(2 * M_PI) + std::log(cov.determinant()) +
                                r.dot(cov.llt().solve(r)));
  CHECK(exact_log_ml(m) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("degenerate data n = d = 1") {
  const BlrModel m = gen_blr_data(1, 1, 3);
  CHECK(std::isfinite(exact_log_ml(m)));
  const auto path = propagate_moments(m, make_linear_schedule(4),
                                      StepSizeScheme::constant(0.2, 4), TransitionConfig());
  CHECK(gap_breakdown(m, path, make_linear_schedule(4)).total >= 0.0);
}

TEST_CASE("mini-batch gradients") {
  const BlrModel m = gen_blr_data(50, 3, 8);
  const Vector x = Vector::Constant(3, 0.2);
  std::vector<Index> all(50);
  std::iota(all.begin(), all.end(), 0);
  CHECK((blr_minibatch_grad(m, 0.6, x, all) - blr_grad(m, 0.6, x)).norm() < 1e-10);
  CHECK((blr_grad(m, 0.6, x) - blr_target(m)->grad_log_f(0.6, x)).norm() < 1e-12);
  CHECK_THROWS_AS(blr_minibatch_grad(m, 0.6, x, std::vector<Index>{}), std::invalid_argument);
  CHECK_THROWS_AS(blr_minibatch_grad(m, 0.6, x, std::vector<Index>{50}), std::invalid_argument);

  // Unbiased, with the predicted covariance at the posterior mean.
  const Vector mu = derive_posterior(m).mu;
  const Matrix S = minibatch_noise_covariance(m, 5);
  const Vector g = blr_grad(m, 1.0, mu);
  Rng rng(2);
  const int n = 100000;
  Vector mean = Vector::Zero(3);
  Matrix cov = Matrix::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const auto b = sample_batch(m.n(), 5, rng);
    const Vector e = blr_minibatch_grad(m, 1.0, mu, b) - g;
    mean += e;
    cov += e * e.transpose();
  }
  mean /= n;
  cov /= n;
  CHECK(mean.norm() < 5 * std::sqrt(S.trace() / n));
  CHECK((cov - S).norm() < 0.03 * S.norm());
  CHECK_THROWS_AS(minibatch_noise_covariance(m, 0), std::invalid_argument);
}

TEST_CASE("mini-batch target rebinds per stream") {
  const auto m = std::make_shared<const BlrModel>(gen_blr_data(30, 2, 1));
  const MinibatchBlrTarget t(m, 4, Rng(1));
  const auto a = t.rebind(Rng(9));
  const auto b = t.rebind(Rng(9));
  const Vector x = Vector::Ones(2);
  CHECK(a->grad_log_f(0.5, x) == b->grad_log_f(0.5, x));
  CHECK(t.log_f(0.5, x) == doctest::Approx(blr_target(*m)->log_f(0.5, x)));
  CHECK_THROWS_AS(MinibatchBlrTarget(m, 0, Rng(1)), std::invalid_argument);
}

TEST_CASE("affine update matrices match the generic leapfrog") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + static_cast<Index>(rng() % 10);
    const BlrModel m = gen_blr_data(20 + d, d, rng());
    const double beta = rng.uniform(), eta = 0.5 * rng.uniform();
    const Vector mass = (trial % 2) ? Vector(Vector::Ones(d))
                                    : Vector((0.5 + 2.0 * Vector::Random(d).array().abs()).matrix());
    const TransitionConfig config(0.0, mass);
    const Vector theta = rng.normal_vector(d), v = rng.normal_vector(d);
    const auto lf = leapfrog(theta, v, eta, beta, *blr_target(m), config);
    const auto u = update_matrices(m, beta, eta, mass);
    CHECK((u.A * theta + u.B * v + u.c_vec - lf.theta).norm() < 1e-10);
    CHECK((u.C * theta + u.D * v + u.e_vec - lf.v_hat).norm() < 1e-10);
    Vector z(2 * d);
    z << theta, v;
    Vector expect(2 * d);
    expect << lf.theta, lf.v_hat;
    CHECK((u.transition() * z + u.offset() - expect).norm() < 1e-10);
  }
}

TEST_CASE("rate predictions and penalties") {
  CHECK(theory_slope(0.25).slope == doctest::Approx(-0.5));
  CHECK(theory_slope(0.25).valid);
  CHECK(theory_slope(1.0 / 3.0).slope == doctest::Approx(-1.0 / 3.0));
  CHECK_FALSE(theory_slope(0.5).valid);
  CHECK_FALSE(theory_slope(0.1).valid);
  const Matrix S = Matrix::Identity(2, 2);
  CHECK(stochastic_penalty(StepSizeScheme::constant(0.5, 4), S) == doctest::Approx(1.0));
}
