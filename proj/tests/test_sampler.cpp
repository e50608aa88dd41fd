#include <doctest.h>

#include <cmath>

#include <Eigen/LU>
#include <limits>
#include <stdexcept>

#include "dais/blr.hpp"
#include "dais/harness.hpp"
#include "dais/sampler.hpp"

using namespace dais;

namespace {

class NanGradient final : public AnnealedTarget {
 public:
  Index dim() const override { return 2; }
  double log_f(double, const Vector&) const override { return 0.0; }
  Vector grad_log_f(double beta, const Vector& x) const override {
    if (beta > 0.5) return Vector::Constant(2, std::numeric_limits<double>::quiet_NaN());
    return -x;
  }
  Vector sample_p0(Rng& rng) const override { return rng.normal_vector(2); }
  double log_p0(const Vector& x) const override { return -0.5 * x.squaredNorm(); }
};

}  // namespace

TEST_CASE("leapfrog is time-reversible") {
  const BlrModel model = gen_blr_data(50, 5, 2);
  const auto t = blr_target(model);
  const TransitionConfig config(0.0, Vector::LinSpaced(5, 0.5, 2.0));
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector theta = rng.normal_vector(5);
    const Vector v = rng.normal_vector(5);
    const auto fwd = leapfrog(theta, v, 0.1, 0.6, *t, config);
    const auto back = leapfrog(fwd.theta, -fwd.v_hat, 0.1, 0.6, *t, config);
    CHECK((back.theta - theta).norm() < 1e-12);
    CHECK((back.v_hat + v).norm() < 1e-12);
  }
}

TEST_CASE("leapfrog preserves volume") {
  const BlrModel model = gen_blr_data(50, 3, 6);
  const auto t = blr_target(model);
  const TransitionConfig config(0.0);
  Rng rng(4);
  const Vector theta = rng.normal_vector(3);
  const Vector v = rng.normal_vector(3);
  Matrix J(6, 6);
  const double h = 1e-6;
  for (int j = 0; j < 6; ++j) {
    Vector tp = theta, vp = v, tm = theta, vm = v;
    if (j < 3) {
      tp[j] += h;
      tm[j] -= h;
    } else {
      vp[j - 3] += h;
      vm[j - 3] -= h;
    }
    const auto p = leapfrog(tp, vp, 0.3, 0.8, *t, config);
    const auto m = leapfrog(tm, vm, 0.3, 0.8, *t, config);
    J.col(j) << (p.theta - m.theta) / (2 * h), (p.v_hat - m.v_hat) / (2 * h);
  }
  CHECK(J.determinant() == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("leapfrog edge cases") {
  const auto t = blr_target(toy_blr_model());
  const Vector x = Vector::Constant(1, 0.3), v = Vector::Constant(1, -0.2);
  const auto same = leapfrog(x, v, 0.0, 0.5, *t, TransitionConfig());
  CHECK(same.theta == x);
  CHECK(same.v_hat == v);
  CHECK_THROWS_AS(leapfrog(x, v, -0.1, 0.5, *t, TransitionConfig()), std::invalid_argument);
  CHECK_THROWS_AS(leapfrog(Vector::Zero(2), v, 0.1, 0.5, *t, TransitionConfig()),
                  std::invalid_argument);
}

TEST_CASE("toy leapfrog matches the affine update") {
  const BlrModel toy = toy_blr_model();
  const auto t = blr_target(toy);
  const Vector zero = Vector::Zero(1);
  const auto lf = leapfrog(zero, zero, 0.1, 1.0, *t, TransitionConfig());
  const UpdateMatrices u = update_matrices(toy, 1.0, 0.1);
  CHECK(std::abs(lf.theta[0] - u.c_vec[0]) < 1e-12);
  CHECK(std::abs(lf.v_hat[0] - u.e_vec[0]) < 1e-12);
}

TEST_CASE("refresh") {
  Rng rng(1);
  const Vector v = Vector::Constant(3, 2.0);
  CHECK(refresh(v, 1.0, rng, TransitionConfig()) == v);
  CHECK_THROWS_AS(refresh(v, 1.2, rng, TransitionConfig()), std::invalid_argument);

  // N(0, M) is invariant.
  const Vector mass = Vector::LinSpaced(3, 0.5, 4.0);
  const TransitionConfig config(0.7, mass);
  Vector second = Vector::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vector v0 = mass.cwiseSqrt().cwiseProduct(rng.normal_vector(3));
    const Vector v1 = refresh(v0, 0.7, rng, config);
    second += v1.cwiseProduct(v1);
  }
  CHECK(((second / n).cwiseQuotient(mass) - Vector::Ones(3)).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("momentum log-density") {
  const Vector mass = Vector::Constant(2, 4.0);
  const Vector v = Vector::Constant(2, 2.0);
  CHECK(log_momentum_density(v, mass) ==
        doctest::Approx(-std::log(2 * M_PI) - std::log(4.0) - 1.0));
}

TEST_CASE("chains are deterministic and thread-count independent") {
  const BlrModel model = gen_blr_data(100, 3, 5);
  const auto t = blr_target(model);
  const auto sched = make_linear_schedule(20);
  const auto steps = StepSizeScheme::constant(0.2, 20);
  const TransitionConfig config(0.5);
  const auto a = dais_chain(*t, sched, steps, config, Rng(3));
  const auto b = dais_chain(*t, sched, steps, config, Rng(3));
  CHECK(a.log_weight == b.log_weight);
  CHECK(a.state.theta == b.state.theta);

  const auto m1 = dais_bound_mc(*t, sched, steps, config, 64, Rng(4), 1);
  const auto m4 = dais_bound_mc(*t, sched, steps, config, 64, Rng(4), 4);
  CHECK(m1.samples == m4.samples);
  CHECK(m1.stderr_ > 0.0);
  CHECK_THROWS_AS(dais_bound_mc(*t, sched, steps, config, 1, Rng(4)), std::invalid_argument);
  CHECK_THROWS_AS(dais_chain(*t, make_linear_schedule(5), steps, config, Rng(3)),
                  std::invalid_argument);
}

TEST_CASE("observer sees pre- and post-refresh momentum") {
  const auto t = blr_target(gen_blr_data(20, 2, 1));
  std::size_t calls = 0;
  dais_chain(*t, make_linear_schedule(6), StepSizeScheme::constant(0.1, 6),
             TransitionConfig(1.0), Rng(1),
             [&](std::size_t k, const Vector&, const Vector& vh, const Vector& v) {
               CHECK(k == ++calls);
               CHECK(vh == v);
             });
  CHECK(calls == 6);
}

TEST_CASE("numerical failure carries location") {
  const NanGradient t;
  try {
    dais_chain(t, make_linear_schedule(4), StepSizeScheme::constant(0.1, 4),
               TransitionConfig(), Rng(1));
    FAIL("expected NumericalFailure");
  } catch (const NumericalFailure& e) {
    REQUIRE(e.step().has_value());
    CHECK(*e.step() == 3);
    CHECK(e.theta().size() == 2);
  }
  try {
    dais_bound_mc(t, make_linear_schedule(4), StepSizeScheme::constant(0.1, 4),
                  TransitionConfig(), 8, Rng(1), 3);
    FAIL("expected NumericalFailure");
  } catch (const NumericalFailure& e) {
    CHECK(e.chain() == std::optional<std::size_t>(0));
  }
}

TEST_CASE("importance-weight combination") {
  const std::vector<double> w{1000.0, 1000.0};
  CHECK(iw_combine(w) == doctest::Approx(1000.0));
  const std::vector<double> v{0.0, std::log(3.0)};
  CHECK(iw_combine(v) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("long toy chains stay below log Z") {
  const BlrModel toy = toy_blr_model();
  const double log_z = exact_log_ml(toy);
  const auto est = dais_bound_mc(*blr_target(toy), make_linear_schedule(1000),
                                 StepSizeScheme::constant(0.1, 1000), TransitionConfig(0.0),
                                 200, Rng(12));
  CHECK(est.mean <= log_z + 3 * est.stderr_);
}

TEST_CASE("Metropolis-corrected AIS baseline") {
  const BlrModel model = gen_blr_data(100, 2, 3);
  const double log_z = exact_log_ml(model);
  const auto t = blr_target(model);
  std::vector<double> ws;
  double acc = 0.0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto r = ais_mh_chain(*t, make_linear_schedule(50),
                                StepSizeScheme::constant(0.3, 50), TransitionConfig(0.9),
                                Rng(i), 2);
    ws.push_back(r.log_weight);
    acc += r.acceptance_rate;
  }
  CHECK(acc / 200 > 0.5);
  double mean = 0.0;
  for (double w : ws) mean += w;
  mean /= 200;
  CHECK(mean <= log_z + 0.05);
  CHECK(iw_combine(ws) == doctest::Approx(log_z).epsilon(0.01));
}
