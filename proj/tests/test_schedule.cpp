#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dais/schedule.hpp"

using namespace dais;

TEST_CASE("annealing schedule validation") {
  CHECK_NOTHROW(AnnealingSchedule({0.0, 0.5, 1.0}));
  CHECK_THROWS_AS(AnnealingSchedule({0.0}), std::invalid_argument);
  CHECK_THROWS_AS(AnnealingSchedule({0.1, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(AnnealingSchedule({0.0, 0.9}), std::invalid_argument);
  CHECK_THROWS_AS(AnnealingSchedule({0.0, 0.6, 0.5, 1.0}), std::invalid_argument);
  CHECK_NOTHROW(AnnealingSchedule({0.0, 0.5, 0.5, 1.0}));
}

TEST_CASE("linear schedule") {
  const auto s = make_linear_schedule(4);
  CHECK(s.steps() == 4);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(0.25));
  CHECK(s[4] == 1.0);
  CHECK_THROWS_AS(make_linear_schedule(0), std::invalid_argument);
}

TEST_CASE("power-law step sizes") {
  const auto st = make_stepsize_scheme(0.4, 0.25, 16);
  CHECK(st.steps() == 16);
  CHECK(st.at(1) == doctest::Approx(0.2));
  CHECK(st.at(16) == doctest::Approx(0.2));
  CHECK_THROWS_AS(make_stepsize_scheme(0.0, 0.25, 16), std::invalid_argument);
  CHECK_THROWS_AS(make_stepsize_scheme(0.1, -0.1, 16), std::invalid_argument);

  const auto tuned = tuned_stepsize_scheme(10);
  CHECK(tuned.at(1) == doctest::Approx(0.08));
  CHECK(tuned_stepsize_scheme(160).at(1) == doctest::Approx(0.04));
}

TEST_CASE("explicit step lists") {
  CHECK(StepSizeScheme::constant(0.0, 3).at(3) == 0.0);
  CHECK_THROWS_AS(StepSizeScheme::constant(-0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(StepSizeScheme::from_list({0.1, NAN}), std::invalid_argument);
  CHECK(StepSizeScheme::from_list({0.1, 0.2}).at(2) == 0.2);
}

TEST_CASE("transition config") {
  CHECK_THROWS_AS(TransitionConfig(1.5), std::invalid_argument);
  CHECK_THROWS_AS(TransitionConfig(-0.1), std::invalid_argument);
  const TransitionConfig unit(0.9);
  CHECK(unit.mass_for(3) == Vector::Ones(3));
  const TransitionConfig massive(0.5, Vector::Constant(2, 3.0));
  CHECK(massive.mass_for(2)[1] == 3.0);
  CHECK_THROWS_AS(massive.mass_for(3), std::invalid_argument);
  CHECK_THROWS_AS(TransitionConfig(0.5, Vector::Constant(2, -1.0)), std::invalid_argument);
}
