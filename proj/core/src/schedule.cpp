#include "dais/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dais {

AnnealingSchedule::AnnealingSchedule(std::vector<double> betas)
    : betas_(std::move(betas)) {
  if (betas_.size() < 2) {
    throw std::invalid_argument("annealing schedule needs at least K = 1");
  }
  if (betas_.front() != 0.0 || betas_.back() != 1.0) {
    throw std::invalid_argument("annealing schedule must run from 0 to 1");
  }
  for (std::size_t k = 1; k < betas_.size(); ++k) {
    if (!(betas_[k] >= betas_[k - 1])) {
      throw std::invalid_argument("annealing schedule decreases at step " +
                                  std::to_string(k));
    }
  }
}

AnnealingSchedule make_linear_schedule(std::size_t K) {
  if (K == 0) throw std::invalid_argument("linear schedule needs K >= 1");
  std::vector<double> betas(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    betas[k] = static_cast<double>(k) / static_cast<double>(K);
  }
  return AnnealingSchedule(std::move(betas));
}

StepSizeScheme StepSizeScheme::constant(double eta, std::size_t K) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("step size must be finite and non-negative");
  }
  StepSizeScheme s;
  s.base = eta;
  s.exponent = 0.0;
  s.per_step.assign(K, eta);
  return s;
}

StepSizeScheme StepSizeScheme::from_list(std::vector<double> etas) {
  for (double e : etas) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument("step sizes must be finite and non-negative");
    }
  }
  StepSizeScheme s;
  s.base = etas.empty() ? 0.0 : etas.front();
  s.per_step = std::move(etas);
  return s;
}

StepSizeScheme make_stepsize_scheme(double a, double c, std::size_t K) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("step size base a must be positive");
  }
  if (!(c >= 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("step size exponent c must be >= 0");
  }
  if (K == 0) throw std::invalid_argument("step size scheme needs K >= 1");
  StepSizeScheme s;
  s.base = a;
  s.exponent = c;
  s.per_step.assign(K, a * std::pow(static_cast<double>(K), -c));
  return s;
}

StepSizeScheme tuned_stepsize_scheme(std::size_t K) {
  return make_stepsize_scheme(0.08 * std::pow(10.0, 0.25), 0.25, K);
}

TransitionConfig::TransitionConfig(double gamma_, Vector mass_)
    : gamma(gamma_), mass(std::move(mass_)) {
  validate();
}

void TransitionConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
  for (Index i = 0; i < mass.size(); ++i) {
    if (!(mass[i] > 0.0) || !std::isfinite(mass[i])) {
      throw std::invalid_argument("mass entries must be positive and finite");
    }
  }
}

Vector TransitionConfig::mass_for(Index d) const {
  if (mass.size() == 0) return Vector::Ones(d);
  if (mass.size() != d) {
    throw std::invalid_argument("mass vector has length " +
                                std::to_string(mass.size()) + ", expected " +
                                std::to_string(d));
  }
  return mass;
}

}  // namespace dais
