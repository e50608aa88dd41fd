#pragma once

#include <cstddef>
#include <vector>

#include "dais/types.hpp"

namespace dais {

/// Annealing parameters beta_0 = 0 <= beta_1 <= ... <= beta_K = 1.
class AnnealingSchedule {
 public:
  /// Throws std::invalid_argument unless the list has at least two entries,
  /// starts at 0, ends at 1 and never decreases.
  explicit AnnealingSchedule(std::vector<double> betas);

  std::size_t steps() const { return betas_.size() - 1; }
  double operator[](std::size_t k) const { return betas_[k]; }
  const std::vector<double>& betas() const { return betas_; }

 private:
  std::vector<double> betas_;
};

/// beta_k = k / K. Throws std::invalid_argument for K = 0.
AnnealingSchedule make_linear_schedule(std::size_t K);

/// Per-step leapfrog step sizes eta_1..eta_K.
///
/// The power-law family eta = a * K^(-c) is what the convergence analysis
/// works with; explicit lists are accepted for anything else (including
/// eta = 0 degenerate chains).
struct StepSizeScheme {
  double base = 0.0;
  double exponent = 0.0;
  std::vector<double> per_step;

  std::size_t steps() const { return per_step.size(); }
  /// Step size used for transition k, 1-based like the chain index.
  double at(std::size_t k) const { return per_step.at(k - 1); }

  /// Every step gets `eta`. Requires eta >= 0.
  static StepSizeScheme constant(double eta, std::size_t K);
  /// Requires all entries >= 0 and finite.
  static StepSizeScheme from_list(std::vector<double> etas);
};

/// eta_k = a * K^(-c) for every k. Throws std::invalid_argument unless a > 0
/// and c >= 0.
StepSizeScheme make_stepsize_scheme(double a, double c, std::size_t K);

/// eta = 0.08 * (K / 10)^(-1/4): tuned once at K = 10, then scaled with the
/// c = 1/4 rate.
StepSizeScheme tuned_stepsize_scheme(std::size_t K);

/// Damping gamma and a diagonal mass matrix. An empty mass vector means the
/// identity in whatever dimension the target has.
struct TransitionConfig {
  double gamma = 0.0;
  Vector mass;

  TransitionConfig() = default;
  explicit TransitionConfig(double gamma, Vector mass = Vector());

  /// Diagonal of M resolved for dimension d. Throws if a non-empty mass has
  /// the wrong length.
  Vector mass_for(Index d) const;
  void validate() const;
};

}  // namespace dais
