#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dais/rng.hpp"
#include "dais/schedule.hpp"
#include "dais/target.hpp"
#include "dais/types.hpp"

namespace dais {

struct LeapfrogResult {
  Vector theta;
  Vector v_hat;
};

/// One leapfrog step on log f_beta: half position step, full momentum kick
/// at the midpoint, half position step. eta = 0 returns the inputs.
///
/// Throws NumericalFailure (carrying the midpoint) if the gradient is not
/// finite, std::invalid_argument for eta < 0 or mismatched lengths.
LeapfrogResult leapfrog(const Vector& theta, const Vector& v, double eta,
                        double beta, const AnnealedTarget& target,
                        const TransitionConfig& config);

/// v = gamma * v_hat + sqrt(1 - gamma^2) * eps, eps ~ N(0, M).
Vector refresh(const Vector& v_hat, double gamma, Rng& rng,
               const TransitionConfig& config);

/// Same map with the standard-normal draw supplied; eps = sqrt(M) * z.
Vector refresh_with(const Vector& v_hat, double gamma, const Vector& z,
                    const TransitionConfig& config);

/// log N(v; 0, M) for diagonal M.
double log_momentum_density(const Vector& v, const Vector& mass);

struct ChainState {
  Vector theta;
  Vector v;
  std::size_t k = 0;
  /// Running log-weight; -log p_0(theta_0) at k = 0.
  double bound_acc = 0.0;
};

struct ChainResult {
  ChainState state;
  /// Single-sample log-weight L with E[exp(L)] = Z.
  double log_weight = 0.0;
};

/// Standard-normal draw (length d) used by the refresh after transition k.
using RefreshNoise = std::function<Vector(std::size_t k)>;

/// Called after every transition with theta_k, v_hat_k (pre-refresh) and
/// v_k (post-refresh).
using StepObserver = std::function<void(std::size_t k, const Vector& theta,
                                        const Vector& v_hat, const Vector& v)>;

/// Runs the DAIS transitions from a given (theta_0, v_0) with caller-supplied
/// refresh noise. This is the shared core used by dais_chain and by the
/// reversible implementation's equivalence checks.
ChainResult run_dais(const AnnealedTarget& target,
                     const AnnealingSchedule& schedule,
                     const StepSizeScheme& steps, const TransitionConfig& config,
                     Vector theta0, Vector v0, const RefreshNoise& noise,
                     const StepObserver& observer = {});

/// One DAIS chain. theta_0 and then v_0 are drawn from rng.split(0); the
/// refresh after transition k uses rng.split(k).
ChainResult dais_chain(const AnnealedTarget& target,
                       const AnnealingSchedule& schedule,
                       const StepSizeScheme& steps,
                       const TransitionConfig& config, const Rng& rng,
                       const StepObserver& observer = {});

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::vector<double> samples;
};

/// Mean and standard error of L over `chains` independent chains; chain i
/// runs on rng.split(i). `threads` = 0 picks hardware concurrency. Results
/// do not depend on the thread count.
McEstimate dais_bound_mc(const AnnealedTarget& target,
                         const AnnealingSchedule& schedule,
                         const StepSizeScheme& steps,
                         const TransitionConfig& config, std::size_t chains,
                         const Rng& rng, unsigned threads = 0);

/// log((1/S) sum_i exp(w_i)), max-shifted.
double iw_combine(std::span<const double> log_weights);

struct AisResult {
  Vector theta;
  double log_weight = 0.0;
  double acceptance_rate = 0.0;
};

/// AIS baseline with Metropolis-corrected HMC transitions: the weight picks
/// up log f_{beta_k}(theta_{k-1}) - log f_{beta_{k-1}}(theta_{k-1}), then
/// `leapfrog_steps` leapfrog steps are proposed and accepted on the joint
/// Hamiltonian (momentum negated on rejection), then momentum is partially
/// refreshed with gamma.
AisResult ais_mh_chain(const AnnealedTarget& target,
                       const AnnealingSchedule& schedule,
                       const StepSizeScheme& steps,
                       const TransitionConfig& config, const Rng& rng,
                       std::size_t leapfrog_steps = 1);

/// Shared parallel-for over [0, count) used by the Monte Carlo drivers.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace dais
