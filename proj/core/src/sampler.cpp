#include "dais/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

namespace dais {

namespace {

void check_finite(const Vector& x, const char* what, std::size_t step,
                  const Vector& where) {
  if (!x.allFinite()) {
    throw NumericalFailure(std::string(what) + " is not finite", step, where);
  }
}

void check_lengths(const AnnealedTarget& target, const Vector& theta,
                   const Vector& v) {
  if (theta.size() != target.dim() || v.size() != target.dim()) {
    throw std::invalid_argument("state length does not match target dimension");
  }
}

void check_plan(const AnnealingSchedule& schedule, const StepSizeScheme& steps) {
  if (schedule.steps() != steps.steps()) {
    throw std::invalid_argument("schedule has " +
                                std::to_string(schedule.steps()) +
                                " transitions but step sizes cover " +
                                std::to_string(steps.steps()));
  }
}

}  // namespace

LeapfrogResult leapfrog(const Vector& theta, const Vector& v, double eta,
                        double beta, const AnnealedTarget& target,
                        const TransitionConfig& config) {
  check_lengths(target, theta, v);
  if (!(eta >= 0.0)) throw std::invalid_argument("leapfrog needs eta >= 0");
  if (eta == 0.0) return {theta, v};

  const Vector inv_mass = config.mass_for(target.dim()).cwiseInverse();
  const Vector mid = theta + 0.5 * eta * inv_mass.cwiseProduct(v);
  const Vector grad = target.grad_log_f(beta, mid);
  if (!grad.allFinite()) {
    throw NumericalFailure("gradient is not finite at leapfrog midpoint",
                           std::nullopt, mid);
  }
  LeapfrogResult out;
  out.v_hat = v + eta * grad;
  out.theta = mid + 0.5 * eta * inv_mass.cwiseProduct(out.v_hat);
  return out;
}

Vector refresh_with(const Vector& v_hat, double gamma, const Vector& z,
                    const TransitionConfig& config) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
  if (gamma == 1.0) return v_hat;
  const Vector sqrt_mass = config.mass_for(v_hat.size()).cwiseSqrt();
  return gamma * v_hat +
         std::sqrt(1.0 - gamma * gamma) * sqrt_mass.cwiseProduct(z);
}

Vector refresh(const Vector& v_hat, double gamma, Rng& rng,
               const TransitionConfig& config) {
  return refresh_with(v_hat, gamma, rng.normal_vector(v_hat.size()), config);
}

double log_momentum_density(const Vector& v, const Vector& mass) {
  const double d = static_cast<double>(v.size());
  return -0.5 * d * std::log(2.0 * std::numbers::pi) -
         0.5 * mass.array().log().sum() -
         0.5 * (v.array().square() / mass.array()).sum();
}

ChainResult run_dais(const AnnealedTarget& target,
                     const AnnealingSchedule& schedule,
                     const StepSizeScheme& steps, const TransitionConfig& config,
                     Vector theta0, Vector v0, const RefreshNoise& noise,
                     const StepObserver& observer) {
  check_plan(schedule, steps);
  check_lengths(target, theta0, v0);
  config.validate();
  const Vector mass = config.mass_for(target.dim());

  ChainState st;
  st.theta = std::move(theta0);
  st.v = std::move(v0);
  st.k = 0;
  st.bound_acc = -target.log_p0(st.theta);
  if (!std::isfinite(st.bound_acc)) {
    throw NumericalFailure("log p_0(theta_0) is not finite", 0, st.theta);
  }

  const std::size_t K = schedule.steps();
  for (std::size_t k = 1; k <= K; ++k) {
    LeapfrogResult lf;
    try {
      lf = leapfrog(st.theta, st.v, steps.at(k), schedule[k], target, config);
    } catch (const NumericalFailure& e) {
      throw NumericalFailure(e.what(), k, e.theta());
    }
    check_finite(lf.theta, "theta", k, lf.theta);
    const double kinetic = log_momentum_density(lf.v_hat, mass) -
                           log_momentum_density(st.v, mass);
    st.v = config.gamma == 1.0 ? lf.v_hat
                               : refresh_with(lf.v_hat, config.gamma, noise(k),
                                              config);
    st.theta = std::move(lf.theta);
    st.bound_acc += kinetic;
    st.k = k;
    if (!std::isfinite(st.bound_acc)) {
      throw NumericalFailure("log-weight is not finite", k, st.theta);
    }
    if (observer) observer(k, st.theta, lf.v_hat, st.v);
  }

  ChainResult out;
  out.log_weight = st.bound_acc + target.log_f(1.0, st.theta);
  if (!std::isfinite(out.log_weight)) {
    throw NumericalFailure("log-weight is not finite", K, st.theta);
  }
  st.bound_acc = out.log_weight;
  out.state = std::move(st);
  return out;
}

ChainResult dais_chain(const AnnealedTarget& target,
                       const AnnealingSchedule& schedule,
                       const StepSizeScheme& steps,
                       const TransitionConfig& config, const Rng& rng,
                       const StepObserver& observer) {
  Rng init = rng.split(0);
  Vector theta0 = target.sample_p0(init);
  Vector v0 =
      config.mass_for(target.dim()).cwiseSqrt().cwiseProduct(
          init.normal_vector(target.dim()));
  const Index d = target.dim();
  const RefreshNoise noise = [&rng, d](std::size_t k) {
    Rng stream = rng.split(k);
    return stream.normal_vector(d);
  };
  return run_dais(target, schedule, steps, config, std::move(theta0),
                  std::move(v0), noise, observer);
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
}

McEstimate dais_bound_mc(const AnnealedTarget& target,
                         const AnnealingSchedule& schedule,
                         const StepSizeScheme& steps,
                         const TransitionConfig& config, std::size_t chains,
                         const Rng& rng, unsigned threads) {
  if (chains < 2) throw std::invalid_argument("dais_bound_mc needs S >= 2");
  check_plan(schedule, steps);

  McEstimate est;
  est.samples.assign(chains, 0.0);
  std::mutex failure_mutex;
  std::optional<NumericalFailure> failure;

  parallel_for(chains, threads, [&](std::size_t i) {
    const Rng chain_rng = rng.split(i);
    // Targets with their own randomness get a per-chain stream.
    const auto bound = target.rebind(chain_rng.split(~std::uint64_t{0}));
    const AnnealedTarget& t = bound ? *bound : target;
    try {
      est.samples[i] = dais_chain(t, schedule, steps, config, chain_rng).log_weight;
    } catch (const NumericalFailure& e) {
      std::lock_guard lock(failure_mutex);
      if (!failure || failure->chain().value_or(chains) > i) {
        failure = e.with_chain(i);
      }
    }
  });
  if (failure) throw *failure;

  const double n = static_cast<double>(chains);
  double mean = 0.0;
  for (double x : est.samples) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : est.samples) ss += (x - mean) * (x - mean);
  est.mean = mean;
  est.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  return est;
}

double iw_combine(std::span<const double> log_weights) {
  if (log_weights.empty()) {
    throw std::invalid_argument("iw_combine needs at least one log-weight");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("log-weights must be finite");
    top = std::max(top, w);
  }
  double acc = 0.0;
  for (double w : log_weights) acc += std::exp(w - top);
  return top + std::log(acc / static_cast<double>(log_weights.size()));
}

AisResult ais_mh_chain(const AnnealedTarget& target,
                       const AnnealingSchedule& schedule,
                       const StepSizeScheme& steps,
                       const TransitionConfig& config, const Rng& rng,
                       std::size_t leapfrog_steps) {
  check_plan(schedule, steps);
  config.validate();
  if (leapfrog_steps == 0) {
    throw std::invalid_argument("ais_mh_chain needs at least one leapfrog step");
  }
  const Index d = target.dim();
  const Vector mass = config.mass_for(d);

  Rng init = rng.split(0);
  Vector theta = target.sample_p0(init);
  Vector v = mass.cwiseSqrt().cwiseProduct(init.normal_vector(d));

  double log_w = 0.0;
  std::size_t accepted = 0;
  const std::size_t K = schedule.steps();
  for (std::size_t k = 1; k <= K; ++k) {
    const double beta = schedule[k];
    const double inc =
        target.log_f(beta, theta) - target.log_f(schedule[k - 1], theta);
    if (!std::isfinite(inc)) {
      throw NumericalFailure("AIS weight increment is not finite", k, theta);
    }
    log_w += inc;

    Rng step_rng = rng.split(k);
    const double eta = steps.at(k);
    Vector prop_theta = theta;
    Vector prop_v = v;
    bool finite = true;
    try {
      for (std::size_t l = 0; l < leapfrog_steps; ++l) {
        LeapfrogResult lf = leapfrog(prop_theta, prop_v, eta, beta, target, config);
        prop_theta = std::move(lf.theta);
        prop_v = std::move(lf.v_hat);
      }
    } catch (const NumericalFailure&) {
      finite = false;
    }
    const double h_old = target.log_f(beta, theta) + log_momentum_density(v, mass);
    double h_new = -std::numeric_limits<double>::infinity();
    if (finite && prop_theta.allFinite() && prop_v.allFinite()) {
      h_new = target.log_f(beta, prop_theta) + log_momentum_density(prop_v, mass);
    }
    const double log_accept = std::isfinite(h_new) ? h_new - h_old
                                                   : -std::numeric_limits<double>::infinity();
    if (std::log(step_rng.uniform()) < log_accept) {
      theta = std::move(prop_theta);
      v = std::move(prop_v);
      ++accepted;
    } else {
      v = -v;
    }
    v = refresh(v, config.gamma, step_rng, config);
  }

  AisResult out;
  out.theta = std::move(theta);
  out.log_weight = log_w;
  out.acceptance_rate =
      K == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(K);
  return out;
}

}  // namespace dais
