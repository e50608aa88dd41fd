#include "dais/reversible.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dais {

namespace {

constexpr std::uint32_t kGammaDen = std::uint32_t{1} << kGammaBits;

std::uint32_t gamma_numerator(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
  const double g = std::nearbyint(gamma * kGammaDen);
  if (g == 0.0) {
    throw Unsupported(
        "damping gamma quantizes to 0; full refreshment cannot be reversed");
  }
  return static_cast<std::uint32_t>(g);
}

using IntVector = FixedPoint::IntVector;

void add_wrapping(IntVector& x, const IntVector& y) {
  for (Index i = 0; i < x.size(); ++i) {
    x[i] = static_cast<std::int64_t>(static_cast<std::uint64_t>(x[i]) +
                                     static_cast<std::uint64_t>(y[i]));
  }
}

void sub_wrapping(IntVector& x, const IntVector& y) {
  for (Index i = 0; i < x.size(); ++i) {
    x[i] = static_cast<std::int64_t>(static_cast<std::uint64_t>(x[i]) -
                                     static_cast<std::uint64_t>(y[i]));
  }
}

struct FloorDiv {
  std::int64_t q;
  std::uint32_t r;
};

FloorDiv floor_div(std::int64_t x, std::uint32_t m) {
  const auto mm = static_cast<std::int64_t>(m);
  std::int64_t q = x / mm;
  std::int64_t r = x % mm;
  if (r < 0) {
    --q;
    r += mm;
  }
  return {q, static_cast<std::uint32_t>(r)};
}

void check_inputs(const AnnealedTarget& target, const AnnealingSchedule& schedule,
                  const StepSizeScheme& steps, const TransitionConfig& config) {
  config.validate();
  if (schedule.steps() != steps.steps()) {
    throw std::invalid_argument("schedule and step sizes disagree on K");
  }
  if (target.rebind(Rng(0)) != nullptr) {
    throw Unsupported("reversible chains need a deterministic gradient");
  }
}

Vector checked_gradient(const AnnealedTarget& target, double beta,
                        const Vector& mid, std::size_t k) {
  Vector grad = target.grad_log_f(beta, mid);
  if (!grad.allFinite()) {
    throw NumericalFailure("gradient is not finite at leapfrog midpoint", k, mid);
  }
  return grad;
}

}  // namespace

Vector seed_noise(SeedState s, Index d) { return Rng(s.s).normal_vector(d); }

RefreshNoise seeded_refresh_noise(SeedState s0, Index d) {
  struct Cursor {
    std::size_t k = 0;
    SeedState s;
  };
  auto cursor = std::make_shared<Cursor>(Cursor{0, s0});
  return [cursor, s0, d](std::size_t k) {
    if (k < cursor->k) *cursor = Cursor{0, s0};
    while (cursor->k < k) {
      cursor->s = forward_seed(cursor->s);
      ++cursor->k;
    }
    return seed_noise(cursor->s, d);
  };
}

std::pair<Vector, Vector> seeded_initial_state(const AnnealedTarget& target,
                                               const TransitionConfig& config,
                                               SeedState s0) {
  Rng init = Rng(s0.s).split(0);
  Vector theta0 = target.sample_p0(init);
  Vector v0 = config.mass_for(target.dim()).cwiseSqrt().cwiseProduct(
      init.normal_vector(target.dim()));
  return {std::move(theta0), std::move(v0)};
}

FixedPoint::FixedPoint(int frac_bits) : frac_bits_(frac_bits) {
  if (frac_bits < 1 || frac_bits > 62) {
    throw std::invalid_argument("fractional bits must lie in [1, 62]");
  }
  scale_ = std::ldexp(1.0, frac_bits);
  scale_inv_ = std::ldexp(1.0, -frac_bits);
}

std::int64_t FixedPoint::to_fixed(double x) const {
  const double y = std::nearbyint(x * scale_);
  constexpr double kLimit = 9223372036854775808.0;  // 2^63
  if (!std::isfinite(y) || y >= kLimit || y < -kLimit) {
    throw NumericalFailure("value " + std::to_string(x) +
                           " does not fit the fixed-point range");
  }
  return static_cast<std::int64_t>(y);
}

double FixedPoint::to_double(std::int64_t x) const {
  return static_cast<double>(x) * scale_inv_;
}

IntVector FixedPoint::to_fixed(const Vector& x) const {
  IntVector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = to_fixed(x[i]);
  return out;
}

Vector FixedPoint::to_double(const IntVector& x) const {
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = to_double(x[i]);
  return out;
}

double quantize_gamma(double gamma) {
  return static_cast<double>(gamma_numerator(gamma)) / kGammaDen;
}

ReversibleForwardResult reversible_forward(const AnnealedTarget& target,
                                           const AnnealingSchedule& schedule,
                                           const StepSizeScheme& steps,
                                           const TransitionConfig& config,
                                           SeedState s0,
                                           const ReversibleOptions& options) {
  check_inputs(target, schedule, steps, config);
  const Index d = target.dim();
  const Vector mass = config.mass_for(d);
  const Vector inv_mass = mass.cwiseInverse();
  const Vector sqrt_mass = mass.cwiseSqrt();
  const bool fixed = options.mode == ReversibleMode::fixedpoint;

  Vector theta, v;
  if (options.theta0 && options.v0) {
    theta = *options.theta0;
    v = *options.v0;
  } else {
    auto init = seeded_initial_state(target, config, s0);
    theta = options.theta0.value_or(init.first);
    v = options.v0.value_or(init.second);
  }
  if (theta.size() != d || v.size() != d) {
    throw std::invalid_argument("initial state length does not match target");
  }

  ReversibleForwardResult out;
  SeedState s = s0;
  const std::size_t K = schedule.steps();

  if (!fixed) {
    out.gamma_eff = config.gamma;
    out.buffer = InfoBuffer(1, 1, options.max_buffer_bytes);
    double acc = -target.log_p0(theta);
    for (std::size_t k = 1; k <= K; ++k) {
      LeapfrogResult lf;
      try {
        lf = leapfrog(theta, v, steps.at(k), schedule[k], target, config);
      } catch (const NumericalFailure& e) {
        throw NumericalFailure(e.what(), k, e.theta());
      }
      acc += log_momentum_density(lf.v_hat, mass) - log_momentum_density(v, mass);
      s = forward_seed(s);
      v = config.gamma == 1.0
              ? lf.v_hat
              : refresh_with(lf.v_hat, config.gamma, seed_noise(s, d), config);
      theta = std::move(lf.theta);
    }
    out.log_weight = acc + target.log_f(1.0, theta);
    out.state.theta = std::move(theta);
    out.state.v = std::move(v);
  } else {
    const std::uint32_t num = gamma_numerator(config.gamma);
    const bool damp = num != kGammaDen;
    out.gamma_eff = static_cast<double>(num) / kGammaDen;
    const double noise_coef = std::sqrt(1.0 - out.gamma_eff * out.gamma_eff);
    out.buffer = InfoBuffer(num, kGammaDen, options.max_buffer_bytes);
    InfoBuffer& buf = out.buffer;

    const FixedPoint fp(options.frac_bits);
    IntVector theta_fx = fp.to_fixed(theta);
    IntVector v_fx = fp.to_fixed(v);
    double acc = -target.log_p0(fp.to_double(theta_fx));
    for (std::size_t k = 1; k <= K; ++k) {
      const double eta = steps.at(k);
      add_wrapping(theta_fx,
                   fp.to_fixed(Vector(0.5 * eta * inv_mass.cwiseProduct(fp.to_double(v_fx)))));
      const Vector grad =
          checked_gradient(target, schedule[k], fp.to_double(theta_fx), k);
      IntVector vhat_fx = v_fx;
      add_wrapping(vhat_fx, fp.to_fixed(Vector(eta * grad)));
      const Vector vhat = fp.to_double(vhat_fx);
      add_wrapping(theta_fx, fp.to_fixed(Vector(0.5 * eta * inv_mass.cwiseProduct(vhat))));
      acc += log_momentum_density(vhat, mass) -
             log_momentum_density(fp.to_double(v_fx), mass);

      s = forward_seed(s);
      if (damp) {
        // x -> x * num / den, exact: the remainder mod den goes on the
        // stack and the low digit mod num comes back off it.
        for (Index i = 0; i < d; ++i) {
          const FloorDiv qr = floor_div(vhat_fx[i], kGammaDen);
          buf.push(qr.r, kGammaDen);
          const std::uint32_t low = buf.pop(num);
          vhat_fx[i] = static_cast<std::int64_t>(num) * qr.q + low;
        }
        add_wrapping(vhat_fx, fp.to_fixed(Vector(
                                  noise_coef * sqrt_mass.cwiseProduct(seed_noise(s, d)))));
      }
      v_fx = std::move(vhat_fx);
    }
    out.log_weight = acc + target.log_f(1.0, fp.to_double(theta_fx));
    out.state.theta = fp.to_double(theta_fx);
    out.state.v = fp.to_double(v_fx);
    out.state.theta_fx = std::move(theta_fx);
    out.state.v_fx = std::move(v_fx);
  }

  if (!std::isfinite(out.log_weight)) {
    throw NumericalFailure("log-weight is not finite", K, out.state.theta);
  }
  out.state.seed = s;
  out.buffer.set_seeds(s0, s);
  return out;
}

ReversibleState reversible_backward(const AnnealedTarget& target,
                                    const AnnealingSchedule& schedule,
                                    const StepSizeScheme& steps,
                                    const TransitionConfig& config,
                                    const ReversibleState& final_state,
                                    InfoBuffer& buffer,
                                    const ReversibleOptions& options) {
  check_inputs(target, schedule, steps, config);
  if (!(final_state.seed == buffer.seed_end())) {
    throw BufferCorruption("final seed does not match the buffer's forward pass");
  }
  const Index d = target.dim();
  const Vector mass = config.mass_for(d);
  const Vector inv_mass = mass.cwiseInverse();
  const Vector sqrt_mass = mass.cwiseSqrt();
  const std::size_t K = schedule.steps();
  SeedState s = final_state.seed;
  ReversibleState out;

  if (options.mode == ReversibleMode::floating) {
    const double gamma = config.gamma;
    if (gamma == 0.0) {
      throw Unsupported("full refreshment cannot be reversed");
    }
    const double noise_coef = std::sqrt(1.0 - gamma * gamma);
    Vector theta = final_state.theta;
    Vector v = final_state.v;
    if (theta.size() != d || v.size() != d) {
      throw std::invalid_argument("final state length does not match target");
    }
    for (std::size_t k = K; k >= 1; --k) {
      const double eta = steps.at(k);
      Vector vhat = gamma == 1.0
                        ? v
                        : Vector((v - noise_coef * sqrt_mass.cwiseProduct(
                                                   seed_noise(s, d))) /
                                 gamma);
      s = backward_seed(s);
      const Vector mid = theta - 0.5 * eta * inv_mass.cwiseProduct(vhat);
      v = vhat - eta * checked_gradient(target, schedule[k], mid, k);
      theta = mid - 0.5 * eta * inv_mass.cwiseProduct(v);
    }
    out.theta = std::move(theta);
    out.v = std::move(v);
  } else {
    const std::uint32_t num = gamma_numerator(config.gamma);
    if (buffer.num() != num || buffer.den() != kGammaDen) {
      throw BufferCorruption("buffer was written with a different gamma");
    }
    const bool damp = num != kGammaDen;
    const double gamma_eff = static_cast<double>(num) / kGammaDen;
    const double noise_coef = std::sqrt(1.0 - gamma_eff * gamma_eff);
    const FixedPoint fp(options.frac_bits);
    IntVector theta_fx = final_state.theta_fx;
    IntVector v_fx = final_state.v_fx;
    if (theta_fx.size() != d || v_fx.size() != d) {
      throw std::invalid_argument("fixed-point final state missing or mis-sized");
    }
    for (std::size_t k = K; k >= 1; --k) {
      const double eta = steps.at(k);
      IntVector vhat_fx = v_fx;
      if (damp) {
        sub_wrapping(vhat_fx, fp.to_fixed(Vector(
                                  noise_coef * sqrt_mass.cwiseProduct(seed_noise(s, d)))));
        for (Index i = d - 1; i >= 0; --i) {
          const FloorDiv qs = floor_div(vhat_fx[i], num);
          buffer.push(qs.r, num);
          const std::uint32_t rem = buffer.pop(kGammaDen);
          vhat_fx[i] = static_cast<std::int64_t>(kGammaDen) * qs.q + rem;
        }
      }
      s = backward_seed(s);
      sub_wrapping(theta_fx, fp.to_fixed(Vector(
                                 0.5 * eta * inv_mass.cwiseProduct(fp.to_double(vhat_fx)))));
      const Vector grad =
          checked_gradient(target, schedule[k], fp.to_double(theta_fx), k);
      v_fx = vhat_fx;
      sub_wrapping(v_fx, fp.to_fixed(Vector(eta * grad)));
      sub_wrapping(theta_fx, fp.to_fixed(Vector(
                                 0.5 * eta * inv_mass.cwiseProduct(fp.to_double(v_fx)))));
    }
    if (!buffer.empty()) {
      throw BufferCorruption("buffer still holds data after the backward pass");
    }
    out.theta = fp.to_double(theta_fx);
    out.v = fp.to_double(v_fx);
    out.theta_fx = std::move(theta_fx);
    out.v_fx = std::move(v_fx);
  }

  if (!(s == buffer.seed_start())) {
    throw BufferCorruption("recovered initial seed does not match the buffer");
  }
  out.seed = s;
  return out;
}

MemoryReport memory_report(Index d, std::size_t K, double gamma,
                           unsigned value_bits) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
  if (value_bits != 32 && value_bits != 64) {
    throw std::invalid_argument("value_bits must be 32 or 64");
  }
  if (d < 0) throw std::invalid_argument("dimension must be >= 0");
  if (gamma == 0.0) {
    throw Unsupported("gamma = 0 destroys v_hat entirely; use naive storage");
  }
  const double cells = static_cast<double>(K) * static_cast<double>(d);
  MemoryReport r;
  r.naive_bits = value_bits * cells;
  r.reversible_bits = gamma == 1.0 ? 0.0 : std::log2(1.0 / gamma) * cells;
  r.naive_grad_evals = K;
  r.reversible_grad_evals = 2 * K;
  return r;
}

}  // namespace dais
