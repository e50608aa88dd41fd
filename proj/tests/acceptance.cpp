// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dais/blr.hpp"
#include "dais/harness.hpp"
#include "dais/reversible.hpp"
#include "dais/sampler.hpp"
#include "oracles/recursions.hpp"

using namespace dais;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

// Every Monte Carlo estimate made by the suite, for the lower-bound check.
struct BoundRecord {
  std::string label;
  double mean_L;
  double stderr_;
  double log_z;
};
std::vector<BoundRecord> g_bounds;

ExperimentConfig sweep_config() {
  ExperimentConfig cfg;
  cfg.n = 1000;
  cfg.d = 10;
  cfg.seed = 1;
  cfg.gamma = 0.0;
  cfg.mode = SweepMode::exact;
  cfg.K_grid = {64, 128, 256, 512, 1024, 2048, 4096};
  return cfg;
}

std::vector<ResultRow> rows_for(const std::vector<ResultRow>& rows, double c) {
  std::vector<ResultRow> out;
  for (const auto& r : rows) {
    if (std::abs(r.c - c) < 1e-12) out.push_back(r);
  }
  return out;
}

Verdict rate_reproduction() {
  Verdict v;
  auto cfg = sweep_config();
  cfg.c_list = {0.25, 1.0 / 3.0};
  const auto start = Clock::now();
  const auto rows = run_sweep(cfg);
  const double elapsed = seconds_since(start);
  for (double c : cfg.c_list) {
    const auto fit = fit_loglog_slope(rows_for(rows, c), cfg.K_grid.front());
    const double target = theory_slope(c).slope;
    v.require(std::abs(fit.slope - target) <= 0.1,
              fmt::format("c={:.4f} slope {:.4f} vs {:.4f}", c, fit.slope, target));
  }
  v.require(elapsed < 60.0, fmt::format("{:.2f}s", elapsed));
  return v;
}

Verdict constant_gap() {
  Verdict v;
  auto cfg = sweep_config();
  cfg.c_list = {0.5};
  const auto clean = run_sweep(cfg);
  cfg.batch_size = 100;
  const auto noisy = run_sweep(cfg);
  auto gap_at = [](const std::vector<ResultRow>& rows, std::size_t K) {
    for (const auto& r : rows) {
      if (r.K == K) return r.gap;
    }
    return std::nan("");
  };
  const double g256 = gap_at(noisy, 256), g4096 = gap_at(noisy, 4096);
  const double clean4096 = gap_at(clean, 4096);
  v.require(std::abs(g4096 - g256) <= 0.2 * g256,
            fmt::format("noisy gap K=256 {:.2f}, K=4096 {:.2f}", g256, g4096));
  v.require(g4096 >= 10.0 * clean4096,
            fmt::format("noise-free gap K=4096 {:.4f}", clean4096));
  const auto fit = fit_loglog_slope(noisy, 64);
  v.require(std::abs(fit.slope) <= 0.1, fmt::format("noisy slope {:.4f}", fit.slope));
  return v;
}

Verdict inconsistency_floor() {
  Verdict v;
  const auto cfg = sweep_config();
  const BlrModel model = gen_blr_data(cfg.n, cfg.d, cfg.seed);
  const Matrix sigma_eps = minibatch_noise_covariance(model, 100);
  double worst_margin = std::numeric_limits<double>::infinity();
  for (double c : {0.25, 1.0 / 3.0, 0.5}) {
    const double a = resolve_step_scale(cfg, model, c);
    for (std::size_t K : cfg.K_grid) {
      const double clean = exact_gap(model, K, a, c, 0.0, std::nullopt);
      const double noisy = exact_gap(model, K, a, c, 0.0, sigma_eps);
      const double penalty = stochastic_penalty(make_stepsize_scheme(a, c, K), sigma_eps);
      const double margin = (noisy - clean) - penalty;
      worst_margin = std::min(worst_margin, margin);
      if (margin < -1e-8) {
        v.require(false, fmt::format("c={:.4f} K={} excess {:.4f} < penalty {:.4f}", c, K,
                                     noisy - clean, penalty));
      }
      if (c < 0.5 && K == 4096) {
        v.require(noisy >= 0.5 * penalty,
                  fmt::format("c={:.4f} K=4096 gap {:.1f} vs penalty {:.1f}", c, noisy,
                              penalty));
      }
    }
  }
  v.require(worst_margin >= -1e-8,
            fmt::format("min (excess - penalty) {:.4g}", worst_margin));
  return v;
}

Verdict unbiasedness() {
  Verdict v;
  const auto start = Clock::now();
  const BlrModel toy = toy_blr_model();
  const double log_z = exact_log_ml(toy);
  const double quad = oracle::quadrature_log_ml_1d(toy);
  v.require(std::abs(log_z - (-1.515512)) < 5e-7, fmt::format("log Z {:.7f}", log_z));
  v.require(std::abs(log_z - quad) < 1e-8, fmt::format("quadrature diff {:.2e}", log_z - quad));

  const std::size_t K = 8, S = 200000;
  const auto est = dais_bound_mc(*blr_target(toy), make_linear_schedule(K),
                                 StepSizeScheme::constant(0.2, K), TransitionConfig(0.0), S,
                                 Rng(2024));
  double mean = 0.0, sq = 0.0;
  for (double l : est.samples) {
    const double w = std::exp(l - log_z);
    mean += w;
    sq += w * w;
  }
  mean /= static_cast<double>(S);
  const double se =
      std::sqrt((sq / static_cast<double>(S) - mean * mean) / static_cast<double>(S - 1));
  v.require(std::abs(mean - 1.0) <= 3.0 * se,
            fmt::format("mean exp(L - log Z) {:.5f} +- {:.5f}", mean, se));
  g_bounds.push_back({"toy K=8", est.mean, est.stderr_, log_z});
  const double elapsed = seconds_since(start);
  v.require(elapsed < 120.0, fmt::format("{:.2f}s", elapsed));
  return v;
}

Verdict exact_vs_mc() {
  Verdict v;
  auto cfg = sweep_config();
  cfg.K_grid = {16, 64, 256};
  cfg.c_list = {0.25};
  const auto exact = run_sweep(cfg);
  cfg.mode = SweepMode::mc;
  cfg.mc_chains = 1000;
  const auto mc = run_sweep(cfg);
  const double log_z = exact_log_ml(gen_blr_data(cfg.n, cfg.d, cfg.seed));
  for (std::size_t i = 0; i < exact.size(); ++i) {
    v.require(std::abs(exact[i].gap - mc[i].gap) <= 3.0 * mc[i].stderr_,
              fmt::format("K={} exact {:.4f} mc {:.4f} +- {:.4f}", exact[i].K, exact[i].gap,
                          mc[i].gap, mc[i].stderr_));
    g_bounds.push_back({fmt::format("d=10 K={}", mc[i].K), log_z - mc[i].gap, mc[i].stderr_,
                        log_z});
  }
  return v;
}

Verdict gap_identity() {
  Verdict v;
  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const BlrModel m = gen_blr_data(20 + static_cast<Index>(rng() % 200), 5, rng());
    const std::size_t K = 1 + rng() % 300;
    const double eta = 0.02 + 0.6 * rng.uniform();
    const double gamma = rng.uniform();
    const auto sched = make_linear_schedule(K);
    const auto path =
        propagate_moments(m, sched, StepSizeScheme::constant(eta, K), TransitionConfig(gamma));
    const auto g = gap_breakdown(m, path, sched);
    const double diff =
        std::abs(g.term1 + g.term2 + g.term3 - (exact_log_ml(m) - expected_bound(m, path, sched)));
    worst = std::max(worst, diff);
  }
  v.require(worst <= 1e-8, fmt::format("max |identity residual| {:.2e} over 20 models", worst));
  return v;
}

Verdict update_equivalence() {
  Verdict v;
  Rng rng(707);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + static_cast<Index>(rng() % 10);
    const BlrModel m = gen_blr_data(100, d, rng());
    const double beta = rng.uniform(), eta = 0.5 * rng.uniform();
    const Vector theta = rng.normal_vector(d), vel = rng.normal_vector(d);
    const auto lf = leapfrog(theta, vel, eta, beta, *blr_target(m), TransitionConfig());
    const auto u = update_matrices(m, beta, eta);
    worst = std::max(worst, (u.A * theta + u.B * vel + u.c_vec - lf.theta).cwiseAbs().maxCoeff());
    worst = std::max(worst, (u.C * theta + u.D * vel + u.e_vec - lf.v_hat).cwiseAbs().maxCoeff());
  }
  v.require(worst <= 1e-10, fmt::format("max deviation {:.2e} over 100 states", worst));
  return v;
}

Verdict moment_oracle() {
  Verdict v;
  {
    const BlrModel m = gen_blr_data(1000, 10, 1);
    const auto sched = make_linear_schedule(128);
    const auto steps = make_stepsize_scheme(0.4 * std::pow(64.0, 0.25), 0.25, 128);
    const auto path = propagate_moments(m, sched, steps, TransitionConfig(0.0));
    const auto ref = oracle::full_refresh_recursion(m, sched, steps);
    double worst = 0.0;
    for (std::size_t k = 1; k <= 128; ++k) {
      const auto& p = path.steps[k];
      worst = std::max({worst, (p.mu_theta - ref[k].mu).cwiseAbs().maxCoeff(),
                        (p.Sigma_theta() - ref[k].Sigma).cwiseAbs().maxCoeff(),
                        (p.mu_vhat - ref[k].mu_v).cwiseAbs().maxCoeff(),
                        (p.Sigma_vhat - ref[k].Sigma_v).cwiseAbs().maxCoeff()});
    }
    v.require(worst <= 1e-10, fmt::format("closed recursions max deviation {:.2e}", worst));
  }
  {
    const BlrModel m = gen_blr_data(50, 2, 9);
    const std::size_t K = 32, S = 100000;
    const auto sched = make_linear_schedule(K);
    const auto steps = StepSizeScheme::constant(0.3, K);
    const TransitionConfig config(0.0);
    const auto path = propagate_moments(m, sched, steps, config);
    const auto t = blr_target(m);
    // Per checkpoint: theta and v_hat samples stacked as 4-vectors.
    const std::vector<std::size_t> checkpoints{K / 2, K};
    std::vector<Matrix> samples(checkpoints.size(), Matrix(4, S));
    for (std::size_t i = 0; i < S; ++i) {
      dais_chain(*t, sched, steps, config, Rng(5).split(i),
                 [&](std::size_t k, const Vector& theta, const Vector& vh, const Vector&) {
                   for (std::size_t c = 0; c < checkpoints.size(); ++c) {
                     if (k == checkpoints[c]) samples[c].col(static_cast<Index>(i)) << theta, vh;
                   }
                 });
    }
    int checked = 0, outside = 0;
    std::string worst;
    double worst_z = 0.0;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      const auto& p = path.steps[checkpoints[c]];
      Vector mu(4);
      mu << p.mu_theta, p.mu_vhat;
      Matrix cov = Matrix::Zero(4, 4);
      cov.topLeftCorner(2, 2) = p.Sigma_theta();
      cov.bottomRightCorner(2, 2) = p.Sigma_vhat;
      const Matrix& X = samples[c];
      const Vector mean = X.rowwise().mean();
      const Matrix centered = X.colwise() - mean;
      auto check = [&](const std::string& name, const Eigen::ArrayXd& values, double expect) {
        const double m = values.mean();
        const double se = std::sqrt((values - m).square().sum() / (S - 1) / S);
        const double z = std::abs(m - expect) / se;
        ++checked;
        if (z > 3.0) ++outside;
        if (z > worst_z) {
          worst_z = z;
          worst = fmt::format("{} at k={}", name, checkpoints[c]);
        }
      };
      const char* names[] = {"theta0", "theta1", "vhat0", "vhat1"};
      for (int r = 0; r < 4; ++r) check(fmt::format("E[{}]", names[r]), X.row(r).array(), mu[r]);
      for (int r = 0; r < 4; r += 2) {
        for (int s = r; s < r + 2; ++s) {
          for (int q = s; q < r + 2; ++q) {
            check(fmt::format("Cov[{},{}]", names[s], names[q]),
                  centered.row(s).array() * centered.row(q).array(), cov(s, q));
          }
        }
      }
    }
    v.require(outside == 0, fmt::format("{} of {} sampled moments beyond 3 stderr (worst {:.2f} "
                                        "for {})",
                                        outside, checked, worst_z, worst));
  }
  return v;
}

Verdict reversibility() {
  Verdict v;
  const BlrModel m = gen_blr_data(1000, 10, 3);
  const auto t = blr_target(m);
  {
    const std::size_t K = 1000;
    const auto sched = make_linear_schedule(K);
    const auto steps = make_stepsize_scheme(0.4 * std::pow(64.0, 0.25), 0.25, K);
    const TransitionConfig config(0.9);
    const SeedState s0{0x5eed};
    auto fwd = reversible_forward(*t, sched, steps, config, s0);
    const double bits_per = static_cast<double>(fwd.buffer.storage_bits()) / (10.0 * K);
    const double lo = std::log2(1.0 / fwd.gamma_eff);
    v.require(bits_per >= lo && bits_per <= lo + 1.0,
              fmt::format("buffer {:.4f} bits/param/step vs log2(1/gamma) {:.4f}", bits_per, lo));
    const auto init = seeded_initial_state(*t, config, s0);
    const FixedPoint fp;
    const auto back = reversible_backward(*t, sched, steps, config, fwd.state, fwd.buffer);
    const std::int64_t diff = (back.theta_fx - fp.to_fixed(init.first)).cwiseAbs().maxCoeff() +
                              (back.v_fx - fp.to_fixed(init.second)).cwiseAbs().maxCoeff();
    v.require(diff == 0 && back.seed == s0 && fwd.buffer.empty(),
              fmt::format("fixed-point round trip integer error {}", diff));
  }
  {
    const std::size_t K = 100;
    const auto sched = make_linear_schedule(K);
    const auto steps = StepSizeScheme::constant(0.2, K);
    const TransitionConfig config(0.9);
    ReversibleOptions opts;
    opts.mode = ReversibleMode::floating;
    const SeedState s0{42};
    const auto fwd = reversible_forward(*t, sched, steps, config, s0, opts);
    const auto init = seeded_initial_state(*t, config, s0);
    const auto ref = run_dais(*t, sched, steps, config, init.first, init.second,
                              seeded_refresh_noise(s0, 10));
    v.require(std::abs(fwd.log_weight - ref.log_weight) <= 1e-12,
              fmt::format("float-mode L difference {:.2e}", fwd.log_weight - ref.log_weight));
  }
  return v;
}

Verdict lower_bound() {
  Verdict v;
  // Additional configurations beyond those recorded by criteria 4 and 5.
  const BlrModel m = gen_blr_data(1000, 10, 11);
  const double log_z = exact_log_ml(m);
  for (double gamma : {0.0, 0.5, 0.9}) {
    for (std::size_t K : {8, 128}) {
      const auto est = dais_bound_mc(*blr_target(m), make_linear_schedule(K),
                                     tuned_stepsize_scheme(K), TransitionConfig(gamma), 200,
                                     Rng(K * 10 + static_cast<std::size_t>(gamma * 10)));
      g_bounds.push_back({fmt::format("gamma={} K={}", gamma, K), est.mean, est.stderr_, log_z});
    }
  }
  const auto mb = std::make_shared<const BlrModel>(m);
  const MinibatchBlrTarget minibatch(mb, 100, Rng(1));
  const auto est = dais_bound_mc(minibatch, make_linear_schedule(64),
                                 StepSizeScheme::constant(0.1, 64), TransitionConfig(0.9), 200,
                                 Rng(99));
  g_bounds.push_back({"minibatch b=100 K=64", est.mean, est.stderr_, log_z});

  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : g_bounds) {
    const double excess = (b.mean_L - b.log_z) / b.stderr_;
    worst = std::max(worst, excess);
    if (b.mean_L > b.log_z + 3.0 * b.stderr_) {
      ++violations;
      v.require(false, fmt::format("{}: mean L {:.4f} > log Z {:.4f} + 3 x {:.4f}", b.label,
                                   b.mean_L, b.log_z, b.stderr_));
    }
  }
  v.require(violations == 0,
            fmt::format("{} configurations, max (mean L - log Z)/stderr {:.2f}", g_bounds.size(),
                        worst));
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, rate_reproduction},  {2, constant_gap},       {3, inconsistency_floor},
      {4, unbiasedness},       {5, exact_vs_mc},        {6, gap_identity},
      {7, update_equivalence}, {8, moment_oracle},      {9, reversibility},
      {10, lower_bound},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    if (!v.pass) ++failed;
    std::printf("criterion %d: %s (%.1fs) %s\n", id, v.pass ? "PASS" : "FAIL",
                seconds_since(start), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
