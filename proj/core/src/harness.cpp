#include "dais/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "dais/sampler.hpp"

namespace dais {

namespace {

struct Cell {
  std::size_t c_index;
  std::size_t K;
};

std::shared_ptr<const AnnealedTarget> mc_target(const ExperimentConfig& config,
                                                const std::shared_ptr<const BlrModel>& model,
                                                const std::optional<Matrix>& noise,
                                                std::uint64_t seed) {
  if (config.batch_size && config.noise == NoiseKind::minibatch) {
    return std::make_shared<MinibatchBlrTarget>(model, *config.batch_size, Rng(seed));
  }
  auto exact = blr_target(*model);
  if (noise) return noisy_gradient(exact, GradientNoiseSpec(*noise), Rng(seed));
  return exact;
}

}  // namespace

BlrModel gen_blr_data(Index n, Index d, std::uint64_t seed, double sigma2) {
  if (n < 1 || d < 1) throw std::invalid_argument("gen_blr_data needs n, d >= 1");
  const Rng root(seed);
  Rng xs = root.split(1);
  Rng ys = root.split(2);
  Matrix X(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) X(i, j) = 0.1 * xs.normal();
  }
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = ys.normal();
  return BlrModel(std::move(X), std::move(y), sigma2, Vector::Zero(d),
                  Matrix::Identity(d, d));
}

BlrModel toy_blr_model() {
  return BlrModel(Matrix::Ones(1, 1), Vector::Ones(1), 1.0, Vector::Zero(1),
                  Matrix::Identity(1, 1));
}

std::optional<Matrix> configured_noise(const ExperimentConfig& config,
                                       const BlrModel& model) {
  if (config.batch_size) return minibatch_noise_covariance(model, *config.batch_size);
  if (config.sigma_eps) {
    return Matrix(*config.sigma_eps * Matrix::Identity(model.d(), model.d()));
  }
  return std::nullopt;
}

double exact_gap(const BlrModel& model, std::size_t K, double a, double c,
                 double gamma, const std::optional<Matrix>& sigma_eps) {
  const AnnealingSchedule schedule = make_linear_schedule(K);
  const StepSizeScheme steps = make_stepsize_scheme(a, c, K);
  const MomentPath path =
      propagate_moments(model, schedule, steps, TransitionConfig(gamma), sigma_eps);
  const double gap = gap_breakdown(model, path, schedule).total;
  if (!std::isfinite(gap)) throw NumericalFailure("exact gap is not finite", K);
  return gap;
}

std::vector<double> default_step_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(0.05 * i);
  return grid;
}

double tune_step_size(const BlrModel& model, std::size_t K_min, double gamma,
                      std::span<const double> grid) {
  double best_eta = std::numeric_limits<double>::quiet_NaN();
  double best_gap = std::numeric_limits<double>::infinity();
  for (double eta : grid) {
    try {
      const double gap = exact_gap(model, K_min, eta, 0.0, gamma, std::nullopt);
      if (gap < best_gap) {
        best_gap = gap;
        best_eta = eta;
      }
    } catch (const NumericalFailure&) {
    }
  }
  if (std::isnan(best_eta)) {
    throw NumericalFailure("no step size in the tuning grid gave a finite gap");
  }
  return best_eta;
}

double resolve_step_scale(const ExperimentConfig& config, const BlrModel& model,
                          double c) {
  if (config.a) return *config.a;
  const std::size_t K_min = config.K_grid.front();
  const double eta = tune_step_size(model, K_min, config.gamma, default_step_grid());
  return eta * std::pow(static_cast<double>(K_min), c);
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t K, double c,
                        SweepMode mode) {
  std::uint64_t h = Rng::mix(seed ^ 0x6a09e667f3bcc909ULL);
  h = Rng::mix(h + static_cast<std::uint64_t>(K));
  h = Rng::mix(h + std::bit_cast<std::uint64_t>(c));
  return Rng::mix(h + static_cast<std::uint64_t>(mode));
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto model = std::make_shared<const BlrModel>(
      gen_blr_data(config.n, config.d, config.seed, config.sigma2));
  const std::optional<Matrix> noise = configured_noise(config, *model);
  const double log_z = exact_log_ml(*model);

  // The tuned step size depends on (d, gamma) only, so tune once.
  std::optional<double> tuned_eta;
  if (!config.a) {
    tuned_eta = tune_step_size(*model, config.K_grid.front(), config.gamma,
                               default_step_grid());
  }
  std::vector<double> scales;
  for (double c : config.c_list) {
    scales.push_back(config.a ? *config.a
                              : *tuned_eta * std::pow(static_cast<double>(
                                                          config.K_grid.front()),
                                                      c));
  }

  std::vector<Cell> cells;
  for (std::size_t ci = 0; ci < config.c_list.size(); ++ci) {
    for (std::size_t K : config.K_grid) cells.push_back({ci, K});
  }
  std::vector<ResultRow> rows(cells.size());

  // Theory rows extrapolate from the exact gap at the smallest K.
  std::vector<std::optional<double>> anchor(config.c_list.size());
  std::vector<std::string> anchor_error(config.c_list.size());
  if (config.mode == SweepMode::theory) {
    for (std::size_t ci = 0; ci < config.c_list.size(); ++ci) {
      try {
        anchor[ci] = exact_gap(*model, config.K_grid.front(), scales[ci],
                               config.c_list[ci], config.gamma, std::nullopt);
      } catch (const std::exception& e) {
        anchor_error[ci] = e.what();
      }
    }
  }

  const unsigned outer = config.mode == SweepMode::mc ? 1 : config.threads;
  const unsigned inner = config.mode == SweepMode::mc ? config.threads : 1;

  parallel_for(cells.size(), outer, [&](std::size_t idx) {
    const Cell cell = cells[idx];
    const double c = config.c_list[cell.c_index];
    const double a = scales[cell.c_index];
    ResultRow& row = rows[idx];
    row.K = cell.K;
    row.c = c;
    row.gamma = config.gamma;
    row.mode = config.mode;
    row.batch_size = config.batch_size.value_or(0);
    row.seed = config.seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      switch (config.mode) {
        case SweepMode::exact:
          row.gap = exact_gap(*model, cell.K, a, c, config.gamma, noise);
          break;
        case SweepMode::theory: {
          if (!anchor[cell.c_index]) throw NumericalFailure(anchor_error[cell.c_index]);
          const double ratio = static_cast<double>(cell.K) /
                               static_cast<double>(config.K_grid.front());
          row.gap = *anchor[cell.c_index] * std::pow(ratio, 2.0 * c - 1.0);
          break;
        }
        case SweepMode::mc: {
          const std::uint64_t s = cell_seed(config.seed, cell.K, c, config.mode);
          const auto target = mc_target(config, model, noise, Rng(s).split(1).key());
          const McEstimate est = dais_bound_mc(
              *target, make_linear_schedule(cell.K),
              make_stepsize_scheme(a, c, cell.K), TransitionConfig(config.gamma),
              config.mc_chains, Rng(s), inner);
          row.gap = log_z - est.mean;
          row.stderr_ = est.stderr_;
          break;
        }
      }
      if (!std::isfinite(row.gap)) throw NumericalFailure("gap is not finite");
    } catch (const std::exception& e) {
      row.gap = std::numeric_limits<double>::quiet_NaN();
      row.stderr_ = 0.0;
      row.error = e.what();
    }
    row.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  });
  return rows;
}

LogLogFit fit_loglog_slope(std::span<const ResultRow> rows, std::size_t K_min) {
  std::vector<double> xs, ys;
  for (const ResultRow& r : rows) {
    if (r.K >= K_min && std::isfinite(r.gap) && r.gap > 0.0) {
      xs.push_back(std::log(static_cast<double>(r.K)));
      ys.push_back(std::log(r.gap));
    }
  }
  if (xs.size() < 3) {
    throw InsufficientData("log-log fit needs at least 3 rows with positive gap, got " +
                           std::to_string(xs.size()));
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw InsufficientData("log-log fit needs at least two distinct K");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = xs.size();
  return fit;
}

void write_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << kCsvHeader << '\n';
  for (const ResultRow& r : rows) {
    out << fmt::format("{},{:.12g},{:.12g},{},{},{:.15g},{:.15g},{:.3f},{}\n", r.K,
                       r.c, r.gamma, to_string(r.mode), r.batch_size, r.gap,
                       r.stderr_, r.elapsed_ms, r.seed);
  }
}

std::vector<OracleOutcome> run_oracle_suite(std::uint64_t seed, unsigned threads) {
  std::vector<OracleOutcome> out;
  const Rng root(seed);

  {
    const BlrModel toy = toy_blr_model();
    const double log_z = exact_log_ml(toy);
    const std::size_t K = 8, S = 20000;
    const McEstimate est = dais_bound_mc(
        *blr_target(toy), make_linear_schedule(K), StepSizeScheme::constant(0.2, K),
        TransitionConfig(0.0), S, root.split(1), threads);
    double mean = 0.0, sq = 0.0;
    for (double l : est.samples) {
      const double w = std::exp(l - log_z);
      mean += w;
      sq += w * w;
    }
    mean /= static_cast<double>(S);
    const double se =
        std::sqrt(std::max(0.0, sq / static_cast<double>(S) - mean * mean) /
                  static_cast<double>(S - 1));
    out.push_back({"unbiasedness", std::abs(mean - 1.0) <= 3.0 * se,
                   fmt::format("mean exp(L - log Z) = {:.6f} +- {:.6f} over {} chains",
                               mean, se, S)});
  }

  {
    const BlrModel model = gen_blr_data(1000, 10, seed);
    const double log_z = exact_log_ml(model);
    const std::size_t K = 64, S = 1000;
    const double eta = 0.2;
    const double exact = exact_gap(model, K, eta, 0.0, 0.0, std::nullopt);
    const McEstimate est = dais_bound_mc(
        *blr_target(model), make_linear_schedule(K), StepSizeScheme::constant(eta, K),
        TransitionConfig(0.0), S, root.split(2), threads);
    const double mc = log_z - est.mean;
    out.push_back({"mc-vs-exact", std::abs(mc - exact) <= 3.0 * est.stderr_,
                   fmt::format("exact gap {:.6f}, mc gap {:.6f} +- {:.6f}", exact, mc,
                               est.stderr_)});
    out.push_back({"lower-bound", est.mean <= log_z + 3.0 * est.stderr_,
                   fmt::format("mean L {:.6f} vs log Z {:.6f}", est.mean, log_z)});
  }
  return out;
}

}  // namespace dais
