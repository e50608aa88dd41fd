#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dais/blr.hpp"
#include "dais/types.hpp"

namespace dais {

enum class SweepMode { exact, mc, theory };

/// How a configured batch size enters a sweep: as additive noise with the
/// matching covariance, or as real subsampling (mc mode only).
enum class NoiseKind { additive, minibatch };

std::string to_string(SweepMode mode);
std::string to_string(NoiseKind kind);

/// Malformed configuration. `line` is 0 when the problem is not tied to a
/// line of a config file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line, std::string field)
      : std::runtime_error(what), line_(line), field_(std::move(field)) {}
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

struct ExperimentConfig {
  Index n = 1000;
  Index d = 10;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> K_grid{64, 128, 256, 512, 1024, 2048, 4096};
  std::vector<double> c_list{0.25, 1.0 / 3.0, 0.5};
  /// Step-size scale; tuned at the smallest K when absent.
  std::optional<double> a;
  double gamma = 0.0;
  SweepMode mode = SweepMode::exact;
  std::size_t mc_chains = 100;
  std::optional<std::size_t> batch_size;
  /// Isotropic additive gradient-noise variance; ignored when batch_size is set.
  std::optional<double> sigma_eps;
  NoiseKind noise = NoiseKind::additive;
  /// Worker threads; 0 picks hardware concurrency.
  unsigned threads = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// The paper-scale preset: n = 10000, d = 10.
  static ExperimentConfig paper_scale();
};

/// Parses `key = value` lines (TOML-style: '#' comments, quoted strings,
/// [a, b, ...] lists). Unknown keys, bad values and duplicates raise
/// ConfigError with the line number. The result is validated.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

struct ResultRow {
  std::size_t K = 0;
  double c = 0.0;
  double gamma = 0.0;
  SweepMode mode = SweepMode::exact;
  /// 0 means full-batch gradients.
  std::size_t batch_size = 0;
  double gap = 0.0;
  double stderr_ = 0.0;
  double elapsed_ms = 0.0;
  std::uint64_t seed = 0;
  /// Set for cells that failed numerically; gap is NaN then.
  std::optional<std::string> error;
};

/// X_ij ~ N(0, 0.01), y_i ~ N(0, 1), mu_p = 0, Lambda_p = I.
BlrModel gen_blr_data(Index n, Index d, std::uint64_t seed, double sigma2 = 1.0);

/// d = 1, X = [1], y = [1], sigma2 = 1, mu_p = 0, Lambda_p = 1.
BlrModel toy_blr_model();

/// Noise covariance implied by a config (batch size first, then the
/// isotropic variance), or nullopt for exact gradients.
std::optional<Matrix> configured_noise(const ExperimentConfig& config,
                                       const BlrModel& model);

/// Step size from `grid` minimizing the noise-free exact gap at K_min.
/// Step sizes whose moment recursion fails are skipped; throws
/// NumericalFailure if all fail.
double tune_step_size(const BlrModel& model, std::size_t K_min, double gamma,
                      std::span<const double> grid);

/// {0.05, 0.10, ..., 0.50}
std::vector<double> default_step_grid();

/// a = eta * K^c for the configured or tuned eta at the smallest K.
double resolve_step_scale(const ExperimentConfig& config, const BlrModel& model,
                          double c);

/// Exact-mode gap for one (K, c) cell.
double exact_gap(const BlrModel& model, std::size_t K, double a, double c,
                 double gamma, const std::optional<Matrix>& sigma_eps);

/// Substream seed of a sweep cell.
std::uint64_t cell_seed(std::uint64_t seed, std::size_t K, double c,
                        SweepMode mode);

/// One row per (c, K), c-major in config order. Failing cells become error
/// rows; the sweep continues.
std::vector<ResultRow> run_sweep(const ExperimentConfig& config);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least squares of log(gap) on log(K) over rows with K >= K_min and a
/// positive finite gap. Throws InsufficientData with fewer than 3 such rows.
LogLogFit fit_loglog_slope(std::span<const ResultRow> rows, std::size_t K_min);

inline constexpr const char* kCsvHeader =
    "K,c,gamma,mode,batch_size,gap,stderr,elapsed_ms,seed";

void write_csv(std::ostream& out, std::span<const ResultRow> rows);

struct OracleOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// MC-vs-exact agreement and unbiasedness checks at modest sample sizes.
std::vector<OracleOutcome> run_oracle_suite(std::uint64_t seed, unsigned threads = 0);

}  // namespace dais
