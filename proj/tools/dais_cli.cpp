#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dais/blr.hpp"
#include "dais/harness.hpp"
#include "dais/reversible.hpp"
#include "dais/sampler.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAllFailed = 3;
constexpr int kExitOracle = 4;

int cmd_sweep(const std::string& config_path, const std::string& out_path,
              std::optional<unsigned> threads) {
  dais::ExperimentConfig config;
  try {
    config = dais::load_config(config_path);
    if (threads) config.threads = *threads;
  } catch (const dais::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto rows = dais::run_sweep(config);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.error) {
      ++failed;
      std::cerr << fmt::format("cell K={} c={:.6g} failed: {}\n", r.K, r.c, *r.error);
    }
  }
  if (out_path.empty() || out_path == "-") {
    dais::write_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot open " << out_path << " for writing\n";
      return kExitConfig;
    }
    dais::write_csv(out, rows);
  }
  return failed == rows.size() ? kExitAllFailed : 0;
}

struct ChainArgs {
  long n = 1000;
  long d = 10;
  std::size_t K = 256;
  double eta = 0.2;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
};

int cmd_chain(const ChainArgs& args) {
  const auto model =
      std::make_shared<const dais::BlrModel>(dais::gen_blr_data(args.n, args.d, args.seed));
  std::shared_ptr<const dais::AnnealedTarget> target;
  if (args.batch_size > 0) {
    target = std::make_shared<dais::MinibatchBlrTarget>(model, args.batch_size,
                                                        dais::Rng(args.seed).split(7));
  } else {
    target = dais::blr_target(*model);
  }
  const auto schedule = dais::make_linear_schedule(args.K);
  const auto steps = dais::StepSizeScheme::constant(args.eta, args.K);
  const dais::TransitionConfig config(args.gamma);
  const auto result =
      dais::dais_chain(*target, schedule, steps, config, dais::Rng(args.seed).split(3));
  const double log_z = dais::exact_log_ml(*model);
  std::cout << fmt::format("L: {:.12g}\n", result.log_weight);
  std::cout << fmt::format("log Z: {:.12g}\n", log_z);
  std::cout << fmt::format("L - log Z: {:.12g}\n", result.log_weight - log_z);
  std::cout << fmt::format("|theta_K - mu_post|: {:.6g}\n",
                           (result.state.theta - dais::derive_posterior(*model).mu).norm());
  std::cout << fmt::format("|v_K|: {:.6g}\n", result.state.v.norm());
  return 0;
}

struct ReversibleArgs {
  long n = 1000;
  long d = 10;
  std::size_t K = 1000;
  double eta = 0.1;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  int frac_bits = 48;
  std::string buffer_file;
};

int cmd_check_reversible(const ReversibleArgs& args) {
  const dais::BlrModel model = dais::gen_blr_data(args.n, args.d, args.seed);
  const auto target = dais::blr_target(model);
  const auto schedule = dais::make_linear_schedule(args.K);
  const auto steps = dais::StepSizeScheme::constant(args.eta, args.K);
  const dais::TransitionConfig config(args.gamma);
  dais::ReversibleOptions options;
  options.frac_bits = args.frac_bits;
  const dais::SeedState s0{dais::Rng::mix(args.seed)};

  auto fwd = dais::reversible_forward(*target, schedule, steps, config, s0, options);
  const auto init = dais::seeded_initial_state(*target, config, s0);
  const dais::FixedPoint fp(args.frac_bits);
  const auto theta0_fx = fp.to_fixed(init.first);
  const auto v0_fx = fp.to_fixed(init.second);

  dais::InfoBuffer buffer;
  if (!args.buffer_file.empty()) {
    fwd.buffer.save_file(args.buffer_file);
    buffer = dais::InfoBuffer::load_file(args.buffer_file);
  } else {
    std::stringstream io;
    fwd.buffer.save(io);
    buffer = dais::InfoBuffer::load(io);
  }
  const double cells = static_cast<double>(args.d) * static_cast<double>(args.K);
  const double bits_per = static_cast<double>(buffer.storage_bits()) / cells;
  std::cout << fmt::format("gamma_eff: {:.10f}\n", fwd.gamma_eff);
  std::cout << fmt::format("L: {:.12g}\n", fwd.log_weight);
  std::cout << fmt::format("buffer words: {} ({} pages, {} bytes)\n", buffer.word_count(),
                           buffer.page_count(), buffer.byte_size());
  std::cout << fmt::format("buffer bits per parameter per step: {:.6f} (log2(1/gamma) = {:.6f})\n",
                           bits_per, fwd.gamma_eff < 1.0 ? std::log2(1.0 / fwd.gamma_eff) : 0.0);
  const auto report = dais::memory_report(args.d, args.K, fwd.gamma_eff, 32);
  std::cout << fmt::format("naive storage bits (B=32): {:.0f}, reversible: {:.1f}, ratio {:.6f}\n",
                           report.naive_bits, report.reversible_bits, report.ratio());

  const auto back = dais::reversible_backward(*target, schedule, steps, config,
                                              fwd.state, buffer, options);
  const bool exact = back.theta_fx == theta0_fx && back.v_fx == v0_fx && back.seed == s0 &&
                     buffer.empty();
  std::cout << fmt::format("buffer empty after backward: {}\n", buffer.empty());
  std::cout << fmt::format("bit-exact: {}\n", exact);
  return exact ? 0 : 1;
}

int cmd_oracles(std::uint64_t seed, unsigned threads) {
  const auto outcomes = dais::run_oracle_suite(seed, threads);
  bool ok = true;
  for (const auto& o : outcomes) {
    std::cout << fmt::format("{} {}: {}\n", o.passed ? "PASS" : "FAIL", o.name, o.detail);
    ok = ok && o.passed;
  }
  return ok ? 0 : kExitOracle;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable annealed importance sampling experiments"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::optional<unsigned> threads;
  auto* sweep = app.add_subcommand("sweep", "Run a (K, c) sweep and write CSV");
  sweep->add_option("--config", config_path, "Config file (key = value)")->required();
  sweep->add_option("--out", out_path, "Output CSV path (default stdout)");
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");

  ChainArgs chain_args;
  auto* chain = app.add_subcommand("chain", "Run one DAIS chain on synthetic data");
  chain->add_option("--n", chain_args.n)->check(CLI::PositiveNumber);
  chain->add_option("--d", chain_args.d)->check(CLI::PositiveNumber);
  chain->add_option("--K", chain_args.K)->check(CLI::PositiveNumber);
  chain->add_option("--eta", chain_args.eta)->check(CLI::NonNegativeNumber);
  chain->add_option("--gamma", chain_args.gamma)->check(CLI::Range(0.0, 1.0));
  chain->add_option("--seed", chain_args.seed);
  chain->add_option("--batch-size", chain_args.batch_size, "0 = full batch");

  ReversibleArgs rev_args;
  auto* rev = app.add_subcommand("check-reversible",
                                 "Fixed-point forward/backward round trip");
  rev->add_option("--n", rev_args.n)->check(CLI::PositiveNumber);
  rev->add_option("--d", rev_args.d)->check(CLI::PositiveNumber);
  rev->add_option("--K", rev_args.K);
  rev->add_option("--eta", rev_args.eta)->check(CLI::NonNegativeNumber);
  rev->add_option("--gamma", rev_args.gamma)->check(CLI::Range(0.0, 1.0));
  rev->add_option("--seed", rev_args.seed);
  rev->add_option("--frac-bits", rev_args.frac_bits)->check(CLI::Range(1, 62));
  rev->add_option("--buffer-file", rev_args.buffer_file,
                  "Write the buffer here and read it back before reversing");

  std::uint64_t oracle_seed = 0;
  unsigned oracle_threads = 0;
  auto* oracles = app.add_subcommand("oracles", "MC-vs-exact and unbiasedness checks");
  oracles->add_option("--seed", oracle_seed);
  oracles->add_option("--threads", oracle_threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sweep) return cmd_sweep(config_path, out_path, threads);
    if (*chain) return cmd_chain(chain_args);
    if (*rev) return cmd_check_reversible(rev_args);
    if (*oracles) return cmd_oracles(oracle_seed, oracle_threads);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
