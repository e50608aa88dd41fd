#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dais/sampler.hpp"
#include "dais/schedule.hpp"
#include "dais/target.hpp"
#include "dais/types.hpp"

namespace dais {

/// 64-bit state of the linear congruential seed chain.
struct SeedState {
  std::uint64_t s = 0;
  friend bool operator==(SeedState, SeedState) = default;
};

namespace detail {

inline constexpr std::uint64_t kLcgMultiplier = 6364136223846793005ULL;
inline constexpr std::uint64_t kLcgIncrement = 1442695040888963407ULL;

/// Inverse of an odd 64-bit integer modulo 2^64 by Newton iteration.
constexpr std::uint64_t odd_inverse(std::uint64_t a) {
  std::uint64_t x = a;  // correct to 3 bits for odd a
  for (int i = 0; i < 5; ++i) x *= 2 - a * x;
  return x;
}

inline constexpr std::uint64_t kLcgInverse = odd_inverse(kLcgMultiplier);
static_assert(kLcgMultiplier * kLcgInverse == 1);

}  // namespace detail

/// s' = a s + c mod 2^64.
constexpr SeedState forward_seed(SeedState s) {
  return {detail::kLcgMultiplier * s.s + detail::kLcgIncrement};
}

/// Exact inverse of forward_seed.
constexpr SeedState backward_seed(SeedState s) {
  return {detail::kLcgInverse * (s.s - detail::kLcgIncrement)};
}

/// Standard-normal vector of length d determined by s alone.
Vector seed_noise(SeedState s, Index d);

/// Refresh noise for run_dais matching the reversible chains: the draw after
/// transition k comes from seed_noise(s_k), s_k = forward_seed^k(s_0).
/// Calls are expected in increasing k; other orders are handled by
/// replaying the seed chain.
RefreshNoise seeded_refresh_noise(SeedState s0, Index d);

/// Initial (theta_0, v_0) drawn from (p_0, N(0, M)) with a stream derived
/// from s_0, prior first.
std::pair<Vector, Vector> seeded_initial_state(const AnnealedTarget& target,
                                               const TransitionConfig& config,
                                               SeedState s0);

/// Stack of uniformly distributed symbols with exact arithmetic coding.
///
/// push(a, m) stores a in [0, m); pop(m) returns the most recently pushed
/// symbol of the same base. Symbols are packed into a single integer head
/// (range [L, L * 2^16)) that spills 16-bit words into pages, so a symbol
/// of base m costs log2(m) bits amortized. Popping a symbol of base m that
/// was not pushed is allowed and consumes log2(m) bits of the head; this is
/// how damping reclaims the bits of the multiplier numerator.
///
/// Every base used on one buffer must divide L, which is fixed at
/// construction from the pair of bases it will see.
class InfoBuffer {
 public:
  static constexpr std::size_t kPageWords = 4096;
  static constexpr unsigned kWordBits = 16;

  /// Buffer for bases `num` and `den`. `max_bytes` caps the spilled words.
  InfoBuffer(std::uint32_t num = 1, std::uint32_t den = 1,
             std::size_t max_bytes = std::numeric_limits<std::size_t>::max());

  /// Throws std::invalid_argument if m does not divide L or a >= m, and
  /// ResourceLimit if a spill would exceed the cap.
  void push(std::uint32_t a, std::uint32_t m);
  /// Throws BufferCorruption if the stack runs out of words.
  std::uint32_t pop(std::uint32_t m);

  /// True iff the buffer is in its initial state.
  bool empty() const { return words_ == 0 && head_ == lower_; }

  std::size_t word_count() const { return words_; }
  std::size_t page_count() const { return pages_.size(); }
  /// Spilled words plus the 64-bit head.
  std::uint64_t storage_bits() const {
    return kWordBits * static_cast<std::uint64_t>(words_) + 64;
  }
  std::size_t byte_size() const { return words_ * sizeof(std::uint16_t) + 8; }
  std::size_t max_bytes() const { return max_bytes_; }
  std::uint64_t head() const { return head_; }
  std::uint64_t lower() const { return lower_; }
  std::uint32_t num() const { return num_; }
  std::uint32_t den() const { return den_; }

  /// Seeds of the forward pass that filled this buffer.
  void set_seeds(SeedState s0, SeedState sK) {
    seed_start_ = s0;
    seed_end_ = sK;
  }
  SeedState seed_start() const { return seed_start_; }
  SeedState seed_end() const { return seed_end_; }

  /// Binary format: "DAISREV1", then pages, each a u32 little-endian byte
  /// length followed by that many bytes. Page 0 holds the metadata; the rest
  /// hold little-endian 16-bit words.
  void save(std::ostream& out) const;
  static InfoBuffer load(std::istream& in);
  void save_file(const std::string& path) const;
  static InfoBuffer load_file(const std::string& path);

  friend bool operator==(const InfoBuffer& a, const InfoBuffer& b);

 private:
  void spill(std::uint16_t word);
  std::uint16_t unspill();

  std::uint32_t num_;
  std::uint32_t den_;
  std::uint64_t lower_;
  std::uint64_t head_;
  std::size_t max_bytes_;
  std::size_t words_ = 0;
  std::vector<std::vector<std::uint16_t>> pages_;
  SeedState seed_start_{};
  SeedState seed_end_{};
};

/// Signed fixed-point numbers in int64 with `frac_bits` fractional bits.
class FixedPoint {
 public:
  explicit FixedPoint(int frac_bits = 48);

  int frac_bits() const { return frac_bits_; }
  /// Round to nearest, ties to even. Throws NumericalFailure if x is not
  /// finite or out of range.
  std::int64_t to_fixed(double x) const;
  double to_double(std::int64_t x) const;
  /// One unit in the last place, 2^-frac_bits.
  double ulp() const { return scale_inv_; }

  using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
  IntVector to_fixed(const Vector& x) const;
  Vector to_double(const IntVector& x) const;

 private:
  int frac_bits_;
  double scale_;
  double scale_inv_;
};

enum class ReversibleMode { floating, fixedpoint };

struct ReversibleOptions {
  ReversibleMode mode = ReversibleMode::fixedpoint;
  int frac_bits = 48;
  std::size_t max_buffer_bytes = std::size_t{1} << 30;
  /// Initial state; drawn with seeded_initial_state when absent.
  std::optional<Vector> theta0;
  std::optional<Vector> v0;
};

/// Denominator exponent of the quantized damping factor g / 2^16.
inline constexpr unsigned kGammaBits = 16;

/// gamma rounded to the nearest multiple of 2^-16. Throws Unsupported if
/// that is 0.
double quantize_gamma(double gamma);

struct ReversibleState {
  Vector theta;
  Vector v;
  /// Exact integer state; filled in fixedpoint mode only.
  FixedPoint::IntVector theta_fx;
  FixedPoint::IntVector v_fx;
  SeedState seed;
};

struct ReversibleForwardResult {
  ReversibleState state;
  InfoBuffer buffer;
  double log_weight = 0.0;
  /// Damping actually applied (quantized in fixedpoint mode).
  double gamma_eff = 0.0;
};

/// Forward DAIS pass that stores only the final state, the final seed and
/// the bits destroyed by momentum damping.
///
/// The target must be deterministic (rebind() returns nullptr). Throws
/// Unsupported for gamma = 0 and ResourceLimit when the buffer cap is hit.
ReversibleForwardResult reversible_forward(const AnnealedTarget& target,
                                           const AnnealingSchedule& schedule,
                                           const StepSizeScheme& steps,
                                           const TransitionConfig& config,
                                           SeedState s0,
                                           const ReversibleOptions& options = {});

/// Undoes reversible_forward. In fixedpoint mode the integer state is
/// recovered exactly and the buffer is left empty; in floating mode the
/// recovered state carries round-off drift. Throws BufferCorruption if the
/// seed or buffer does not belong to the forward pass.
ReversibleState reversible_backward(const AnnealedTarget& target,
                                    const AnnealingSchedule& schedule,
                                    const StepSizeScheme& steps,
                                    const TransitionConfig& config,
                                    const ReversibleState& final_state,
                                    InfoBuffer& buffer,
                                    const ReversibleOptions& options = {});

struct MemoryReport {
  double naive_bits = 0.0;
  double reversible_bits = 0.0;
  /// Gradient evaluations: one pass for naive storage, forward plus
  /// backward for the reversible scheme.
  std::size_t naive_grad_evals = 0;
  std::size_t reversible_grad_evals = 0;
  double ratio() const { return naive_bits > 0 ? reversible_bits / naive_bits : 0.0; }
};

/// `value_bits` is 32 or 64. Throws Unsupported for gamma = 0 and
/// std::invalid_argument for gamma outside [0, 1].
MemoryReport memory_report(Index d, std::size_t K, double gamma,
                           unsigned value_bits = 32);

}  // namespace dais
