#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dais {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when a chain, moment recursion or coder produces a value that is
/// not finite (or a covariance that stops being PSD). Carries whatever
/// location information was available at the throw site.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what,
                            std::optional<std::size_t> step = std::nullopt,
                            Vector theta = Vector())
      : std::runtime_error(what), step_(step), theta_(std::move(theta)) {}

  std::optional<std::size_t> step() const { return step_; }
  std::optional<std::size_t> chain() const { return chain_; }
  const Vector& theta() const { return theta_; }

  NumericalFailure with_chain(std::size_t chain) const {
    NumericalFailure copy = *this;
    copy.chain_ = chain;
    return copy;
  }

 private:
  std::optional<std::size_t> step_;
  std::optional<std::size_t> chain_;
  Vector theta_;
};

/// The information buffer would grow past its configured cap.
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A reversal was attempted with a buffer or seed that does not belong to
/// the forward pass being undone.
class BufferCorruption : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested combination is well-formed but not supported
/// (e.g. fixed-point reversal with full momentum refreshment).
class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dais
