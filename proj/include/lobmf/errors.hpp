#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lobmf {

/// Argument outside the mathematical domain of an operation (empty measure,
/// negative initial path value, mismatched grids, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A user-supplied model breaks its declared contract (intensity above its
/// bound, choke price not bracketed, non-monotone demand, ...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A callable needed by an operation was not supplied.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative scheme did not reach its tolerance. Carries the residual
/// history and the last iterate so callers can inspect how far it got.
class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, std::vector<double> history,
                      std::vector<double> last_iterate = {})
      : std::runtime_error(what),
        history_(std::move(history)),
        last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& history() const noexcept { return history_; }
  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  std::vector<double> history_;
  std::vector<double> last_iterate_;
};

/// An internal invariant failed (negative liquidity after reflection, ...).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Configuration rejected during validation. `key()` names the offending entry.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string key, const std::string& constraint)
      : std::invalid_argument(key + ": " + constraint), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace lobmf
