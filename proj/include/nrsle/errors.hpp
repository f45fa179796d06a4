#pragma once

#include <stdexcept>
#include <string>

namespace nrsle {

/// Invalid user-supplied parameter. `field()` names the offending input.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Two angles (or two lattice walks, two slits) closer than the resolvable gap.
class DegenerateConfigError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An exhaustive enumeration hit its work budget before finishing.
class BudgetExceededError : public std::runtime_error {
 public:
  BudgetExceededError(const std::string& message, std::size_t partial_count)
      : std::runtime_error(message), partial_count_(partial_count) {}
  std::size_t partial_count() const { return partial_count_; }

 private:
  std::size_t partial_count_;
};

}  // namespace nrsle
