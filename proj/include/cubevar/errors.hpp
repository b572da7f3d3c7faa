#pragma once

#include <stdexcept>
#include <string>

namespace cubevar {

// Thrown when an operation's stated precondition does not hold.
class precondition_error : public std::invalid_argument {
 public:
  explicit precondition_error(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a budget cannot be met within implementation limits
// (cutoff overflow, embedding too large, lcm overflow, ...).
class resource_error : public std::runtime_error {
 public:
  explicit resource_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an internal invariant is violated; indicates a bug.
class internal_error : public std::logic_error {
 public:
  explicit internal_error(const std::string& what) : std::logic_error(what) {}
};

}  // namespace cubevar
