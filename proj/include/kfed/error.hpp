#pragma once

#include <stdexcept>
#include <string>

namespace kfed {

/// Bad arguments, malformed files, violated preconditions. Maps to CLI exit code 1.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite state in the dual ascent. Maps to CLI exit code 2.
class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(const std::string& what, long iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kfed
