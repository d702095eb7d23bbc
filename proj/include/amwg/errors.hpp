#pragma once

#include <stdexcept>
#include <string>

namespace amwg {

// Bad user-facing argument (dimensions, ranges, malformed config values).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Internal precondition between components was broken.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AccuracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solve produced a non-finite value at grid step `step` and block `block`.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, int block, const std::string& context = {})
      : std::runtime_error("integration diverged at step " + std::to_string(step) + ", block " +
                           std::to_string(block) + (context.empty() ? "" : " (" + context + ")")),
        step_(step),
        block_(block) {}

  int step() const noexcept { return step_; }
  int block() const noexcept { return block_; }

 private:
  int step_;
  int block_;
};

}  // namespace amwg
