#pragma once

#include <stdexcept>
#include <string>

namespace stoptime {

// Error taxonomy shared by all modules. Each class carries a stable code
// string used by the CLI to map failures onto exit codes: usage errors exit
// with 1, parse and invariant violations with 2, budget and cap overruns
// with 3.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

class ParseError : public Error {
public:
  explicit ParseError(const std::string& msg) : Error("parse", msg) {}
};

class InvariantError : public Error {
public:
  explicit InvariantError(const std::string& msg) : Error("invariant", msg) {}
};

class RangeError : public Error {
public:
  explicit RangeError(const std::string& msg) : Error("range", msg) {}
};

class IndexError : public Error {
public:
  explicit IndexError(const std::string& msg) : Error("index", msg) {}
};

class PreconditionError : public Error {
public:
  explicit PreconditionError(const std::string& msg)
      : Error("precondition", msg) {}
};

// Thrown when a chain's residue period exceeds the configured cap; the
// periodic machinery would otherwise materialize M^d with d beyond reach.
class PeriodTooLarge : public Error {
public:
  explicit PeriodTooLarge(const std::string& msg)
      : Error("period-too-large", msg) {}
};

// Thrown when a certified computation cannot finish within the step cap.
// achievable_eps, when positive, reports the best accuracy that the cap
// does admit, so a caller can retry with a weaker request instead of
// guessing.
class BudgetExceeded : public Error {
public:
  explicit BudgetExceeded(const std::string& msg, double achievable_eps = 0.0)
      : Error("budget", msg), achievable_eps_(achievable_eps) {}
  double achievable_eps() const { return achievable_eps_; }

private:
  double achievable_eps_;
};

// Internal assertion failures. These indicate a bug, not bad input.
class SingularSystem : public Error {
public:
  explicit SingularSystem(const std::string& msg)
      : Error("singular-system", msg) {}
};

class CycleGuard : public Error {
public:
  explicit CycleGuard(const std::string& msg) : Error("cycle-guard", msg) {}
};

class UsageError : public Error {
public:
  explicit UsageError(const std::string& msg) : Error("usage", msg) {}
};

}  // namespace stoptime
