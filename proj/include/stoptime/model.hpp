#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stoptime/linalg.hpp"
#include "stoptime/rat.hpp"

namespace stoptime {

// Row-stochastic square matrix. Construction validates entry signs and
// exact row sums; a validated instance never needs re-checking.
struct StochasticMatrix {
  Mat entries;

  std::size_t n() const { return entries.rows(); }

  // Throws InvariantError naming the offending row, e.g.
  // "row 0 sums to 5/6".
  void validate() const;
};

// A finite Markov chain with per-vertex weights. W() and alpha() are the
// derived parameters every bound formula consumes: the largest absolute
// weight and the smallest positive transition probability.
struct MarkovChain {
  StochasticMatrix P;
  Vec mu;
  Vec w;
  std::vector<std::string> states;  // optional display names

  std::size_t n() const { return P.n(); }
  Rat W() const;
  Rat alpha() const;
  void validate() const;
  std::string state_name(std::size_t v) const;
};

// Probability distribution over stopping times, finite support.
struct StoppingDistribution {
  std::map<std::int64_t, Rat> support;

  void validate() const;
  Rat expected_time() const;
  std::int64_t max_support() const;
};

// Two-point stopping distribution. t1 == t2 encodes a point mass and then
// p1 is forced to 1.
struct BiDirac {
  std::int64_t t1 = 0;
  std::int64_t t2 = 0;
  Rat p1 = 1;

  Rat expected_time() const { return p1 * t1 + (1 - p1) * t2; }
  StoppingDistribution to_distribution() const;
  void validate() const;
};

enum class Method { Oracle, Approximation, OptimizerLowerBound };

std::string method_name(Method m);

// Numeric result with certified enclosure. estimate always lies in
// [lower, upper]; infinities mark sides the producer could not certify.
// exact is set when the estimate is known as a rational, which the CLI
// surfaces next to the decimal.
struct ValueBracket {
  double estimate = 0;
  double lower = 0;
  double upper = 0;
  Method method = Method::Oracle;
  std::optional<Rat> exact;

  void validate() const;
};

// Markov decision process. Actions are global names; each vertex enables a
// nonempty subset via its transition table.
struct Mdp {
  std::vector<std::string> states;
  std::vector<std::string> actions;
  // theta[v] maps an action index to a distribution over vertices.
  std::vector<std::map<int, Vec>> theta;
  Vec mu;
  Vec w;

  std::size_t n() const { return states.size(); }
  Rat W() const;
  Rat alpha() const;
  void validate() const;
  std::vector<int> actions_of(std::size_t v) const;
  const Vec& row(std::size_t v, int a) const;
};

// Time-dependent strategy that becomes memoryless after `horizon`: for
// t < horizon, probs[t][v] gives action probabilities; afterwards the pure
// tail policy acts. Probabilities are exact; float input is exactified by
// the loader before it gets here.
struct MarkovStrategy {
  std::int64_t horizon = 0;
  std::vector<std::vector<std::map<int, Rat>>> probs;  // [t][v] -> action -> p
  std::vector<int> tail;                               // [v] -> action

  void validate(const Mdp& mdp) const;
};

// E_delta(u): the expected utility of stopping per delta. IndexError when
// u does not cover the support.
Rat expected_utility(const StoppingDistribution& delta, const Vec& u);
double expected_utility(const StoppingDistribution& delta,
                        const std::vector<double>& u);

// The unique two-point distribution on {t1, t2} with mean exactly T.
BiDirac bidirac_with_expectation(std::int64_t t1, std::int64_t t2,
                                 const Rat& T);

}  // namespace stoptime
