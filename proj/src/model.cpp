#include "stoptime/model.hpp"

#include "stoptime/errors.hpp"

namespace stoptime {

void StochasticMatrix::validate() const {
  if (entries.rows() != entries.cols())
    throw InvariantError("transition matrix is not square");
  for (std::size_t i = 0; i < entries.rows(); ++i) {
    Rat sum(0);
    for (std::size_t j = 0; j < entries.cols(); ++j) {
      if (entries.at(i, j) < 0)
        throw InvariantError("row " + std::to_string(i) +
                             " has a negative entry at column " +
                             std::to_string(j));
      sum += entries.at(i, j);
    }
    if (sum != 1)
      throw InvariantError("row " + std::to_string(i) + " sums to " +
                           rat_to_string(sum));
  }
}

Rat MarkovChain::W() const {
  Rat m(0);
  for (const Rat& x : w)
    if (rat_abs(x) > m) m = rat_abs(x);
  return m;
}

Rat MarkovChain::alpha() const {
  Rat a(1);
  bool seen = false;
  for (std::size_t i = 0; i < n(); ++i)
    for (std::size_t j = 0; j < n(); ++j) {
      const Rat& p = P.entries.at(i, j);
      if (p > 0 && (!seen || p < a)) {
        a = p;
        seen = true;
      }
    }
  return a;
}

void MarkovChain::validate() const {
  P.validate();
  if (mu.size() != n() || w.size() != n())
    throw InvariantError("initial distribution and weights must match the "
                         "matrix dimension");
  Rat sum(0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] < 0)
      throw InvariantError("initial distribution has a negative entry at " +
                           std::to_string(i));
    sum += mu[i];
  }
  if (sum != 1)
    throw InvariantError("initial distribution sums to " + rat_to_string(sum));
  if (!states.empty() && states.size() != n())
    throw InvariantError("state name list does not match dimension");
}

std::string MarkovChain::state_name(std::size_t v) const {
  if (v < states.size()) return states[v];
  return "v" + std::to_string(v);
}

void StoppingDistribution::validate() const {
  Rat sum(0);
  for (const auto& [t, p] : support) {
    if (t < 0) throw InvariantError("stopping time support contains " +
                                    std::to_string(t));
    if (p < 0)
      throw InvariantError("stopping distribution has a negative mass at t=" +
                           std::to_string(t));
    sum += p;
  }
  if (sum != 1)
    throw InvariantError("stopping distribution sums to " + rat_to_string(sum));
}

Rat StoppingDistribution::expected_time() const {
  Rat e(0);
  for (const auto& [t, p] : support) e += p * t;
  return e;
}

std::int64_t StoppingDistribution::max_support() const {
  std::int64_t m = 0;
  for (const auto& [t, p] : support)
    if (p > 0 && t > m) m = t;
  return m;
}

StoppingDistribution BiDirac::to_distribution() const {
  StoppingDistribution d;
  if (t1 == t2) {
    d.support[t1] = 1;
  } else {
    if (p1 > 0) d.support[t1] = p1;
    if (p1 < 1) d.support[t2] = 1 - p1;
  }
  return d;
}

void BiDirac::validate() const {
  if (t1 < 0 || t2 < t1) throw InvariantError("bi-Dirac support out of order");
  if (p1 < 0 || p1 > 1)
    throw InvariantError("bi-Dirac mass outside [0,1]: " + rat_to_string(p1));
  if (t1 == t2 && p1 != 1)
    throw InvariantError("degenerate bi-Dirac must put mass 1 on its point");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Oracle: return "Oracle";
    case Method::Approximation: return "Approximation";
    case Method::OptimizerLowerBound: return "OptimizerLowerBound";
  }
  return "?";
}

void ValueBracket::validate() const {
  if (!(lower <= estimate && estimate <= upper))
    throw InvariantError("value bracket out of order");
}

Rat Mdp::W() const {
  Rat m(0);
  for (const Rat& x : w)
    if (rat_abs(x) > m) m = rat_abs(x);
  return m;
}

Rat Mdp::alpha() const {
  Rat a(1);
  bool seen = false;
  for (const auto& vt : theta)
    for (const auto& [act, row] : vt)
      for (const Rat& p : row)
        if (p > 0 && (!seen || p < a)) {
          a = p;
          seen = true;
        }
  return a;
}

void Mdp::validate() const {
  const std::size_t nn = n();
  if (theta.size() != nn || mu.size() != nn || w.size() != nn)
    throw InvariantError("MDP component sizes disagree");
  for (std::size_t v = 0; v < nn; ++v) {
    if (theta[v].empty())
      throw InvariantError("state " + states[v] + " enables no action");
    for (const auto& [a, row] : theta[v]) {
      if (a < 0 || a >= static_cast<int>(actions.size()))
        throw InvariantError("state " + states[v] +
                             " references an unknown action");
      if (row.size() != nn)
        throw InvariantError("distribution size mismatch at state " +
                             states[v]);
      Rat sum(0);
      for (const Rat& p : row) {
        if (p < 0)
          throw InvariantError("negative transition probability at state " +
                               states[v] + ", action " + actions[a]);
        sum += p;
      }
      if (sum != 1)
        throw InvariantError("transitions of state " + states[v] +
                             ", action " + actions[a] + " sum to " +
                             rat_to_string(sum));
    }
  }
  Rat msum(0);
  for (const Rat& p : mu) {
    if (p < 0) throw InvariantError("negative initial probability");
    msum += p;
  }
  if (msum != 1)
    throw InvariantError("initial distribution sums to " + rat_to_string(msum));
}

std::vector<int> Mdp::actions_of(std::size_t v) const {
  std::vector<int> out;
  for (const auto& [a, row] : theta[v]) out.push_back(a);
  return out;
}

const Vec& Mdp::row(std::size_t v, int a) const {
  auto it = theta[v].find(a);
  if (it == theta[v].end())
    throw IndexError("state " + states[v] + " does not enable action " +
                     std::to_string(a));
  return it->second;
}

void MarkovStrategy::validate(const Mdp& mdp) const {
  if (horizon < 0) throw InvariantError("strategy horizon is negative");
  if (static_cast<std::int64_t>(probs.size()) != horizon)
    throw InvariantError("strategy table does not match its horizon");
  for (std::int64_t t = 0; t < horizon; ++t) {
    if (probs[t].size() != mdp.n())
      throw InvariantError("strategy table row size mismatch at t=" +
                           std::to_string(t));
    for (std::size_t v = 0; v < mdp.n(); ++v) {
      Rat sum(0);
      for (const auto& [a, p] : probs[t][v]) {
        if (mdp.theta[v].find(a) == mdp.theta[v].end())
          throw InvariantError("strategy plays a disabled action at state " +
                               mdp.states[v]);
        if (p < 0) throw InvariantError("negative strategy probability");
        sum += p;
      }
      if (sum != 1)
        throw InvariantError("strategy probabilities at state " +
                             mdp.states[v] + ", t=" + std::to_string(t) +
                             " sum to " + rat_to_string(sum));
    }
  }
  if (tail.size() != mdp.n())
    throw InvariantError("tail policy size mismatch");
  for (std::size_t v = 0; v < mdp.n(); ++v)
    if (mdp.theta[v].find(tail[v]) == mdp.theta[v].end())
      throw InvariantError("tail policy plays a disabled action at state " +
                           mdp.states[v]);
}

Rat expected_utility(const StoppingDistribution& delta, const Vec& u) {
  Rat e(0);
  for (const auto& [t, p] : delta.support) {
    if (p == 0) continue;
    if (t >= static_cast<std::int64_t>(u.size()))
      throw IndexError("utility sequence shorter than stopping support");
    e += p * u[static_cast<std::size_t>(t)];
  }
  return e;
}

double expected_utility(const StoppingDistribution& delta,
                        const std::vector<double>& u) {
  double e = 0;
  for (const auto& [t, p] : delta.support) {
    if (p == 0) continue;
    if (t >= static_cast<std::int64_t>(u.size()))
      throw IndexError("utility sequence shorter than stopping support");
    e += to_double(p) * u[static_cast<std::size_t>(t)];
  }
  return e;
}

BiDirac bidirac_with_expectation(std::int64_t t1, std::int64_t t2,
                                 const Rat& T) {
  if (t1 < 0 || t2 < t1) throw RangeError("bi-Dirac support out of order");
  if (T < t1 || T > t2)
    throw RangeError("expected time " + rat_to_string(T) +
                     " outside [" + std::to_string(t1) + "," +
                     std::to_string(t2) + "]");
  BiDirac b;
  b.t1 = t1;
  b.t2 = t2;
  if (t1 == t2) {
    b.p1 = 1;
  } else {
    b.p1 = (Rat(t2) - T) / Rat(t2 - t1);
  }
  return b;
}

}  // namespace stoptime
