#pragma once

#include <cstdint>
#include <vector>

#include "stoptime/model.hpp"

namespace stoptime {

struct RecurrentClass {
  std::vector<std::size_t> vertices;  // ascending
  std::int64_t period = 1;
};

// Transient/recurrent partition of the positive-probability digraph.
// Recurrent classes are the bottom strongly connected components; they are
// closed, and period divides every cycle length inside the class.
struct ClassDecomposition {
  std::vector<std::size_t> transient;  // ascending
  std::vector<RecurrentClass> classes;
  std::int64_t period_lcm = 1;
};

// gain[v] is the long-run average reward from v; bias y is the unique
// solution of y' = M(y-x)' + w' with pi.y' = 0 on each recurrent class.
struct GainBias {
  Vec gain;
  Vec bias;
  std::vector<Rat> per_class_gain;
};

// One line per residue class mod d. The value of the line at index t is
// slope*(t+1) + intercepts[t mod d]; u_t converges to it along t = k + m*d.
// The +1 comes from u_t summing t+1 terms, and this is the only place that
// reconciles the indexing.
struct Asymptote {
  Rat slope;
  std::vector<Rat> intercepts;

  Rat line_at(std::int64_t t) const {
    return slope * Rat(t + 1) +
           intercepts[std::size_t(t % std::int64_t(intercepts.size()))];
  }
};

// Everything the per-residue analysis of a (possibly periodic) chain needs.
// With d the lcm of class periods, N = M^d is aperiodic on every class and
//   u_{k+m*d} = s*(k+m*d+1) + c_k - nu_k * N^m * y_hat'
// holds exactly for 0 <= k < d, m >= 0, where nu_k = mu * M^{k+1}.
struct PeriodicData {
  std::int64_t d = 1;
  Rat s;                 // slope mu.x'
  StochasticMatrix N;    // M^d
  Vec w_hat;             // sum_{j=0}^{d-1} M^j w'
  GainBias hat;          // gain/bias of (N, w_hat)
  std::vector<Vec> nu;   // nu[k] = mu M^{k+1}
  std::vector<Rat> c;    // intercepts, one per residue
  Vec u_head;            // u_0 .. u_{d-1}

  // u at index k + m*d, via the exact identity above.
  Rat u_at(std::int64_t k, const Int& m) const;
};

struct ConvergenceBound {
  int n = 0;
  Rat alpha;        // after clamping to <= 1/2
  double K1 = 3.0;
  double K3 = 0;    // may round to 1.0 in doubles; companions below are exact
  // -ln(K3) and its log10. log10_neg_ln_K3 never underflows and is the
  // authoritative representation of K3 < 1.
  double neg_ln_K3 = 0;
  double log10_neg_ln_K3 = 0;
  std::int64_t B = 0;  // minimal integer with n*W*K1*K3^B <= eps, saturating
};

ClassDecomposition decompose(const MarkovChain& chain);

// Stationary distribution of the class's sub-matrix, ordered like
// dec.classes[class_index].vertices.
Vec steady_state(const MarkovChain& chain, const ClassDecomposition& dec,
                 std::size_t class_index);

// Probability, from mu, of ending up in each recurrent class. Sums to 1.
std::vector<Rat> absorption_probs(const MarkovChain& chain,
                                  const ClassDecomposition& dec);

GainBias gain_bias(const MarkovChain& chain);
GainBias gain_bias(const MarkovChain& chain, const ClassDecomposition& dec);

// u_0 .. u_horizon, where u_t sums the first t+1 step rewards.
std::vector<Rat> utility_prefix(const MarkovChain& chain,
                                std::int64_t horizon);

PeriodicData periodic_data(const MarkovChain& chain);
PeriodicData periodic_data(const MarkovChain& chain,
                           const ClassDecomposition& dec);

Asymptote asymptote(const MarkovChain& chain);

// lim_m mu P^m for a chain whose recurrent classes are all aperiodic:
// the absorption-weighted mixture of the class stationary distributions.
Vec limit_row(const MarkovChain& chain, const ClassDecomposition& dec);

// Contraction constants: K3 = (1 - alpha^{n^3})^{1/(3n^2)} and the smallest
// B with n*W*K1*K3^B <= eps. All arithmetic happens in log space so extreme
// alpha^{n^3} neither underflows nor collapses K3 to 1.
ConvergenceBound convergence_bound(int n, const Rat& alpha, const Rat& W,
                                   double eps);

}  // namespace stoptime
