#pragma once

#include <cstdint>
#include <vector>

#include "stoptime/analysis.hpp"
#include "stoptime/model.hpp"

namespace stoptime {

// Ultimately periodic weight word A.C^omega. u_t is the sum of the first
// t+1 letters, matching the inclusive utility convention everywhere else.
struct UPSeq {
  std::vector<Rat> A;
  std::vector<Rat> C;  // nonempty

  void validate() const;
  std::int64_t prefix_len() const { return std::int64_t(A.size()); }
  std::int64_t cycle_len() const { return std::int64_t(C.size()); }
  Rat sum_A() const;
  Rat sum_C() const;
  Rat mean_C() const;
  Rat letter(const Int& i) const;
  Rat u(const Int& t) const;
};

// How an optimal adversary stops. Tail means the infimum is approached by
// chords t2 -> infinity from t1 and no finite distribution realizes it.
struct StopWitness {
  enum class Kind { PointMass, Chord, Tail };
  Kind kind = Kind::PointMass;
  std::int64_t t1 = 0;
  std::int64_t t2 = 0;  // Chord only
};

struct ValCycleResult {
  Rat value;
  StopWitness witness;
  bool attained = true;
};

// Chord through (t1, u_{t1}) and (t2, u_{t2}) evaluated at T; the expected
// utility of the two-point stopping distribution with mean T.
Rat bidirac_value(const std::vector<Rat>& u, std::int64_t t1, std::int64_t t2,
                  const Rat& T);
Rat bidirac_value(const UPSeq& seq, std::int64_t t1, std::int64_t t2,
                  const Rat& T);

// Exact infimum value of the ultimately periodic sequence at mean T.
// Ties are broken toward witnesses that stop in finite time, then the
// smallest t1, then the smallest t2; attained holds exactly when the
// witness is not the tail.
ValCycleResult val_cycle(const UPSeq& seq, const Rat& T);

// Brute-force enclosure over all integer stopping pairs up to H, plus the
// analytic t2 -> infinity terms. Independent of val_cycle's case analysis.
ValueBracket oracle_value(const UPSeq& seq, const Rat& T, std::int64_t H);

struct ApproxResult {
  ValueBracket bracket;
  UPSeq seq;                     // the switched sequence u'
  std::int64_t switch_index = 0; // |A|; u'_t = u_t exactly below this
  ValCycleResult inner;          // exact value of the switched sequence
};

// Certified approximation of val(chain, T): exact utilities until the
// distribution provably stays within the per-step tolerance of its limit,
// then steady-state increments. The bracket is +-eps around the exact
// value of the switched sequence.
ApproxResult approx_value(const MarkovChain& chain, const Rat& T, double eps);

// The slow-mixing family: 2n vertices, a forward spine 0..n advancing with
// probability alpha, failures walking deterministically back to 0 so every
// attempt takes exactly n steps.
MarkovChain lower_bound_family(int n, const Rat& alpha);

// E_delta(u) for the chain's exact utility prefix; an upper-bound witness
// on the value at E_delta.
Rat check_distribution_value(const MarkovChain& chain,
                             const StoppingDistribution& delta,
                             std::int64_t horizon);

// Global step budget for forward searches and sequence materialization.
// Defaults to 1e8; the STOPTIME_STEP_CAP environment variable overrides,
// set_step_cap overrides both (0 restores the default/env value).
std::int64_t step_cap();
void set_step_cap(std::int64_t cap);

}  // namespace stoptime
