#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stoptime/model.hpp"

namespace stoptime {

// Threshold query "is the stopping value at mean T strictly below theta".
struct ExactInstance {
  MarkovChain chain;
  Rat T;
  Rat theta;

  void validate() const;
};

// Power-sequence threshold instance: does mu M^t z' ever exceed 1 (t >= 1)?
// mu is fixed to a point mass on vertex 0; z has entries in {0, 1, 2}.
struct AgtInstance {
  StochasticMatrix M;
  std::vector<int> z;

  void validate() const;
};

// Does M^t(0, 1) ever exceed r?
struct MarkovReachInstance {
  StochasticMatrix M;
  Rat r;

  void validate() const;
};

// Does P^t(target_i, target_j) ever become positive, t >= 1? Entries are
// integers (held exactly; validate rejects fractions).
struct PositivityInstance {
  Mat P;
  std::size_t target_i = 0;
  std::size_t target_j = 0;

  void validate() const;
};

// Adds a copy of vertex 0 that absorbs all transitions into it (vertex 0's
// own row is duplicated onto the copy), leaving vertex 0 without incoming
// edges. Trajectory marginals from the point mass on 0, with the copy
// merged back, are unchanged. Fixpoint when vertex 0 is already source-only.
StochasticMatrix normalize_no_incoming_initial(const StochasticMatrix& M);

struct AgtReduction {
  MarkovChain intermediate;  // weights z' - Mz'; gain 0, bias z - e
  ExactInstance instance;    // n+1 vertices, T = 1, theta = z(0) - 1
};

// Turns a power-sequence threshold instance into a stopping-value threshold
// query. Rejects instances whose limit distribution rho satisfies
// rho . z' != 1; those are decidable outright and never need the reduction.
AgtReduction reduce_Agt_to_exact(const AgtInstance& inst);

// The (n+3)-vertex matrix whose powers reproduce d^t (M^{t-1}(0,1) - r) at
// the target entry, scaled by d = lcm of all denominators to an integer
// matrix.
PositivityInstance reduce_markovreach_to_positivity(
    const MarkovReachInstance& inst);

struct BiasEmbedding {
  MarkovChain chain;   // doubled vertex set, weights in {-1, 0, 1}
  std::vector<int> z;  // e + weights, entries in {0, 1, 2}
  bool trivial = false;  // y = 0 collapsed to the canonical always-No instance
};

// Vertex-doubling embedding of a bias direction: transitions split by the
// destination's |y| so that mu' M'^t z' = mu M^t (e + y/||y||)' for t >= 1.
BiasEmbedding embed_bias(const MarkovChain& chain, const Vec& y);

// Least t in [1, H] with mu M^t z' > 1, exactly; nullopt when none.
std::optional<std::int64_t> brute_force_Agt(const AgtInstance& inst,
                                            std::int64_t H);

AgtInstance load_agt_instance(const std::string& path);
void save_agt_instance(const AgtInstance& inst, const std::string& path);
MarkovReachInstance load_markovreach_instance(const std::string& path);
void save_markovreach_instance(const MarkovReachInstance& inst,
                               const std::string& path);
void save_positivity_instance(const PositivityInstance& inst,
                              const std::string& path);
PositivityInstance load_positivity_instance(const std::string& path);
void save_exact_instance(const ExactInstance& inst, const std::string& path);
ExactInstance load_exact_instance(const std::string& path);

}  // namespace stoptime
