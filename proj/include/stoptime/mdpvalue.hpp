#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stoptime/model.hpp"

namespace stoptime {

// Maximal end component: a closed, strongly connected sub-MDP. actions[i]
// lists the actions of vertices[i] whose support stays inside the component.
struct EndComponent {
  std::vector<std::size_t> vertices;
  std::vector<std::vector<int>> actions;
};

struct MecDecomposition {
  std::vector<EndComponent> mecs;  // ordered by smallest vertex
  std::vector<std::size_t> rest;   // vertices in no end component
};

struct MeanPayoffSolution {
  Vec value;                   // optimal long-run average per start vertex
  std::vector<int> policy;     // optimal pure memoryless strategy
  std::vector<Rat> per_ec_gain;  // parallel to mec_decompose(mdp).mecs
};

// Closed-form reward bounds. Every figure is tracked both as a double
// (which may overflow to inf) and as log10, the authoritative companion.
struct RewardBounds {
  double t0 = 0;          // mixing-time scale 3 n^5 (1/alpha)^{n^2}
  double lemma7 = 0;      // 4nW * t0
  double lemma8 = 0;      // 12 n^6 W (1/alpha)^{n^3}
  double lemma9 = 0;      // 12 n^8 W (1/alpha)^{n^3+n}
  double unif_entry = 0;  // entry-vertex weight, three times lemma9
  double B_star = 0;
  double t_star = 0;
  double t_hat = 0;
  double log10_t0 = 0;
  double log10_lemma7 = 0;
  double log10_lemma8 = 0;
  double log10_lemma9 = 0;
  double log10_unif_entry = 0;
  double log10_B_star = 0;
  double log10_t_star = 0;
  double log10_t_hat = 0;
  std::int64_t tail_steps = 0;  // convergence steps added on top of t_star
};

struct EstimateOpts {
  std::int64_t t_cap = 24;
  int restarts = 8;
  std::uint64_t seed = 1;
};

MecDecomposition mec_decompose(const Mdp& mdp);

MeanPayoffSolution mean_payoff(const Mdp& mdp);

// Adds the reset action and the penalty vertex, collapsing the MDP into a
// single end component. A spread-out initial distribution first gets an
// auxiliary start vertex so the penalty vertex has a well-defined return
// target.
Mdp back_edge_transform(const Mdp& mdp);

// Reroutes all probability entering an end component through a fresh entry
// vertex and flattens each component's weights to its exact gain. Keeps
// the mean-payoff value and every per-component gain unchanged.
Mdp uniformize(const Mdp& mdp);

RewardBounds reward_bounds(const Mdp& mdp, const Rat& T, double eps);

ValueBracket evaluate_strategy(const Mdp& mdp, const MarkovStrategy& sigma,
                               const Rat& T, double eps);

ValueBracket estimate_value(const Mdp& mdp, const Rat& T, double eps,
                            const EstimateOpts& opts);
ValueBracket estimate_value(const Mdp& mdp, const Rat& T, double eps,
                            const EstimateOpts& opts, MarkovStrategy* best);

// SMT-LIB 2 formula over nonlinear real arithmetic: satisfiable iff some
// Markov strategy with the given decision horizon achieves value >= tau.
std::string export_etr(const Mdp& mdp, const Rat& T, std::int64_t horizon,
                       const Rat& tau);

struct Fig6 {
  Mdp mdp;
  MarkovStrategy sigma_opt;
};

// The infinite-memory example: an uncontrolled coin upstairs, a controlled
// mirror downstairs, and a probability schedule that keeps the expected
// utility pinned at zero. horizon bounds the schedule's length.
Fig6 fig6_example(std::int64_t horizon = 61);

// The positive/negative end-component example with mean-payoff value 0.
Mdp fig7_example();

}  // namespace stoptime
