#include <doctest.h>

#include <cstdio>
#include <optional>
#include <vector>

#include "oracles.hpp"
#include "stoptime/analysis.hpp"
#include "stoptime/decide.hpp"
#include "stoptime/errors.hpp"
#include "stoptime/reductions.hpp"

using namespace stoptime;
using testutil::rat;

namespace {

// Lazy 3-cycle: irreducible, aperiodic, doubly stochastic, so the limit
// distribution from anywhere is uniform.
StochasticMatrix lazy_cycle() {
  StochasticMatrix M;
  M.entries = Mat(3, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    M.entries.at(i, i) = rat(1, 2);
    M.entries.at(i, (i + 1) % 3) = rat(1, 2);
  }
  M.validate();
  return M;
}

}  // namespace

TEST_CASE("initial-vertex normalization is a fixpoint on source-only inputs") {
  StochasticMatrix M;
  M.entries = Mat(2, 2);
  M.entries.at(0, 1) = Rat(1);
  M.entries.at(1, 1) = Rat(1);
  M.validate();
  StochasticMatrix N = normalize_no_incoming_initial(M);
  CHECK(N.entries == M.entries);
}

TEST_CASE("normalization redirects incoming edges onto a fresh copy") {
  StochasticMatrix M;
  M.entries = Mat(2, 2);
  M.entries.at(0, 1) = Rat(1);
  M.entries.at(1, 0) = Rat(1);
  M.validate();
  StochasticMatrix N = normalize_no_incoming_initial(M);
  REQUIRE(N.n() == 3);
  // Vertex 0 keeps its row, nothing enters it any more.
  for (std::size_t i = 0; i < 3; ++i) CHECK(N.entries.at(i, 0) == Rat(0));
  CHECK(N.entries.at(0, 1) == Rat(1));
  CHECK(N.entries.at(1, 2) == Rat(1));
}

TEST_CASE("normalization preserves merged trajectory marginals") {
  testutil::TestRng rng(301);
  for (int it = 0; it < 10; ++it) {
    std::size_t n = std::size_t(rng.uniform(2, 5));
    MarkovChain c = testutil::random_chain(rng, int(n));
    StochasticMatrix N = normalize_no_incoming_initial(c.P);
    std::size_t m = N.n();
    REQUIRE((m == n || m == n + 1));

    Vec orig(n, Rat(0)), norm(m, Rat(0));
    orig[0] = Rat(1);
    norm[0] = Rat(1);
    for (int t = 0; t <= 20; ++t) {
      // The copy, when present, carries exactly the mass the original
      // vertex 0 would have held.
      Rat zero_mass = norm[0];
      if (m == n + 1) zero_mass += norm[n];
      CHECK(zero_mass == orig[0]);
      for (std::size_t j = 1; j < n; ++j) CHECK(norm[j] == orig[j]);
      orig = vec_mat(orig, c.P.entries);
      norm = vec_mat(norm, N.entries);
    }
  }
}

TEST_CASE("the power-threshold reduction produces the advertised shape") {
  AgtInstance inst{lazy_cycle(), {2, 1, 0}};  // uniform limit dot z = 1
  AgtReduction red = reduce_Agt_to_exact(inst);

  CHECK(red.instance.T == Rat(1));
  CHECK(red.instance.theta == Rat(1));  // z(0) - 1
  // The cycle feeds vertex 0, so normalization adds a copy (3 -> 4 states)
  // and the lift prepends a fresh initial vertex (4 -> 5).
  CHECK(red.instance.chain.n() == 5);

  // The intermediate chain's gain vanishes and its bias is the extended
  // z - e, the copy inheriting z(0).
  GainBias gb = gain_bias(red.intermediate);
  for (const Rat& g : gb.gain) CHECK(g == Rat(0));
  REQUIRE(gb.bias.size() == 4);
  CHECK(gb.bias[0] == Rat(1));
  CHECK(gb.bias[1] == Rat(0));
  CHECK(gb.bias[2] == Rat(-1));
  CHECK(gb.bias[3] == Rat(1));
}

TEST_CASE("the reduction rejects instances it could answer directly") {
  AgtInstance wrong_mass{lazy_cycle(), {2, 2, 1}};
  CHECK_THROWS_AS(reduce_Agt_to_exact(wrong_mass), InvariantError);

  // Periodic matrices have no limit distribution to normalize against.
  StochasticMatrix flip;
  flip.entries = Mat(2, 2);
  flip.entries.at(0, 1) = Rat(1);
  flip.entries.at(1, 0) = Rat(1);
  flip.validate();
  AgtInstance periodic{flip, {2, 0}};
  CHECK_THROWS_AS(reduce_Agt_to_exact(periodic), InvariantError);
}

TEST_CASE("brute force and the reduced decision agree on hand instances") {
  // (mu M^t z) at t = 1 is 3/2 > 1: immediate witness.
  AgtInstance quick{lazy_cycle(), {2, 1, 0}};
  std::optional<std::int64_t> w = brute_force_Agt(quick, 200);
  REQUIRE(w.has_value());
  CHECK(*w == 1);
  CHECK(exact_decide(reduce_Agt_to_exact(quick).instance).answer ==
        Answer::Yes);

  // Reversed z needs three steps before the mass tips over 1.
  AgtInstance slow{lazy_cycle(), {0, 1, 2}};
  w = brute_force_Agt(slow, 200);
  REQUIRE(w.has_value());
  CHECK(*w == 3);
  CHECK(brute_force_Agt(slow, 2) == std::nullopt);  // horizon excludes it
  CHECK(exact_decide(reduce_Agt_to_exact(slow).instance).answer ==
        Answer::Yes);

  // z = e pins mu M^t z to exactly 1 forever: never strictly above.
  AgtInstance flat{lazy_cycle(), {1, 1, 1}};
  CHECK(brute_force_Agt(flat, 500) == std::nullopt);
  CHECK(exact_decide(reduce_Agt_to_exact(flat).instance).answer == Answer::No);

  CHECK_THROWS_AS(brute_force_Agt(flat, 0), PreconditionError);
}

TEST_CASE("bias embedding reproduces the scaled power sequence") {
  testutil::TestRng rng(307);
  int nontrivial = 0;
  for (int it = 0; it < 12; ++it) {
    MarkovChain c = testutil::random_positive_chain(rng, rng.uniform(2, 4), 6);
    GainBias gb = gain_bias(c);
    BiasEmbedding emb = embed_bias(c, gb.bias);

    Rat norm = 0;
    for (const Rat& v : gb.bias) norm = std::max(norm, rat_abs(v));
    if (norm == 0) {
      CHECK(emb.trivial);
      continue;
    }
    ++nontrivial;
    CHECK_FALSE(emb.trivial);

    // Weights live in {-1, 0, 1} and z = e + weights.
    REQUIRE(emb.z.size() == emb.chain.n());
    for (std::size_t i = 0; i < emb.z.size(); ++i) {
      CHECK(Rat(emb.z[i]) == emb.chain.w[i] + 1);
      CHECK(emb.z[i] >= 0);
      CHECK(emb.z[i] <= 2);
    }

    // mu' M'^t z' = mu M^t (e + y / ||y||) for every t >= 1.
    Vec target(c.n());
    for (std::size_t i = 0; i < c.n(); ++i) {
      target[i] = 1 + gb.bias[i] / norm;
    }
    Vec zz(emb.chain.n());
    for (std::size_t i = 0; i < emb.chain.n(); ++i) zz[i] = Rat(emb.z[i]);

    Vec lhs_row = emb.chain.mu;
    Vec rhs_row = c.mu;
    for (int t = 1; t <= 50; ++t) {
      lhs_row = vec_mat(lhs_row, emb.chain.P.entries);
      rhs_row = vec_mat(rhs_row, c.P.entries);
      CHECK(dot(lhs_row, zz) == dot(rhs_row, target));
    }
  }
  CHECK(nontrivial >= 6);

  MarkovChain c = testutil::random_positive_chain(rng, 3, 5);
  CHECK_THROWS_AS(embed_bias(c, Vec(2, Rat(0))), PreconditionError);
}

TEST_CASE("a zero bias collapses the embedding to a closed instance") {
  MarkovChain c;
  c.P.entries = Mat(2, 2);
  c.P.entries.at(0, 1) = Rat(1);
  c.P.entries.at(1, 1) = Rat(1);
  c.mu = {Rat(1), Rat(0)};
  c.w = {Rat(0), Rat(0)};
  c.validate();
  BiasEmbedding emb = embed_bias(c, Vec(2, Rat(0)));
  CHECK(emb.trivial);
  AgtInstance inst{emb.chain.P, emb.z};
  CHECK(brute_force_Agt(inst, 300) == std::nullopt);
}

TEST_CASE("the reachability matrix reproduces scaled probe differences") {
  // Absorbing 2-state chain: M^t(0, 1) = 1 - 2^{-t}, threshold 3/4.
  MarkovReachInstance inst;
  inst.M.entries = Mat(2, 2);
  inst.M.entries.at(0, 0) = rat(1, 2);
  inst.M.entries.at(0, 1) = rat(1, 2);
  inst.M.entries.at(1, 1) = Rat(1);
  inst.M.validate();
  inst.r = rat(3, 4);
  inst.validate();

  PositivityInstance pos = reduce_markovreach_to_positivity(inst);
  pos.validate();
  REQUIRE(pos.P.rows() == 5);  // n + 3 for n = 2
  CHECK(pos.target_i == 2);
  CHECK(pos.target_j == 4);

  // All denominators clear through d = 4.
  Rat d(4);
  for (int t = 2; t <= 12; ++t) {
    Mat pt = mat_pow(pos.P, unsigned(t));
    Mat mt = mat_pow(inst.M.entries, unsigned(t - 1));
    Rat scale = 1;
    for (int i = 0; i < t; ++i) scale *= d;
    CHECK(pt.at(pos.target_i, pos.target_j) ==
          scale * (mt.at(0, 1) - inst.r));
  }

  // Sign flips exactly where the reach probability passes r: negative at
  // t = 2, a zero touch at t = 3, positive from t = 4 on.
  CHECK(mat_pow(pos.P, 2).at(2, 4) < 0);
  CHECK(mat_pow(pos.P, 3).at(2, 4) == 0);
  CHECK(mat_pow(pos.P, 4).at(2, 4) > 0);
}

TEST_CASE("reduction instances survive their JSON round trips") {
  std::string path = "red_rt.json";

  AgtInstance agt{lazy_cycle(), {2, 1, 0}};
  save_agt_instance(agt, path);
  AgtInstance agt2 = load_agt_instance(path);
  CHECK(agt2.M.entries == agt.M.entries);
  CHECK(agt2.z == agt.z);

  MarkovReachInstance mr;
  mr.M = lazy_cycle();
  mr.r = rat(7, 9);
  save_markovreach_instance(mr, path);
  MarkovReachInstance mr2 = load_markovreach_instance(path);
  CHECK(mr2.M.entries == mr.M.entries);
  CHECK(mr2.r == mr.r);

  PositivityInstance pos;
  pos.P = Mat(2, 2);
  pos.P.at(0, 0) = Rat(-3);
  pos.P.at(0, 1) = Rat(7);
  pos.P.at(1, 0) = Rat(0);
  pos.P.at(1, 1) = Int("123456789123456789123456789");
  pos.target_i = 0;
  pos.target_j = 1;
  save_positivity_instance(pos, path);
  PositivityInstance pos2 = load_positivity_instance(path);
  CHECK(pos2.P == pos.P);
  CHECK(pos2.target_i == 0);
  CHECK(pos2.target_j == 1);

  std::remove(path.c_str());
}

TEST_CASE("instance validation rejects out-of-range data") {
  AgtInstance agt{lazy_cycle(), {2, 1, 3}};
  CHECK_THROWS_AS(agt.validate(), InvariantError);
  agt.z = {2, 1};
  CHECK_THROWS_AS(agt.validate(), InvariantError);

  MarkovReachInstance mr;
  mr.M = lazy_cycle();
  mr.r = Rat(0);
  CHECK_THROWS_AS(mr.validate(), InvariantError);

  PositivityInstance pos;
  pos.P = Mat(2, 2);
  pos.P.at(0, 0) = rat(1, 2);
  CHECK_THROWS_AS(pos.validate(), InvariantError);
  pos.P.at(0, 0) = Rat(1);
  pos.target_j = 5;
  CHECK_THROWS_AS(pos.validate(), InvariantError);
}
