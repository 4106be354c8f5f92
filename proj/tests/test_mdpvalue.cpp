#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "stoptime/analysis.hpp"
#include "stoptime/errors.hpp"
#include "stoptime/mdpvalue.hpp"
#include "stoptime/stopvalue.hpp"

using namespace stoptime;
using testutil::rat;

namespace {

// Induced chain of a pure memoryless policy.
MarkovChain induced(const Mdp& m, const std::vector<int>& policy) {
  MarkovChain c;
  c.P.entries = Mat(m.n(), m.n());
  for (std::size_t v = 0; v < m.n(); ++v) {
    const Vec& row = m.row(v, policy[v]);
    for (std::size_t j = 0; j < m.n(); ++j) c.P.entries.at(v, j) = row[j];
  }
  c.mu = m.mu;
  c.w = m.w;
  c.validate();
  return c;
}

// Exact expected utilities u_0..u_h of a time-dependent strategy, simulated
// directly from the definition; independent of evaluate_strategy.
std::vector<Rat> simulate_u(const Mdp& m, const MarkovStrategy& s,
                            std::int64_t h) {
  Vec dist = m.mu;
  std::vector<Rat> u;
  Rat acc = 0;
  for (std::int64_t t = 0; t <= h; ++t) {
    acc += dot(dist, m.w);
    u.push_back(acc);
    Vec next(m.n(), Rat(0));
    for (std::size_t v = 0; v < m.n(); ++v) {
      if (dist[v] == 0) continue;
      if (t < s.horizon) {
        for (const auto& [a, p] : s.probs[std::size_t(t)][v]) {
          const Vec& row = m.row(v, a);
          for (std::size_t j = 0; j < m.n(); ++j) {
            next[j] += dist[v] * p * row[j];
          }
        }
      } else {
        const Vec& row = m.row(v, s.tail[v]);
        for (std::size_t j = 0; j < m.n(); ++j) next[j] += dist[v] * row[j];
      }
    }
    dist = std::move(next);
  }
  return u;
}

// All pure memoryless policies, by counting in mixed radix.
std::vector<std::vector<int>> all_policies(const Mdp& m) {
  std::vector<std::vector<int>> menus(m.n());
  for (std::size_t v = 0; v < m.n(); ++v) menus[v] = m.actions_of(v);
  std::vector<std::vector<int>> out;
  std::vector<std::size_t> idx(m.n(), 0);
  while (true) {
    std::vector<int> p(m.n());
    for (std::size_t v = 0; v < m.n(); ++v) p[v] = menus[v][idx[v]];
    out.push_back(std::move(p));
    std::size_t v = 0;
    while (v < m.n() && ++idx[v] == menus[v].size()) idx[v++] = 0;
    if (v == m.n()) break;
  }
  return out;
}

Mdp two_state_flip() {
  Mdp m;
  m.actions = {"a"};
  m.states = {"v0", "v1"};
  m.theta.resize(2);
  m.theta[0][0] = {rat(1, 2), rat(1, 2)};
  m.theta[1][0] = {rat(1, 2), rat(1, 2)};
  m.mu = {Rat(1), Rat(0)};
  m.w = {Rat(1), Rat(-1)};
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("end components of the two-component example come out exactly") {
  Mdp m = fig7_example();
  MecDecomposition dec = mec_decompose(m);
  REQUIRE(dec.mecs.size() == 3);
  CHECK(dec.rest.empty());
  CHECK(dec.mecs[0].vertices == std::vector<std::size_t>{0});
  CHECK(dec.mecs[1].vertices == std::vector<std::size_t>{1, 2});
  CHECK(dec.mecs[2].vertices == std::vector<std::size_t>{3});
  // Only the staying actions are listed: v0 keeps its self-loop, v2 keeps
  // the move that returns to v1.
  CHECK(dec.mecs[0].actions[0] == std::vector<int>{0});
  CHECK(dec.mecs[1].actions[1] == std::vector<int>{0});
}

TEST_CASE("mean payoff solves the two-component example exactly") {
  Mdp m = fig7_example();
  MeanPayoffSolution mp = mean_payoff(m);
  CHECK(mp.per_ec_gain == std::vector<Rat>{Rat(-1), Rat(1), Rat(-2)});
  CHECK(mp.value == Vec{Rat(-1), Rat(1), Rat(1), Rat(-2)});
  CHECK(dot(m.mu, mp.value) == Rat(0));

  // The returned policy realizes the claimed value on its induced chain.
  MarkovChain c = induced(m, mp.policy);
  GainBias gb = gain_bias(c);
  CHECK(gb.gain == mp.value);
}

TEST_CASE("mec membership narrows to staying actions by hand") {
  // v0 can stay put or leave; only the self-loop survives in its MEC.
  Mdp m;
  m.actions = {"stay", "go"};
  m.states = {"v0", "v1"};
  m.theta.resize(2);
  m.theta[0][0] = {Rat(1), Rat(0)};
  m.theta[0][1] = {Rat(0), Rat(1)};
  m.theta[1][0] = {Rat(0), Rat(1)};
  m.mu = {Rat(1), Rat(0)};
  m.w = {Rat(0), Rat(0)};
  m.validate();

  MecDecomposition dec = mec_decompose(m);
  REQUIRE(dec.mecs.size() == 2);
  CHECK(dec.mecs[0].vertices == std::vector<std::size_t>{0});
  CHECK(dec.mecs[0].actions[0] == std::vector<int>{0});
  CHECK(dec.mecs[1].vertices == std::vector<std::size_t>{1});
  CHECK(dec.rest.empty());

  // A vertex whose every action leaves lands in rest.
  m.theta[0].erase(0);
  m.validate();
  dec = mec_decompose(m);
  REQUIRE(dec.mecs.size() == 1);
  CHECK(dec.rest == std::vector<std::size_t>{0});
}

TEST_CASE("policy iteration matches exhaustive policy enumeration") {
  testutil::TestRng rng(401);
  for (int it = 0; it < 20; ++it) {
    Mdp m = testutil::random_mdp(rng, rng.uniform(2, 3));
    MeanPayoffSolution mp = mean_payoff(m);

    Vec best(m.n(), Rat(0));
    bool first = true;
    for (const auto& pol : all_policies(m)) {
      GainBias gb = gain_bias(induced(m, pol));
      for (std::size_t v = 0; v < m.n(); ++v) {
        if (first || gb.gain[v] > best[v]) best[v] = gb.gain[v];
      }
      first = false;
    }
    CHECK(mp.value == best);

    // The winning policy is feasible and realizes the optimum.
    for (std::size_t v = 0; v < m.n(); ++v) {
      auto menu = m.actions_of(v);
      CHECK(std::find(menu.begin(), menu.end(), mp.policy[v]) != menu.end());
    }
    CHECK(gain_bias(induced(m, mp.policy)).gain == mp.value);
  }
}

TEST_CASE("the back-edge transform collapses everything into one component") {
  Mdp m = fig7_example();
  Mdp t = back_edge_transform(m);
  t.validate();
  CHECK(t.n() == 6);  // auxiliary start plus penalty vertex
  MecDecomposition dec = mec_decompose(t);
  REQUIRE(dec.mecs.size() == 1);
  CHECK(dec.mecs[0].vertices.size() == t.n());
  CHECK(dec.rest.empty());
  // A single component forces a constant optimal value.
  MeanPayoffSolution mp = mean_payoff(t);
  for (const Rat& v : mp.value) CHECK(v == mp.value[0]);

  testutil::TestRng rng(409);
  for (int it = 0; it < 8; ++it) {
    Mdp r = testutil::random_mdp(rng, rng.uniform(2, 4));
    Mdp rt = back_edge_transform(r);
    MecDecomposition rdec = mec_decompose(rt);
    REQUIRE(rdec.mecs.size() == 1);
    CHECK(rdec.mecs[0].vertices.size() == rt.n());
    CHECK(rdec.rest.empty());
  }
}

TEST_CASE("uniformization flattens component weights and keeps the value") {
  Mdp m = fig7_example();
  Mdp u = uniformize(m);
  u.validate();
  CHECK(u.n() <= 3 * m.n());
  CHECK(dot(u.mu, mean_payoff(u).value) == dot(m.mu, mean_payoff(m).value));
  MecDecomposition dec = mec_decompose(u);
  for (const EndComponent& ec : dec.mecs) {
    for (std::size_t i = 1; i < ec.vertices.size(); ++i) {
      CHECK(u.w[ec.vertices[i]] == u.w[ec.vertices[0]]);
    }
  }

  testutil::TestRng rng(419);
  for (int it = 0; it < 8; ++it) {
    Mdp r = testutil::random_mdp(rng, rng.uniform(2, 4));
    Mdp ru = uniformize(r);
    CHECK(ru.n() <= 3 * r.n());
    CHECK(dot(ru.mu, mean_payoff(ru).value) ==
          dot(r.mu, mean_payoff(r).value));
    MecDecomposition rdec = mec_decompose(ru);
    for (const EndComponent& ec : rdec.mecs) {
      for (std::size_t i = 1; i < ec.vertices.size(); ++i) {
        CHECK(ru.w[ec.vertices[i]] == ru.w[ec.vertices[0]]);
      }
    }
  }
}

TEST_CASE("reward bounds reproduce their closed forms on a small instance") {
  Mdp m = two_state_flip();  // n = 2, alpha = 1/2, W = 1
  RewardBounds rb = reward_bounds(m, Rat(3), 1e-3);
  CHECK(rb.t0 == doctest::Approx(1536.0).epsilon(1e-12));
  CHECK(rb.lemma7 == doctest::Approx(12288.0).epsilon(1e-12));
  CHECK(rb.lemma8 == doctest::Approx(196608.0).epsilon(1e-12));
  CHECK(rb.lemma9 == doctest::Approx(3145728.0).epsilon(1e-12));
  CHECK(rb.unif_entry == doctest::Approx(3 * rb.lemma9).epsilon(1e-12));
  CHECK(rb.B_star > rb.lemma9);
  CHECK(std::isfinite(rb.t_star));
  CHECK(rb.tail_steps > 0);
  CHECK(rb.tail_steps < std::numeric_limits<std::int64_t>::max());

  testutil::BoundRecompute ref =
      testutil::recompute_bounds(2, rat(1, 2), Rat(1), Rat(3), 1e-3);
  CHECK(rb.log10_t0 == doctest::Approx(double(ref.t0)).epsilon(1e-12));
  CHECK(rb.log10_lemma7 == doctest::Approx(double(ref.lemma7)).epsilon(1e-12));
  CHECK(rb.log10_lemma8 == doctest::Approx(double(ref.lemma8)).epsilon(1e-12));
  CHECK(rb.log10_lemma9 == doctest::Approx(double(ref.lemma9)).epsilon(1e-12));
  CHECK(rb.log10_B_star == doctest::Approx(double(ref.B_star)).epsilon(1e-12));
  CHECK(rb.log10_t_star == doctest::Approx(double(ref.t_star)).epsilon(1e-12));
}

TEST_CASE("reward bounds saturate the tail step count when out of reach") {
  RewardBounds rb = reward_bounds(fig7_example(), Rat(5), 1e-4);
  CHECK(rb.tail_steps == std::numeric_limits<std::int64_t>::max());
  CHECK(std::isfinite(rb.log10_B_star));
  testutil::BoundRecompute ref =
      testutil::recompute_bounds(4, rat(1, 8), Rat(2), Rat(5), 1e-4);
  CHECK(rb.log10_B_star == doctest::Approx(double(ref.B_star)).epsilon(1e-12));
  CHECK(rb.log10_t_star == doctest::Approx(double(ref.t_star)).epsilon(1e-12));
}

TEST_CASE("the pinned schedule keeps the expected utility at exactly zero") {
  Fig6 fig = fig6_example(61);
  std::vector<Rat> u = simulate_u(fig.mdp, fig.sigma_opt, 60);
  for (const Rat& x : u) CHECK(x == Rat(0));

  ValueBracket vb = evaluate_strategy(fig.mdp, fig.sigma_opt, Rat(2), 1e-6);
  REQUIRE(vb.exact.has_value());
  CHECK(*vb.exact == rat(-5, 427819008));
}

TEST_CASE("detuning the first mirror probability breaks the balance") {
  for (const Rat& a0 : {rat(3, 8), rat(1, 8)}) {
    Fig6 fig = fig6_example(61);
    fig.sigma_opt.probs[1][7].clear();
    fig.sigma_opt.probs[1][7][1] = 1 - a0;
    fig.sigma_opt.probs[1][7][2] = a0;
    fig.sigma_opt.validate(fig.mdp);

    std::vector<Rat> u = simulate_u(fig.mdp, fig.sigma_opt, 60);
    Rat lo = 0;
    for (const Rat& x : u) lo = std::min(lo, x);
    CHECK(lo < 0);

    ValueBracket vb = evaluate_strategy(fig.mdp, fig.sigma_opt, Rat(2), 1e-6);
    CHECK(vb.upper < 0);
    if (a0 == rat(3, 8)) {
      REQUIRE(vb.exact.has_value());
      CHECK(*vb.exact == rat(-1, 18));
    }
  }
}

TEST_CASE("truncating the schedule leaves a strictly negative value") {
  Fig6 fig = fig6_example(20);
  ValueBracket vb = evaluate_strategy(fig.mdp, fig.sigma_opt, Rat(2), 1e-6);
  REQUIRE(vb.exact.has_value());
  CHECK(*vb.exact == rat(-7, 44544));
}

TEST_CASE("strategy evaluation matches the chain value when nothing to choose") {
  testutil::TestRng rng(421);
  for (int it = 0; it < 6; ++it) {
    MarkovChain c = testutil::random_positive_chain(rng, rng.uniform(2, 4), 6);
    Mdp m;
    m.actions = {"a"};
    for (std::size_t v = 0; v < c.n(); ++v) m.states.push_back(c.state_name(v));
    m.theta.resize(c.n());
    for (std::size_t v = 0; v < c.n(); ++v) {
      Vec row(c.n());
      for (std::size_t j = 0; j < c.n(); ++j) row[j] = c.P.entries.at(v, j);
      m.theta[v][0] = std::move(row);
    }
    m.mu = c.mu;
    m.w = c.w;
    m.validate();

    MarkovStrategy s;
    s.horizon = 0;
    s.tail.assign(c.n(), 0);
    s.validate(m);

    Rat T = rat(rng.uniform(1, 8), 2);
    ValueBracket ev = evaluate_strategy(m, s, T, 1e-6);
    ApproxResult ap = approx_value(c, T, 1e-6);
    CHECK(ev.lower <= ap.bracket.upper + 1e-12);
    CHECK(ap.bracket.lower <= ev.upper + 1e-12);
    CHECK(std::fabs(ev.estimate - ap.bracket.estimate) <= 2e-6);
  }
}

TEST_CASE("zero weights evaluate to exactly zero") {
  Mdp m = two_state_flip();
  m.w = {Rat(0), Rat(0)};
  m.validate();
  MarkovStrategy s;
  s.horizon = 0;
  s.tail = {0, 0};
  ValueBracket vb = evaluate_strategy(m, s, rat(5, 2), 1e-9);
  CHECK(vb.estimate == 0.0);
  REQUIRE(vb.exact.has_value());
  CHECK(*vb.exact == Rat(0));
}

TEST_CASE("value estimation is deterministic per seed and self-consistent") {
  Mdp m = fig7_example();
  EstimateOpts opts;
  opts.t_cap = 16;
  opts.restarts = 4;
  opts.seed = 42;
  ValueBracket a = estimate_value(m, Rat(2), 0.05, opts);
  ValueBracket b = estimate_value(m, Rat(2), 0.05, opts);
  CHECK(a.estimate == b.estimate);
  CHECK(a.lower == b.lower);
  CHECK(a.lower <= a.estimate + 1e-12);

  // The returned strategy reproduces the reported estimate.
  MarkovStrategy best;
  ValueBracket c = estimate_value(m, Rat(2), 0.05, opts, &best);
  best.validate(m);
  ValueBracket check = evaluate_strategy(m, best, Rat(2), 0.05);
  CHECK(std::fabs(check.estimate - c.estimate) <= 0.1 + 1e-9);
}

TEST_CASE("the formula export is well-formed and guards its inputs") {
  Mdp m = fig7_example();
  std::string smt = export_etr(m, Rat(2), 4, Rat(0));
  CHECK(smt.find("(set-logic") != std::string::npos);
  CHECK(smt.find("(check-sat)") != std::string::npos);
  auto names = testutil::check_smt2(smt);
  CHECK(names.size() > 10);

  CHECK_THROWS_AS(export_etr(m, Rat(2), 0, Rat(0)), RangeError);
  CHECK_THROWS_AS(export_etr(m, Rat(-1), 4, Rat(0)), RangeError);
}
