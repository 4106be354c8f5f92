#include "stoptime/stopvalue.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "stoptime/errors.hpp"

namespace stoptime {
namespace {

constexpr std::int64_t kDefaultStepCap = 100000000;  // 1e8
constexpr std::int64_t kMaterializeCap = 2000000;
constexpr std::int64_t kExactPairBudget = 50000;

std::int64_t env_step_cap() {
  const char* v = std::getenv("STOPTIME_STEP_CAP");
  if (!v) return kDefaultStepCap;
  char* end = nullptr;
  long long parsed = std::strtoll(v, &end, 10);
  if (end == v || *end != '\0' || parsed <= 0) return kDefaultStepCap;
  return std::int64_t(parsed);
}

std::atomic<std::int64_t>& cap_override() {
  static std::atomic<std::int64_t> cap{0};
  return cap;
}

// Lexicographic (value, finiteness, t1, t2) minimum. A witness that stops
// in finite time wins any exact tie against the tail, so an attained value
// always carries a realizable witness.
struct Best {
  bool set = false;
  Rat value;
  StopWitness witness;

  static int rank(const StopWitness& w) {
    return w.kind == StopWitness::Kind::Tail ? 1 : 0;
  }

  static std::int64_t order_t2(const StopWitness& w) {
    return w.kind == StopWitness::Kind::Tail
               ? std::numeric_limits<std::int64_t>::max()
               : w.t2;
  }

  void offer(const Rat& v, const StopWitness& w) {
    if (!set) {
      set = true;
      value = v;
      witness = w;
      return;
    }
    if (v < value) {
      value = v;
      witness = w;
      return;
    }
    if (v == value) {
      if (rank(w) != rank(witness)
              ? rank(w) < rank(witness)
              : (w.t1 < witness.t1 ||
                 (w.t1 == witness.t1 && order_t2(w) < order_t2(witness)))) {
        witness = w;
      }
    }
  }
};

Rat chord_at(const Rat& u1, const Rat& u2, std::int64_t t1, std::int64_t t2,
             const Rat& T) {
  return u1 + (T - Rat(t1)) / Rat(t2 - t1) * (u2 - u1);
}

}  // namespace

void UPSeq::validate() const {
  if (C.empty()) throw InvariantError("cycle part must be nonempty");
}

Rat UPSeq::sum_A() const {
  Rat s = 0;
  for (const Rat& a : A) s += a;
  return s;
}

Rat UPSeq::sum_C() const {
  Rat s = 0;
  for (const Rat& c : C) s += c;
  return s;
}

Rat UPSeq::mean_C() const { return sum_C() / Rat(std::int64_t(C.size())); }

Rat UPSeq::letter(const Int& i) const {
  if (i < 0) throw IndexError("letter index must be >= 0");
  if (i < Int(long(A.size()))) return A[i.get_ui()];
  Int off = i - Int(long(A.size()));
  Int k = off % Int(long(C.size()));
  return C[k.get_ui()];
}

Rat UPSeq::u(const Int& t) const {
  validate();
  if (t < 0) throw IndexError("utility index must be >= 0");
  Int count = t + 1;  // letters summed
  if (count <= Int(long(A.size()))) {
    Rat s = 0;
    for (std::size_t i = 0; i < count.get_ui(); ++i) s += A[i];
    return s;
  }
  Int cyc = count - Int(long(A.size()));
  Int full = cyc / Int(long(C.size()));
  Int rem = cyc % Int(long(C.size()));
  Rat s = sum_A() + Rat(full) * sum_C();
  for (std::size_t i = 0; i < rem.get_ui(); ++i) s += C[i];
  return s;
}

Rat bidirac_value(const std::vector<Rat>& u, std::int64_t t1, std::int64_t t2,
                  const Rat& T) {
  if (t1 < 0 || t1 > t2) throw RangeError("need 0 <= t1 <= t2");
  if (T < Rat(t1) || T > Rat(t2)) throw RangeError("need t1 <= T <= t2");
  if (t1 == t2 && T != Rat(t1)) {
    throw RangeError("point mass needs integral T = t1 = t2");
  }
  if (std::size_t(t2) >= u.size()) {
    throw IndexError("utility sequence too short for t2");
  }
  if (t1 == t2) return u[std::size_t(t1)];
  return chord_at(u[std::size_t(t1)], u[std::size_t(t2)], t1, t2, T);
}

Rat bidirac_value(const UPSeq& seq, std::int64_t t1, std::int64_t t2,
                  const Rat& T) {
  if (t1 < 0 || t1 > t2) throw RangeError("need 0 <= t1 <= t2");
  if (T < Rat(t1) || T > Rat(t2)) throw RangeError("need t1 <= T <= t2");
  if (t1 == t2 && T != Rat(t1)) {
    throw RangeError("point mass needs integral T = t1 = t2");
  }
  if (t1 == t2) return seq.u(Int(long(t1)));
  return chord_at(seq.u(Int(long(t1))), seq.u(Int(long(t2))), t1, t2, T);
}

ValCycleResult val_cycle(const UPSeq& seq, const Rat& T) {
  seq.validate();
  if (T < 0) throw PreconditionError("T must be >= 0");

  const std::int64_t L = seq.prefix_len() + seq.cycle_len();
  // One extra cycle: a chord minimum over t2 >= ceil(T) always lands on the
  // first occurrence of its residue, which can sit as far as L + cycle - 1.
  const std::int64_t L2 = L + seq.cycle_len();
  std::vector<Rat> u(std::size_t(L2) + 1);
  {
    Rat acc = 0;
    for (std::int64_t t = 0; t <= L2; ++t) {
      acc += t < seq.prefix_len()
                 ? seq.A[std::size_t(t)]
                 : seq.C[std::size_t((t - seq.prefix_len()) % seq.cycle_len())];
      u[std::size_t(t)] = acc;
    }
  }
  const Rat mc = seq.mean_C();
  const bool integral = is_integer(T);
  const double Td = to_double(T);

  Best best;
  bool finite_seen = false;
  Rat finite_min;
  auto offer_finite = [&](const Rat& v, const StopWitness& w) {
    best.offer(v, w);
    if (!finite_seen || v < finite_min) {
      finite_seen = true;
      finite_min = v;
    }
  };
  auto offer_tail = [&](std::int64_t t1) {
    best.offer(u[std::size_t(t1)] + mc * (T - Rat(t1)),
               {StopWitness::Kind::Tail, t1, 0});
  };

  if (T >= Rat(L)) {
    // Beyond the reach of the prefix, only the per-step cycle average
    // matters: stop early at t1 and ride the tail.
    double dmin = std::numeric_limits<double>::infinity();
    std::vector<double> ud;
    bool prescan = L + 1 > kExactPairBudget && std::isfinite(Td);
    if (prescan) {
      ud.resize(std::size_t(L) + 1);
      double mcd = to_double(mc);
      double mx = 0;
      for (std::int64_t t1 = 0; t1 <= L; ++t1) {
        ud[std::size_t(t1)] = to_double(u[std::size_t(t1)]);
        mx = std::max(mx, std::abs(ud[std::size_t(t1)]));
        dmin = std::min(dmin, ud[std::size_t(t1)] + mcd * (Td - double(t1)));
      }
      double margin = 1e-9 * (1 + mx + std::abs(Td) * (1 + std::abs(mcd)));
      for (std::int64_t t1 = 0; t1 <= L; ++t1) {
        double v = ud[std::size_t(t1)] + to_double(mc) * (Td - double(t1));
        if (v <= dmin + margin) offer_tail(t1);
      }
    } else {
      for (std::int64_t t1 = 0; t1 <= L; ++t1) offer_tail(t1);
    }
    // A point mass at integral T attains the same value when u_T equals it.
    if (integral && T.get_num().fits_slong_p()) {
      Rat ut = seq.u(T.get_num());
      std::int64_t ti = std::int64_t(T.get_num().get_si());
      offer_finite(ut, {StopWitness::Kind::PointMass, ti, ti});
    }
    // A chord ties the best tail exactly when both endpoints minimize the
    // centered utility g_t = u_t - mc t and the stop side sits on the cycle;
    // one candidate per side therefore decides attainment.
    Int tcb = ceil_rat(T);
    if (tcb.fits_slong_p()) {
      const std::int64_t tc = std::int64_t(tcb.get_si());
      Rat gmin;
      std::int64_t t1s = -1;
      for (std::int64_t t = 0; t <= L; ++t) {
        Rat g = u[std::size_t(t)] - mc * Rat(t);
        if (t1s < 0 || g < gmin) {
          gmin = g;
          t1s = t;
        }
      }
      std::int64_t t2s = -1;
      for (std::int64_t t = tc; t < tc + seq.cycle_len() && t2s < 0; ++t) {
        if (seq.u(Int(long(t))) - mc * Rat(t) == gmin) t2s = t;
      }
      if (t2s >= 0 && t1s < t2s) {
        offer_finite(
            chord_at(u[std::size_t(t1s)], seq.u(Int(long(t2s))), t1s, t2s, T),
            {StopWitness::Kind::Chord, t1s, t2s});
      }
    }
  } else {
    const std::int64_t tf = std::int64_t(floor_rat(T).get_si());
    const std::int64_t tc = std::int64_t(ceil_rat(T).get_si());

    for (std::int64_t t1 = 0; t1 <= tf; ++t1) offer_tail(t1);
    if (integral) {
      offer_finite(u[std::size_t(tf)], {StopWitness::Kind::PointMass, tf, tf});
    }

    auto offer_chord = [&](std::int64_t t1, std::int64_t t2) {
      offer_finite(chord_at(u[std::size_t(t1)], u[std::size_t(t2)], t1, t2, T),
                   {StopWitness::Kind::Chord, t1, t2});
    };
    const std::int64_t pairs =
        (tf + 1) * std::max<std::int64_t>(L2 - tc + 1, 0);
    if (pairs <= kExactPairBudget) {
      for (std::int64_t t1 = 0; t1 <= tf; ++t1) {
        for (std::int64_t t2 = std::max(tc, t1 + 1); t2 <= L2; ++t2) {
          offer_chord(t1, t2);
        }
      }
    } else {
      // Two-phase minimization: a float sweep locates near-minimal chords,
      // then only those are compared exactly. The margin dominates the
      // worst-case rounding of the float sweep, so the exact minimum is
      // always among the survivors.
      std::vector<double> ud(std::size_t(L2) + 1);
      double mx = 0;
      for (std::int64_t t = 0; t <= L2; ++t) {
        ud[std::size_t(t)] = to_double(u[std::size_t(t)]);
        mx = std::max(mx, std::abs(ud[std::size_t(t)]));
      }
      double dmin = std::numeric_limits<double>::infinity();
      for (std::int64_t t1 = 0; t1 <= tf; ++t1) {
        for (std::int64_t t2 = std::max(tc, t1 + 1); t2 <= L2; ++t2) {
          double r = (Td - double(t1)) / double(t2 - t1);
          dmin = std::min(dmin, ud[std::size_t(t1)] +
                                    r * (ud[std::size_t(t2)] -
                                         ud[std::size_t(t1)]));
        }
      }
      double margin = 1e-9 * (1 + mx + std::abs(Td));
      for (std::int64_t t1 = 0; t1 <= tf; ++t1) {
        for (std::int64_t t2 = std::max(tc, t1 + 1); t2 <= L2; ++t2) {
          double r = (Td - double(t1)) / double(t2 - t1);
          double v = ud[std::size_t(t1)] +
                     r * (ud[std::size_t(t2)] - ud[std::size_t(t1)]);
          if (v <= dmin + margin) offer_chord(t1, t2);
        }
      }
    }
  }

  ValCycleResult res;
  res.value = best.value;
  res.witness = best.witness;
  res.attained = finite_seen && finite_min == best.value;
  return res;
}

ValueBracket oracle_value(const UPSeq& seq, const Rat& T, std::int64_t H) {
  seq.validate();
  if (T < 0) throw PreconditionError("T must be >= 0");
  const std::int64_t L = seq.prefix_len() + seq.cycle_len();
  Int tc_big = ceil_rat(T);
  if (!tc_big.fits_slong_p() ||
      H < L + std::int64_t(tc_big.get_si())) {
    throw RangeError("H must be at least |A| + |C| + ceil(T)");
  }
  const std::int64_t tc = std::int64_t(tc_big.get_si());
  const std::int64_t tf = std::min(std::int64_t(floor_rat(T).get_si()), H);

  // Exact prefix sums over the common letter denominator keep u_t a plain
  // integer ratio, so the double rendering is correct to one rounding.
  Int den = 1;
  for (const Rat& a : seq.A) {
    mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), a.get_den().get_mpz_t());
  }
  for (const Rat& c : seq.C) {
    mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), c.get_den().get_mpz_t());
  }
  std::vector<Int> num_a, num_c;
  for (const Rat& a : seq.A) num_a.push_back(Int(a.get_num() * (den / a.get_den())));
  for (const Rat& c : seq.C) num_c.push_back(Int(c.get_num() * (den / c.get_den())));

  const double dend = den.get_d();
  std::vector<double> ud(std::size_t(H) + 1);
  double max_abs = 0;
  {
    Int acc = 0;
    for (std::int64_t t = 0; t <= H; ++t) {
      acc += t < seq.prefix_len()
                 ? num_a[std::size_t(t)]
                 : num_c[std::size_t((t - seq.prefix_len()) % seq.cycle_len())];
      ud[std::size_t(t)] = acc.get_d() / dend;
      max_abs = std::max(max_abs, std::abs(ud[std::size_t(t)]));
    }
  }

  const double Td = to_double(T);
  const double mcd = to_double(seq.mean_C());
  double finite_min = std::numeric_limits<double>::infinity();
  for (std::int64_t t1 = 0; t1 <= tf; ++t1) {
    for (std::int64_t t2 = std::max(tc, t1 + 1); t2 <= H; ++t2) {
      double r = (Td - double(t1)) / double(t2 - t1);
      finite_min = std::min(finite_min,
                            ud[std::size_t(t1)] +
                                r * (ud[std::size_t(t2)] - ud[std::size_t(t1)]));
    }
  }
  if (is_integer(T) && tf >= 0 && Rat(tf) == T) {
    finite_min = std::min(finite_min, ud[std::size_t(tf)]);
  }
  double limit_min = std::numeric_limits<double>::infinity();
  for (std::int64_t t1 = 0; t1 <= tf; ++t1) {
    limit_min =
        std::min(limit_min, ud[std::size_t(t1)] + mcd * (Td - double(t1)));
  }

  double pad = 1e-12 * (max_abs + std::abs(Td) + 2) + 1e-300;
  ValueBracket b;
  b.estimate = std::min(finite_min, limit_min);
  b.lower = b.estimate - pad;
  b.upper = finite_min + pad;
  b.method = Method::Oracle;
  b.validate();
  return b;
}

std::int64_t step_cap() {
  std::int64_t o = cap_override().load();
  if (o > 0) return o;
  static const std::int64_t from_env = env_step_cap();
  return from_env;
}

void set_step_cap(std::int64_t cap) { cap_override().store(cap); }

ApproxResult approx_value(const MarkovChain& chain, const Rat& T, double eps) {
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  if (T < 0) throw PreconditionError("T must be >= 0");

  ClassDecomposition dec = decompose(chain);
  PeriodicData pd = periodic_data(chain, dec);
  const std::int64_t d = pd.d;
  const Rat W = chain.W();
  const Rat eta = rat_from_double_exact(eps) / (T + 1);

  // Limit distribution of mu N^m: absorption-weighted stationary mixture
  // of the aperiodic chain N = M^d.
  MarkovChain nchain;
  nchain.P = pd.N;
  nchain.mu = chain.mu;
  nchain.w = pd.w_hat;
  ClassDecomposition ndec = decompose(nchain);
  Vec rho0 = limit_row(nchain, ndec);

  const std::int64_t cap = step_cap();
  const std::int64_t unreachable = std::numeric_limits<std::int64_t>::max();

  // Route 1: certified total-variation distance. e_m = |mu N^m - rho0|_1
  // never increases, and e_m * W bounds every per-step utility error from
  // step m*d on. Iteration stops at success or at the practical guards.
  std::int64_t m_tv = -1;
  Rat e_best;
  bool e_best_set = false;
  {
    const std::int64_t m_guard =
        std::min<std::int64_t>(cap / std::max<std::int64_t>(d, 1), 10000);
    const std::size_t bits_guard = 4000000;
    Vec nu = chain.mu;
    for (std::int64_t m = 0; m <= m_guard; ++m) {
      Rat e = 0;
      for (std::size_t v = 0; v < chain.n(); ++v) {
        e += rat_abs(nu[v] - rho0[v]);
      }
      if (!e_best_set || e < e_best) {
        e_best = e;
        e_best_set = true;
      }
      if (e * W <= eta) {
        m_tv = m;
        break;
      }
      std::size_t bits = 0;
      for (std::size_t v = 0; v < chain.n(); ++v) {
        bits += mpz_sizeinbase(nu[v].get_den().get_mpz_t(), 2);
      }
      if (bits > bits_guard) break;
      nu = vec_mat(nu, pd.N.entries);
    }
  }
  std::int64_t s_tv = unreachable;
  if (m_tv >= 0 && m_tv <= (unreachable - 1) / std::max<std::int64_t>(d, 1)) {
    s_tv = d * m_tv;
  }

  // Route 2: the contraction bound, inflated by one cycle so that float
  // rounding inside the bound computation cannot unsound the certificate.
  std::int64_t s_paper = unreachable;
  double eta_d = to_double(eta);  // truncation keeps the bound conservative
  ConvergenceBound cb;
  bool have_cb = false;
  if (eta_d > 0) {
    cb = convergence_bound(int(chain.n()), chain.alpha(), W, eta_d);
    have_cb = true;
    if (cb.B < (unreachable - 1) / std::max<std::int64_t>(d, 1) - 1) {
      s_paper = d * (cb.B + 1);
    }
  }

  std::int64_t S = std::min(s_tv, s_paper);
  if (S > std::min(cap, kMaterializeCap)) {
    // Report the tolerance that the allowed number of steps can certify.
    const std::int64_t allowed = std::min(cap, kMaterializeCap);
    double t_plus_1 = to_double(T + 1);
    double best_eta = std::numeric_limits<double>::infinity();
    if (e_best_set) best_eta = to_double(e_best * W) * 1.0000001;
    if (have_cb) {
      double m_allowed = double(allowed / std::max<std::int64_t>(d, 1));
      double ln_eta = rat_ln(Rat(3) * Rat(long(chain.n())) * W) -
                      m_allowed * cb.neg_ln_K3;
      if (ln_eta < 700) best_eta = std::min(best_eta, std::exp(ln_eta));
    }
    std::string what =
        S == unreachable
            ? "no certified switch index within the step budget " +
                  std::to_string(allowed)
            : "switch index " + std::to_string(S) +
                  " exceeds the step budget " + std::to_string(allowed);
    throw BudgetExceeded(std::move(what), best_eta * t_plus_1);
  }

  ApproxResult res;
  res.switch_index = S;
  res.seq.A.reserve(std::size_t(S));
  {
    Vec rho = chain.mu;
    for (std::int64_t i = 0; i < S; ++i) {
      res.seq.A.push_back(dot(rho, chain.w));
      rho = vec_mat(rho, chain.P.entries);
    }
  }
  {
    Vec r = rho0;
    for (std::int64_t k = 0; k < d; ++k) {
      res.seq.C.push_back(dot(r, chain.w));
      if (k + 1 < d) r = vec_mat(r, chain.P.entries);
    }
  }

  res.inner = val_cycle(res.seq, T);
  double est = to_double(res.inner.value);
  double slack = 1e-12 * (1 + std::abs(est));
  res.bracket.estimate = est;
  res.bracket.lower = est - eps - slack;
  res.bracket.upper = est + eps + slack;
  res.bracket.method = Method::Approximation;
  res.bracket.exact = res.inner.value;
  res.bracket.validate();
  return res;
}

MarkovChain lower_bound_family(int n, const Rat& alpha) {
  if (n < 2) throw RangeError("family needs n >= 2");
  if (alpha <= 0 || alpha > Rat(1, 2)) {
    throw RangeError("family needs 0 < alpha <= 1/2");
  }
  std::size_t nn = std::size_t(n);
  MarkovChain chain;
  chain.P.entries = Mat(2 * nn, 2 * nn);
  auto bar = [nn](std::size_t j) { return nn + j; };  // j in 1..n-1

  for (std::size_t i = 0; i < nn; ++i) {
    chain.P.entries.at(i, i + 1) = alpha;  // advance along the spine
  }
  chain.P.entries.at(nn, nn) = 1;  // success is absorbing
  for (std::size_t i = 0; i + 1 < nn; ++i) {
    chain.P.entries.at(i, bar(i + 1)) = 1 - alpha;  // failed attempt
  }
  chain.P.entries.at(nn - 1, 0) = 1 - alpha;  // last rung fails straight home
  for (std::size_t j = 1; j + 1 < nn; ++j) {
    chain.P.entries.at(bar(j), bar(j + 1)) = 1;  // walk the failure track
  }
  chain.P.entries.at(bar(nn - 1), 0) = 1;

  chain.mu.assign(2 * nn, Rat(0));
  chain.mu[0] = 1;
  chain.w.assign(2 * nn, Rat(0));
  for (std::size_t v = 0; v < nn; ++v) {
    chain.states.push_back("v" + std::to_string(v));
  }
  chain.states.push_back("v" + std::to_string(nn));
  for (std::size_t j = 1; j < nn; ++j) {
    chain.states.push_back("b" + std::to_string(j));
  }
  chain.validate();
  return chain;
}

Rat check_distribution_value(const MarkovChain& chain,
                             const StoppingDistribution& delta,
                             std::int64_t horizon) {
  delta.validate();
  if (delta.max_support() > horizon) {
    throw RangeError("support exceeds the allowed horizon");
  }
  std::vector<Rat> u = utility_prefix(chain, delta.max_support());
  return expected_utility(delta, u);
}

}  // namespace stoptime
