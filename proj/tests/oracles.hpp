#pragma once

// Shared helpers for the test binaries: deterministic instance generators
// and reference computations. The reference code here is deliberately
// naive (dense long double sweeps, direct enumeration, a tiny s-expression
// reader) so that it shares no code path with the library it checks.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoptime/analysis.hpp"
#include "stoptime/model.hpp"
#include "stoptime/rat.hpp"

namespace testutil {

using stoptime::Int;
using stoptime::Mat;
using stoptime::MarkovChain;
using stoptime::Mdp;
using stoptime::Rat;
using stoptime::Vec;

// ---------------------------------------------------------------------------
// deterministic randomness

// mt19937_64 raw draws are pinned by the standard; the distribution adapters
// are not, so bounded draws go through plain modulo here. The bias is
// irrelevant for test data.
struct TestRng {
  std::mt19937_64 eng;

  explicit TestRng(std::uint64_t seed) : eng(seed) {}

  int uniform(int lo, int hi) {
    return lo + int(eng() % std::uint64_t(hi - lo + 1));
  }
  bool coin() { return (eng() & 1) != 0; }
};

inline Rat rat(long num, long den) {
  Rat q(num, den);
  q.canonicalize();
  return q;
}

// ---------------------------------------------------------------------------
// instance generators

// Random chain: each row spreads a small integer budget over at most three
// targets, weights are small fractions, mu is a point mass or a two-point
// mix. Every invariant of MarkovChain::validate holds by construction.
inline MarkovChain random_chain(TestRng& rng, int n) {
  MarkovChain c;
  c.P.entries = Mat(std::size_t(n), std::size_t(n));
  for (int v = 0; v < n; ++v) {
    int den = rng.uniform(2, 8);
    int targets = rng.uniform(1, std::min(3, den));
    std::vector<int> units(std::size_t(targets), 1);
    for (int left = den - targets; left > 0; --left) {
      units[std::size_t(rng.uniform(0, targets - 1))] += 1;
    }
    for (int i = 0; i < targets; ++i) {
      int target = rng.uniform(0, n - 1);
      c.P.entries.at(std::size_t(v), std::size_t(target)) +=
          rat(units[std::size_t(i)], den);
    }
  }
  c.mu.assign(std::size_t(n), Rat(0));
  if (rng.coin()) {
    c.mu[std::size_t(rng.uniform(0, n - 1))] = 1;
  } else {
    int a = rng.uniform(0, n - 1);
    int b = rng.uniform(0, n - 1);
    c.mu[std::size_t(a)] += rat(1, 2);
    c.mu[std::size_t(b)] += rat(1, 2);
  }
  for (int v = 0; v < n; ++v) {
    c.w.push_back(rat(rng.uniform(-5, 5), rng.uniform(1, 3)));
  }
  c.validate();
  return c;
}

// All rows share one denominator q and every entry is positive, so the
// chain is irreducible, aperiodic, and has alpha >= 1/q by construction.
inline MarkovChain random_positive_chain(TestRng& rng, int n, int q) {
  if (q < n) q = n;
  MarkovChain c;
  c.P.entries = Mat(std::size_t(n), std::size_t(n));
  for (int v = 0; v < n; ++v) {
    std::vector<int> units(std::size_t(n), 1);
    for (int left = q - n; left > 0; --left) {
      units[std::size_t(rng.uniform(0, n - 1))] += 1;
    }
    for (int u = 0; u < n; ++u) {
      c.P.entries.at(std::size_t(v), std::size_t(u)) =
          rat(units[std::size_t(u)], q);
    }
  }
  c.mu.assign(std::size_t(n), Rat(0));
  c.mu[std::size_t(rng.uniform(0, n - 1))] = 1;
  for (int v = 0; v < n; ++v) {
    c.w.push_back(rat(rng.uniform(-5, 5), rng.uniform(1, 3)));
  }
  c.validate();
  return c;
}

// Convex combination of permutation matrices, always including the identity
// and the full cycle. Doubly stochastic, hence uniform stationary
// distribution; the identity share makes it aperiodic, the cycle share
// makes it irreducible.
inline stoptime::StochasticMatrix random_doubly_stochastic(TestRng& rng,
                                                           int n) {
  std::vector<std::vector<int>> perms;
  std::vector<int> ident(static_cast<std::size_t>(n));
  std::vector<int> cycle(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ident[std::size_t(i)] = i;
    cycle[std::size_t(i)] = (i + 1) % n;
  }
  perms.push_back(ident);
  perms.push_back(cycle);
  int extra = rng.uniform(1, 2);
  for (int e = 0; e < extra; ++e) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[std::size_t(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      std::swap(p[std::size_t(i)], p[std::size_t(rng.uniform(0, i))]);
    }
    perms.push_back(p);
  }
  int k = int(perms.size());
  int den = rng.uniform(k + 2, 4 * k);
  std::vector<int> units(std::size_t(k), 1);
  for (int left = den - k; left > 0; --left) {
    units[std::size_t(rng.uniform(0, k - 1))] += 1;
  }
  stoptime::StochasticMatrix M;
  M.entries = Mat(std::size_t(n), std::size_t(n));
  for (int p = 0; p < k; ++p) {
    for (int i = 0; i < n; ++i) {
      M.entries.at(std::size_t(i), std::size_t(perms[std::size_t(p)]
                                                    [std::size_t(i)])) +=
          rat(units[std::size_t(p)], den);
    }
  }
  M.validate();
  return M;
}

inline Mdp random_mdp(TestRng& rng, int n) {
  Mdp m;
  for (int v = 0; v < n; ++v) m.states.push_back("v" + std::to_string(v));
  int na = rng.uniform(1, 3);
  for (int a = 0; a < na; ++a) m.actions.push_back(std::string(1, char('a' + a)));
  m.theta.resize(std::size_t(n));
  for (int v = 0; v < n; ++v) {
    int enabled = rng.uniform(1, na);
    for (int a = 0; a < enabled; ++a) {
      Vec row(std::size_t(n), Rat(0));
      int den = rng.uniform(2, 6);
      int targets = rng.uniform(1, std::min(3, den));
      std::vector<int> units(std::size_t(targets), 1);
      for (int left = den - targets; left > 0; --left) {
        units[std::size_t(rng.uniform(0, targets - 1))] += 1;
      }
      for (int i = 0; i < targets; ++i) {
        row[std::size_t(rng.uniform(0, n - 1))] += rat(units[std::size_t(i)], den);
      }
      m.theta[std::size_t(v)][a] = row;
    }
  }
  m.mu.assign(std::size_t(n), Rat(0));
  m.mu[std::size_t(rng.uniform(0, n - 1))] = 1;
  for (int v = 0; v < n; ++v) {
    m.w.push_back(rat(rng.uniform(-5, 5), rng.uniform(1, 3)));
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// reference value oracle for chains

// Stopping value of a chain read off a long prefix of its utility
// sequence: minimum over point masses, all chords within the horizon, and
// the analytic tail limits, with a certified corridor for everything the
// horizon cannot see.
//
// The prefix is computed in long double and cross-checked against exact
// rationals on an initial segment; the observed agreement there, plus the
// standard accumulation argument for row-stochastic updates (row sums are
// exact in the update, each step adds O(n*W) rounding at 2^-64), keeps the
// full prefix within ~1e-12 of the true values for H = 1e5. The slack
// constants below dwarf that.
struct ChainOracle {
  long double lower = 0;
  long double upper = 0;
  long double prefix_check_error = 0;  // exact-vs-float gap on the overlap
  long double corridor = 0;            // late-window deviation from the lines
};

inline ChainOracle chain_value_oracle(const MarkovChain& chain, const Rat& T,
                                      std::int64_t H,
                                      std::int64_t exact_overlap = 1200) {
  const std::size_t n = chain.n();
  std::vector<long double> P(n * n), w(n), row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      P[i * n + j] = (long double)stoptime::to_double(chain.P.entries.at(i, j));
    }
    w[i] = (long double)stoptime::to_double(chain.w[i]);
    row[i] = (long double)stoptime::to_double(chain.mu[i]);
  }

  std::vector<long double> u(std::size_t(H + 1));
  ChainOracle out;
  {
    Vec xrow = chain.mu;
    Rat xu = 0;
    long double acc = 0;
    std::vector<long double> next(n);
    for (std::int64_t t = 0; t <= H; ++t) {
      long double inc = 0;
      for (std::size_t i = 0; i < n; ++i) inc += row[i] * w[i];
      acc += inc;
      u[std::size_t(t)] = acc;
      if (t <= exact_overlap) {
        xu += stoptime::dot(xrow, chain.w);
        long double gap = std::fabs((long double)acc - (long double)stoptime::to_double(xu));
        out.prefix_check_error = std::max(out.prefix_check_error, gap);
        if (t < exact_overlap) xrow = stoptime::vec_mat(xrow, chain.P.entries);
      }
      if (t < H) {
        std::fill(next.begin(), next.end(), 0.0L);
        for (std::size_t i = 0; i < n; ++i) {
          if (row[i] == 0.0L) continue;
          for (std::size_t j = 0; j < n; ++j) next[j] += row[i] * P[i * n + j];
        }
        row.swap(next);
      }
    }
  }

  // Late-window line fit. Any residue period of a chain on <= 5 vertices
  // divides 60, so a 60-residue fit is always fine (unused residues just
  // repeat a finer pattern).
  const int d = 60;
  const std::int64_t win = std::min<std::int64_t>(30000, (H / (2 * d)) * d);
  long double slope = (u[std::size_t(H)] - u[std::size_t(H - win)]) / win;
  std::vector<long double> icept(d, 0.0L);
  std::vector<int> cnt(d, 0);
  for (std::int64_t t = H - win; t <= H; ++t) {
    int r = int(t % d);
    icept[std::size_t(r)] += u[std::size_t(t)] - slope * (t + 1);
    cnt[std::size_t(r)] += 1;
  }
  for (int r = 0; r < d; ++r) icept[std::size_t(r)] /= cnt[std::size_t(r)];
  long double dev = 0;
  for (std::int64_t t = H - win; t <= H; ++t) {
    int r = int(t % d);
    dev = std::max(dev,
                   std::fabs((long double)u[std::size_t(t)] - slope * (t + 1) -
                              icept[std::size_t(r)]));
  }
  out.corridor = dev;

  const long double Td = (long double)stoptime::to_double(T);
  const long double slack =
      (Td + 1) * (8 * dev + 16 * out.prefix_check_error) + 1e-10L;

  long double best = std::numeric_limits<long double>::infinity();
  long double best_lower = best;
  if (stoptime::is_integer(T) && T >= 0 && T <= Rat(H)) {
    long double v = u[std::size_t(stoptime::to_double(T))];
    best = std::min(best, v);
    best_lower = std::min(best_lower, v);
  }
  std::int64_t tmax_left = std::int64_t(std::floor(stoptime::to_double(T)));
  if (Rat(tmax_left) == T) tmax_left -= 1;
  for (std::int64_t t1 = 0; t1 <= tmax_left && t1 <= H; ++t1) {
    long double u1 = u[std::size_t(t1)];
    for (std::int64_t t2 = tmax_left + 1; t2 <= H; ++t2) {
      if (Rat(t2) <= T) continue;
      long double v =
          ((t2 - Td) * u1 + (Td - t1) * u[std::size_t(t2)]) / (t2 - t1);
      best = std::min(best, v);
      best_lower = std::min(best_lower, v);
    }
    // Chords past the horizon: u_{t2} >= slope*(t2+1) + min_r icept_r - dev,
    // and the resulting bound in t2 is monotone, so its infimum over
    // (H, infinity) is at H+1 or in the limit.
    long double cmin = *std::min_element(icept.begin(), icept.end());
    long double limit = u1 + (Td - t1) * slope;
    long double at_h1 = ((H + 1 - Td) * u1 +
                         (Td - t1) * (slope * (H + 2) + cmin - dev)) /
                        (H + 1 - t1);
    best = std::min(best, limit);  // approached, so the infimum is <= it
    best_lower = std::min(best_lower, std::min(limit, at_h1));
  }
  out.upper = best + slack;
  out.lower = best_lower - slack;
  return out;
}

// ---------------------------------------------------------------------------
// closed-form bound recomputation (long double, log10 space)

struct BoundRecompute {
  long double t0 = 0;
  long double lemma7 = 0;
  long double lemma8 = 0;
  long double lemma9 = 0;
  long double unif_entry = 0;
  long double B_star = 0;
  long double t_star = 0;
  long double neg_ln_K3 = 0;   // log10 of -ln K3
};

inline long double lse10(long double a, long double b) {
  if (a < b) std::swap(a, b);
  if (std::isinf(a) && a < 0) return a;
  return a + std::log10((long double)1.0L + std::pow((long double)10.0L, b - a));
}

inline BoundRecompute recompute_bounds(int n, const Rat& alpha, const Rat& W,
                                       const Rat& T, double eps) {
  const long double lg3 = std::log10((long double)3.0L);
  const long double lgn = std::log10((long double)(long double)n);
  const long double la =
      std::log10((long double)(long double)stoptime::to_double(Rat(alpha.get_den()))) -
      std::log10((long double)(long double)stoptime::to_double(Rat(alpha.get_num())));
  const long double lgW =
      std::log10((long double)(long double)stoptime::to_double(W));
  BoundRecompute r;
  r.t0 = lg3 + 5 * lgn + (long double)(n) * n * la;
  r.lemma7 = std::log10((long double)4.0L) + lgn + lgW + r.t0;
  r.lemma8 = std::log10((long double)12.0L) + 6 * lgn + lgW +
             (long double)(n) * n * n * la;
  r.lemma9 = std::log10((long double)12.0L) + 8 * lgn + lgW +
             ((long double)(n) * n * n + n) * la;
  r.unif_entry = lg3 + r.lemma9;
  long double second = 3 * std::log10((long double)2.0L) + 11 * lg3 + 16 * lgn + lgW +
                       (28.0L * n * n * n + 4.0L * n) * la;
  r.B_star = lse10(r.lemma9, second);
  long double lgT = std::log10((long double)(long double)stoptime::to_double(T));
  long double lge = std::log10((long double)(long double)eps);
  r.t_star = lgT + lse10(std::log10((long double)2.0L) + r.B_star, lge) - lge;

  // -ln K3 = -ln(1 - alpha^{n^3}) / (3 n^2), switching to the first-order
  // form when alpha^{n^3} is far below long double range.
  long double ln_x =
      (long double)(n) * n * n *
      (std::log((long double)(long double)stoptime::to_double(Rat(alpha.get_num()))) -
       std::log((long double)(long double)stoptime::to_double(Rat(alpha.get_den()))));
  long double log10_negln;
  if (ln_x > -600.0L) {
    long double x = std::exp((long double)ln_x);
    log10_negln = std::log10((long double)-std::log1p((long double)-x));
  } else {
    log10_negln = ln_x / std::log((long double)10.0L);
  }
  r.neg_ln_K3 = log10_negln - std::log10((long double)3.0L) - 2 * lgn;
  return r;
}

// ---------------------------------------------------------------------------
// s-expression reader, SMT-LIB 2 shape check, tiny evaluator

struct Sexp {
  bool atom = false;
  std::string text;
  std::vector<Sexp> kids;
};

namespace detail {
inline void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size()) {
    if (std::isspace((unsigned char)s[i])) {
      ++i;
    } else if (s[i] == ';') {
      while (i < s.size() && s[i] != '\n') ++i;
    } else {
      break;
    }
  }
}

inline Sexp parse_one(const std::string& s, std::size_t& i) {
  skip_ws(s, i);
  if (i >= s.size()) throw std::runtime_error("unexpected end of input");
  if (s[i] == '(') {
    ++i;
    Sexp e;
    for (;;) {
      skip_ws(s, i);
      if (i >= s.size()) throw std::runtime_error("unbalanced '('");
      if (s[i] == ')') {
        ++i;
        return e;
      }
      e.kids.push_back(parse_one(s, i));
    }
  }
  if (s[i] == ')') throw std::runtime_error("stray ')'");
  Sexp e;
  e.atom = true;
  while (i < s.size() && !std::isspace((unsigned char)s[i]) && s[i] != '(' &&
         s[i] != ')' && s[i] != ';') {
    e.text += s[i++];
  }
  return e;
}
}  // namespace detail

inline std::vector<Sexp> parse_sexprs(const std::string& text) {
  std::vector<Sexp> out;
  std::size_t i = 0;
  for (;;) {
    detail::skip_ws(text, i);
    if (i >= text.size()) break;
    out.push_back(detail::parse_one(text, i));
  }
  return out;
}

inline bool is_numeral(const std::string& t) {
  if (t.empty()) return false;
  std::size_t i = 0;
  bool digit = false, dot = false;
  for (; i < t.size(); ++i) {
    if (std::isdigit((unsigned char)t[i])) {
      digit = true;
    } else if (t[i] == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  return digit;
}

// Structural well-formedness: every top-level form is a known command,
// declarations precede use, assert bodies only mention declared constants,
// numerals, and the arithmetic/comparison operators, and exactly one
// check-sat appears. Returns the declared constant names.
inline std::set<std::string> check_smt2(const std::string& text) {
  std::vector<Sexp> forms = parse_sexprs(text);
  std::set<std::string> declared;
  static const std::set<std::string> ops = {"+", "-", "*", "/", "=",
                                            ">=", "<=", ">", "<"};
  bool saw_logic = false, saw_check = false;

  std::function<void(const Sexp&)> check_term = [&](const Sexp& e) {
    if (e.atom) {
      if (is_numeral(e.text)) return;
      if (declared.count(e.text)) return;
      throw std::runtime_error("undeclared symbol: " + e.text);
    }
    if (e.kids.empty() || !e.kids[0].atom || !ops.count(e.kids[0].text)) {
      throw std::runtime_error("unknown operator in term");
    }
    if (e.kids.size() < 2) throw std::runtime_error("operator without args");
    for (std::size_t k = 1; k < e.kids.size(); ++k) check_term(e.kids[k]);
  };

  for (const Sexp& f : forms) {
    if (f.atom || f.kids.empty() || !f.kids[0].atom) {
      throw std::runtime_error("top-level form is not a command");
    }
    const std::string& head = f.kids[0].text;
    if (head == "set-logic") {
      if (f.kids.size() != 2) throw std::runtime_error("set-logic arity");
      saw_logic = true;
    } else if (head == "declare-const") {
      if (f.kids.size() != 3 || !f.kids[1].atom || !f.kids[2].atom) {
        throw std::runtime_error("declare-const shape");
      }
      declared.insert(f.kids[1].text);
    } else if (head == "declare-fun") {
      if (f.kids.size() != 4 || !f.kids[1].atom || f.kids[2].atom ||
          !f.kids[2].kids.empty() || !f.kids[3].atom) {
        throw std::runtime_error("declare-fun shape");
      }
      declared.insert(f.kids[1].text);
    } else if (head == "assert") {
      if (f.kids.size() != 2) throw std::runtime_error("assert arity");
      check_term(f.kids[1]);
    } else if (head == "check-sat") {
      if (f.kids.size() != 1) throw std::runtime_error("check-sat arity");
      saw_check = true;
    } else {
      throw std::runtime_error("unknown command: " + head);
    }
  }
  if (!saw_logic || !saw_check) {
    throw std::runtime_error("missing set-logic or check-sat");
  }
  return declared;
}

// Evaluates a term under a full assignment; comparisons return 1 or 0.
inline Rat eval_term(const Sexp& e, const std::map<std::string, Rat>& env) {
  if (e.atom) {
    if (is_numeral(e.text)) {
      std::string t = e.text;
      std::size_t dot = t.find('.');
      if (dot != std::string::npos) {
        std::string frac = t.substr(dot + 1);
        t = t.substr(0, dot) + frac;
        Rat q(t);
        for (std::size_t k = 0; k < frac.size(); ++k) q /= 10;
        q.canonicalize();
        return q;
      }
      return Rat(t);
    }
    auto it = env.find(e.text);
    if (it == env.end()) throw std::runtime_error("unbound: " + e.text);
    return it->second;
  }
  const std::string& op = e.kids[0].text;
  std::vector<Rat> args;
  for (std::size_t k = 1; k < e.kids.size(); ++k) {
    args.push_back(eval_term(e.kids[k], env));
  }
  if (op == "+") {
    Rat s = 0;
    for (const Rat& a : args) s += a;
    return s;
  }
  if (op == "*") {
    Rat s = 1;
    for (const Rat& a : args) s *= a;
    return s;
  }
  if (op == "-") {
    if (args.size() == 1) return Rat(-args[0]);
    Rat s = args[0];
    for (std::size_t k = 1; k < args.size(); ++k) s -= args[k];
    return s;
  }
  if (op == "/") {
    Rat s = args.at(0);
    for (std::size_t k = 1; k < args.size(); ++k) s /= args[k];
    return s;
  }
  if (op == "=") return Rat(args.at(0) == args.at(1) ? 1 : 0);
  if (op == ">=") return Rat(args.at(0) >= args.at(1) ? 1 : 0);
  if (op == "<=") return Rat(args.at(0) <= args.at(1) ? 1 : 0);
  if (op == ">") return Rat(args.at(0) > args.at(1) ? 1 : 0);
  if (op == "<") return Rat(args.at(0) < args.at(1) ? 1 : 0);
  throw std::runtime_error("unknown op: " + op);
}

// ---------------------------------------------------------------------------

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

}  // namespace testutil
