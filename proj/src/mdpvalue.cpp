#include "stoptime/mdpvalue.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "stoptime/analysis.hpp"
#include "stoptime/errors.hpp"
#include "stoptime/stopvalue.hpp"

namespace stoptime {
namespace {

constexpr double kLn10 = 2.302585092994046;

Rat rat_pow(const Rat& base, unsigned long e) {
  Rat out = 1;
  Rat b = base;
  while (e > 0) {
    if (e & 1) out *= b;
    b *= b;
    e >>= 1;
  }
  return out;
}

// Tarjan over an explicit adjacency list restricted to the given vertices.
std::vector<std::vector<std::size_t>> sub_sccs(
    const std::vector<std::size_t>& verts,
    const std::vector<std::vector<std::size_t>>& adj) {
  std::size_t n = verts.size();
  std::vector<std::size_t> pos(adj.size(), SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) pos[verts[i]] = i;

  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  int next_index = 0;

  struct Frame {
    std::size_t v;
    std::size_t edge = 0;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call{{root}};
    while (!call.empty()) {
      Frame& f = call.back();
      std::size_t v = f.v;
      if (f.edge == 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      bool descended = false;
      const auto& edges = adj[verts[v]];
      while (f.edge < edges.size()) {
        std::size_t w_global = edges[f.edge++];
        std::size_t w = pos[w_global];
        if (w == SIZE_MAX) continue;
        if (index[w] == -1) {
          call.push_back({w});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        for (;;) {
          std::size_t w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(verts[w]);
          if (w == v) break;
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
      call.pop_back();
      if (!call.empty()) {
        low[call.back().v] = std::min(low[call.back().v], low[v]);
      }
    }
  }
  return out;
}

struct PiResult {
  Vec gain;
  Vec bias;
  std::vector<int> policy;
};

MarkovChain induced_chain(const Mdp& mdp, const std::vector<int>& policy) {
  std::size_t n = mdp.n();
  MarkovChain c;
  c.P.entries = Mat(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    const Vec& r = mdp.row(v, policy[v]);
    for (std::size_t u = 0; u < n; ++u) c.P.entries.at(v, u) = r[u];
  }
  c.mu.assign(n, Rat(1) / Rat(std::int64_t(n)));
  c.w = mdp.w;
  c.states = mdp.states;
  return c;
}

// Howard policy iteration for the multichain average-reward criterion:
// switch on a strict gain improvement first, then on a strict bias
// improvement among gain-preserving actions, keeping the incumbent action
// whenever it attains the maximum.
PiResult solve_pi(const Mdp& mdp) {
  std::size_t n = mdp.n();
  std::vector<int> policy(n);
  double switch_budget = 1;
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<int> acts = mdp.actions_of(v);
    policy[v] = acts.front();
    switch_budget *= double(acts.size());
  }
  const std::int64_t guard = std::int64_t(
      std::min<double>(1e7, std::max(1e3, 4 * switch_budget * double(n))));

  for (std::int64_t iter = 0;; ++iter) {
    if (iter > guard) {
      throw CycleGuard("policy iteration exceeded the switch budget");
    }
    GainBias gb = gain_bias(induced_chain(mdp, policy));
    bool gain_improved = false;
    std::vector<int> next = policy;

    for (std::size_t v = 0; v < n; ++v) {
      Rat best_g = gb.gain[v];
      std::vector<int> arg;
      bool current_in = true;
      for (int a : mdp.actions_of(v)) {
        Rat ga = dot(mdp.row(v, a), gb.gain);
        if (ga > best_g) {
          best_g = ga;
          arg.assign(1, a);
          current_in = false;
        } else if (ga == best_g && !current_in) {
          arg.push_back(a);
        }
      }
      if (!current_in) {
        // strict gain improvement; prefer the best bias among the argmax
        int pick = arg.front();
        Rat pick_b = mdp.w[v] - best_g + dot(mdp.row(v, pick), gb.bias);
        for (std::size_t i = 1; i < arg.size(); ++i) {
          Rat cand = mdp.w[v] - best_g + dot(mdp.row(v, arg[i]), gb.bias);
          if (cand > pick_b) {
            pick = arg[i];
            pick_b = cand;
          }
        }
        next[v] = pick;
        gain_improved = true;
      }
    }
    if (gain_improved) {
      policy = next;
      continue;
    }

    bool bias_improved = false;
    for (std::size_t v = 0; v < n; ++v) {
      Rat best_b = gb.bias[v];
      int pick = policy[v];
      for (int a : mdp.actions_of(v)) {
        if (dot(mdp.row(v, a), gb.gain) != gb.gain[v]) continue;
        Rat ba = mdp.w[v] - gb.gain[v] + dot(mdp.row(v, a), gb.bias);
        if (ba > best_b) {
          best_b = ba;
          pick = a;
        }
      }
      if (pick != policy[v]) {
        next[v] = pick;
        bias_improved = true;
      }
    }
    if (!bias_improved) return {gb.gain, gb.bias, policy};
    policy = next;
  }
}

double logsum10(double a, double b) {
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log10(1.0 + std::pow(10.0, lo - hi));
}

double pow10_or_inf(double l) {
  if (std::isinf(l) && l < 0) return 0.0;
  return std::pow(10.0, l);
}

std::string smt_rat(const Rat& q) {
  std::string num = q.get_num().get_str();
  std::string den = q.get_den().get_str();
  bool neg = !num.empty() && num[0] == '-';
  if (neg) num = num.substr(1);
  std::string body = (den == "1") ? (num + ".0") : ("(/ " + num + ".0 " + den + ".0)");
  return neg ? "(- " + body + ")" : body;
}

// Best rational approximation with bounded denominator (Stern-Brocot walk).
Rat snap_rat(double x, long max_den) {
  if (!std::isfinite(x)) throw PreconditionError("snap_rat needs finite x");
  bool neg = x < 0;
  double y = std::fabs(x);
  long ip = long(y);
  double frac = y - double(ip);
  // walk between lo = 0/1 and hi = 1/1
  long a = 0, b = 1, c = 1, d = 1;
  while (b + d <= max_den) {
    long mn = a + c, md = b + d;
    if (frac * md == double(mn)) {
      a = mn;
      b = md;
      break;
    }
    if (frac * md < double(mn)) {
      c = mn;
      d = md;
    } else {
      a = mn;
      b = md;
    }
  }
  Rat lo(a, b), hi(c, d);
  Rat fy = rat_from_double_exact(frac);
  Rat best = (rat_abs(fy - lo) <= rat_abs(fy - hi)) ? lo : hi;
  Rat out = Rat(ip) + best;
  if (neg) out = -out;
  out.canonicalize();
  return out;
}

}  // namespace

MecDecomposition mec_decompose(const Mdp& mdp) {
  mdp.validate();
  std::size_t n = mdp.n();
  std::vector<std::vector<std::size_t>> work;
  {
    std::vector<std::size_t> all(n);
    for (std::size_t v = 0; v < n; ++v) all[v] = v;
    work.push_back(std::move(all));
  }

  MecDecomposition out;
  std::vector<bool> in_mec(n, false);
  while (!work.empty()) {
    std::vector<std::size_t> S = std::move(work.back());
    work.pop_back();

    // prune to closure: keep actions staying inside S, drop emptied vertices
    std::vector<bool> member(n, false);
    for (std::size_t v : S) member[v] = true;
    std::vector<std::vector<int>> allowed(n);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t v : S) {
        if (!member[v]) continue;
        allowed[v].clear();
        for (int a : mdp.actions_of(v)) {
          const Vec& r = mdp.row(v, a);
          bool inside = true;
          for (std::size_t u = 0; u < n && inside; ++u) {
            if (r[u] > 0 && !member[u]) inside = false;
          }
          if (inside) allowed[v].push_back(a);
        }
        if (allowed[v].empty()) {
          member[v] = false;
          changed = true;
        }
      }
    }
    std::vector<std::size_t> kept;
    for (std::size_t v : S) {
      if (member[v]) kept.push_back(v);
    }
    if (kept.empty()) continue;

    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t v : kept) {
      for (int a : allowed[v]) {
        const Vec& r = mdp.row(v, a);
        for (std::size_t u = 0; u < n; ++u) {
          if (r[u] > 0) adj[v].push_back(u);
        }
      }
    }
    std::vector<std::vector<std::size_t>> comps = sub_sccs(kept, adj);
    if (comps.size() == 1 && comps.front().size() == kept.size()) {
      EndComponent ec;
      ec.vertices = comps.front();
      for (std::size_t v : ec.vertices) ec.actions.push_back(allowed[v]);
      for (std::size_t v : ec.vertices) in_mec[v] = true;
      out.mecs.push_back(std::move(ec));
    } else {
      for (auto& c : comps) work.push_back(std::move(c));
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    if (!in_mec[v]) out.rest.push_back(v);
  }
  std::sort(out.mecs.begin(), out.mecs.end(),
            [](const EndComponent& a, const EndComponent& b) {
              return a.vertices.front() < b.vertices.front();
            });
  return out;
}

MeanPayoffSolution mean_payoff(const Mdp& mdp) {
  mdp.validate();
  PiResult pr = solve_pi(mdp);
  MecDecomposition dec = mec_decompose(mdp);

  MeanPayoffSolution sol;
  sol.value = pr.gain;
  sol.policy = pr.policy;
  for (const EndComponent& ec : dec.mecs) {
    // component-restricted sub-MDP; its optimal gain is uniform inside
    Mdp sub;
    std::vector<std::size_t> back(mdp.n(), SIZE_MAX);
    for (std::size_t i = 0; i < ec.vertices.size(); ++i) {
      back[ec.vertices[i]] = i;
    }
    sub.actions = mdp.actions;
    for (std::size_t i = 0; i < ec.vertices.size(); ++i) {
      std::size_t v = ec.vertices[i];
      sub.states.push_back(mdp.states[v]);
      sub.w.push_back(mdp.w[v]);
      std::map<int, Vec> rows;
      for (int a : ec.actions[i]) {
        const Vec& r = mdp.row(v, a);
        Vec rr(ec.vertices.size(), Rat(0));
        for (std::size_t u = 0; u < mdp.n(); ++u) {
          if (r[u] > 0) rr[back[u]] = r[u];
        }
        rows[a] = std::move(rr);
      }
      sub.theta.push_back(std::move(rows));
    }
    sub.mu.assign(ec.vertices.size(),
                  Rat(1) / Rat(std::int64_t(ec.vertices.size())));
    PiResult spr = solve_pi(sub);
    for (const Rat& g : spr.gain) {
      if (g != spr.gain.front()) {
        throw InvariantError("end-component gain is not uniform");
      }
    }
    sol.per_ec_gain.push_back(spr.gain.front());
  }
  return sol;
}

Mdp back_edge_transform(const Mdp& mdp) {
  mdp.validate();
  Mdp m = mdp;

  std::size_t init = SIZE_MAX;
  {
    std::size_t positive = 0;
    for (std::size_t v = 0; v < m.n(); ++v) {
      if (m.mu[v] > 0) {
        ++positive;
        init = v;
      }
    }
    if (positive != 1 || m.mu[init] != 1) {
      // auxiliary start vertex so the penalty vertex has one return target
      int enter = int(m.actions.size());
      m.actions.push_back("enter");
      std::size_t va = m.n();
      m.states.push_back("v_start");
      m.w.push_back(Rat(0));
      Vec spread = m.mu;
      spread.push_back(Rat(0));
      for (auto& rows : m.theta) {
        for (auto& [a, r] : rows) r.push_back(Rat(0));
      }
      m.theta.push_back({{enter, spread}});
      m.mu.assign(va + 1, Rat(0));
      m.mu[va] = 1;
      init = va;
    }
  }

  const std::size_t n = m.n();
  const Rat W = m.W();
  const Rat al = m.alpha();
  Rat w_neg = -Rat(std::int64_t(n) * std::int64_t(n)) * W / rat_pow(al, n);

  int reset = int(m.actions.size());
  m.actions.push_back("reset");
  std::size_t v_neg = n;
  m.states.push_back("v_neg");
  m.w.push_back(w_neg);
  for (auto& rows : m.theta) {
    for (auto& [a, r] : rows) r.push_back(Rat(0));
  }
  for (std::size_t v = 0; v < n; ++v) {
    Vec to_neg(n + 1, Rat(0));
    to_neg[v_neg] = 1;
    m.theta[v][reset] = std::move(to_neg);
  }
  Vec back_row(n + 1, Rat(0));
  back_row[init] = 1;
  m.theta.push_back({{reset, std::move(back_row)}});
  m.mu.push_back(Rat(0));
  m.validate();
  return m;
}

Mdp uniformize(const Mdp& mdp) {
  mdp.validate();
  MecDecomposition dec = mec_decompose(mdp);
  MeanPayoffSolution mp = mean_payoff(mdp);
  if (dot(mdp.mu, mp.value) > 0) {
    throw PreconditionError(
        "uniformize needs mean-payoff value <= 0 from the initial "
        "distribution");
  }

  const std::size_t n = mdp.n();
  const Rat W = mdp.W();
  Rat B = Rat(12) * rat_pow(Rat(std::int64_t(n)), 8) * (3 * W) *
          rat_pow(1 / mdp.alpha(), (unsigned long)(n * n * n + n));

  std::vector<std::size_t> mec_of(n, SIZE_MAX);
  for (std::size_t i = 0; i < dec.mecs.size(); ++i) {
    for (std::size_t v : dec.mecs[i].vertices) mec_of[v] = i;
  }

  Mdp out;
  out.actions = mdp.actions;
  int enter = int(out.actions.size());
  out.actions.push_back("enter");

  const std::size_t m_count = dec.mecs.size();
  const std::size_t total = n + 2 * m_count;
  auto entry_of = [&](std::size_t j) { return n + 2 * j; };
  auto pad_of = [&](std::size_t j) { return n + 2 * j + 1; };

  out.states = mdp.states;
  out.w = mdp.w;
  for (std::size_t j = 0; j < m_count; ++j) {
    out.states.push_back("entry" + std::to_string(j));
    out.states.push_back("pad" + std::to_string(j));
    out.w.push_back(B);
    out.w.push_back(Rat(0));
  }
  for (std::size_t i = 0; i < dec.mecs.size(); ++i) {
    for (std::size_t v : dec.mecs[i].vertices) out.w[v] = mp.per_ec_gain[i];
  }

  auto redirect = [&](std::size_t from, const Vec& r) {
    Vec rr(total, Rat(0));
    for (std::size_t u = 0; u < n; ++u) {
      if (r[u] == 0) continue;
      std::size_t j = mec_of[u];
      if (j != SIZE_MAX && mec_of[from] != j) {
        rr[entry_of(j)] += r[u];
      } else {
        rr[u] += r[u];
      }
    }
    return rr;
  };

  for (std::size_t v = 0; v < n; ++v) {
    std::map<int, Vec> rows;
    for (int a : mdp.actions_of(v)) rows[a] = redirect(v, mdp.row(v, a));
    out.theta.push_back(std::move(rows));
  }
  for (std::size_t j = 0; j < m_count; ++j) {
    Vec to_pad(total, Rat(0));
    to_pad[pad_of(j)] = 1;
    out.theta.push_back({{enter, std::move(to_pad)}});
    Vec spread(total, Rat(0));
    Rat share =
        Rat(1) / Rat(std::int64_t(dec.mecs[j].vertices.size()));
    for (std::size_t v : dec.mecs[j].vertices) spread[v] = share;
    out.theta.push_back({{enter, std::move(spread)}});
  }

  out.mu.assign(total, Rat(0));
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t j = mec_of[v];
    if (j != SIZE_MAX) {
      out.mu[entry_of(j)] += mdp.mu[v];
    } else {
      out.mu[v] = mdp.mu[v];
    }
  }
  out.validate();
  return out;
}

RewardBounds reward_bounds(const Mdp& mdp, const Rat& T, double eps) {
  mdp.validate();
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  if (T < 0) throw PreconditionError("T must be >= 0");

  const double n = double(mdp.n());
  const Rat W = mdp.W();
  const Rat al = mdp.alpha();
  const double l_n = std::log10(n);
  const double l_ia = -rat_ln(al) / kLn10;
  const double l_W =
      (W == 0) ? -std::numeric_limits<double>::infinity() : rat_ln(W) / kLn10;

  RewardBounds rb;
  rb.log10_t0 = std::log10(3.0) + 5 * l_n + n * n * l_ia;
  rb.log10_lemma7 = std::log10(12.0) + 6 * l_n + l_W + n * n * l_ia;
  rb.log10_lemma8 = std::log10(12.0) + 6 * l_n + l_W + n * n * n * l_ia;
  rb.log10_lemma9 = std::log10(12.0) + 8 * l_n + l_W + (n * n * n + n) * l_ia;
  rb.log10_unif_entry = std::log10(3.0) + rb.log10_lemma9;
  double second = std::log10(8.0) + 11 * std::log10(3.0) + 16 * l_n + l_W +
                  (28 * n * n * n + 4 * n) * l_ia;
  rb.log10_B_star = logsum10(rb.log10_lemma9, second);

  rb.t0 = pow10_or_inf(rb.log10_t0);
  rb.lemma7 = pow10_or_inf(rb.log10_lemma7);
  rb.lemma8 = pow10_or_inf(rb.log10_lemma8);
  rb.lemma9 = pow10_or_inf(rb.log10_lemma9);
  rb.unif_entry = pow10_or_inf(rb.log10_unif_entry);
  rb.B_star = pow10_or_inf(rb.log10_B_star);

  if (T == 0) {
    rb.t_star = 0;
    rb.t_hat = 0;
    rb.log10_t_star = -std::numeric_limits<double>::infinity();
    rb.log10_t_hat = rb.log10_t_star;
    return rb;
  }
  const double l_T = rat_ln(T) / kLn10;
  const double l_eps = std::log10(eps);
  rb.log10_t_star =
      l_T + logsum10(std::log10(2.0) + rb.log10_B_star, l_eps) - l_eps;
  rb.t_star = pow10_or_inf(rb.log10_t_star);

  if (W == 0) {
    rb.tail_steps = 0;
  } else {
    double tol =
        eps / (2.0 * 3.0 * n * to_double(W) * to_double(T));
    tol = std::max(tol, std::numeric_limits<double>::denorm_min());
    rb.tail_steps = convergence_bound(int(mdp.n()), al, W, tol).B;
  }
  double l_B = rb.tail_steps > 0
                   ? std::log10(double(rb.tail_steps))
                   : -std::numeric_limits<double>::infinity();
  rb.log10_t_hat = logsum10(rb.log10_t_star, l_B);
  rb.t_hat = rb.t_star + double(rb.tail_steps);
  return rb;
}

ValueBracket evaluate_strategy(const Mdp& mdp, const MarkovStrategy& sigma,
                               const Rat& T, double eps) {
  mdp.validate();
  sigma.validate(mdp);
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  if (T < 0) throw PreconditionError("T must be >= 0");
  // evaluate tighter than asked: the cost is logarithmic in the tolerance
  // and the caller gets a sharper (still sound) enclosure
  const double eps_eval = std::min(eps, 1e-9);

  const std::size_t n = mdp.n();
  Vec row = mdp.mu;
  std::vector<Rat> prefix;
  prefix.reserve(std::size_t(sigma.horizon));
  for (std::int64_t t = 0; t < sigma.horizon; ++t) {
    prefix.push_back(dot(row, mdp.w));
    Vec next(n, Rat(0));
    for (std::size_t v = 0; v < n; ++v) {
      if (row[v] == 0) continue;
      for (const auto& [a, p] : sigma.probs[std::size_t(t)][v]) {
        if (p == 0) continue;
        const Vec& r = mdp.row(v, a);
        for (std::size_t u = 0; u < n; ++u) {
          if (r[u] > 0) next[u] += row[v] * p * r[u];
        }
      }
    }
    row = std::move(next);
  }

  MarkovChain tail;
  tail.P.entries = Mat(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    const Vec& r = mdp.row(v, sigma.tail[v]);
    for (std::size_t u = 0; u < n; ++u) tail.P.entries.at(v, u) = r[u];
  }
  tail.mu = row;
  tail.w = mdp.w;
  tail.states = mdp.states;
  tail.validate();

  ApproxResult ar = approx_value(tail, T, eps_eval);
  UPSeq seq;
  seq.A = std::move(prefix);
  seq.A.insert(seq.A.end(), ar.seq.A.begin(), ar.seq.A.end());
  seq.C = ar.seq.C;
  ValCycleResult r = val_cycle(seq, T);

  ValueBracket b;
  b.estimate = to_double(r.value);
  b.lower = b.estimate - eps_eval;
  b.upper = b.estimate + eps_eval;
  b.method = Method::Approximation;
  b.exact = r.value;
  b.validate();
  return b;
}

namespace {

// Double-precision surrogate of evaluate_strategy used inside the search
// loop. Letters run through the decision horizon plus a fixed tail window,
// then a straight line at the expected tail gain stands in for the cycle.
struct FastModel {
  std::size_t n = 0;
  std::int64_t h = 0;
  std::vector<double> mu, w, g_tail;
  std::vector<std::vector<int>> acts;
  std::vector<std::vector<std::vector<double>>> rows;  // [v][ai][u]
  std::vector<std::vector<double>> tail_rows;          // [v][u]
  double T = 0;
  bool T_int = false;
  std::int64_t Ti = 0;
  std::int64_t window = 120;

  template <class F>
  void candidates(const std::vector<std::vector<std::vector<double>>>& x,
                  F&& fn) const {
    std::vector<double> row = mu, next(n);
    std::vector<double> u;
    u.reserve(std::size_t(h + window));
    double acc = 0;
    for (std::int64_t t = 0; t < h; ++t) {
      double inc = 0;
      for (std::size_t v = 0; v < n; ++v) inc += row[v] * w[v];
      acc += inc;
      u.push_back(acc);
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t v = 0; v < n; ++v) {
        if (row[v] == 0) continue;
        const auto& xv = x[std::size_t(t)][v];
        for (std::size_t ai = 0; ai < xv.size(); ++ai) {
          double m = row[v] * xv[ai];
          if (m == 0) continue;
          const auto& r = rows[v][ai];
          for (std::size_t uu = 0; uu < n; ++uu) next[uu] += m * r[uu];
        }
      }
      row.swap(next);
    }
    for (std::int64_t j = 0; j < window; ++j) {
      double inc = 0;
      for (std::size_t v = 0; v < n; ++v) inc += row[v] * w[v];
      acc += inc;
      u.push_back(acc);
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t v = 0; v < n; ++v) {
        if (row[v] == 0) continue;
        const auto& r = tail_rows[v];
        for (std::size_t uu = 0; uu < n; ++uu) next[uu] += row[v] * r[uu];
      }
      row.swap(next);
    }
    double eta = 0;
    for (std::size_t v = 0; v < n; ++v) eta += row[v] * g_tail[v];

    const std::int64_t L = std::int64_t(u.size());
    // u[t] holds the utility at time t; candidate scan per the closed form
    if (T_int && Ti < L) fn(u[std::size_t(Ti)]);
    std::int64_t tf = std::min<std::int64_t>(std::int64_t(std::floor(T)),
                                             L - 1);
    std::int64_t tc = T_int ? Ti + 1 : std::int64_t(std::ceil(T));
    for (std::int64_t t1 = 0; t1 <= tf; ++t1) {
      double u1 = u[std::size_t(t1)];
      fn(u1 + eta * (T - double(t1)));
      for (std::int64_t t2 = std::max(tc, t1 + 1); t2 < L; ++t2) {
        double u2 = u[std::size_t(t2)];
        fn(u1 + (T - double(t1)) / double(t2 - t1) * (u2 - u1));
      }
    }
  }

  double value(const std::vector<std::vector<std::vector<double>>>& x) const {
    double best = std::numeric_limits<double>::infinity();
    candidates(x, [&](double c) { best = std::min(best, c); });
    return best;
  }

  // smoothed minimum -(1/beta) ln sum exp(-beta c); approaches the true
  // minimum from below as beta grows, and is differentiable everywhere
  double value_soft(const std::vector<std::vector<std::vector<double>>>& x,
                    double beta) const {
    double m = value(x);
    double lse = 0;
    candidates(x, [&](double c) { lse += std::exp(-beta * (c - m)); });
    return m - std::log(lse) / beta;
  }
};

double golden_max(const std::function<double(double)>& f, double lo,
                  double hi, int iters) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  return (f1 > f2) ? x1 : x2;
}

}  // namespace

ValueBracket estimate_value(const Mdp& mdp, const Rat& T, double eps,
                            const EstimateOpts& opts) {
  return estimate_value(mdp, T, eps, opts, nullptr);
}

ValueBracket estimate_value(const Mdp& mdp, const Rat& T, double eps,
                            const EstimateOpts& opts, MarkovStrategy* best) {
  mdp.validate();
  if (opts.t_cap < 1) throw PreconditionError("t_cap must be >= 1");
  if (opts.restarts < 1) throw PreconditionError("restarts must be >= 1");
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  if (T < 0) throw PreconditionError("T must be >= 0");

  const std::size_t n = mdp.n();
  const std::int64_t h = opts.t_cap;
  MeanPayoffSolution mp = mean_payoff(mdp);
  GainBias tail_gb = gain_bias(induced_chain(mdp, mp.policy));

  FastModel fm;
  fm.n = n;
  fm.h = h;
  fm.T = to_double(T);
  fm.T_int = is_integer(T);
  fm.Ti = fm.T_int ? std::int64_t(T.get_num().get_si()) : 0;
  for (std::size_t v = 0; v < n; ++v) {
    fm.mu.push_back(to_double(mdp.mu[v]));
    fm.w.push_back(to_double(mdp.w[v]));
    fm.g_tail.push_back(to_double(tail_gb.gain[v]));
    fm.acts.push_back(mdp.actions_of(v));
    std::vector<std::vector<double>> vr;
    for (int a : fm.acts.back()) {
      std::vector<double> r;
      for (const Rat& q : mdp.row(v, a)) r.push_back(to_double(q));
      vr.push_back(std::move(r));
    }
    fm.rows.push_back(std::move(vr));
    std::vector<double> tr;
    for (const Rat& q : mdp.row(v, mp.policy[v])) tr.push_back(to_double(q));
    fm.tail_rows.push_back(std::move(tr));
  }

  std::vector<std::size_t> free_verts;
  for (std::size_t v = 0; v < n; ++v) {
    if (fm.acts[v].size() >= 2) free_verts.push_back(v);
  }

  auto build_sigma = [&](const std::vector<std::vector<std::vector<double>>>& x,
                         bool snapped) {
    MarkovStrategy s;
    s.horizon = h;
    s.probs.resize(std::size_t(h));
    for (std::int64_t t = 0; t < h; ++t) {
      s.probs[std::size_t(t)].resize(n);
      for (std::size_t v = 0; v < n; ++v) {
        std::map<int, Rat>& m = s.probs[std::size_t(t)][v];
        const auto& xv = x[std::size_t(t)][v];
        Vec probs(xv.size());
        Rat sum = 0;
        for (std::size_t ai = 0; ai < xv.size(); ++ai) {
          probs[ai] =
              snapped ? snap_rat(xv[ai], 256) : rat_from_double_exact(xv[ai]);
          if (probs[ai] < 0) probs[ai] = 0;
          sum += probs[ai];
        }
        if (sum == 0) {
          probs.assign(xv.size(), Rat(0));
          probs[0] = 1;
          sum = 1;
        }
        for (std::size_t ai = 0; ai < xv.size(); ++ai) {
          Rat q = probs[ai] / sum;
          if (q > 0) m[fm.acts[v][ai]] = q;
        }
        if (m.empty()) m[fm.acts[v][0]] = 1;
      }
    }
    s.tail = mp.policy;
    return s;
  };

  std::optional<ValueBracket> best_vb;
  MarkovStrategy best_sigma;
  auto consider = [&](const MarkovStrategy& s) {
    ValueBracket vb = evaluate_strategy(mdp, s, T, eps);
    if (!best_vb || vb.estimate > best_vb->estimate ||
        (vb.exact && best_vb->exact && *vb.exact > *best_vb->exact)) {
      best_vb = vb;
      best_sigma = s;
    }
  };

  for (int r = 0; r < opts.restarts; ++r) {
    std::mt19937_64 rng(opts.seed * 1000003ULL + std::uint64_t(r));
    std::vector<std::vector<std::vector<double>>> x;
    x.assign(std::size_t(h), std::vector<std::vector<double>>(n));
    for (std::int64_t t = 0; t < h; ++t) {
      for (std::size_t v = 0; v < n; ++v) {
        std::size_t k = fm.acts[v].size();
        std::vector<double> p(k, 1.0 / double(k));
        if (r > 0 && k >= 2) {
          std::exponential_distribution<double> ed(1.0);
          double s = 0;
          for (auto& e : p) {
            e = ed(rng) + 1e-9;
            s += e;
          }
          for (auto& e : p) e /= s;
        }
        x[std::size_t(t)][v] = std::move(p);
      }
    }

    if (!free_verts.empty()) {
      auto coordinate_rounds = [&](int max_rounds) {
        double cur = fm.value(x);
        for (int round = 0; round < max_rounds; ++round) {
          double round_start = cur;
          // alternating sweep direction breaks the one-way coupling between
          // early decisions and the masses every later decision sees
          for (std::int64_t step = 0; step < h; ++step) {
            std::int64_t t = (round % 2 == 0) ? step : h - 1 - step;
            for (std::size_t v : free_verts) {
              auto& p = x[std::size_t(t)][v];
              for (std::size_t dir = 0; dir < p.size(); ++dir) {
                std::vector<double> base = p;
                auto trial = [&](double lam) {
                  for (std::size_t i = 0; i < p.size(); ++i) {
                    p[i] = (1 - lam) * base[i] + (i == dir ? lam : 0.0);
                  }
                  return fm.value(x);
                };
                double lam = golden_max(trial, 0.0, 1.0, 48);
                double got = trial(lam);
                if (got > cur) {
                  cur = got;
                } else {
                  p = base;
                }
              }
            }
          }
          if (cur <= round_start + 1e-13) break;
        }
      };

      auto project = [](std::vector<double>& p) {
        std::vector<double> s = p;
        std::sort(s.begin(), s.end(), std::greater<>());
        double cum = 0, tau = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          cum += s[i];
          double cand = (cum - 1.0) / double(i + 1);
          if (s[i] - cand > 0) tau = cand;
        }
        for (auto& e : p) e = std::max(0.0, e - tau);
      };

      // joint ascent on the smoothed minimum: single-coordinate sweeps stall
      // on balanced kinks where two candidates tie, and only a simultaneous
      // move along the ridge improves both
      auto soft_phase = [&]() {
        for (double beta : {3e2, 3e3, 3e4, 3e5}) {
          double step = 0.25;
          for (int it = 0; it < 40 && step > 1e-9; ++it) {
            double f0 = fm.value_soft(x, beta);
            std::vector<std::vector<double>> grad(
                std::size_t(h) * free_verts.size());
            const double hfd = 1e-7;
            double gmax = 0;
            for (std::int64_t t = 0; t < h; ++t) {
              for (std::size_t fi = 0; fi < free_verts.size(); ++fi) {
                std::size_t v = free_verts[fi];
                auto& p = x[std::size_t(t)][v];
                auto& g =
                    grad[std::size_t(t) * free_verts.size() + fi];
                g.assign(p.size(), 0.0);
                for (std::size_t i = 0; i < p.size(); ++i) {
                  double keep = p[i];
                  p[i] = keep + hfd;
                  double fp = fm.value_soft(x, beta);
                  p[i] = keep - hfd;
                  double fmn = fm.value_soft(x, beta);
                  p[i] = keep;
                  g[i] = (fp - fmn) / (2 * hfd);
                  gmax = std::max(gmax, std::abs(g[i]));
                }
              }
            }
            if (gmax < 1e-12) break;
            auto saved = x;
            bool accepted = false;
            while (step > 1e-9) {
              for (std::int64_t t = 0; t < h; ++t) {
                for (std::size_t fi = 0; fi < free_verts.size(); ++fi) {
                  std::size_t v = free_verts[fi];
                  auto& p = x[std::size_t(t)][v];
                  const auto& g =
                      grad[std::size_t(t) * free_verts.size() + fi];
                  for (std::size_t i = 0; i < p.size(); ++i) {
                    p[i] += step * g[i] / gmax;
                  }
                  project(p);
                }
              }
              if (fm.value_soft(x, beta) > f0 + 1e-14) {
                accepted = true;
                step = std::min(0.25, step * 1.5);
                break;
              }
              x = saved;
              step *= 0.5;
            }
            if (!accepted) break;
          }
        }
      };

      coordinate_rounds(24);
      soft_phase();
      coordinate_rounds(8);
    }

    consider(build_sigma(x, false));
    consider(build_sigma(x, true));
  }

  ValueBracket out = *best_vb;
  out.method = Method::OptimizerLowerBound;
  RewardBounds rb = reward_bounds(mdp, T, eps);
  if (double(h) >= rb.t_star) {
    out.upper = out.estimate + eps;
  } else {
    out.upper = std::numeric_limits<double>::infinity();
  }
  out.validate();
  if (best) *best = best_sigma;
  return out;
}

std::string export_etr(const Mdp& mdp, const Rat& T, std::int64_t horizon,
                       const Rat& tau) {
  mdp.validate();
  if (horizon < 1) throw RangeError("horizon must be >= 1");
  if (T < 0) throw RangeError("T must be >= 0");

  MeanPayoffSolution mp = mean_payoff(mdp);
  const std::size_t n = mdp.n();
  std::ostringstream os;
  os << "(set-logic QF_NRA)\n";
  os << "; horizon-bounded strategy existence: value >= " << rat_to_string(tau)
     << " at expected stopping time " << rat_to_string(T) << "\n";
  for (std::size_t v = 0; v < n; ++v) {
    os << "; vertex " << v << " = " << mdp.states[v] << "\n";
  }

  auto xname = [&](std::int64_t t, std::size_t v, int a) {
    return "x_" + std::to_string(t) + "_" + std::to_string(v) + "_" +
           std::to_string(a);
  };
  auto pname = [&](std::int64_t t, std::size_t v) {
    return "p_" + std::to_string(t) + "_" + std::to_string(v);
  };
  auto uname = [&](std::int64_t t) { return "u_" + std::to_string(t); };

  for (std::int64_t t = 0; t < horizon; ++t) {
    for (std::size_t v = 0; v < n; ++v) {
      for (int a : mdp.actions_of(v)) {
        os << "(declare-const " << xname(t, v, a) << " Real)\n";
      }
    }
  }
  for (std::int64_t t = 0; t <= horizon; ++t) {
    for (std::size_t v = 0; v < n; ++v) {
      os << "(declare-const " << pname(t, v) << " Real)\n";
    }
  }
  for (std::int64_t t = 0; t < horizon; ++t) {
    os << "(declare-const " << uname(t) << " Real)\n";
  }
  os << "(declare-const eta Real)\n";

  for (std::int64_t t = 0; t < horizon; ++t) {
    for (std::size_t v = 0; v < n; ++v) {
      os << "(assert (= (+";
      for (int a : mdp.actions_of(v)) os << " " << xname(t, v, a);
      os << " 0.0) 1.0))\n";
      for (int a : mdp.actions_of(v)) {
        os << "(assert (>= " << xname(t, v, a) << " 0.0))\n";
      }
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    os << "(assert (= " << pname(0, v) << " " << smt_rat(mdp.mu[v]) << "))\n";
  }
  for (std::int64_t t = 0; t < horizon; ++t) {
    for (std::size_t u = 0; u < n; ++u) {
      os << "(assert (= " << pname(t + 1, u) << " (+ 0.0";
      for (std::size_t v = 0; v < n; ++v) {
        for (int a : mdp.actions_of(v)) {
          const Rat& q = mdp.row(v, a)[u];
          if (q == 0) continue;
          os << " (* " << smt_rat(q) << " " << pname(t, v) << " "
             << xname(t, v, a) << ")";
        }
      }
      os << ")))\n";
    }
  }

  for (std::int64_t t = 0; t < horizon; ++t) {
    os << "(assert (= " << uname(t) << " (+" << (t > 0 ? " " + uname(t - 1) : " 0.0");
    for (std::size_t v = 0; v < n; ++v) {
      if (mdp.w[v] == 0) continue;
      os << " (* " << smt_rat(mdp.w[v]) << " " << pname(t, v) << ")";
    }
    os << ")))\n";
  }

  os << "(assert (= eta (+ 0.0";
  for (std::size_t v = 0; v < n; ++v) {
    if (mp.value[v] == 0) continue;
    os << " (* " << smt_rat(mp.value[v]) << " " << pname(horizon, v) << ")";
  }
  os << ")))\n";

  // candidate set: point mass, chords, and gain-slope tails
  Int tf_big = is_integer(T) ? Int(T.get_num()) : floor_rat(T);
  std::int64_t tf = std::min<std::int64_t>(
      tf_big.fits_slong_p() ? tf_big.get_si() : horizon, horizon - 1);
  std::int64_t tc = is_integer(T) ? std::int64_t(T.get_num().get_si()) + 1
                                  : std::int64_t(ceil_rat(T).get_si());
  if (is_integer(T) && T.get_num().fits_slong_p() &&
      T.get_num().get_si() <= horizon - 1) {
    os << "(assert (>= " << uname(T.get_num().get_si()) << " "
       << smt_rat(tau) << "))\n";
  }
  for (std::int64_t t1 = 0; t1 <= tf; ++t1) {
    if (Rat(t1) > T) break;
    // tail: u_{t1} + eta (T - t1) >= tau
    os << "(assert (>= (+ " << uname(t1) << " (* eta " << smt_rat(T - Rat(t1))
       << ")) " << smt_rat(tau) << "))\n";
    for (std::int64_t t2 = std::max(tc, t1 + 1); t2 < horizon; ++t2) {
      // (t2 - T) u_{t1} + (T - t1) u_{t2} >= tau (t2 - t1)
      Rat c1 = Rat(t2) - T, c2 = T - Rat(t1), c3 = tau * Rat(t2 - t1);
      os << "(assert (>= (+ (* " << smt_rat(c1) << " " << uname(t1) << ") (* "
         << smt_rat(c2) << " " << uname(t2) << ")) " << smt_rat(c3) << "))\n";
    }
  }
  os << "(check-sat)\n";
  return os.str();
}

Fig6 fig6_example(std::int64_t horizon) {
  if (horizon < 1) throw PreconditionError("horizon must be >= 1");
  Fig6 fig;
  Mdp& m = fig.mdp;
  m.actions = {"move", "a", "b"};
  m.states = {"v0", "v1", "v2", "v3", "v4",  "v5",  "v6",
              "w1", "w2", "w3", "w4", "w5",  "w6"};
  const std::size_t N = 13;
  auto point = [&](std::size_t u) {
    Vec r(N, Rat(0));
    r[u] = 1;
    return r;
  };
  m.theta.resize(N);
  {
    Vec r(N, Rat(0));
    r[1] = Rat(1, 3);
    r[7] = Rat(2, 3);
    m.theta[0][0] = std::move(r);
  }
  {
    Vec r(N, Rat(0));
    r[2] = Rat(1, 2);
    r[4] = Rat(1, 2);
    m.theta[1][0] = std::move(r);
  }
  m.theta[2][0] = point(3);
  m.theta[3][0] = point(1);
  m.theta[4][0] = point(5);
  m.theta[5][0] = point(6);
  m.theta[6][0] = point(4);  // upper weighted cycle closes on itself
  m.theta[7][1] = point(8);
  m.theta[7][2] = point(10);
  m.theta[8][0] = point(9);
  m.theta[9][0] = point(7);
  m.theta[10][0] = point(11);
  m.theta[11][0] = point(12);
  m.theta[12][0] = point(10);
  m.w.assign(N, Rat(0));
  m.w[4] = -1;
  m.w[5] = 2;
  m.w[6] = -1;
  m.w[10] = 1;
  m.w[11] = -2;
  m.w[12] = 1;
  m.mu.assign(N, Rat(0));
  m.mu[0] = 1;
  m.validate();

  // schedule: alpha_k = 1/(2 + 2^{k+1}) at decision times 1 + 3k; the
  // controlled absorption then mirrors the automatic one upstairs.
  auto alpha_of = [](std::int64_t k) -> Rat {
    Rat two_pow = rat_pow(Rat(2), (unsigned long)(k + 1));
    return Rat(1) / (2 + two_pow);
  };
  Rat a0 = alpha_of(0);
  Rat m0 = Rat(2, 3);
  Rat p0 = m0 * a0;
  if (a0 != Rat(1, 4) || p0 != Rat(1, 6)) {
    throw InvariantError("schedule does not reproduce the pinned constants");
  }

  MarkovStrategy& s = fig.sigma_opt;
  s.horizon = horizon;
  s.probs.resize(std::size_t(horizon));
  for (std::int64_t t = 0; t < horizon; ++t) {
    auto& step = s.probs[std::size_t(t)];
    step.resize(N);
    for (std::size_t v = 0; v < N; ++v) {
      if (v == 7) {
        if (t >= 1 && (t - 1) % 3 == 0) {
          Rat ak = alpha_of((t - 1) / 3);
          step[v][1] = 1 - ak;
          step[v][2] = ak;
        } else {
          step[v][1] = 1;
        }
      } else if (v == 1) {
        step[v][0] = 1;
      } else {
        step[v][m.actions_of(v).front()] = 1;
      }
    }
  }
  s.tail.assign(N, 0);
  s.tail[7] = 1;
  s.validate(m);
  return fig;
}

Mdp fig7_example() {
  Mdp m;
  m.actions = {"a", "b"};
  m.states = {"v0", "v1", "v2", "v3"};
  auto point = [&](std::size_t u) {
    Vec r(4, Rat(0));
    r[u] = 1;
    return r;
  };
  m.theta.resize(4);
  m.theta[0][0] = point(0);
  {
    Vec r(4, Rat(0));
    r[0] = Rat(1, 8);
    r[2] = Rat(1, 8);
    r[3] = Rat(3, 4);
    m.theta[0][1] = std::move(r);
  }
  m.theta[1][0] = point(2);
  m.theta[2][0] = point(1);
  m.theta[2][1] = point(3);
  m.theta[3][0] = point(3);
  m.w = {Rat(-1), Rat(2), Rat(0), Rat(-2)};
  m.mu = {Rat(1, 2), Rat(1, 2), Rat(0), Rat(0)};
  m.validate();
  return m;
}

}  // namespace stoptime
