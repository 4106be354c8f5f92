#include "stoptime/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stoptime/errors.hpp"

namespace stoptime {
namespace {

constexpr std::int64_t kPeriodCap = 1000000;

std::vector<std::vector<std::size_t>> positive_edges(const StochasticMatrix& P) {
  std::vector<std::vector<std::size_t>> adj(P.n());
  for (std::size_t u = 0; u < P.n(); ++u) {
    for (std::size_t v = 0; v < P.n(); ++v) {
      if (P.entries.at(u, v) > 0) adj[u].push_back(v);
    }
  }
  return adj;
}

// Iterative Tarjan. Component ids are assigned in completion order, so a
// component only ever reaches components with smaller ids.
std::vector<int> strongly_connected(
    const std::vector<std::vector<std::size_t>>& adj, int& count) {
  std::size_t n = adj.size();
  std::vector<int> comp(n, -1), low(n, 0), index(n, -1);
  std::vector<std::size_t> stack, call_v, call_e;
  std::vector<char> on_stack(n, 0);
  int next_index = 0;
  count = 0;

  for (std::size_t start = 0; start < n; ++start) {
    if (index[start] >= 0) continue;
    call_v.push_back(start);
    call_e.push_back(0);
    index[start] = low[start] = next_index++;
    stack.push_back(start);
    on_stack[start] = 1;
    while (!call_v.empty()) {
      std::size_t v = call_v.back();
      if (call_e.back() < adj[v].size()) {
        std::size_t w = adj[v][call_e.back()++];
        if (index[w] < 0) {
          call_v.push_back(w);
          call_e.push_back(0);
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          while (true) {
            std::size_t w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp[w] = count;
            if (w == v) break;
          }
          ++count;
        }
        call_v.pop_back();
        call_e.pop_back();
        if (!call_v.empty()) {
          std::size_t parent = call_v.back();
          low[parent] = std::min(low[parent], low[v]);
        }
      }
    }
  }
  return comp;
}

std::int64_t class_period(const std::vector<std::vector<std::size_t>>& adj,
                          const std::vector<std::size_t>& vertices) {
  std::vector<std::int64_t> local(adj.size(), -1);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    local[vertices[i]] = std::int64_t(i);
  }
  std::vector<std::int64_t> level(vertices.size(), -1);
  std::vector<std::size_t> queue{vertices[0]};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    std::size_t u = queue[head];
    for (std::size_t v : adj[u]) {
      if (local[v] < 0) continue;
      if (level[std::size_t(local[v])] < 0) {
        level[std::size_t(local[v])] = level[std::size_t(local[u])] + 1;
        queue.push_back(v);
      }
    }
  }
  std::int64_t g = 0;
  for (std::size_t u : vertices) {
    for (std::size_t v : adj[u]) {
      if (local[v] < 0) continue;
      std::int64_t diff =
          level[std::size_t(local[u])] + 1 - level[std::size_t(local[v])];
      g = std::gcd(g, diff < 0 ? -diff : diff);
    }
  }
  return g == 0 ? 1 : g;
}

Mat submatrix(const StochasticMatrix& P, const std::vector<std::size_t>& rows,
              const std::vector<std::size_t>& cols) {
  Mat m(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      m.at(r, c) = P.entries.at(rows[r], cols[c]);
    }
  }
  return m;
}

// pi restricted to one class, solved from pi (I - M_C) = 0 with the first
// equation swapped for normalization. The swap keeps the system square and,
// for an irreducible class, nonsingular.
Vec class_steady_state(const Mat& mc) {
  std::size_t n = mc.rows();
  Mat sys(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      sys.at(r, c) = (r == c ? Rat(1) : Rat(0)) - mc.at(c, r);
    }
  }
  for (std::size_t c = 0; c < n; ++c) sys.at(0, c) = 1;
  Vec rhs(n, Rat(0));
  rhs[0] = 1;
  Vec pi = solve_linear_vec(sys, rhs);
  for (const Rat& p : pi) {
    if (p <= 0) throw InvariantError("steady state has a nonpositive entry");
  }
  return pi;
}

}  // namespace

ClassDecomposition decompose(const MarkovChain& chain) {
  auto adj = positive_edges(chain.P);
  int count = 0;
  std::vector<int> comp = strongly_connected(adj, count);

  std::vector<char> leaves(std::size_t(count), 0);
  for (std::size_t u = 0; u < chain.n(); ++u) {
    for (std::size_t v : adj[u]) {
      if (comp[u] != comp[v]) leaves[std::size_t(comp[u])] = 1;
    }
  }

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(count));
  for (std::size_t v = 0; v < chain.n(); ++v) {
    members[std::size_t(comp[v])].push_back(v);
  }

  ClassDecomposition dec;
  std::vector<std::vector<std::size_t>> recurrent;
  for (int c = 0; c < count; ++c) {
    if (leaves[std::size_t(c)]) {
      for (std::size_t v : members[std::size_t(c)]) dec.transient.push_back(v);
    } else {
      recurrent.push_back(members[std::size_t(c)]);
    }
  }
  std::sort(dec.transient.begin(), dec.transient.end());
  std::sort(recurrent.begin(), recurrent.end(),
            [](const auto& a, const auto& b) { return a[0] < b[0]; });

  Int lcm_acc = 1;
  for (auto& vertices : recurrent) {
    RecurrentClass rc;
    rc.vertices = vertices;
    rc.period = class_period(adj, vertices);
    mpz_lcm_ui(lcm_acc.get_mpz_t(), lcm_acc.get_mpz_t(),
               static_cast<unsigned long>(rc.period));
    dec.classes.push_back(std::move(rc));
  }
  if (lcm_acc > Int("1000000000000000000")) {
    throw PeriodTooLarge("class period lcm exceeds the supported range");
  }
  dec.period_lcm = std::int64_t(mpz_get_si(lcm_acc.get_mpz_t()));
  return dec;
}

Vec steady_state(const MarkovChain& chain, const ClassDecomposition& dec,
                 std::size_t class_index) {
  if (class_index >= dec.classes.size()) {
    throw IndexError("class index out of range");
  }
  const auto& vertices = dec.classes[class_index].vertices;
  Mat mc = submatrix(chain.P, vertices, vertices);
  Vec pi = class_steady_state(mc);
  if (vec_mat(pi, mc) != pi) {
    throw InvariantError("steady state failed verification");
  }
  return pi;
}

std::vector<Rat> absorption_probs(const MarkovChain& chain,
                                  const ClassDecomposition& dec) {
  std::vector<Rat> mass(dec.classes.size(), Rat(0));
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    for (std::size_t v : dec.classes[c].vertices) mass[c] += chain.mu[v];
  }
  if (!dec.transient.empty()) {
    const auto& T = dec.transient;
    Mat sys(T.size(), T.size());
    for (std::size_t r = 0; r < T.size(); ++r) {
      for (std::size_t c = 0; c < T.size(); ++c) {
        sys.at(r, c) =
            (r == c ? Rat(1) : Rat(0)) - chain.P.entries.at(T[r], T[c]);
      }
    }
    Mat rhs(T.size(), dec.classes.size());
    for (std::size_t r = 0; r < T.size(); ++r) {
      for (std::size_t c = 0; c < dec.classes.size(); ++c) {
        for (std::size_t v : dec.classes[c].vertices) {
          rhs.at(r, c) += chain.P.entries.at(T[r], v);
        }
      }
    }
    Mat h = solve_linear(sys, rhs);
    for (std::size_t c = 0; c < dec.classes.size(); ++c) {
      for (std::size_t r = 0; r < T.size(); ++r) {
        mass[c] += chain.mu[T[r]] * h.at(r, c);
      }
    }
  }
  Rat total = 0;
  for (const Rat& m : mass) total += m;
  if (total != 1) throw InvariantError("absorption masses do not sum to 1");
  return mass;
}

GainBias gain_bias(const MarkovChain& chain) {
  return gain_bias(chain, decompose(chain));
}

GainBias gain_bias(const MarkovChain& chain, const ClassDecomposition& dec) {
  std::size_t n = chain.n();
  GainBias gb;
  gb.gain.assign(n, Rat(0));
  gb.bias.assign(n, Rat(0));

  for (const auto& rc : dec.classes) {
    Mat mc = submatrix(chain.P, rc.vertices, rc.vertices);
    Vec pi = class_steady_state(mc);
    Vec wc(rc.vertices.size());
    for (std::size_t i = 0; i < rc.vertices.size(); ++i) {
      wc[i] = chain.w[rc.vertices[i]];
    }
    Rat g = dot(pi, wc);
    gb.per_class_gain.push_back(g);
    for (std::size_t v : rc.vertices) gb.gain[v] = g;

    // (I - M_C + e pi) y = w - g e has the bias as its unique solution:
    // multiplying by pi on the left shows pi.y = 0, and then the defining
    // equation follows.
    std::size_t m = rc.vertices.size();
    Mat sys(m, m);
    Vec rhs(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        sys.at(r, c) = (r == c ? Rat(1) : Rat(0)) - mc.at(r, c) + pi[c];
      }
      rhs[r] = wc[r] - g;
    }
    Vec yc = solve_linear_vec(sys, rhs);
    for (std::size_t i = 0; i < m; ++i) gb.bias[rc.vertices[i]] = yc[i];
  }

  if (!dec.transient.empty()) {
    const auto& T = dec.transient;
    Mat sys(T.size(), T.size());
    for (std::size_t r = 0; r < T.size(); ++r) {
      for (std::size_t c = 0; c < T.size(); ++c) {
        sys.at(r, c) =
            (r == c ? Rat(1) : Rat(0)) - chain.P.entries.at(T[r], T[c]);
      }
    }
    // Gain on transient vertices: x = P_TT x + (mass into classes) g.
    Mat rhs(T.size(), 2);
    for (std::size_t r = 0; r < T.size(); ++r) {
      Rat into_gain = 0;
      for (const auto& rc : dec.classes) {
        for (std::size_t v : rc.vertices) {
          into_gain += chain.P.entries.at(T[r], v) * gb.gain[v];
        }
      }
      rhs.at(r, 0) = into_gain;
    }
    Mat xt = solve_linear(sys, rhs);
    for (std::size_t r = 0; r < T.size(); ++r) gb.gain[T[r]] = xt.at(r, 0);

    // Bias on transient vertices: y = P_TT y + (w - x + P_TR y_R).
    Vec rhs_y(T.size());
    for (std::size_t r = 0; r < T.size(); ++r) {
      Rat into_bias = 0;
      for (const auto& rc : dec.classes) {
        for (std::size_t v : rc.vertices) {
          into_bias += chain.P.entries.at(T[r], v) * gb.bias[v];
        }
      }
      rhs_y[r] = chain.w[T[r]] - gb.gain[T[r]] + into_bias;
    }
    Vec yt = solve_linear_vec(sys, rhs_y);
    for (std::size_t r = 0; r < T.size(); ++r) gb.bias[T[r]] = yt[r];
  }

  // Both defining identities must hold with zero residual.
  Vec mx = mat_vec(chain.P.entries, gb.gain);
  if (mx != gb.gain) throw InvariantError("gain is not harmonic");
  Vec ymx(n);
  for (std::size_t v = 0; v < n; ++v) ymx[v] = gb.bias[v] - gb.gain[v];
  Vec my = mat_vec(chain.P.entries, ymx);
  for (std::size_t v = 0; v < n; ++v) {
    if (gb.bias[v] != my[v] + chain.w[v]) {
      throw InvariantError("bias equation has nonzero residual");
    }
  }
  return gb;
}

std::vector<Rat> utility_prefix(const MarkovChain& chain,
                                std::int64_t horizon) {
  if (horizon < 0) throw PreconditionError("horizon must be >= 0");
  std::vector<Rat> u;
  u.reserve(std::size_t(horizon) + 1);
  Vec rho = chain.mu;
  Rat acc = dot(rho, chain.w);
  u.push_back(acc);
  for (std::int64_t t = 1; t <= horizon; ++t) {
    rho = vec_mat(rho, chain.P.entries);
    acc += dot(rho, chain.w);
    u.push_back(acc);
  }
  return u;
}

Rat PeriodicData::u_at(std::int64_t k, const Int& m) const {
  if (k < 0 || k >= d) throw IndexError("residue out of range");
  if (m < 0) throw IndexError("cycle count must be >= 0");
  if (!mpz_fits_ulong_p(m.get_mpz_t())) {
    throw RangeError("cycle count too large for exact evaluation");
  }
  Mat nm = mat_pow(N.entries, mpz_get_ui(m.get_mpz_t()));
  Rat tail = dot(nu[std::size_t(k)], mat_vec(nm, hat.bias));
  Rat t_plus_1 = Rat(k + 1) + Rat(d) * Rat(m);
  return s * t_plus_1 + c[std::size_t(k)] - tail;
}

PeriodicData periodic_data(const MarkovChain& chain) {
  return periodic_data(chain, decompose(chain));
}

PeriodicData periodic_data(const MarkovChain& chain,
                           const ClassDecomposition& dec) {
  PeriodicData pd;
  pd.d = dec.period_lcm;
  if (pd.d > kPeriodCap) {
    throw PeriodTooLarge("period lcm " + std::to_string(pd.d) +
                         " exceeds cap " + std::to_string(kPeriodCap));
  }

  pd.N.entries = mat_pow(chain.P.entries, static_cast<unsigned long>(pd.d));
  Vec col = chain.w;
  pd.w_hat = col;
  for (std::int64_t j = 1; j < pd.d; ++j) {
    col = mat_vec(chain.P.entries, col);
    for (std::size_t v = 0; v < chain.n(); ++v) pd.w_hat[v] += col[v];
  }

  MarkovChain hat_chain;
  hat_chain.P = pd.N;
  hat_chain.mu = chain.mu;
  hat_chain.w = pd.w_hat;
  pd.hat = gain_bias(hat_chain);

  pd.nu.reserve(std::size_t(pd.d));
  Vec rho = vec_mat(chain.mu, chain.P.entries);
  pd.nu.push_back(rho);
  for (std::int64_t k = 1; k < pd.d; ++k) {
    rho = vec_mat(rho, chain.P.entries);
    pd.nu.push_back(rho);
  }

  // Every residue must see the same per-step growth: nu_k . x_hat = d*s.
  Rat ds = dot(pd.nu[0], pd.hat.gain);
  for (std::size_t k = 1; k < pd.nu.size(); ++k) {
    if (dot(pd.nu[k], pd.hat.gain) != ds) {
      throw InvariantError("residue classes disagree on the growth rate");
    }
  }
  pd.s = ds / Rat(pd.d);

  pd.u_head = utility_prefix(chain, pd.d - 1);
  pd.c.reserve(std::size_t(pd.d));
  for (std::int64_t k = 0; k < pd.d; ++k) {
    pd.c.push_back(pd.u_head[std::size_t(k)] - pd.s * Rat(k + 1) +
                   dot(pd.nu[std::size_t(k)], pd.hat.bias));
  }
  return pd;
}

Asymptote asymptote(const MarkovChain& chain) {
  PeriodicData pd = periodic_data(chain);
  Asymptote a;
  a.slope = pd.s;
  a.intercepts = pd.c;
  return a;
}

Vec limit_row(const MarkovChain& chain, const ClassDecomposition& dec) {
  for (const auto& rc : dec.classes) {
    if (rc.period != 1) {
      throw PreconditionError("limit_row needs aperiodic recurrent classes");
    }
  }
  std::vector<Rat> reach = absorption_probs(chain, dec);
  Vec rho(chain.n(), Rat(0));
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    Vec pi = steady_state(chain, dec, c);
    for (std::size_t i = 0; i < dec.classes[c].vertices.size(); ++i) {
      rho[dec.classes[c].vertices[i]] += reach[c] * pi[i];
    }
  }
  return rho;
}

ConvergenceBound convergence_bound(int n, const Rat& alpha, const Rat& W,
                                   double eps) {
  if (n < 1) throw PreconditionError("n must be >= 1");
  if (alpha <= 0) throw PreconditionError("alpha must be positive");
  if (!(eps > 0)) throw PreconditionError("eps must be positive");

  ConvergenceBound cb;
  cb.n = n;
  cb.alpha = alpha > Rat(1, 2) ? Rat(1, 2) : alpha;
  cb.K1 = 3.0;

  double nd = double(n);
  double three_n2 = 3.0 * nd * nd;
  // ln(alpha^{n^3}), always finite.
  double x_log = nd * nd * nd * rat_ln(cb.alpha);
  if (x_log > -39.0) {
    double t = std::exp(x_log);
    cb.neg_ln_K3 = -std::log1p(-t) / three_n2;
    cb.log10_neg_ln_K3 = std::log10(cb.neg_ln_K3);
  } else {
    // -log1p(-t) = t to well below double precision here.
    cb.log10_neg_ln_K3 = x_log / std::log(10.0) - std::log10(three_n2);
    cb.neg_ln_K3 = std::pow(10.0, cb.log10_neg_ln_K3);  // may underflow
  }
  cb.K3 = std::exp(-cb.neg_ln_K3);  // may round to 1; companions stay exact

  Rat bound = Rat(3) * Rat(n) * W;  // n * W * K1
  Rat eps_q = rat_from_double_exact(eps);
  if (eps_q >= bound) {
    cb.B = 0;
    return cb;
  }
  double L = rat_ln(bound / eps_q);  // > 0 exactly when eps < bound
  double log10_B = std::log10(L) - cb.log10_neg_ln_K3;
  if (log10_B > 18.5) {
    cb.B = std::numeric_limits<std::int64_t>::max();
  } else {
    cb.B = std::int64_t(std::ceil(L / cb.neg_ln_K3));
    if (cb.B < 1) cb.B = 1;
  }
  return cb;
}

}  // namespace stoptime
