#include "stoptime/decide.hpp"

#include <algorithm>
#include <vector>

#include "stoptime/analysis.hpp"
#include "stoptime/errors.hpp"
#include "stoptime/stopvalue.hpp"

namespace stoptime {
namespace {

// value = b*t + icept, the bottom line rewritten around t = 0
struct LineForm {
  Rat b;
  Rat icept;
  Rat at(const Int& t) const { return b * Rat(t) + icept; }
};

Rat l1_distance(const Vec& a, const Vec& b) {
  Rat e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e += rat_abs(a[i] - b[i]);
  return e;
}

// Scans forward from t_start for the first exact crossing below the line.
// Callers only enter when the crossing is guaranteed to exist, so running
// into the step cap is a budget failure, not a No.
Verdict forward_search(const MarkovChain& chain, const Int& t_start,
                       const LineForm& line) {
  const std::int64_t cap = step_cap();
  Vec row = chain.mu;
  Rat u = 0;
  for (std::int64_t t = 0;; ++t) {
    u += dot(row, chain.w);
    if (Int(t) >= t_start && u < line.at(Int(t))) {
      return Verdict{Answer::Yes, Int(t), std::nullopt};
    }
    if (t >= cap) {
      throw BudgetExceeded(
          "a crossing below the bottom line is guaranteed but none appeared "
          "within the step cap (checked through t = " +
          std::to_string(t) + ")");
    }
    row = vec_mat(row, chain.P.entries);
  }
}

// Exact No certificate. Checks every integer t >= t_start against the line
// and stops once the remaining deviation from the per-residue asymptotes,
// bounded by the l1 distance of the current rows from their limits, is too
// small to ever reach down to the line again.
Verdict certify_no(const MarkovChain& chain, const PeriodicData& pd,
                   const Int& t_start, const LineForm& line) {
  const std::int64_t cap = step_cap();
  const std::size_t d = std::size_t(pd.d);

  MarkovChain nchain;
  nchain.P = pd.N;
  nchain.mu = chain.mu;
  nchain.w = pd.w_hat;
  ClassDecomposition ndec = decompose(nchain);
  Vec rho0 = limit_row(nchain, ndec);

  // rho_mod[j] is the limit of the row mu M^r along the residue r = j mod d.
  std::vector<Vec> rho_mod(d);
  rho_mod[0] = rho0;
  for (std::size_t j = 1; j < d; ++j) {
    rho_mod[j] = vec_mat(rho_mod[j - 1], chain.P.entries);
  }

  Rat y_hat = 0;
  for (const Rat& v : pd.hat.bias) y_hat = std::max(y_hat, rat_abs(v));

  // Latest exact row distance per residue; future rows in the same residue
  // can only be closer to the limit.
  std::vector<Rat> dist(d);
  std::vector<bool> dist_set(d, false);

  Vec row = chain.mu;
  Rat u = 0;
  for (std::int64_t t = 0;; ++t) {
    u += dot(row, chain.w);
    Int ti(t);
    if (ti >= t_start && u < line.at(ti)) {
      return Verdict{Answer::Yes, ti, std::nullopt};
    }

    row = vec_mat(row, chain.P.entries);
    std::size_t r_mod = std::size_t((t + 1) % std::int64_t(d));
    dist[r_mod] = l1_distance(row, rho_mod[r_mod]);
    dist_set[r_mod] = true;

    if (ti >= t_start - 1) {
      bool certified = std::find(dist_set.begin(), dist_set.end(), false) ==
                       dist_set.end();
      for (std::size_t k = 0; certified && k < d; ++k) {
        // first t' > t in residue k, then the deviation bound at t' uses
        // the row t' + 1
        std::int64_t delta = (std::int64_t(k) - (t + 1)) % std::int64_t(d);
        if (delta < 0) delta += std::int64_t(d);
        Int tp = Int(t + 1 + delta);
        Rat gap = (pd.s * Rat(tp) + pd.s + pd.c[k]) - line.at(tp);
        if (!(gap > dist[(k + 1) % d] * y_hat)) certified = false;
      }
      if (certified) return Verdict{Answer::No, ti, std::nullopt};
    }

    if (t >= cap) {
      throw BudgetExceeded(
          "no crossing found but the tail certificate did not close within "
          "the step cap (every t <= " +
          std::to_string(t) + " is exactly above the line)");
    }
  }
}

// Positivity-style wrapper around the doubled-chain embedding: the target
// entry of Q^t is a positive multiple of mu' M'^{t-1} (z - e)^T, so the
// embedded question "is mu' M'^s z^T ever above 1 for s >= 1" becomes
// "is the target entry ever positive".
PositivityInstance positivity_wrapper(const BiasEmbedding& emb) {
  std::size_t n = emb.chain.n();
  Vec first = vec_mat(emb.chain.mu, emb.chain.P.entries);
  Mat Q(n + 2, n + 2);
  for (std::size_t u = 0; u < n; ++u) Q.at(0, 1 + u) = first[u];
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u = 0; u < n; ++u) {
      Q.at(1 + v, 1 + u) = emb.chain.P.entries.at(v, u);
    }
    Q.at(1 + v, n + 1) = Rat(emb.z[v] - 1);
  }

  Int den = 1;
  for (std::size_t r = 0; r < n + 2; ++r) {
    for (std::size_t c = 0; c < n + 2; ++c) {
      mpz_lcm(den.get_mpz_t(), den.get_mpz_t(),
              Q.at(r, c).get_den().get_mpz_t());
    }
  }
  PositivityInstance out;
  out.P = Mat(n + 2, n + 2);
  for (std::size_t r = 0; r < n + 2; ++r) {
    for (std::size_t c = 0; c < n + 2; ++c) {
      out.P.at(r, c) = Q.at(r, c) * Rat(den);
    }
  }
  out.target_i = 0;
  out.target_j = n + 1;
  out.validate();
  return out;
}

}  // namespace

std::string answer_name(Answer a) {
  switch (a) {
    case Answer::Yes:
      return "Yes";
    case Answer::No:
      return "No";
    case Answer::Unknown:
      return "Unknown";
  }
  throw InvariantError("unreachable answer");
}

BottomLine bottom_line(const MarkovChain& chain, const Rat& T,
                       const Rat& theta) {
  if (!(T > 0)) throw PreconditionError("T must be positive");
  Int last = is_integer(T) ? Int(T.get_num() - 1) : floor_rat(T);
  if (last > step_cap()) {
    throw BudgetExceeded("bottom line needs " + last.get_str() +
                         " utility terms, above the step cap");
  }
  std::vector<Rat> u = utility_prefix(chain, std::int64_t(last.get_si()));
  BottomLine bl;
  bool set = false;
  for (std::size_t t = 0; t < u.size(); ++t) {
    Rat cand = (u[t] - theta) / (Rat(std::int64_t(t)) - T);
    if (!set || cand > bl.b) {
      bl.b = cand;
      bl.touch_t1 = std::int64_t(t);
      set = true;
    }
  }
  return bl;
}

Verdict exact_decide(const ExactInstance& inst, std::int64_t unknown_horizon) {
  inst.validate();
  if (unknown_horizon < 0) {
    throw PreconditionError("unknown_horizon must be >= 0");
  }
  const MarkovChain& chain = inst.chain;
  const Rat& T = inst.T;
  const Rat& theta = inst.theta;

  if (T == 0) {
    Rat u0 = dot(chain.mu, chain.w);
    return u0 < theta ? Verdict{Answer::Yes, Int(0), std::nullopt}
                      : Verdict{Answer::No, Int(0), std::nullopt};
  }

  const bool T_integral = is_integer(T);
  if (T_integral) {
    Int Ti = T.get_num();
    if (Ti > step_cap()) {
      throw BudgetExceeded("point-mass check at T = " + Ti.get_str() +
                           " is above the step cap");
    }
    std::vector<Rat> u = utility_prefix(chain, std::int64_t(Ti.get_si()));
    if (u.back() < theta) return Verdict{Answer::Yes, Ti, std::nullopt};
  }

  BottomLine bl = bottom_line(chain, T, theta);
  LineForm line{bl.b, theta - bl.b * T};
  Int t_start = T_integral ? Int(T.get_num() + 1) : ceil_rat(T);

  ClassDecomposition dec = decompose(chain);
  PeriodicData pd = periodic_data(chain, dec);

  if (bl.b > pd.s) return forward_search(chain, t_start, line);
  if (bl.b < pd.s) return certify_no(chain, pd, t_start, line);

  // Equal slopes: compare the line against each residue's asymptote, all of
  // which share the slope. Written as value-at-t = s*t + intercept, the
  // line's intercept is theta - s*T and residue k's is s + c_k.
  Rat beta = theta - pd.s * T;
  bool any_below = false;
  std::vector<std::size_t> coincident;
  for (std::size_t k = 0; k < pd.c.size(); ++k) {
    Rat a_k = pd.s + pd.c[k];
    if (a_k < beta) any_below = true;
    if (a_k == beta) coincident.push_back(k);
  }
  if (any_below) return forward_search(chain, t_start, line);
  if (coincident.empty()) return certify_no(chain, pd, t_start, line);

  Rat y_hat = 0;
  for (const Rat& v : pd.hat.bias) y_hat = std::max(y_hat, rat_abs(v));
  if (y_hat == 0) {
    // The utilities sit exactly on their asymptotes, and no asymptote dips
    // below the line, so nothing past T can cross.
    Int h = t_start - 1;
    return Verdict{Answer::No, h, std::nullopt};
  }

  // Semi-decision: exact search first. The horizon always covers one full
  // period past t_start so that every residue's zeroth deviation term gets
  // checked before the residual (which only encodes the later terms).
  Int search_end = t_start + Int(pd.d);
  if (Int(unknown_horizon) > search_end) search_end = Int(unknown_horizon);
  if (search_end > step_cap()) {
    throw BudgetExceeded("unknown-case search horizon " +
                         search_end.get_str() + " is above the step cap");
  }
  {
    Vec row = chain.mu;
    Rat u = 0;
    for (Int t = 0; t <= search_end; ++t) {
      u += dot(row, chain.w);
      if (t >= t_start && u < line.at(t)) {
        return Verdict{Answer::Yes, t, std::nullopt};
      }
      row = vec_mat(row, chain.P.entries);
    }
  }

  MarkovChain residue_chain;
  residue_chain.P = pd.N;
  residue_chain.mu = pd.nu[coincident.front()];
  residue_chain.w.assign(chain.n(), Rat(0));
  BiasEmbedding emb = embed_bias(residue_chain, pd.hat.bias);
  Verdict v;
  v.answer = Answer::Unknown;
  v.witness = search_end;
  v.residual = positivity_wrapper(emb);
  return v;
}

}  // namespace stoptime
