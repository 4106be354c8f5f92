#include "stoptime/cli.hpp"

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stoptime/analysis.hpp"
#include "stoptime/decide.hpp"
#include "stoptime/errors.hpp"
#include "stoptime/io.hpp"
#include "stoptime/mdpvalue.hpp"
#include "stoptime/model.hpp"
#include "stoptime/reductions.hpp"
#include "stoptime/stopvalue.hpp"

namespace stoptime {
namespace {

using ojson = nlohmann::ordered_json;

ojson rat_vec(const Vec& v) {
  ojson a = ojson::array();
  for (const Rat& q : v) a.push_back(rat_to_string(q));
  return a;
}

ojson dec_vec(const Vec& v) {
  ojson a = ojson::array();
  for (const Rat& q : v) a.push_back(to_double(q));
  return a;
}

Rat opt_rat(const std::string& s, const char* what) {
  try {
    return rat_from_string(s);
  } catch (const Error&) {
    throw ParseError(std::string(what) + ": not a rational: " + s);
  }
}

const char* witness_kind(StopWitness::Kind k) {
  switch (k) {
    case StopWitness::Kind::PointMass:
      return "PointMass";
    case StopWitness::Kind::Chord:
      return "Chord";
    case StopWitness::Kind::Tail:
      return "Tail";
  }
  return "?";
}

ojson bracket_json(const ValueBracket& b) {
  ojson o;
  o["estimate"] = b.estimate;
  o["lower"] = b.lower;
  o["upper"] = b.upper;
  o["method"] = method_name(b.method);
  if (b.exact) o["exact"] = rat_to_string(*b.exact);
  return o;
}

void emit(const ojson& o, std::ostream& out, const std::string& out_path) {
  std::string text = o.dump(2);
  text.push_back('\n');
  out << text;
  if (!out_path.empty()) write_text_file(out_path, text);
}

std::string csv_num(const Rat& q) {
  std::ostringstream os;
  os << std::setprecision(17) << to_double(q);
  return os.str();
}

Rat rat_of(int num, int den) {
  Rat q(num, den);
  q.canonicalize();
  return q;
}

MarkovChain random_chain(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) {
    return int(lo + std::int64_t(rng() % std::uint64_t(hi - lo + 1)));
  };
  MarkovChain c;
  c.P.entries = Mat(std::size_t(n), std::size_t(n));
  for (int v = 0; v < n; ++v) {
    int den = pick(2, 8);
    int parts = pick(1, std::min(3, n));
    std::vector<int> units(std::size_t(parts), 1);
    for (int u = parts; u < den; ++u) units[std::size_t(pick(0, parts - 1))]++;
    for (int i = 0; i < parts; ++i) {
      int target = pick(0, n - 1);
      c.P.entries.at(std::size_t(v), std::size_t(target)) +=
          rat_of(units[std::size_t(i)], den);
    }
  }
  c.mu.assign(std::size_t(n), Rat(0));
  c.mu[0] = 1;
  for (int v = 0; v < n; ++v) c.w.push_back(rat_of(pick(-5, 5), pick(1, 3)));
  c.validate();
  return c;
}

Mdp random_mdp(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) {
    return int(lo + std::int64_t(rng() % std::uint64_t(hi - lo + 1)));
  };
  Mdp m;
  m.actions = {"a", "b", "c"};
  for (int v = 0; v < n; ++v) {
    m.states.push_back("v" + std::to_string(v));
    m.w.push_back(rat_of(pick(-5, 5), pick(1, 3)));
    std::map<int, Vec> rows;
    int na = pick(1, 3);
    for (int a = 0; a < na; ++a) {
      Vec r(std::size_t(n), Rat(0));
      int den = pick(2, 8);
      int parts = pick(1, std::min(3, n));
      std::vector<int> units(std::size_t(parts), 1);
      for (int u = parts; u < den; ++u) {
        units[std::size_t(pick(0, parts - 1))]++;
      }
      for (int i = 0; i < parts; ++i) {
        r[std::size_t(pick(0, n - 1))] += rat_of(units[std::size_t(i)], den);
      }
      rows[a] = std::move(r);
    }
    m.theta.push_back(std::move(rows));
  }
  m.mu.assign(std::size_t(n), Rat(0));
  m.mu[0] = 1;
  m.validate();
  return m;
}

struct Args {
  std::string model, out, sigma_out, residual_out, emit_sequence, kind;
  std::string T = "1", theta = "0", tau = "0", alpha = "1/4";
  double eps = 1e-6;
  std::int64_t horizon = -1, unknown_horizon = 10000;
  std::int64_t t_cap = 24, restarts = 8;
  std::uint64_t seed = 1;
  int n = 3;
};

int dispatch(CLI::App& app, const Args& a, std::ostream& out) {
  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  if (name == "analyze") {
    MarkovChain chain = load_chain(a.model);
    ClassDecomposition dec = decompose(chain);
    GainBias gb = gain_bias(chain, dec);
    Asymptote asy = asymptote(chain);
    ojson o;
    o["n"] = chain.n();
    ojson classes = ojson::array();
    for (const RecurrentClass& c : dec.classes) {
      classes.push_back({{"vertices", c.vertices}, {"period", c.period}});
    }
    o["classes"] = classes;
    o["transient"] = dec.transient;
    o["period"] = dec.period_lcm;
    o["gain"] = dec_vec(gb.gain);
    o["gain_exact"] = rat_vec(gb.gain);
    o["bias"] = dec_vec(gb.bias);
    o["bias_exact"] = rat_vec(gb.bias);
    ojson asym;
    asym["slope"] = to_double(asy.slope);
    asym["slope_exact"] = rat_to_string(asy.slope);
    asym["intercepts"] = dec_vec(asy.intercepts);
    asym["intercepts_exact"] = rat_vec(asy.intercepts);
    o["asymptote"] = asym;
    emit(o, out, a.out);
    return 0;
  }

  if (name == "value") {
    MarkovChain chain = load_chain(a.model);
    Rat T = opt_rat(a.T, "--T");
    ApproxResult ar = approx_value(chain, T, a.eps);
    ojson o = bracket_json(ar.bracket);
    o["witness"] = {{"kind", witness_kind(ar.inner.witness.kind)},
                    {"t1", ar.inner.witness.t1},
                    {"t2", ar.inner.witness.t2}};
    o["attained"] = ar.inner.attained;
    o["switch_index"] = ar.switch_index;
    if (!a.emit_sequence.empty()) {
      std::int64_t rows = a.horizon >= 0
                              ? a.horizon
                              : ar.switch_index + 2 * ar.seq.cycle_len();
      std::vector<Rat> u = utility_prefix(chain, rows);
      std::ostringstream csv;
      csv << "t,u_exact,u_prime\n";
      for (std::int64_t t = 0; t <= rows; ++t) {
        csv << t << "," << csv_num(u[std::size_t(t)]) << ","
            << csv_num(ar.seq.u(Int(t))) << "\n";
      }
      write_text_file(a.emit_sequence, csv.str());
      o["sequence_path"] = a.emit_sequence;
    }
    emit(o, out, a.out);
    return 0;
  }

  if (name == "decide") {
    ExactInstance inst;
    if (sub->count("--T") && sub->count("--theta")) {
      inst.chain = load_chain(a.model);
      inst.T = opt_rat(a.T, "--T");
      inst.theta = opt_rat(a.theta, "--theta");
    } else {
      inst = load_exact_instance(a.model);
      if (sub->count("--T")) inst.T = opt_rat(a.T, "--T");
      if (sub->count("--theta")) inst.theta = opt_rat(a.theta, "--theta");
    }
    Verdict v = exact_decide(inst, a.unknown_horizon);
    ojson o;
    o["answer"] = answer_name(v.answer);
    if (v.witness) {
      if (v.witness->fits_slong_p()) {
        o["witness"] = v.witness->get_si();
      } else {
        o["witness"] = v.witness->get_str();
      }
    }
    if (v.residual) {
      std::string path =
          a.residual_out.empty() ? "residual.json" : a.residual_out;
      save_positivity_instance(*v.residual, path);
      o["residual_path"] = path;
    }
    emit(o, out, a.out);
    return 0;
  }

  if (name == "reduce") {
    const CLI::App* which = sub->get_subcommands().front();
    if (which->get_name() == "agt-to-exact") {
      AgtInstance inst = load_agt_instance(a.model);
      AgtReduction red = reduce_Agt_to_exact(inst);
      save_exact_instance(red.instance, a.out);
      ojson o;
      o["out"] = a.out;
      o["n"] = red.instance.chain.n();
      o["T"] = rat_to_string(red.instance.T);
      o["theta"] = rat_to_string(red.instance.theta);
      emit(o, out, "");
      return 0;
    }
    MarkovReachInstance inst = load_markovreach_instance(a.model);
    PositivityInstance pos = reduce_markovreach_to_positivity(inst);
    save_positivity_instance(pos, a.out);
    ojson o;
    o["out"] = a.out;
    o["n"] = pos.P.rows();
    o["target"] = {pos.target_i, pos.target_j};
    emit(o, out, "");
    return 0;
  }

  if (name == "mdp") {
    const CLI::App* which = sub->get_subcommands().front();
    const std::string op = which->get_name();
    Mdp mdp = load_mdp(a.model);
    if (op == "mec") {
      MecDecomposition dec = mec_decompose(mdp);
      ojson o;
      ojson mecs = ojson::array();
      for (const EndComponent& ec : dec.mecs) {
        ojson acts = ojson::array();
        for (const auto& as : ec.actions) {
          ojson row = ojson::array();
          for (int aa : as) row.push_back(mdp.actions[std::size_t(aa)]);
          acts.push_back(row);
        }
        mecs.push_back({{"vertices", ec.vertices}, {"actions", acts}});
      }
      o["mecs"] = mecs;
      o["rest"] = dec.rest;
      emit(o, out, a.out);
      return 0;
    }
    if (op == "mp") {
      MeanPayoffSolution mp = mean_payoff(mdp);
      ojson o;
      o["value"] = dec_vec(mp.value);
      o["value_exact"] = rat_vec(mp.value);
      ojson pol = ojson::array();
      for (int aa : mp.policy) pol.push_back(mdp.actions[std::size_t(aa)]);
      o["policy"] = pol;
      o["per_ec_gain"] = dec_vec(mp.per_ec_gain);
      o["per_ec_gain_exact"] = rat_vec(mp.per_ec_gain);
      emit(o, out, a.out);
      return 0;
    }
    if (op == "value") {
      EstimateOpts opts;
      opts.t_cap = a.t_cap;
      opts.restarts = int(a.restarts);
      opts.seed = a.seed;
      MarkovStrategy best;
      Rat T = opt_rat(a.T, "--T");
      ValueBracket vb = estimate_value(mdp, T, a.eps, opts, &best);
      ojson o = bracket_json(vb);
      RewardBounds rb = reward_bounds(mdp, T, a.eps);
      o["log10_t_star"] = rb.log10_t_star;
      o["upper_certified"] = std::isfinite(vb.upper);
      if (!a.sigma_out.empty()) {
        save_strategy(best, mdp, a.sigma_out);
        o["sigma_path"] = a.sigma_out;
      }
      emit(o, out, a.out);
      return 0;
    }
    // etr
    std::int64_t horizon = a.horizon >= 0 ? a.horizon : 8;
    std::string formula = export_etr(mdp, opt_rat(a.T, "--T"), horizon,
                                     opt_rat(a.tau, "--tau"));
    write_text_file(a.out, formula);
    ojson o;
    o["out"] = a.out;
    o["bytes"] = formula.size();
    emit(o, out, "");
    return 0;
  }

  // gen
  const CLI::App* which = sub->get_subcommands().front();
  const std::string what = which->get_name();
  ojson o;
  if (what == "fig5") {
    MarkovChain c = lower_bound_family(a.n, opt_rat(a.alpha, "--alpha"));
    save_chain(c, a.out);
    o["kind"] = "chain";
    o["n"] = c.n();
  } else if (what == "fig6") {
    std::int64_t horizon = a.horizon >= 0 ? a.horizon : 61;
    Fig6 fig = fig6_example(horizon);
    save_mdp(fig.mdp, a.out);
    o["kind"] = "mdp";
    o["n"] = fig.mdp.n();
    if (!a.sigma_out.empty()) {
      save_strategy(fig.sigma_opt, fig.mdp, a.sigma_out);
      o["sigma_path"] = a.sigma_out;
    }
  } else if (what == "fig7") {
    Mdp m = fig7_example();
    save_mdp(m, a.out);
    o["kind"] = "mdp";
    o["n"] = m.n();
  } else {
    if (a.kind == "mdp") {
      Mdp m = random_mdp(a.seed, a.n);
      save_mdp(m, a.out);
      o["kind"] = "mdp";
      o["n"] = m.n();
    } else if (a.kind == "chain") {
      MarkovChain c = random_chain(a.seed, a.n);
      save_chain(c, a.out);
      o["kind"] = "chain";
      o["n"] = c.n();
    } else {
      throw UsageError("--kind must be chain or mdp");
    }
  }
  o["out"] = a.out;
  emit(o, out, "");
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Exact and certified stopping-value computations"};
  app.require_subcommand(1);
  Args a;

  auto add_model = [&](CLI::App* s) {
    s->add_option("--model", a.model, "input model file")->required();
  };
  auto add_out = [&](CLI::App* s, bool required) {
    auto* opt = s->add_option("--out", a.out, "output file");
    if (required) opt->required();
  };

  CLI::App* analyze = app.add_subcommand(
      "analyze", "recurrence structure, gain/bias, asymptote");
  add_model(analyze);
  add_out(analyze, false);

  CLI::App* value = app.add_subcommand(
      "value", "certified approximation of the stopping value");
  add_model(value);
  value->add_option("--T", a.T, "expected stopping time (rational)");
  value->add_option("--eps", a.eps, "certification tolerance");
  value->add_option("--emit-sequence", a.emit_sequence,
                    "write the exact and switched utility sequences as CSV");
  value->add_option("--horizon", a.horizon, "CSV row count override");
  add_out(value, false);

  CLI::App* decide = app.add_subcommand(
      "decide", "exact threshold comparison val < theta");
  add_model(decide);
  decide->add_option("--T", a.T, "expected stopping time (rational)");
  decide->add_option("--theta", a.theta, "threshold (rational)");
  decide->add_option("--unknown-horizon", a.unknown_horizon,
                     "search horizon before giving up with Unknown");
  decide->add_option("--residual-out", a.residual_out,
                     "where to write the residual instance if Unknown");
  add_out(decide, false);

  CLI::App* reduce =
      app.add_subcommand("reduce", "instance-to-instance reductions");
  reduce->require_subcommand(1);
  for (const char* rname : {"agt-to-exact", "mr-to-pos"}) {
    CLI::App* r = reduce->add_subcommand(rname, "");
    add_model(r);
    add_out(r, true);
  }

  CLI::App* mdp = app.add_subcommand("mdp", "controlled-model operations");
  mdp->require_subcommand(1);
  {
    CLI::App* m = mdp->add_subcommand("mec", "maximal end components");
    add_model(m);
    add_out(m, false);
  }
  {
    CLI::App* m = mdp->add_subcommand("mp", "optimal mean payoff");
    add_model(m);
    add_out(m, false);
  }
  {
    CLI::App* m = mdp->add_subcommand("value", "optimized value lower bound");
    add_model(m);
    m->add_option("--T", a.T, "expected stopping time (rational)");
    m->add_option("--eps", a.eps, "evaluation tolerance");
    m->add_option("--t-cap", a.t_cap, "strategy decision horizon");
    m->add_option("--restarts", a.restarts, "optimizer restarts");
    m->add_option("--seed", a.seed, "optimizer seed");
    m->add_option("--sigma-out", a.sigma_out, "write the best strategy");
    add_out(m, false);
  }
  {
    CLI::App* m = mdp->add_subcommand("etr", "SMT-LIB existence formula");
    add_model(m);
    m->add_option("--T", a.T, "expected stopping time (rational)");
    m->add_option("--tau", a.tau, "value threshold (rational)");
    m->add_option("--horizon", a.horizon, "decision horizon (default 8)");
    add_out(m, true);
  }

  CLI::App* gen = app.add_subcommand("gen", "model generators");
  gen->require_subcommand(1);
  {
    CLI::App* g = gen->add_subcommand("fig5", "slow-mixing chain family");
    g->add_option("--n", a.n, "spine length");
    g->add_option("--alpha", a.alpha, "advance probability (rational)");
    add_out(g, true);
  }
  {
    CLI::App* g = gen->add_subcommand("fig6", "matching-schedule MDP");
    g->add_option("--horizon", a.horizon, "strategy horizon (default 61)");
    g->add_option("--sigma-out", a.sigma_out, "write the zero-value strategy");
    add_out(g, true);
  }
  {
    CLI::App* g = gen->add_subcommand("fig7", "four-vertex mean-payoff MDP");
    add_out(g, true);
  }
  {
    CLI::App* g = gen->add_subcommand("random", "seeded random model");
    g->add_option("--kind", a.kind, "chain or mdp")->required();
    g->add_option("--n", a.n, "vertex count");
    g->add_option("--seed", a.seed, "generator seed");
    add_out(g, true);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    return dispatch(app, a, out);
  } catch (const BudgetExceeded& e) {
    err << "error[" << e.code() << "]: " << e.what() << "\n";
    return 3;
  } catch (const PeriodTooLarge& e) {
    err << "error[" << e.code() << "]: " << e.what() << "\n";
    return 3;
  } catch (const CycleGuard& e) {
    err << "error[" << e.code() << "]: " << e.what() << "\n";
    return 3;
  } catch (const UsageError& e) {
    err << "error[" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error[" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace stoptime
