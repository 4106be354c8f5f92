#include "stoptime/reductions.hpp"

#include <nlohmann/json.hpp>

#include "stoptime/analysis.hpp"
#include "stoptime/errors.hpp"
#include "stoptime/io.hpp"

namespace stoptime {
namespace {

using ojson = nlohmann::ordered_json;

Rat json_rat(const ojson& j, const std::string& where) {
  if (j.is_string()) {
    try {
      return rat_from_string(j.get<std::string>());
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  if (j.is_number_integer()) return Rat(Int(j.get<std::int64_t>()));
  throw ParseError(where + ": expected a rational string or integer");
}

Mat json_matrix(const ojson& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(where + ": expected a nonempty array of rows");
  }
  std::size_t n = j.size();
  Mat m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!j[r].is_array() || j[r].size() != n) {
      throw ParseError(where + ": row " + std::to_string(r) +
                       " must have " + std::to_string(n) + " entries");
    }
    for (std::size_t c = 0; c < n; ++c) {
      m.at(r, c) = json_rat(j[r][c], where + "[" + std::to_string(r) + "][" +
                                         std::to_string(c) + "]");
    }
  }
  return m;
}

ojson matrix_json(const Mat& m) {
  ojson rows = ojson::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < m.cols(); ++c) {
      row.push_back(rat_to_string(m.at(r, c)));
    }
    rows.push_back(row);
  }
  return rows;
}

ojson parse_path(const std::string& path) {
  ojson j;
  try {
    j = ojson::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(path + ": expected a JSON object");
  return j;
}

int sign_of(const Rat& q) { return q > 0 ? 1 : (q < 0 ? -1 : 0); }

}  // namespace

void ExactInstance::validate() const {
  chain.validate();
  if (T < 0) throw InvariantError("T must be >= 0");
}

void AgtInstance::validate() const {
  M.validate();
  if (z.size() != M.n()) {
    throw InvariantError("z must have one entry per vertex");
  }
  for (std::size_t v = 0; v < z.size(); ++v) {
    if (z[v] < 0 || z[v] > 2) {
      throw InvariantError("z[" + std::to_string(v) + "] outside {0,1,2}");
    }
  }
}

void MarkovReachInstance::validate() const {
  M.validate();
  if (M.n() < 2) throw InvariantError("need at least 2 vertices");
  if (r <= 0) throw InvariantError("r must be positive");
}

void PositivityInstance::validate() const {
  if (P.rows() != P.cols() || P.rows() == 0) {
    throw InvariantError("matrix must be square and nonempty");
  }
  for (std::size_t r = 0; r < P.rows(); ++r) {
    for (std::size_t c = 0; c < P.cols(); ++c) {
      if (!is_integer(P.at(r, c))) {
        throw InvariantError("entry (" + std::to_string(r) + "," +
                             std::to_string(c) + ") is not an integer");
      }
    }
  }
  if (target_i >= P.rows() || target_j >= P.cols()) {
    throw InvariantError("target entry out of range");
  }
}

StochasticMatrix normalize_no_incoming_initial(const StochasticMatrix& M) {
  M.validate();
  std::size_t n = M.n();
  bool incoming = false;
  for (std::size_t r = 0; r < n; ++r) {
    if (M.entries.at(r, 0) > 0) incoming = true;
  }
  if (!incoming) return M;

  StochasticMatrix out;
  out.entries = Mat(n + 1, n + 1);
  auto redirect = [&](std::size_t dst_row, std::size_t src_row) {
    for (std::size_t c = 0; c < n; ++c) {
      if (c == 0) {
        out.entries.at(dst_row, n) = M.entries.at(src_row, 0);
      } else {
        out.entries.at(dst_row, c) = M.entries.at(src_row, c);
      }
    }
  };
  for (std::size_t r = 0; r < n; ++r) redirect(r, r);
  redirect(n, 0);  // the copy behaves exactly like vertex 0
  out.validate();
  return out;
}

AgtReduction reduce_Agt_to_exact(const AgtInstance& inst) {
  inst.validate();

  StochasticMatrix M = normalize_no_incoming_initial(inst.M);
  std::vector<int> z = inst.z;
  if (M.n() != inst.M.n()) z.push_back(z[0]);
  std::size_t n = M.n();

  MarkovChain base;
  base.P = M;
  base.mu.assign(n, Rat(0));
  base.mu[0] = 1;
  base.w.assign(n, Rat(0));

  ClassDecomposition dec = decompose(base);
  for (const auto& rc : dec.classes) {
    if (rc.period != 1) {
      throw InvariantError("instance must be aperiodic");
    }
  }

  // Limit distribution from the point mass; the instance only reduces when
  // it puts mass exactly 1 on z.
  std::vector<Rat> reach = absorption_probs(base, dec);
  Rat limit_mass = 0;
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    Vec pi = steady_state(base, dec, c);
    for (std::size_t i = 0; i < dec.classes[c].vertices.size(); ++i) {
      limit_mass += reach[c] * pi[i] * Rat(z[dec.classes[c].vertices[i]]);
    }
  }
  if (limit_mass != 1) {
    throw InvariantError("limit mass on z is " + rat_to_string(limit_mass) +
                         ", not 1; the instance is decidable directly");
  }

  AgtReduction red;
  red.intermediate.P = M;
  red.intermediate.mu = base.mu;
  red.intermediate.w.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    Rat mz = 0;
    for (std::size_t u = 0; u < n; ++u) {
      mz += M.entries.at(v, u) * Rat(z[u]);
    }
    red.intermediate.w[v] = Rat(z[v]) - mz;
  }
  red.intermediate.validate();

  GainBias gb = gain_bias(red.intermediate, dec);
  for (const Rat& g : gb.gain) {
    if (g != 0) throw InvariantError("intermediate gain must vanish");
  }

  Rat a = Rat(z[0]) - 1;  // bias of the initial vertex, y = z - e
  MarkovChain lifted;
  lifted.P.entries = Mat(n + 1, n + 1);
  lifted.P.entries.at(0, 1) = 1;  // one step into the old initial vertex
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      lifted.P.entries.at(r + 1, c + 1) = M.entries.at(r, c);
    }
  }
  lifted.mu.assign(n + 1, Rat(0));
  lifted.mu[0] = 1;
  lifted.w.assign(n + 1, Rat(0));
  lifted.w[0] = a;
  lifted.w[1] = red.intermediate.w[0] - a;
  for (std::size_t v = 1; v < n; ++v) lifted.w[v + 1] = red.intermediate.w[v];
  lifted.validate();

  red.instance.chain = std::move(lifted);
  red.instance.T = 1;
  red.instance.theta = a;
  return red;
}

PositivityInstance reduce_markovreach_to_positivity(
    const MarkovReachInstance& inst) {
  inst.validate();
  std::size_t n = inst.M.n();
  Mat P(n + 3, n + 3);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) P.at(r, c) = inst.M.entries.at(r, c);
  }
  P.at(1, n + 2) = 1;               // only the target vertex feeds the sink
  for (std::size_t c = 0; c < n; ++c) P.at(n, c) = inst.M.entries.at(0, c);
  P.at(n, n + 1) = -inst.r;
  P.at(n + 1, n + 1) = 1;
  P.at(n + 1, n + 2) = 1;

  Int d = 1;
  for (std::size_t r = 0; r < n + 3; ++r) {
    for (std::size_t c = 0; c < n + 3; ++c) {
      mpz_lcm(d.get_mpz_t(), d.get_mpz_t(),
              P.at(r, c).get_den().get_mpz_t());
    }
  }
  PositivityInstance out;
  out.P = Mat(n + 3, n + 3);
  for (std::size_t r = 0; r < n + 3; ++r) {
    for (std::size_t c = 0; c < n + 3; ++c) {
      out.P.at(r, c) = P.at(r, c) * Rat(d);
    }
  }
  out.target_i = n;
  out.target_j = n + 2;
  out.validate();
  return out;
}

BiasEmbedding embed_bias(const MarkovChain& chain, const Vec& y) {
  chain.validate();
  if (y.size() != chain.n()) {
    throw PreconditionError("y must have one entry per vertex");
  }
  Rat max_abs = 0;
  for (const Rat& v : y) max_abs = std::max(max_abs, rat_abs(v));
  if (max_abs == 0) {
    // Nothing to embed; hand back the fixed instance whose power sequence
    // sits at 1 forever, so the answer is No.
    BiasEmbedding triv;
    triv.trivial = true;
    triv.chain.P.entries = Mat(1, 1);
    triv.chain.P.entries.at(0, 0) = 1;
    triv.chain.mu = {Rat(1)};
    triv.chain.w = {Rat(0)};
    triv.z = {1};
    triv.chain.validate();
    return triv;
  }

  std::size_t n = chain.n();
  BiasEmbedding emb;
  emb.chain.P.entries = Mat(2 * n, 2 * n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u = 0; u < n; ++u) {
      Rat p = chain.P.entries.at(v, u);
      if (p == 0) continue;
      Rat frac = rat_abs(y[u]) / max_abs;
      emb.chain.P.entries.at(v, u) = p * frac;
      emb.chain.P.entries.at(v, n + u) = p * (1 - frac);
      emb.chain.P.entries.at(n + v, u) = p * frac;
      emb.chain.P.entries.at(n + v, n + u) = p * (1 - frac);
    }
  }
  emb.chain.mu.assign(2 * n, Rat(0));
  for (std::size_t v = 0; v < n; ++v) emb.chain.mu[v] = chain.mu[v];
  emb.chain.w.assign(2 * n, Rat(0));
  emb.z.assign(2 * n, 1);
  for (std::size_t v = 0; v < n; ++v) {
    int s = sign_of(y[v]);
    emb.chain.w[v] = s;
    emb.z[v] = 1 + s;
  }
  for (std::size_t v = 0; v < n; ++v) {
    emb.chain.states.push_back(chain.state_name(v));
  }
  for (std::size_t v = 0; v < n; ++v) {
    emb.chain.states.push_back(chain.state_name(v) + "0");
  }
  emb.chain.validate();
  return emb;
}

std::optional<std::int64_t> brute_force_Agt(const AgtInstance& inst,
                                            std::int64_t H) {
  if (H < 1) throw PreconditionError("H must be >= 1");
  inst.validate();
  std::size_t n = inst.M.n();
  Vec row(n, Rat(0));
  row[0] = 1;
  for (std::int64_t t = 1; t <= H; ++t) {
    row = vec_mat(row, inst.M.entries);
    Rat val = 0;
    for (std::size_t v = 0; v < n; ++v) val += row[v] * Rat(inst.z[v]);
    if (val > 1) return t;
  }
  return std::nullopt;
}

AgtInstance load_agt_instance(const std::string& path) {
  ojson j = parse_path(path);
  AgtInstance inst;
  if (!j.contains("matrix")) throw ParseError(path + ": missing \"matrix\"");
  inst.M.entries = json_matrix(j["matrix"], "matrix");
  if (!j.contains("z") || !j["z"].is_array() ||
      j["z"].size() != inst.M.n()) {
    throw ParseError(path + ": \"z\" must list one integer per vertex");
  }
  for (const auto& e : j["z"]) {
    if (!e.is_number_integer()) throw ParseError("z entries must be integers");
    inst.z.push_back(e.get<int>());
  }
  inst.validate();
  return inst;
}

void save_agt_instance(const AgtInstance& inst, const std::string& path) {
  ojson j;
  j["matrix"] = matrix_json(inst.M.entries);
  j["z"] = inst.z;
  write_text_file(path, j.dump(2) + "\n");
}

MarkovReachInstance load_markovreach_instance(const std::string& path) {
  ojson j = parse_path(path);
  MarkovReachInstance inst;
  if (!j.contains("matrix")) throw ParseError(path + ": missing \"matrix\"");
  inst.M.entries = json_matrix(j["matrix"], "matrix");
  if (!j.contains("r")) throw ParseError(path + ": missing \"r\"");
  inst.r = json_rat(j["r"], "r");
  inst.validate();
  return inst;
}

void save_markovreach_instance(const MarkovReachInstance& inst,
                               const std::string& path) {
  ojson j;
  j["matrix"] = matrix_json(inst.M.entries);
  j["r"] = rat_to_string(inst.r);
  write_text_file(path, j.dump(2) + "\n");
}

void save_positivity_instance(const PositivityInstance& inst,
                              const std::string& path) {
  ojson j;
  ojson rows = ojson::array();
  for (std::size_t r = 0; r < inst.P.rows(); ++r) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < inst.P.cols(); ++c) {
      const Int& num = inst.P.at(r, c).get_num();
      if (num.fits_slong_p()) {
        row.push_back(std::int64_t(num.get_si()));
      } else {
        row.push_back(num.get_str());
      }
    }
    rows.push_back(row);
  }
  j["matrix"] = rows;
  j["target"] = ojson::array({inst.target_i, inst.target_j});
  write_text_file(path, j.dump(2) + "\n");
}

PositivityInstance load_positivity_instance(const std::string& path) {
  ojson j = parse_path(path);
  PositivityInstance inst;
  if (!j.contains("matrix")) throw ParseError(path + ": missing \"matrix\"");
  const ojson& rows = j["matrix"];
  if (!rows.is_array() || rows.empty()) {
    throw ParseError(path + ": \"matrix\" must be a nonempty array");
  }
  std::size_t n = rows.size();
  inst.P = Mat(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!rows[r].is_array() || rows[r].size() != n) {
      throw ParseError(path + ": matrix row " + std::to_string(r) +
                       " has the wrong length");
    }
    for (std::size_t c = 0; c < n; ++c) {
      const ojson& e = rows[r][c];
      if (e.is_number_integer()) {
        inst.P.at(r, c) = Rat(Int(e.get<std::int64_t>()));
      } else if (e.is_string()) {
        inst.P.at(r, c) = Rat(Int(e.get<std::string>()));
      } else {
        throw ParseError(path + ": matrix entries must be integers");
      }
    }
  }
  if (!j.contains("target") || !j["target"].is_array() ||
      j["target"].size() != 2) {
    throw ParseError(path + ": \"target\" must be [i, j]");
  }
  inst.target_i = j["target"][0].get<std::size_t>();
  inst.target_j = j["target"][1].get<std::size_t>();
  inst.validate();
  return inst;
}

void save_exact_instance(const ExactInstance& inst, const std::string& path) {
  ojson j = ojson::parse(chain_to_json(inst.chain));
  j["T"] = rat_to_string(inst.T);
  j["theta"] = rat_to_string(inst.theta);
  write_text_file(path, j.dump(2) + "\n");
}

ExactInstance load_exact_instance(const std::string& path) {
  ExactInstance inst;
  inst.chain = load_chain(path);
  ojson j = parse_path(path);
  if (!j.contains("T") || !j.contains("theta")) {
    throw ParseError(path + ": missing \"T\" or \"theta\"");
  }
  inst.T = json_rat(j["T"], "T");
  inst.theta = json_rat(j["theta"], "theta");
  inst.validate();
  return inst;
}

}  // namespace stoptime
