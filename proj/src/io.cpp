#include "stoptime/io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stoptime/errors.hpp"

namespace stoptime {
namespace {

// Insertion-ordered JSON keeps emitted key order stable so identical inputs
// reserialize byte-identically.
using ojson = nlohmann::ordered_json;

Rat parse_rat(const ojson& j, const std::string& where) {
  if (j.is_string()) {
    try {
      return rat_from_string(j.get<std::string>());
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  if (j.is_number_integer()) return Rat(Int(j.get<std::int64_t>()));
  if (j.is_number()) {
    throw ParseError(where +
                     ": non-integer JSON number; quote it as a decimal or "
                     "\"num/den\" string");
  }
  throw ParseError(where + ": expected a rational string");
}

Vec parse_vec(const ojson& j, std::size_t n, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  if (j.size() != n) {
    throw ParseError(where + ": expected " + std::to_string(n) +
                     " entries, found " + std::to_string(j.size()));
  }
  Vec out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(parse_rat(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

ojson parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

const ojson& field(const ojson& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(ctx + ": missing \"" + key + "\"");
  return *it;
}

std::vector<std::string> parse_names(const ojson& j, const std::string& ctx) {
  if (!j.is_array()) throw ParseError(ctx + ": expected an array of names");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ParseError(ctx + ": names must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

ojson rat_json(const Rat& q) { return ojson(rat_to_string(q)); }

ojson vec_json(const Vec& v) {
  ojson a = ojson::array();
  for (const auto& q : v) a.push_back(rat_json(q));
  return a;
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

}  // namespace

MarkovChain load_chain(const std::string& path) {
  ojson j = parse_file(path);
  if (!j.is_object()) throw ParseError(path + ": expected a JSON object");

  const ojson& matrix = field(j, "matrix", path);
  if (!matrix.is_array() || matrix.empty()) {
    throw ParseError(path + ": \"matrix\" must be a nonempty array of rows");
  }
  std::size_t n = matrix.size();

  MarkovChain chain;
  chain.P.entries = Mat(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    Vec row = parse_vec(matrix[r], n, "matrix[" + std::to_string(r) + "]");
    for (std::size_t c = 0; c < n; ++c) chain.P.entries.at(r, c) = row[c];
  }
  chain.mu = parse_vec(field(j, "initial", path), n, "initial");
  chain.w = parse_vec(field(j, "weights", path), n, "weights");
  if (j.contains("states")) {
    chain.states = parse_names(j["states"], "states");
    if (chain.states.size() != n) {
      throw ParseError("states: expected " + std::to_string(n) + " names");
    }
  }
  chain.validate();
  return chain;
}

Mdp load_mdp(const std::string& path) {
  ojson j = parse_file(path);
  if (!j.is_object()) throw ParseError(path + ": expected a JSON object");

  Mdp mdp;
  mdp.states = parse_names(field(j, "states", path), "states");
  mdp.actions = parse_names(field(j, "actions", path), "actions");
  if (mdp.states.empty()) throw ParseError(path + ": \"states\" is empty");
  std::size_t n = mdp.states.size();

  std::map<std::string, int> action_index;
  for (std::size_t a = 0; a < mdp.actions.size(); ++a) {
    if (!action_index.emplace(mdp.actions[a], int(a)).second) {
      throw ParseError("actions: duplicate name \"" + mdp.actions[a] + "\"");
    }
  }
  std::map<std::string, std::size_t> state_index;
  for (std::size_t v = 0; v < n; ++v) {
    if (!state_index.emplace(mdp.states[v], v).second) {
      throw ParseError("states: duplicate name \"" + mdp.states[v] + "\"");
    }
  }

  const ojson& trans = field(j, "transitions", path);
  if (!trans.is_object()) {
    throw ParseError("transitions: expected an object keyed by state name");
  }
  mdp.theta.assign(n, {});
  for (auto it = trans.begin(); it != trans.end(); ++it) {
    auto sit = state_index.find(it.key());
    if (sit == state_index.end()) {
      throw ParseError("transitions: unknown state \"" + it.key() + "\"");
    }
    if (!it.value().is_object()) {
      throw ParseError("transitions[" + it.key() +
                       "]: expected an object keyed by action name");
    }
    for (auto at = it.value().begin(); at != it.value().end(); ++at) {
      auto ait = action_index.find(at.key());
      if (ait == action_index.end()) {
        throw ParseError("transitions[" + it.key() + "]: unknown action \"" +
                         at.key() + "\"");
      }
      mdp.theta[sit->second][ait->second] = parse_vec(
          at.value(), n, "transitions[" + it.key() + "][" + at.key() + "]");
    }
  }
  mdp.mu = parse_vec(field(j, "initial", path), n, "initial");
  mdp.w = parse_vec(field(j, "weights", path), n, "weights");
  mdp.validate();
  return mdp;
}

Model load_model(const std::string& path, ModelKind kind) {
  if (kind == ModelKind::Chain) return load_chain(path);
  return load_mdp(path);
}

std::string chain_to_json(const MarkovChain& chain) {
  ojson j;
  ojson states = ojson::array();
  for (std::size_t v = 0; v < chain.n(); ++v) states.push_back(chain.state_name(v));
  j["states"] = states;
  ojson matrix = ojson::array();
  for (std::size_t r = 0; r < chain.n(); ++r) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < chain.n(); ++c) {
      row.push_back(rat_json(chain.P.entries.at(r, c)));
    }
    matrix.push_back(row);
  }
  j["matrix"] = matrix;
  j["initial"] = vec_json(chain.mu);
  j["weights"] = vec_json(chain.w);
  return dump(j);
}

std::string mdp_to_json(const Mdp& mdp) {
  ojson j;
  j["states"] = mdp.states;
  j["actions"] = mdp.actions;
  ojson trans = ojson::object();
  for (std::size_t v = 0; v < mdp.n(); ++v) {
    ojson per_action = ojson::object();
    for (const auto& [a, row] : mdp.theta[v]) {
      per_action[mdp.actions[std::size_t(a)]] = vec_json(row);
    }
    trans[mdp.states[v]] = per_action;
  }
  j["transitions"] = trans;
  j["initial"] = vec_json(mdp.mu);
  j["weights"] = vec_json(mdp.w);
  return dump(j);
}

void save_chain(const MarkovChain& chain, const std::string& path) {
  write_text_file(path, chain_to_json(chain));
}

void save_mdp(const Mdp& mdp, const std::string& path) {
  write_text_file(path, mdp_to_json(mdp));
}

MarkovStrategy load_strategy(const std::string& path, const Mdp& mdp) {
  ojson j = parse_file(path);
  if (!j.is_object()) throw ParseError(path + ": expected a JSON object");

  std::map<std::string, int> action_index;
  for (std::size_t a = 0; a < mdp.actions.size(); ++a) {
    action_index[mdp.actions[a]] = int(a);
  }
  auto lookup_action = [&](const std::string& name,
                           const std::string& ctx) -> int {
    auto it = action_index.find(name);
    if (it == action_index.end()) {
      throw ParseError(ctx + ": unknown action \"" + name + "\"");
    }
    return it->second;
  };

  MarkovStrategy s;
  const ojson& horizon = field(j, "horizon", path);
  if (!horizon.is_number_integer() || horizon.get<std::int64_t>() < 0) {
    throw ParseError("horizon: expected a nonnegative integer");
  }
  s.horizon = horizon.get<std::int64_t>();

  const ojson& steps = field(j, "steps", path);
  if (!steps.is_array() || std::int64_t(steps.size()) != s.horizon) {
    throw ParseError("steps: expected " + std::to_string(s.horizon) +
                     " entries");
  }
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const std::string ctx = "steps[" + std::to_string(t) + "]";
    if (!steps[t].is_array() || steps[t].size() != mdp.n()) {
      throw ParseError(ctx + ": expected one entry per state");
    }
    std::vector<std::map<int, Rat>> step(mdp.n());
    for (std::size_t v = 0; v < mdp.n(); ++v) {
      const ojson& dist = steps[t][v];
      if (!dist.is_object()) {
        throw ParseError(ctx + "[" + std::to_string(v) +
                         "]: expected {action: prob}");
      }
      for (auto it = dist.begin(); it != dist.end(); ++it) {
        int a = lookup_action(it.key(), ctx);
        step[v][a] = parse_rat(it.value(), ctx + "." + it.key());
      }
    }
    s.probs.push_back(std::move(step));
  }

  const ojson& tail = field(j, "tail", path);
  if (!tail.is_array() || tail.size() != mdp.n()) {
    throw ParseError("tail: expected one action per state");
  }
  for (std::size_t v = 0; v < mdp.n(); ++v) {
    if (!tail[v].is_string()) throw ParseError("tail: actions are names");
    s.tail.push_back(lookup_action(tail[v].get<std::string>(), "tail"));
  }
  s.validate(mdp);
  return s;
}

std::string strategy_to_json(const MarkovStrategy& s, const Mdp& mdp) {
  ojson j;
  j["horizon"] = s.horizon;
  ojson steps = ojson::array();
  for (const auto& step : s.probs) {
    ojson per_state = ojson::array();
    for (const auto& dist : step) {
      ojson d = ojson::object();
      for (const auto& [a, p] : dist) d[mdp.actions[std::size_t(a)]] = rat_json(p);
      per_state.push_back(d);
    }
    steps.push_back(per_state);
  }
  j["steps"] = steps;
  ojson tail = ojson::array();
  for (int a : s.tail) tail.push_back(mdp.actions[std::size_t(a)]);
  j["tail"] = tail;
  return dump(j);
}

void save_strategy(const MarkovStrategy& s, const Mdp& mdp,
                   const std::string& path) {
  write_text_file(path, strategy_to_json(s, mdp));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ParseError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace stoptime
