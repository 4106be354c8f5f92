#pragma once

#include <string>
#include <variant>

#include "stoptime/model.hpp"

namespace stoptime {

enum class ModelKind { Chain, Mdp };

using Model = std::variant<MarkovChain, Mdp>;

// Parses and validates a model file. Malformed JSON or wrong shapes raise
// ParseError; shape-correct files violating a type invariant raise
// InvariantError with the offending location.
Model load_model(const std::string& path, ModelKind kind);

MarkovChain load_chain(const std::string& path);
Mdp load_mdp(const std::string& path);

std::string chain_to_json(const MarkovChain& chain);
std::string mdp_to_json(const Mdp& mdp);

void save_chain(const MarkovChain& chain, const std::string& path);
void save_mdp(const Mdp& mdp, const std::string& path);

MarkovStrategy load_strategy(const std::string& path, const Mdp& mdp);
std::string strategy_to_json(const MarkovStrategy& s, const Mdp& mdp);
void save_strategy(const MarkovStrategy& s, const Mdp& mdp,
                   const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace stoptime
