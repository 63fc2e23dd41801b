#pragma once

// JSON model files:
//
//   {
//     "n_states": 2,
//     "actions": [[0], [0]],
//     "cost":    [[0.0], [1.0]],
//     "kernel":  [[[1.0, 0.0]], [[0.5, 0.5]]],
//     "label":   "example1"
//   }
//
// cost[x] and kernel[x] are aligned with actions[x]. Rows must sum to 1
// within 1e-12; nothing is renormalized.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

namespace rsmdp {

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: field '") + what + "' has the wrong type (" +
                     e.what() + ")");
  }
}

inline const nlohmann::json& json_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("model file: missing field '") + key + "'");
  return *it;
}

}  // namespace detail

/// Parses a model and validates it. ParseError for malformed text or schema,
/// ValidationError for a well-formed model that breaks an invariant.
inline FiniteMDP load_model(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("model file: top level must be an object");

  FiniteMDP m;
  const auto& n = detail::json_field(j, "n_states");
  if (!n.is_number_integer() || n.get<long long>() < 0)
    throw ParseError("model file: 'n_states' must be a nonnegative integer");
  m.n_states = n.get<std::size_t>();
  m.actions = detail::json_get<std::vector<std::vector<int>>>(detail::json_field(j, "actions"),
                                                              "actions");
  m.cost = detail::json_get<std::vector<std::vector<double>>>(detail::json_field(j, "cost"), "cost");
  m.kernel = detail::json_get<std::vector<std::vector<std::vector<double>>>>(
      detail::json_field(j, "kernel"), "kernel");
  if (auto it = j.find("label"); it != j.end())
    m.label = detail::json_get<std::string>(*it, "label");

  require_valid(m);
  return m;
}

/// Serializes with shortest round-trip decimal literals, so load_model(save_model(m)) == m.
inline std::string save_model(const FiniteMDP& m) {
  nlohmann::json j;
  j["n_states"] = m.n_states;
  j["actions"] = m.actions;
  j["cost"] = m.cost;
  j["kernel"] = m.kernel;
  j["label"] = m.label;
  return j.dump(2) + "\n";
}

/// Reads a file. I/O failures surface as ParseError (both map to exit code 3).
inline FiniteMDP load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

}  // namespace rsmdp
