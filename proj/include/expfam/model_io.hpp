#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "expfam/family.hpp"

namespace expfam {

/// Malformed or inconsistent configuration documents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"1": 2, "3": 1} with 1-based variable keys.
nlohmann::json to_json(const Factor& factor);
Factor factor_from_json(const nlohmann::json& j);

/// {n, d, w, base_exponent, factors}
nlohmann::json to_json(const Family& family);
Family family_from_json(const nlohmann::json& j);

/// Family fields plus theta (aligned with the listed factors), B and
/// tail {k, C_t}. Theta is permuted to canonical order on load; B and C_t
/// must be integers.
nlohmann::json to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace expfam
