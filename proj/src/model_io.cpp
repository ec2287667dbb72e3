#include "expfam/model_io.hpp"

#include <cmath>
#include <fstream>

namespace expfam {

namespace {

int require_int(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 2e9) return static_cast<int>(d);
  }
  throw ConfigError(std::string("field '") + key + "' must be an integer");
}

}  // namespace

nlohmann::json to_json(const Factor& factor) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [var, deg] : factor.terms()) j[std::to_string(var + 1)] = deg;
  return j;
}

Factor factor_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("factor must be an object of variable:degree pairs");
  std::vector<Factor::Term> terms;
  for (const auto& [key, value] : j.items()) {
    int var = 0;
    try {
      std::size_t used = 0;
      var = std::stoi(key, &used);
      if (used != key.size()) throw ConfigError("bad variable key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad variable key '" + key + "'");
    }
    if (!value.is_number_integer()) throw ConfigError("factor degrees must be integers");
    terms.emplace_back(var - 1, value.get<int>());
  }
  try {
    return Factor(std::move(terms));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json to_json(const Family& family) {
  nlohmann::json j;
  j["n"] = family.n();
  j["d"] = family.d();
  j["w"] = family.w();
  j["base_exponent"] = family.base_exponent();
  auto& fs = j["factors"] = nlohmann::json::array();
  for (const auto& f : family.factors()) fs.push_back(to_json(f));
  return j;
}

Family family_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("family must be an object");
  const int n = require_int(j, "n");
  const int d = require_int(j, "d");
  const int p = j.contains("base_exponent") ? require_int(j, "base_exponent") : 0;
  std::vector<Factor> factors;
  if (!j.contains("factors") || !j.at("factors").is_array()) throw ConfigError("missing factor list");
  for (const auto& f : j.at("factors")) factors.push_back(factor_from_json(f));
  try {
    Family fam(n, d, std::move(factors), p);
    if (j.contains("w") && require_int(j, "w") != fam.w()) throw ConfigError("stated w does not match the factors");
    return fam;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json to_json(const Model& model) {
  nlohmann::json j = to_json(model.family());
  j["theta"] = model.theta_star();
  j["B"] = model.B();
  j["tail"] = {{"k", model.tail().decay}, {"C_t", model.tail().C_t}};
  return j;
}

Model model_from_json(const nlohmann::json& j) {
  Family fam = family_from_json(j);
  if (!j.contains("theta") || !j.at("theta").is_array()) throw ConfigError("missing theta");
  const auto& listed = j.at("factors");
  const auto& th = j.at("theta");
  if (th.size() != listed.size()) throw ConfigError("theta length does not match the factor list");
  std::vector<double> theta(fam.size(), 0.0);
  for (std::size_t a = 0; a < listed.size(); ++a) {
    if (!th[a].is_number()) throw ConfigError("theta entries must be numbers");
    theta[static_cast<std::size_t>(*fam.index_of(factor_from_json(listed[a])))] = th[a].get<double>();
  }
  const int B = require_int(j, "B");
  TailSpec tail;
  if (!j.contains("tail")) throw ConfigError("missing tail specification");
  const auto& t = j.at("tail");
  if (!t.contains("k") || !t.at("k").is_number()) throw ConfigError("tail.k must be a number");
  tail.decay = t.at("k").get<double>();
  tail.C_t = require_int(t, "C_t");
  try {
    return Model(std::move(fam), std::move(theta), B, tail);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace expfam
