#pragma once

// Artifact writers (CSV / JSON) and a minimal structural schema check.
// Data files carry no timestamps; run metadata lives in meta.json.

#include "entbridge/config.hpp"
#include "entbridge/inequalities.hpp"

#include <cstdio>
#include <filesystem>

namespace entbridge {

namespace detail {

// shortest round-trip decimal form, deterministic across runs
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << header << "\n";
  }
  void row(const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k)
      out_ << (k ? "," : "") << detail::fmt(values[k]);
    out_ << "\n";
  }
  void raw_row(const std::string& line) { out_ << line << "\n"; }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << "\n";
}

inline json report_to_json(const InequalityReport& r) {
  json j;
  j["name"] = r.name;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["margin"] = std::isfinite(r.margin) ? json(r.margin) : json(nullptr);
  j["kappa_used"] = r.kappa_used;
  j["epsilon"] = r.epsilon ? json(*r.epsilon) : json(nullptr);
  json comps = json::object();
  for (const auto& [k, v] : r.components) comps[k] = v;
  j["components"] = comps;
  j["applicable"] = r.applicable;
  j["note"] = r.note;
  return j;
}

inline json solution_to_json(const SchrodingerSolution& sol) {
  json j;
  j["epsilon"] = sol.epsilon;
  j["cost"] = sol.cost;
  j["iterations"] = sol.iterations;
  j["marginal_error"] = sol.marginal_error;
  j["gauge"] = sol.gauge;
  j["converged"] = sol.converged;
  return j;
}

inline json sweep_row_to_json(const EpsSweepRow& r) {
  json j;
  j["epsilon"] = r.epsilon;
  j["cost"] = r.cost;
  j["kinetic"] = r.kinetic;
  j["t_weighted_kinetic"] = r.t_weighted_kinetic;
  j["fisher_integral"] = r.fisher_integral;
  j["t_weighted_fisher"] = r.t_weighted_fisher;
  j["Q"] = r.Q;
  j["gamma_theta_end"] = r.gamma_theta_end;
  j["w2_squared"] = r.w2_squared;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  return j;
}

// Minimal structural schema: {"type": "object", "required": {name: typename}}
// with typename in {number, integer, string, boolean, array, object, null|T}.
inline bool matches_type(const json& v, const std::string& type) {
  if (type.rfind("null|", 0) == 0)
    return v.is_null() || matches_type(v, type.substr(5));
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "array") return v.is_array();
  if (type == "object") return v.is_object();
  return false;
}

inline bool validate_schema(const json& value, const json& schema, std::string* error = nullptr) {
  const std::string type = schema.value("type", std::string("object"));
  if (type == "array_of_objects") {
    if (!value.is_array()) {
      if (error) *error = "expected an array";
      return false;
    }
    for (const auto& item : value) {
      json inner = schema;
      inner["type"] = "object";
      if (!validate_schema(item, inner, error)) return false;
    }
    return true;
  }
  if (!value.is_object()) {
    if (error) *error = "expected an object";
    return false;
  }
  if (schema.contains("required")) {
    for (const auto& [key, tp] : schema.at("required").items()) {
      if (!value.contains(key)) {
        if (error) *error = "missing field " + key;
        return false;
      }
      if (!matches_type(value.at(key), tp.get<std::string>())) {
        if (error) *error = "field " + key + " is not of type " + tp.get<std::string>();
        return false;
      }
    }
  }
  return true;
}

}  // namespace entbridge
