#pragma once

// Checks a JSON value against the subset of OpenAPI schema keywords the
// service document uses: type, nullable, required, properties, items, enum,
// minimum, maximum, $ref. Returns a list of violations.

#include <string>
#include <vector>

#include <json.hpp>

namespace facmap::testing {

inline void check_schema(const nlohmann::json& doc, const nlohmann::json& schema, const nlohmann::json& value,
                         const std::string& where, std::vector<std::string>& errors) {
  if (schema.contains("$ref")) {
    const auto ref = schema["$ref"].get<std::string>();
    const std::string prefix = "#/components/schemas/";
    check_schema(doc, doc["components"]["schemas"][ref.substr(prefix.size())], value, where, errors);
    return;
  }
  if (value.is_null()) {
    if (!schema.value("nullable", false)) errors.push_back(where + ": null not allowed");
    return;
  }
  const auto type = schema.value("type", std::string{});
  auto fail = [&](const std::string& what) { errors.push_back(where + ": " + what); };
  if (type == "object") {
    if (!value.is_object()) return fail("expected object");
    for (const auto& r : schema.value("required", nlohmann::json::array()))
      if (!value.contains(r.get<std::string>())) fail("missing " + r.get<std::string>());
    if (schema.contains("properties"))
      for (const auto& [k, sub] : schema["properties"].items())
        if (value.contains(k)) check_schema(doc, sub, value[k], where + "." + k, errors);
  } else if (type == "array") {
    if (!value.is_array()) return fail("expected array");
    if (schema.contains("items"))
      for (std::size_t i = 0; i < value.size(); ++i)
        check_schema(doc, schema["items"], value[i], where + "[" + std::to_string(i) + "]", errors);
  } else if (type == "string") {
    if (!value.is_string()) return fail("expected string");
  } else if (type == "integer") {
    if (!value.is_number_integer()) return fail("expected integer");
  } else if (type == "number") {
    if (!value.is_number()) return fail("expected number");
  } else if (type == "boolean") {
    if (!value.is_boolean()) return fail("expected boolean");
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found |= e == value;
    if (!found) fail("value not in enum");
  }
  if (schema.contains("minimum") && value.is_number() && value.get<double>() < schema["minimum"].get<double>())
    fail("below minimum");
  if (schema.contains("maximum") && value.is_number() && value.get<double>() > schema["maximum"].get<double>())
    fail("above maximum");
}

inline std::vector<std::string> validate_against(const nlohmann::json& doc, const std::string& schema_name,
                                                 const nlohmann::json& value) {
  std::vector<std::string> errors;
  check_schema(doc, doc["components"]["schemas"][schema_name], value, schema_name, errors);
  return errors;
}

}  // namespace facmap::testing
