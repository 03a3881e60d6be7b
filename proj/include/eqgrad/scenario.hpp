#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace eqgrad {

using json = nlohmann::ordered_json;

enum class ValueType { number, integer, boolean, word, numbers, words, matrix };

struct KeySpec {
  std::string key;
  ValueType type;
  bool required = false;
};

struct KindSpec {
  std::string kind;
  std::vector<KeySpec> keys;
  std::map<std::string, double> tolerances;  // defaults
};

const std::vector<KindSpec>& scenario_kinds();
const KindSpec& kind_spec(const std::string& kind);

struct Scenario {
  std::string source;
  std::string name;
  std::string kind;
  std::uint64_t seed = 0;
  std::map<std::string, double> tolerances;  // overrides from the file
  json payload;                              // remaining keys, typed
};

// Raises ErrorKind::schema with the line number and the offending key.
Scenario parse_scenario(std::string_view text, const std::string& source = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

json scenario_echo(const Scenario& s);

}  // namespace eqgrad
