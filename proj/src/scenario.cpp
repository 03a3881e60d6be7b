#include "eqgrad/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eqgrad/errors.hpp"

namespace eqgrad {

namespace {

using V = ValueType;

std::vector<KeySpec> circle_function(const std::string& p) {
  return {{p + ".a0", V::number}, {p + ".cos", V::numbers}, {p + ".sin", V::numbers}};
}

std::vector<KeySpec> torus_system() {
  return {{"f", V::matrix, true}, {"g11", V::matrix}, {"g12", V::matrix}, {"g22", V::matrix},
          {"generators", V::matrix}};
}

template <class... L>
std::vector<KeySpec> join(L... lists) {
  std::vector<KeySpec> out;
  (out.insert(out.end(), lists.begin(), lists.end()), ...);
  return out;
}

std::vector<KindSpec> build_kinds() {
  std::vector<KindSpec> k;
  k.push_back({"chi", join(circle_function("h"), std::vector<KeySpec>{{"fractions", V::numbers},
                                                                     {"expect_chi", V::number}}),
               {{"chi.match", 1e-6}}});
  k.push_back({"classify",
               join(circle_function("h"), circle_function("k"),
                    std::vector<KeySpec>{{"expect_equivalent", V::boolean}}),
               {{"classify.match", 1e-6}}});
  k.push_back({"genericity",
               join(std::vector<KeySpec>{{"space", V::word, true}}, circle_function("f"), circle_function("g"),
                    std::vector<KeySpec>{{"group", V::word}, {"group_order", V::integer}},
                    std::vector<KeySpec>{{"f", V::matrix}, {"g11", V::matrix}, {"g12", V::matrix},
                                         {"g22", V::matrix}, {"generators", V::matrix}},
                    std::vector<KeySpec>{{"expect_generic", V::boolean}}),
               {{"resonance", 1e-9}, {"c2", 1e-6}, {"circle", 1e-6}}});
  k.push_back({"resonance",
               {{"spectrum", V::numbers, true}, {"max_order", V::integer}, {"expect_resonant", V::boolean}},
               {{"resonance", 1e-9}}});
  k.push_back({"normal-form",
               {{"dimension", V::integer, true},
                {"linear", V::matrix, true},
                {"terms", V::matrix},
                {"degree", V::integer},
                {"radius", V::number},
                {"action", V::word}},
               {{"normal_form.residual", 1e-6}}});
  k.push_back({"thick",
               {{"eigenvalues", V::numbers, true},
                {"conjugate", V::boolean},
                {"vectors", V::matrix},
                {"trials", V::integer},
                {"expect_thick", V::boolean}},
               {{"thick", 1e-8}}});
  k.push_back({"torus",
               join(torus_system(), std::vector<KeySpec>{{"experiments", V::words},
                                                         {"directions", V::integer},
                                                         {"radius", V::number},
                                                         {"family_center", V::numbers},
                                                         {"family_radius", V::number},
                                                         {"family_direction", V::numbers},
                                                         {"family_eps", V::number}}),
               {{"torus.roundtrip", 1e-5},
                {"torus.metric", 1e-10},
                {"torus.positivity", 1e-6},
                {"torus.invariance", 1e-10},
                {"torus.agreement", 0.99}}});
  k.push_back({"variation",
               join(torus_system(), std::vector<KeySpec>{{"x", V::numbers, true},
                                                         {"t", V::number, true},
                                                         {"v", V::numbers, true},
                                                         {"u", V::numbers},
                                                         {"t_fraction", V::number},
                                                         {"window_radius", V::number},
                                                         {"eps", V::number}}),
               {{"variation.relative", 1e-3}}});
  k.push_back({"aut-reduce",
               join(circle_function("f"), circle_function("g"),
                    std::vector<KeySpec>{{"group", V::word},
                                         {"group_order", V::integer},
                                         {"phi", V::word, true},
                                         {"phi.element", V::integer},
                                         {"phi.t", V::number},
                                         {"phi.orientation", V::integer},
                                         {"phi.shift", V::number},
                                         {"phi.cos", V::numbers},
                                         {"phi.sin", V::numbers},
                                         {"samples", V::integer},
                                         {"expect", V::word, true}}),
               {{"aut.accept", 1e-7}, {"aut.reject", 1e-2}}});
  return k;
}

[[noreturn]] void schema_error(const std::string& source, int line, const std::string& what) {
  std::ostringstream msg;
  msg << source;
  if (line > 0) msg << ":" << line;
  msg << ": " << what;
  throw Error(ErrorKind::schema, msg.str());
}

class ValueParser {
 public:
  ValueParser(std::string_view text, const std::string& source, int line, const std::string& key)
      : s_(text), source_(source), line_(line), key_(key) {}

  json parse() {
    json v = value();
    skip();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    schema_error(source_, line_, "key '" + key_ + "': " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  json value() {
    skip();
    if (pos_ >= s_.size()) fail("missing value");
    char c = s_[pos_];
    if (c == '[') return array();
    if (c == '"') return quoted();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') return number();
    return word();
  }

  json array() {
    ++pos_;
    json out = json::array();
    skip();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(value());
      skip();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail(std::string("unexpected '") + s_[pos_] + "' in array");
    }
  }

  json quoted() {
    std::size_t end = s_.find('"', pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    json out = std::string(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }

  json number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '-' || s_[pos_] == '+'))
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok[0] == '+') {
      auto r = std::from_chars(tok.data() + 1, tok.data() + tok.size(), v);
      ptr = r.ptr;
      ec = r.ec;
    }
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) fail("bad number '" + tok + "'");
    return v;
  }

  json word() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '-' || s_[pos_] == '.'))
      ++pos_;
    if (pos_ == start) fail(std::string("unexpected '") + s_[pos_] + "'");
    std::string w(s_.substr(start, pos_ - start));
    if (w == "true") return true;
    if (w == "false") return false;
    return w;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  const std::string& source_;
  int line_;
  const std::string& key_;
};

bool valid_key(const std::string& k) {
  if (k.empty() || !std::islower(static_cast<unsigned char>(k[0]))) return false;
  bool dot = false;
  for (char c : k) {
    if (c == '.') {
      if (dot) return false;
      dot = true;
      continue;
    }
    dot = false;
    if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  }
  return !dot;
}

const char* type_name(ValueType t) {
  switch (t) {
    case V::number: return "a number";
    case V::integer: return "an integer";
    case V::boolean: return "true or false";
    case V::word: return "a word";
    case V::numbers: return "an array of numbers";
    case V::words: return "an array of words";
    case V::matrix: return "an array of number arrays";
  }
  return "?";
}

bool all_numbers(const json& a) {
  return a.is_array() && std::all_of(a.begin(), a.end(), [](const json& x) { return x.is_number(); });
}

bool conforms(const json& v, ValueType t) {
  switch (t) {
    case V::number: return v.is_number();
    case V::integer: return v.is_number() && std::floor(v.get<double>()) == v.get<double>();
    case V::boolean: return v.is_boolean();
    case V::word: return v.is_string();
    case V::numbers: return all_numbers(v);
    case V::words:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); });
    case V::matrix:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return all_numbers(x); });
  }
  return false;
}

int bracket_balance(std::string_view s) {
  int b = 0;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    if (c == '[') ++b;
    if (c == ']') --b;
  }
  return b;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

const std::vector<KindSpec>& scenario_kinds() {
  static const std::vector<KindSpec> kinds = build_kinds();
  return kinds;
}

const KindSpec& kind_spec(const std::string& kind) {
  for (const auto& k : scenario_kinds())
    if (k.kind == kind) return k;
  throw Error(ErrorKind::schema, "unknown scenario kind '" + kind + "'");
}

Scenario parse_scenario(std::string_view text, const std::string& source) {
  struct Entry {
    std::string key;
    json value;
    int line;
  };
  std::vector<Entry> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = strip_comment(raw);
    if (trim(line).empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) schema_error(source, line_no, "expected 'key = value'");
    std::string key(trim(std::string_view(line).substr(0, eq)));
    if (!valid_key(key)) schema_error(source, line_no, "invalid key '" + key + "'");
    std::string value(trim(std::string_view(line).substr(eq + 1)));
    const int start = line_no;
    while (bracket_balance(value) > 0 && std::getline(in, raw)) {
      ++line_no;
      value += " " + std::string(trim(strip_comment(raw)));
    }
    if (bracket_balance(value) != 0) schema_error(source, start, "key '" + key + "': unbalanced brackets");
    for (const auto& e : entries)
      if (e.key == key) schema_error(source, start, "duplicate key '" + key + "'");
    entries.push_back({key, ValueParser(value, source, start, key).parse(), start});
  }

  Scenario s;
  s.source = source;
  auto kind_it = std::find_if(entries.begin(), entries.end(), [](const Entry& e) { return e.key == "kind"; });
  if (kind_it == entries.end()) schema_error(source, 0, "missing required key 'kind'");
  if (!kind_it->value.is_string()) schema_error(source, kind_it->line, "key 'kind': expected a word");
  s.kind = kind_it->value.get<std::string>();
  const KindSpec* spec = nullptr;
  for (const auto& k : scenario_kinds())
    if (k.kind == s.kind) spec = &k;
  if (!spec) schema_error(source, kind_it->line, "key 'kind': unknown kind '" + s.kind + "'");

  s.payload = json::object();
  for (const auto& e : entries) {
    if (e.key == "kind") continue;
    if (e.key == "seed") {
      if (!conforms(e.value, V::integer) || e.value.get<double>() < 0 || e.value.get<double>() > 9.007199254740992e15)
        schema_error(source, e.line, "key 'seed': expected a non-negative integer below 2^53");
      s.seed = static_cast<std::uint64_t>(e.value.get<double>());
      continue;
    }
    if (e.key == "name") {
      if (!e.value.is_string()) schema_error(source, e.line, "key 'name': expected a word or string");
      s.name = e.value.get<std::string>();
      continue;
    }
    if (e.key.rfind("tol.", 0) == 0) {
      std::string t = e.key.substr(4);
      if (!spec->tolerances.count(t)) schema_error(source, e.line, "unknown tolerance key '" + e.key + "'");
      if (!e.value.is_number() || !(e.value.get<double>() > 0.0))
        schema_error(source, e.line, "key '" + e.key + "': expected a positive number");
      s.tolerances[t] = e.value.get<double>();
      continue;
    }
    auto ks = std::find_if(spec->keys.begin(), spec->keys.end(), [&](const KeySpec& k) { return k.key == e.key; });
    if (ks == spec->keys.end()) schema_error(source, e.line, "unknown key '" + e.key + "' for kind " + s.kind);
    if (!conforms(e.value, ks->type))
      schema_error(source, e.line, "key '" + e.key + "': expected " + type_name(ks->type));
    s.payload[e.key] = e.value;
  }
  for (const auto& k : spec->keys)
    if (k.required && !s.payload.contains(k.key)) schema_error(source, 0, "missing required key '" + k.key + "'");
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::schema, "cannot read scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.filename().string());
}

json scenario_echo(const Scenario& s) {
  json e;
  e["source"] = s.source;
  e["name"] = s.name;
  e["kind"] = s.kind;
  e["seed"] = s.seed;
  e["payload"] = s.payload;
  return e;
}

}  // namespace eqgrad
