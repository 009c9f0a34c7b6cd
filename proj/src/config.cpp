#include "mfbd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mfbd/error.hpp"
#include "mfbd/scenarios.hpp"

namespace mfbd {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError("config key \"" + key + "\": " + what);
}

void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key \"" + where + key + "\"");
    }
  }
}

const Json& require(const Json& obj, const std::string& key, const std::string& where = "") {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing required config key \"" + where + key + "\"");
  return *it;
}

double as_number(const Json& v, const std::string& key) {
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

int as_int(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<int>();
}

std::vector<double> as_grid(const Json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_number(x, key));
  return out;
}

ScenarioParams parse_scenario(const Json& s) {
  if (!s.is_object()) fail("scenario", "expected an object");
  const Json& name_node = require(s, "name", "scenario.");
  if (!name_node.is_string()) fail("scenario.name", "expected a string");
  const std::string name = name_node.get<std::string>();
  auto num = [&](const char* key) { return as_number(require(s, key, "scenario."), std::string("scenario.") + key); };
  auto integer = [&](const char* key) { return as_int(require(s, key, "scenario."), std::string("scenario.") + key); };
  try {
    if (name == "poisson") {
      reject_unknown(s, {"name", "lambda", "mu"}, "scenario.");
      return ScenarioParams::poisson(num("lambda"), num("mu"));
    }
    if (name == "pascal") {
      reject_unknown(s, {"name", "beta", "lambda", "mu"}, "scenario.");
      return ScenarioParams::pascal(num("beta"), num("lambda"), num("mu"));
    }
    if (name == "binomial") {
      reject_unknown(s, {"name", "n", "p"}, "scenario.");
      return ScenarioParams::binomial(integer("n"), num("p"));
    }
    if (name == "hypergeometric") {
      reject_unknown(s, {"name", "n", "g", "h"}, "scenario.");
      return ScenarioParams::hypergeometric(integer("n"), integer("g"), integer("h"));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config key \"scenario\": ") + e.what());
  }
  fail("scenario.name", "unknown scenario \"" + name + "\"");
}

OrderedJson scenario_to_json(const ScenarioParams& p) {
  OrderedJson s;
  s["name"] = p.name();
  std::visit(Overloaded{
                 [&](const PoissonLaw& l) {
                   s["lambda"] = l.lambda;
                   s["mu"] = l.mu;
                 },
                 [&](const PascalLaw& l) {
                   s["beta"] = l.beta;
                   s["lambda"] = l.lambda;
                   s["mu"] = l.mu;
                 },
                 [&](const BinomialLaw& l) {
                   s["n"] = l.n;
                   s["p"] = l.p;
                 },
                 [&](const HypergeometricLaw& l) {
                   s["n"] = l.n;
                   s["g"] = l.g;
                   s["h"] = l.h;
                 },
             },
             p.law());
  return s;
}

std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

double ExperimentConfig::resolved_b() const {
  if (b) return *b;
  return *b_over_b_min * b_min(scenario);
}

CascadeConfig ExperimentConfig::cascade() const {
  CascadeConfig c{make_mother_spec(scenario, resolved_b()), depth, dyadic_level, replicates, seed};
  c.allow_degenerate = allow_degenerate;
  c.workers = workers;
  return c;
}

LevelRange ExperimentConfig::levels() const {
  return level_range ? *level_range : LevelRange{2, dyadic_level - 2};
}

ExperimentConfig parse_config(const std::string& raw) {
  std::string text = raw;
  if (text.rfind("# ", 0) == 0) {
    const std::size_t end = text.find('\n');
    text = text.substr(2, end == std::string::npos ? std::string::npos : end - 2);
  }
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config is not valid JSON at " + line_context(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"schema_version", "scenario", "b", "b_over_b_min", "depth", "dyadic_level", "replicates", "seed",
                  "q_grid", "tau_grid", "level_range", "covariance_samples", "allow_degenerate", "workers", "output"},
                 "");

  ExperimentConfig c;
  const int version = as_int(require(doc, "schema_version"), "schema_version");
  if (version != kSchemaVersion) {
    fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                               std::to_string(kSchemaVersion) + ")");
  }
  c.scenario = parse_scenario(require(doc, "scenario"));
  const Json& seed = require(doc, "seed");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<long long>() < 0)) {
    fail("seed", "expected a nonnegative integer");
  }
  c.seed = seed.get<std::uint64_t>();

  const bool has_b = doc.contains("b");
  const bool has_ratio = doc.contains("b_over_b_min");
  if (has_b == has_ratio) throw ConfigError("config needs exactly one of \"b\" and \"b_over_b_min\"");
  if (has_b) c.b = as_number(doc["b"], "b");
  if (has_ratio) c.b_over_b_min = as_number(doc["b_over_b_min"], "b_over_b_min");

  if (doc.contains("depth")) c.depth = as_int(doc["depth"], "depth");
  if (doc.contains("dyadic_level")) c.dyadic_level = as_int(doc["dyadic_level"], "dyadic_level");
  if (doc.contains("replicates")) c.replicates = as_int(doc["replicates"], "replicates");
  if (doc.contains("q_grid")) c.q_grid = as_grid(doc["q_grid"], "q_grid");
  if (doc.contains("tau_grid")) c.tau_grid = as_grid(doc["tau_grid"], "tau_grid");
  if (doc.contains("level_range")) {
    const Json& r = doc["level_range"];
    if (!r.is_array() || r.size() != 2) fail("level_range", "expected [lo, hi]");
    c.level_range = LevelRange{as_int(r[0], "level_range"), as_int(r[1], "level_range")};
  }
  if (doc.contains("covariance_samples")) c.covariance_samples = as_int(doc["covariance_samples"], "covariance_samples");
  if (doc.contains("allow_degenerate")) {
    if (!doc["allow_degenerate"].is_boolean()) fail("allow_degenerate", "expected true or false");
    c.allow_degenerate = doc["allow_degenerate"].get<bool>();
  }
  c.workers = default_workers();
  if (doc.contains("workers")) c.workers = as_int(doc["workers"], "workers");
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) fail("output", "expected a string");
    c.output = doc["output"].get<std::string>();
  }

  if (c.depth < 0) fail("depth", "must be nonnegative");
  if (c.dyadic_level < 1 || c.dyadic_level > 28) fail("dyadic_level", "must lie in [1, 28]");
  if (c.replicates < 1) fail("replicates", "must be positive");
  if (c.covariance_samples < 1) fail("covariance_samples", "must be positive");
  if (c.workers < 1) fail("workers", "must be positive");
  if (c.b && !(*c.b > 1.0)) fail("b", "must exceed 1");
  if (c.b_over_b_min && !(*c.b_over_b_min > 0.0)) fail("b_over_b_min", "must be positive");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  OrderedJson j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = scenario_to_json(c.scenario);
  if (c.b) j["b"] = *c.b;
  if (c.b_over_b_min) j["b_over_b_min"] = *c.b_over_b_min;
  j["depth"] = c.depth;
  j["dyadic_level"] = c.dyadic_level;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["q_grid"] = c.q_grid;
  j["tau_grid"] = c.tau_grid;
  if (c.level_range) j["level_range"] = {c.level_range->lo, c.level_range->hi};
  j["covariance_samples"] = c.covariance_samples;
  j["allow_degenerate"] = c.allow_degenerate;
  return j.dump();
}

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace mfbd
