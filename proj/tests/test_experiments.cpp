#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cbpoison/error.hpp"
#include "cbpoison/experiments.hpp"

using namespace cbpoison;
using nlohmann::json;

namespace {

// Minimal structural schema: {"type", "required", "properties", "items"}.
// Returns the path of the first violation, empty when valid.
std::string schema_violation(const json& value, const json& schema, const std::string& path = "$") {
  if (schema.contains("type")) {
    const std::string type = schema["type"];
    const bool ok = (type == "object" && value.is_object()) || (type == "array" && value.is_array()) ||
                    (type == "string" && value.is_string()) || (type == "boolean" && value.is_boolean()) ||
                    (type == "integer" && value.is_number_integer()) || (type == "number" && value.is_number()) ||
                    (type == "number|null" && (value.is_number() || value.is_null()));
    if (!ok) return path + ": expected " + type;
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"])
      if (!value.contains(key.get<std::string>())) return path + ": missing " + key.get<std::string>();
  if (schema.contains("properties"))
    for (const auto& [key, sub] : schema["properties"].items())
      if (value.contains(key))
        if (auto v = schema_violation(value[key], sub, path + "." + key); !v.empty()) return v;
  if (schema.contains("items") && value.is_array())
    for (std::size_t i = 0; i < value.size(); ++i)
      if (auto v = schema_violation(value[i], schema["items"], path + "[" + std::to_string(i) + "]"); !v.empty())
        return v;
  return {};
}

json object_schema(const std::vector<std::pair<std::string, std::string>>& fields) {
  json s = {{"type", "object"}, {"required", json::array()}, {"properties", json::object()}};
  for (const auto& [name, type] : fields) {
    s["required"].push_back(name);
    s["properties"][name] = {{"type", type}};
  }
  return s;
}

json report_schema(std::vector<std::pair<std::string, std::string>> fields, const std::string& list,
                   const json& item) {
  fields.insert(fields.begin(), {{"experiment", "string"}, {"seed", "integer"}, {"config", "object"}});
  json s = object_schema(fields);
  s["required"].push_back(list);
  s["properties"][list] = {{"type", "array"}, {"items", item}};
  return s;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void check_csv_shape(const std::string& text, const std::string& header, std::size_t rows) {
  const auto lines = csv_lines(text);
  REQUIRE(lines.size() == rows + 1);
  CHECK(lines.front() == header);
  const auto columns = std::count(header.begin(), header.end(), ',');
  for (const auto& line : lines) CHECK(std::count(line.begin(), line.end(), ',') == columns);
}

ExperimentConfig small_toy() {
  ExperimentConfig c = default_config("toy-attack");
  c.d = 4;
  c.K = 3;
  c.n = 120;
  c.trials = 6;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("median") {
  CHECK(std::isnan(median({})));
  CHECK(median({3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}

TEST_CASE("parallel_for visits each index once") {
  for (int threads : {1, 3, 16}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(257, threads, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  int calls = 0;
  parallel_for(0, 4, [&](int) { ++calls; });
  CHECK(calls == 0);
}

TEST_CASE("default configs validate and round-trip") {
  for (const auto& name : experiment_names()) {
    const ExperimentConfig c = default_config(name);
    CHECK(c.experiment == name);
    CHECK_NOTHROW(c.validate());
    const json j = c;
    CHECK(json(j.get<ExperimentConfig>()) == j);
  }
  CHECK_THROWS_AS(default_config("nope"), Error);
}

TEST_CASE("config validation") {
  ExperimentConfig c = default_config("toy-attack");
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), Error);

  c = default_config("side-effect");
  c.cells = {{1, 3}};
  CHECK_THROWS_AS(c.validate(), Error);

  c = default_config("feasibility-scan");
  c.presets = {"no-such-preset"};
  try {
    c.validate();
    FAIL("expected unknown preset");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_preset);
  }

  c = default_config("toy-attack");
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("partial config JSON keeps the experiment defaults") {
  const auto c = json{{"experiment", "side-effect"}, {"seed", 9}}.get<ExperimentConfig>();
  CHECK(c.seed == 9);
  CHECK(c.cells == default_config("side-effect").cells);
  CHECK(c.n == default_config("side-effect").n);
}

TEST_CASE("toy attack report") {
  const ExperimentConfig c = small_toy();
  const ToyReport r = run_toy_attack(c);
  REQUIRE(r.trials.size() == 6);
  CHECK(r.success_rate == 1.0);
  for (const auto& t : r.trials) {
    CHECK(t.status == "Optimal");
    CHECK(t.verified);
    REQUIRE(t.effort_ratio.has_value());
    CHECK(*t.effort_ratio >= 0.0);
  }

  const json j = r;
  const json trial = object_schema({{"trial", "integer"},
                                    {"seed", "integer"},
                                    {"target_arm", "integer"},
                                    {"status", "string"},
                                    {"verified", "boolean"},
                                    {"effort_ratio", "number|null"},
                                    {"margin", "number|null"},
                                    {"objective", "number"}});
  CHECK(schema_violation(j, report_schema({{"success_rate", "number"}, {"effort_median", "number|null"}}, "trials",
                                          trial)) == "");
  CHECK(j["config"] == json(c));

  std::ostringstream csv;
  r.write_csv(csv);
  check_csv_shape(csv.str(), "trial,seed,target_arm,status,verified,effort_ratio,margin,objective", 6);
}

TEST_CASE("reports reproduce from their embedded config and ignore thread count") {
  ExperimentConfig c = small_toy();
  c.threads = 1;
  const json serial = run_toy_attack(c);
  c.threads = 4;
  json parallel = run_toy_attack(c);
  parallel["config"]["threads"] = 1;
  CHECK(parallel.dump() == serial.dump());

  const auto replay = serial["config"].get<ExperimentConfig>();
  CHECK(json(run_toy_attack(replay)).dump() == serial.dump());

  c.seed = 12;
  CHECK(json(run_toy_attack(c))["trials"] != serial["trials"]);
}

TEST_CASE("side-effect report") {
  ExperimentConfig c = default_config("side-effect");
  c.n = 200;
  c.trials = 3;
  c.samples = 200;
  c.cells = {{3, 2}, {2, 4}};
  const SweepReport r = run_side_effect_sweep(c);
  REQUIRE(r.cells.size() == 2);
  REQUIRE(r.trials.size() == 6);
  for (const auto& cell : r.cells) {
    CHECK(cell.completed <= 3);
    if (cell.completed > 0) CHECK((cell.median >= 0.0 && cell.median <= 1.0));
  }
  for (const auto& t : r.trials)
    if (t.fraction_hat) CHECK((*t.fraction_hat >= 0.0 && *t.fraction_hat <= 1.0));

  const json j = r;
  const json trial = object_schema({{"K", "integer"},
                                    {"d", "integer"},
                                    {"trial", "integer"},
                                    {"seed", "integer"},
                                    {"status", "string"},
                                    {"fraction_hat", "number|null"}});
  json schema = report_schema({}, "trials", trial);
  schema["required"].push_back("cells");
  schema["properties"]["cells"] = {
      {"type", "array"},
      {"items", object_schema({{"K", "integer"}, {"d", "integer"}, {"completed", "integer"}, {"median", "number|null"}})}};
  CHECK(schema_violation(j, schema) == "");
  CHECK(json(run_side_effect_sweep(c)).dump() == j.dump());

  std::ostringstream csv;
  r.write_csv(csv);
  check_csv_shape(csv.str(), "K,d,trial,seed,status,fraction_hat", 6);
}

TEST_CASE("doubling the side-effect sample count moves each estimate within 2/sqrt(m)") {
  ExperimentConfig c = default_config("side-effect");
  c.n = 300;
  c.trials = 6;
  c.samples = 400;
  c.cells = {{5, 2}, {3, 6}};
  const SweepReport base = run_side_effect_sweep(c);
  c.samples = 800;
  const SweepReport doubled = run_side_effect_sweep(c);
  const double band = 2.0 / std::sqrt(400.0);
  for (std::size_t i = 0; i < base.cells.size(); ++i) {
    REQUIRE(base.cells[i].completed > 0);
    CHECK(std::abs(base.cells[i].median - doubled.cells[i].median) <= band);
  }
  for (std::size_t i = 0; i < base.trials.size(); ++i)
    if (base.trials[i].fraction_hat && doubled.trials[i].fraction_hat)
      CHECK(std::abs(*base.trials[i].fraction_hat - *doubled.trials[i].fraction_hat) <= band);
}

TEST_CASE("binary attack report") {
  ExperimentConfig c = default_config("binary-attack");
  c.n = 1500;
  c.K = 5;
  c.d = 4;
  c.pool_size = 12;
  c.test_visits = 300;
  c.threshold_count = 200;
  const BinaryReport r = run_binary_attack(c);
  CHECK(r.history_size == 1500);
  CHECK((r.click_rate >= 0.0 && r.click_rate <= 1.0));
  REQUIRE(r.targets.size() == 3);
  CHECK(r.targets[0].label == "most");
  CHECK(r.targets[1].label == "median");
  CHECK(r.targets[2].label == "least");
  CHECK(r.targets[0].visits >= r.targets[1].visits);
  CHECK(r.targets[1].visits >= r.targets[2].visits);
  for (const auto& t : r.targets)
    if (t.flipped_fraction) CHECK((*t.flipped_fraction >= 0.0 && *t.flipped_fraction <= 1.0));

  const json j = r;
  const json target = object_schema({{"label", "string"},
                                     {"pool_index", "integer"},
                                     {"visits", "integer"},
                                     {"target_arm", "integer"},
                                     {"status", "string"},
                                     {"relaxed_effort", "number|null"},
                                     {"threshold", "number|null"},
                                     {"flipped_fraction", "number|null"},
                                     {"rounded_effort", "number|null"},
                                     {"rounded_margin", "number|null"},
                                     {"target_selected", "boolean"}});
  CHECK(schema_violation(j, report_schema({{"history_size", "integer"}, {"click_rate", "number"}}, "targets",
                                          target)) == "");
  CHECK(json(run_binary_attack(c)).dump() == j.dump());

  std::ostringstream csv;
  r.write_csv(csv);
  check_csv_shape(csv.str(),
                  "label,pool_index,visits,target_arm,status,threshold,flipped,flipped_fraction,relaxed_effort,"
                  "rounded_effort,rounded_margin,target_selected",
                  3);
}

TEST_CASE("feasibility scan report") {
  ExperimentConfig c = default_config("feasibility-scan");
  c.resolution = 21;
  c.epsilons = {1.0};
  const ScanReport r = run_feasibility_scan(c);
  REQUIRE(r.scans.size() == c.presets.size());
  for (const auto& s : r.scans) {
    CHECK(s.scan.points.size() == 21u * 21u);
    int blocked = 0;
    for (const auto& p : s.scan.points) blocked += !p.feasible;
    CHECK(blocked == s.blocked);
  }
  const json j = r;
  const json scan = object_schema({{"preset", "string"},
                                   {"epsilon", "number"},
                                   {"points", "integer"},
                                   {"blocked", "integer"},
                                   {"origin_feasible", "boolean"}});
  CHECK(schema_violation(j, report_schema({}, "scans", scan)) == "");
  for (const auto& s : j["scans"]) CHECK(s["origin_feasible"] == false);

  std::ostringstream csv;
  r.scans.front().scan.write_csv(csv);
  check_csv_shape(csv.str(), "x1,x2,feasible,blocking_mask", 21 * 21);
}
