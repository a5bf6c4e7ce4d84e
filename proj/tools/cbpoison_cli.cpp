// Command-line front end: experiment runners and a one-shot attack.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbpoison/attack.hpp"
#include "cbpoison/error.hpp"
#include "cbpoison/experiments.hpp"

namespace fs = std::filesystem;
using namespace cbpoison;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr const char* kOutEnv = "CBPOISON_OUT_DIR";

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot write '" + path.string() + "'");
  out << text;
}

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "master seed (overrides the config)");
  sub->add_option("--out", f.out_dir, "output directory (overrides " + std::string(kOutEnv) + " and the config)");
  sub->add_option("--threads", f.threads, "worker threads, 0 for all cores");
}

// Output directory precedence: --out, then the environment, then the config.
ExperimentConfig resolve(const std::string& experiment, const CommonFlags& f) {
  ExperimentConfig c = default_config(experiment);
  if (!f.config_path.empty()) {
    nlohmann::json j = read_json(f.config_path);
    require(j.is_object(), "experiment config must be a JSON object");
    if (j.contains("config") && j.at("config").is_object()) j = j.at("config");  // a previous report
    if (j.contains("experiment"))
      require(j.at("experiment") == experiment, "config is for '" + j.at("experiment").get<std::string>() + "'");
    j["experiment"] = experiment;
    c = j.get<ExperimentConfig>();
  }
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (!f.out_dir.empty())
    c.output_dir = f.out_dir;
  else if (const char* env = std::getenv(kOutEnv); env && *env)
    c.output_dir = env;
  c.validate();
  return c;
}

fs::path prepare_dir(const ExperimentConfig& c) {
  fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

template <typename Report>
fs::path write_report(const fs::path& dir, const std::string& stem, const Report& report) {
  const fs::path json_path = dir / (stem + ".json");
  write_text(json_path, nlohmann::json(report).dump(2) + "\n");
  return json_path;
}

std::string epsilon_tag(double e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

int run_toy(const CommonFlags& f) {
  const ExperimentConfig c = resolve("toy-attack", f);
  const ToyReport r = run_toy_attack(c);
  const fs::path dir = prepare_dir(c);
  write_report(dir, "toy_attack", r);
  std::ostringstream csv;
  r.write_csv(csv);
  write_text(dir / "toy_attack_trials.csv", csv.str());
  std::cout << "toy-attack: success_rate=" << r.success_rate << " effort_median=" << r.effort_median << " -> "
            << dir.string() << "\n";
  return kExitOk;
}

int run_sweep(const CommonFlags& f) {
  const ExperimentConfig c = resolve("side-effect", f);
  const SweepReport r = run_side_effect_sweep(c);
  const fs::path dir = prepare_dir(c);
  write_report(dir, "side_effect", r);
  std::ostringstream csv;
  r.write_csv(csv);
  write_text(dir / "side_effect_trials.csv", csv.str());
  for (const auto& cell : r.cells)
    std::cout << "side-effect: K=" << cell.K << " d=" << cell.d << " median=" << cell.median << " (" << cell.completed
              << " trials)\n";
  return kExitOk;
}

int run_binary(const CommonFlags& f) {
  const ExperimentConfig c = resolve("binary-attack", f);
  const BinaryReport r = run_binary_attack(c);
  const fs::path dir = prepare_dir(c);
  write_report(dir, "binary_attack", r);
  std::ostringstream csv;
  r.write_csv(csv);
  write_text(dir / "binary_attack_targets.csv", csv.str());
  for (const auto& t : r.targets) {
    std::cout << "binary-attack: " << t.label << " user (pool " << t.pool_index << ", " << t.visits
              << " visits) arm=" << t.target_arm << " status=" << t.status;
    if (t.flipped) std::cout << " flipped=" << *t.flipped << " threshold=" << *t.threshold;
    std::cout << " selected=" << (t.target_selected ? "yes" : "no");
    if (!t.error.empty()) std::cout << " error=\"" << t.error << "\"";
    std::cout << "\n";
  }
  return kExitOk;
}

int run_scan(const CommonFlags& f) {
  const ExperimentConfig c = resolve("feasibility-scan", f);
  const ScanReport r = run_feasibility_scan(c);
  const fs::path dir = prepare_dir(c);
  write_report(dir, "feasibility_scan", r);
  for (const auto& s : r.scans) {
    std::ostringstream csv;
    s.scan.write_csv(csv);
    const std::string name = "scan_" + s.preset + "_eps" + epsilon_tag(s.epsilon) + ".csv";
    write_text(dir / name, csv.str());
    std::cout << "feasibility-scan: " << s.preset << " eps=" << s.epsilon << " blocked=" << s.blocked << "/"
              << s.scan.points.size() << " -> " << name << "\n";
  }
  return kExitOk;
}

struct AttackFlags {
  std::string history_path;
  std::string spec_path;
  std::string config_path;
  std::string out_dir;
};

int run_one_shot(const AttackFlags& f) {
  const History history = read_json(f.history_path).get<History>();
  const AttackSpec spec = read_json(f.spec_path).get<AttackSpec>();
  BanditConfig config;
  if (!f.config_path.empty()) config = read_json(f.config_path).get<BanditConfig>();
  config.validate();
  history.validate();
  spec.validate(history);
  const AttackResult result = strong_attack(history, config, spec);
  const std::string text = nlohmann::json(result).dump(2) + "\n";
  std::string out_dir = f.out_dir;
  if (out_dir.empty())
    if (const char* env = std::getenv(kOutEnv); env && *env) out_dir = env;
  if (out_dir.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "attack_result.json", text);
    std::cout << "attack: status=" << to_string(result.status) << " -> " << out_dir << "\n";
  }
  if (result.status == QPStatus::Infeasible) return kExitInfeasible;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-poisoning attacks on linear contextual bandits"};
  app.require_subcommand(1);

  CommonFlags toy, sweep, binary, scan;
  add_common(app.add_subcommand("toy-attack", "minimal strong attacks on synthetic Gaussian data"), toy);
  add_common(app.add_subcommand("side-effect", "side-effect fraction sweep over (K, d) cells"), sweep);
  add_common(app.add_subcommand("binary-attack", "boxed attack plus threshold rounding on click data"), binary);
  add_common(app.add_subcommand("feasibility-scan", "infeasible-region grids over the bundled presets"), scan);

  AttackFlags one;
  auto* attack = app.add_subcommand("attack", "attack one history: history JSON + spec JSON -> result JSON");
  attack->add_option("--history", one.history_path, "history JSON")->required()->check(CLI::ExistingFile);
  attack->add_option("--spec", one.spec_path, "attack spec JSON")->required()->check(CLI::ExistingFile);
  attack->add_option("--config", one.config_path, "bandit config JSON")->check(CLI::ExistingFile);
  attack->add_option("--out", one.out_dir, "write attack_result.json here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "toy-attack") return run_toy(toy);
    if (name == "side-effect") return run_sweep(sweep);
    if (name == "binary-attack") return run_binary(binary);
    if (name == "feasibility-scan") return run_scan(scan);
    return run_one_shot(one);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
