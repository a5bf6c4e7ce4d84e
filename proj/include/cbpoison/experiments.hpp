#pragma once

// Seeded experiment runners behind the CLI. Every report carries the fully
// resolved config, so feeding a report's "config" back in reproduces it.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbpoison/analysis.hpp"
#include "cbpoison/bandit.hpp"

namespace cbpoison {

struct ExperimentConfig {
  std::string experiment = "toy-attack";
  std::uint64_t seed = 0;
  int threads = 0;  // 0 picks the hardware concurrency

  // Data and victim.
  int d = 10;
  int K = 5;
  int n = 1000;
  double sigma = 0.1;  // reward noise, also the victim's sigma
  double lambda = 1.0;
  double delta = 0.05;
  double s_bound = 1.0;
  WidthVariant width = WidthVariant::OFUL;
  double epsilon = 1e-3;
  int trials = 100;

  // side-effect
  std::vector<std::pair<int, int>> cells;  // (K, d)
  int samples = 1000;

  // binary-attack
  int pool_size = 50;
  int test_visits = 2000;
  double popularity_exponent = 1.0;
  int threshold_count = 10000;
  double click_offset = 0.05;
  double click_scale = 0.2;

  // feasibility-scan
  std::vector<std::string> presets;
  std::vector<double> epsilons;
  int resolution = 201;
  double extent = 12.0;

  std::string output_dir = "out";

  BanditConfig bandit() const;
  void validate() const;
};

std::vector<std::string> experiment_names();
/// Defaults for one experiment id; Errc::invalid_argument for unknown ids.
ExperimentConfig default_config(const std::string& experiment);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Starts from default_config(j["experiment"]) and overrides the keys present.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; results must be written to per-index slots.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

/// Middle value (mean of the two middle values for even sizes); NaN when empty.
double median(std::vector<double> values);

struct ToyTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  int target_arm = 0;
  std::string status;
  bool verified = false;
  std::optional<double> effort_ratio;
  std::optional<double> margin;
  double objective = 0.0;
  std::string error;
};

struct ToyReport {
  ExperimentConfig config;
  std::vector<ToyTrial> trials;
  double success_rate = 0.0;
  double effort_median = 0.0;

  void write_csv(std::ostream& os) const;
};

ToyReport run_toy_attack(const ExperimentConfig& config);

struct SweepTrial {
  int K = 0;
  int d = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string status;
  std::optional<double> fraction_hat;
  std::string error;
};

struct SweepCell {
  int K = 0;
  int d = 0;
  double median = 0.0;
  int completed = 0;
};

struct SweepReport {
  ExperimentConfig config;
  std::vector<SweepCell> cells;
  std::vector<SweepTrial> trials;  // cell-major, then trial index

  void write_csv(std::ostream& os) const;
};

SweepReport run_side_effect_sweep(const ExperimentConfig& config);

struct BinaryTarget {
  std::string label;  // most, median or least frequent
  int pool_index = 0;
  int visits = 0;
  int target_arm = 0;
  std::string status;
  std::optional<double> relaxed_effort;
  std::optional<double> threshold;
  std::optional<int> flipped;
  std::optional<double> flipped_fraction;
  std::optional<double> rounded_effort;
  std::optional<double> rounded_margin;
  bool target_selected = false;
  std::string error;
};

struct BinaryReport {
  ExperimentConfig config;
  int history_size = 0;
  double click_rate = 0.0;
  std::vector<BinaryTarget> targets;

  void write_csv(std::ostream& os) const;
};

BinaryReport run_binary_attack(const ExperimentConfig& config);

struct PresetScan {
  std::string preset;
  double epsilon = 0.0;
  RegionScan scan;
  int blocked = 0;
};

struct ScanReport {
  ExperimentConfig config;
  std::vector<PresetScan> scans;
};

ScanReport run_feasibility_scan(const ExperimentConfig& config);

void to_json(nlohmann::json& j, const ToyReport& r);
void to_json(nlohmann::json& j, const SweepReport& r);
void to_json(nlohmann::json& j, const BinaryReport& r);
/// Summary only; the grids go to CSV.
void to_json(nlohmann::json& j, const ScanReport& r);

}  // namespace cbpoison
