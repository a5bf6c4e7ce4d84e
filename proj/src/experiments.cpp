#include "cbpoison/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "cbpoison/attack.hpp"
#include "cbpoison/datagen.hpp"
#include "cbpoison/error.hpp"

namespace cbpoison {

namespace {

constexpr std::uint64_t kToyStream = 0x546f;
constexpr std::uint64_t kSweepStream = 0x5377;
constexpr std::uint64_t kTargetStream = 0x5461;
constexpr std::uint64_t kSampleStream = 0x536d;
constexpr std::uint64_t kPoolStream = 0x506f;
constexpr std::uint64_t kClickTruthStream = 0x4374;
constexpr std::uint64_t kVisitStream = 0x5669;

struct AttackedInstance {
  History history;
  AttackSpec spec;
  AttackResult result;
};

// Regenerates arms, history and target from one trial seed and attacks the
// worst arm at the target.
AttackedInstance attack_synthetic(const ExperimentConfig& c, int K, int d, std::uint64_t seed) {
  SynthSpec synth;
  synth.d = d;
  synth.K = K;
  synth.n = c.n;
  synth.sigma = c.sigma;
  synth.seed = seed;
  const GroundTruth truth = sample_ground_truth(synth);
  AttackedInstance out{log_history(truth, synth), {}, {}};
  Rng rng = make_stream(seed, kTargetStream);
  out.spec.target_context = sample_sphere_point(d, rng);
  out.spec.epsilon = c.epsilon;
  const BanditConfig bandit = c.bandit();
  out.spec.target_arm = worst_arm(out.history, bandit, out.spec.target_context);
  out.result = strong_attack(out.history, bandit, out.spec);
  return out;
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
void write_optional(std::ostream& os, const std::optional<T>& v) {
  if (v) os << *v;
}

}  // namespace

BanditConfig ExperimentConfig::bandit() const {
  BanditConfig b;
  b.lambda = lambda;
  b.delta = delta;
  b.sigma = sigma;
  b.s_bound = s_bound;
  b.width_variant = width;
  return b;
}

void ExperimentConfig::validate() const {
  const auto names = experiment_names();
  require(std::find(names.begin(), names.end(), experiment) != names.end(), "unknown experiment '" + experiment + "'");
  require(threads >= 0, "threads must be nonnegative");
  bandit().validate();
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be nonnegative");
  require(!output_dir.empty(), "output directory must not be empty");
  if (experiment == "feasibility-scan") {
    require(!presets.empty(), "feasibility-scan needs at least one preset");
    const auto known = preset_names();
    for (const auto& p : presets)
      if (std::find(known.begin(), known.end(), p) == known.end())
        throw Error(Errc::unknown_preset, "unknown preset '" + p + "'");
    require(!epsilons.empty(), "feasibility-scan needs at least one epsilon");
    for (double e : epsilons) require(std::isfinite(e) && e > 0.0, "scan epsilons must be positive");
    require(resolution >= 1, "resolution must be positive");
    require(std::isfinite(extent) && extent > 0.0, "extent must be positive");
    return;
  }
  require(trials >= 1, "trials must be at least 1");
  require(n >= 0, "n must be nonnegative");
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  if (experiment == "side-effect") {
    require(!cells.empty(), "side-effect needs at least one (K, d) cell");
    for (const auto& [k, dim] : cells) require(k >= 2 && dim >= 1, "side-effect cells need K >= 2 and d >= 1");
    require(samples >= 1, "samples must be at least 1");
    return;
  }
  require(K >= 2, "K must be at least 2");
  require(d >= 1, "d must be at least 1");
  if (experiment == "binary-attack") {
    require(pool_size >= 1, "pool_size must be at least 1");
    require(test_visits >= 1, "test_visits must be at least 1");
    require(std::isfinite(popularity_exponent) && popularity_exponent >= 0.0, "popularity_exponent must be nonnegative");
    require(threshold_count >= 1, "threshold_count must be at least 1");
    require(std::isfinite(click_offset) && std::isfinite(click_scale), "click model must be finite");
  }
}

std::vector<std::string> experiment_names() { return {"toy-attack", "side-effect", "binary-attack", "feasibility-scan"}; }

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "toy-attack") return c;
  if (experiment == "side-effect") {
    c.n = 2000;
    c.trials = 50;
    c.cells = {{5, 2}, {5, 20}, {5, 200}, {2, 2}, {20, 2}, {200, 2}};
    return c;
  }
  if (experiment == "binary-attack") {
    c.n = 8000;
    c.K = 20;
    c.d = 6;
    c.sigma = 0.25;
    c.trials = 1;
    return c;
  }
  if (experiment == "feasibility-scan") {
    c.sigma = 1.0;
    c.s_bound = 1.0;
    c.lambda = 1.0;
    c.epsilon = 1.0;
    c.trials = 1;
    c.presets = preset_names();
    c.epsilons = {1.0, 0.5, 0.1};
    return c;
  }
  throw Error(Errc::invalid_argument, "unknown experiment '" + experiment + "'");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  auto cells = nlohmann::json::array();
  for (const auto& [k, d] : c.cells) cells.push_back({k, d});
  j = {{"experiment", c.experiment},
       {"seed", c.seed},
       {"threads", c.threads},
       {"d", c.d},
       {"K", c.K},
       {"n", c.n},
       {"sigma", c.sigma},
       {"lambda", c.lambda},
       {"delta", c.delta},
       {"s_bound", c.s_bound},
       {"width_variant", to_string(c.width)},
       {"epsilon", c.epsilon},
       {"trials", c.trials},
       {"cells", cells},
       {"samples", c.samples},
       {"pool_size", c.pool_size},
       {"test_visits", c.test_visits},
       {"popularity_exponent", c.popularity_exponent},
       {"threshold_count", c.threshold_count},
       {"click_offset", c.click_offset},
       {"click_scale", c.click_scale},
       {"presets", c.presets},
       {"epsilons", c.epsilons},
       {"resolution", c.resolution},
       {"extent", c.extent},
       {"output_dir", c.output_dir}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  require(j.is_object(), "experiment config must be a JSON object");
  c = default_config(j.value("experiment", c.experiment));
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.d = j.value("d", c.d);
  c.K = j.value("K", c.K);
  c.n = j.value("n", c.n);
  c.sigma = j.value("sigma", c.sigma);
  c.lambda = j.value("lambda", c.lambda);
  c.delta = j.value("delta", c.delta);
  c.s_bound = j.value("s_bound", c.s_bound);
  if (j.contains("width_variant")) c.width = width_variant_from_string(j.at("width_variant").get<std::string>());
  c.epsilon = j.value("epsilon", c.epsilon);
  c.trials = j.value("trials", c.trials);
  if (j.contains("cells")) {
    c.cells.clear();
    for (const auto& cell : j.at("cells")) {
      require(cell.is_array() && cell.size() == 2, "each cell is a [K, d] pair");
      c.cells.emplace_back(cell[0].get<int>(), cell[1].get<int>());
    }
  }
  c.samples = j.value("samples", c.samples);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.test_visits = j.value("test_visits", c.test_visits);
  c.popularity_exponent = j.value("popularity_exponent", c.popularity_exponent);
  c.threshold_count = j.value("threshold_count", c.threshold_count);
  c.click_offset = j.value("click_offset", c.click_offset);
  c.click_scale = j.value("click_scale", c.click_scale);
  if (j.contains("presets")) c.presets = j.at("presets").get<std::vector<std::string>>();
  if (j.contains("epsilons")) c.epsilons = j.at("epsilons").get<std::vector<double>>();
  c.resolution = j.value("resolution", c.resolution);
  c.extent = j.value("extent", c.extent);
  c.output_dir = j.value("output_dir", c.output_dir);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

ToyReport run_toy_attack(const ExperimentConfig& config) {
  config.validate();
  ToyReport report;
  report.config = config;
  report.trials.resize(static_cast<std::size_t>(config.trials));
  parallel_for(config.trials, config.threads, [&](int t) {
    ToyTrial& trial = report.trials[static_cast<std::size_t>(t)];
    trial.trial = t;
    trial.seed = derive_seed(config.seed, kToyStream, static_cast<std::uint64_t>(t));
    try {
      const AttackedInstance inst = attack_synthetic(config, config.K, config.d, trial.seed);
      trial.target_arm = inst.spec.target_arm;
      trial.status = to_string(inst.result.status);
      trial.verified = inst.result.verified;
      trial.effort_ratio = inst.result.effort_ratio;
      trial.margin = inst.result.achieved_margin;
      trial.objective = inst.result.objective;
    } catch (const std::exception& e) {
      trial.status = "Error";
      trial.error = e.what();
    }
  });
  int successes = 0;
  std::vector<double> efforts;
  for (const auto& t : report.trials) {
    if (t.verified) ++successes;
    if (t.verified && t.effort_ratio) efforts.push_back(*t.effort_ratio);
  }
  report.success_rate = static_cast<double>(successes) / config.trials;
  report.effort_median = median(efforts);
  return report;
}

void ToyReport::write_csv(std::ostream& os) const {
  os << "trial,seed,target_arm,status,verified,effort_ratio,margin,objective\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& t : trials) {
    os << t.trial << ',' << t.seed << ',' << t.target_arm << ',' << t.status << ',' << (t.verified ? 1 : 0) << ',';
    write_optional(os, t.effort_ratio);
    os << ',';
    write_optional(os, t.margin);
    os << ',' << t.objective << '\n';
  }
}

SweepReport run_side_effect_sweep(const ExperimentConfig& config) {
  config.validate();
  SweepReport report;
  report.config = config;
  const int per_cell = config.trials;
  const int total = static_cast<int>(config.cells.size()) * per_cell;
  report.trials.resize(static_cast<std::size_t>(total));
  parallel_for(total, config.threads, [&](int idx) {
    const auto& [K, d] = config.cells[static_cast<std::size_t>(idx / per_cell)];
    SweepTrial& trial = report.trials[static_cast<std::size_t>(idx)];
    trial.K = K;
    trial.d = d;
    trial.trial = idx % per_cell;
    // Seeds depend on (K, d, trial) only, so reordering cells changes nothing.
    const std::uint64_t cell_seed =
        derive_seed(config.seed, kSweepStream, (static_cast<std::uint64_t>(K) << 32) | static_cast<std::uint32_t>(d));
    trial.seed = derive_seed(cell_seed, kSweepStream, static_cast<std::uint64_t>(trial.trial));
    try {
      const AttackedInstance inst = attack_synthetic(config, K, d, trial.seed);
      trial.status = to_string(inst.result.status);
      if (inst.result.status != QPStatus::Optimal) return;
      const History post = apply_deltas(inst.history, inst.result.deltas);
      const auto fx = side_effect(inst.history, post, config.bandit(), sphere_sampler(d), config.samples,
                                  derive_seed(trial.seed, kSampleStream));
      trial.fraction_hat = fx.fraction_hat;
    } catch (const std::exception& e) {
      trial.status = "Error";
      trial.error = e.what();
    }
  });
  for (std::size_t c = 0; c < config.cells.size(); ++c) {
    SweepCell cell;
    cell.K = config.cells[c].first;
    cell.d = config.cells[c].second;
    std::vector<double> values;
    for (int t = 0; t < per_cell; ++t) {
      const auto& trial = report.trials[c * static_cast<std::size_t>(per_cell) + static_cast<std::size_t>(t)];
      if (trial.fraction_hat) values.push_back(*trial.fraction_hat);
    }
    cell.completed = static_cast<int>(values.size());
    cell.median = median(values);
    report.cells.push_back(cell);
  }
  return report;
}

void SweepReport::write_csv(std::ostream& os) const {
  os << "K,d,trial,seed,status,fraction_hat\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& t : trials) {
    os << t.K << ',' << t.d << ',' << t.trial << ',' << t.seed << ',' << t.status << ',';
    write_optional(os, t.fraction_hat);
    os << '\n';
  }
}

BinaryReport run_binary_attack(const ExperimentConfig& config) {
  config.validate();
  BinaryReport report;
  report.config = config;

  // A finite pool of nonnegative unit contexts visited with power-law
  // popularity, so that "most frequent user" is meaningful.
  Rng pool_rng = make_stream(config.seed, kPoolStream);
  Eigen::MatrixXd pool(config.pool_size, config.d);
  for (int i = 0; i < config.pool_size; ++i) pool.row(i) = sample_sphere_point(config.d, pool_rng).cwiseAbs().transpose();
  Eigen::VectorXd weights(config.pool_size);
  for (int i = 0; i < config.pool_size; ++i) weights(i) = std::pow(static_cast<double>(i + 1), -config.popularity_exponent);

  Rng truth_rng = make_stream(config.seed, kClickTruthStream);
  const GroundTruth truth = sample_ground_truth(config.d, config.K, config.sigma, truth_rng, config.click_scale);
  SynthSpec synth;
  synth.d = config.d;
  synth.K = config.K;
  synth.n = config.n;
  synth.sigma = config.sigma;
  synth.seed = config.seed;
  synth.reward_mode = RewardMode::BernoulliClick;
  synth.click_offset = config.click_offset;
  const History history = log_binary_history(truth, synth, pool_sampler(pool, weights));
  report.history_size = static_cast<int>(history.total_samples());
  double clicks = 0.0;
  for (const auto& arm : history.arms) clicks += arm.rewards.sum();
  report.click_rate = report.history_size > 0 ? clicks / report.history_size : 0.0;

  Rng visit_rng = make_stream(config.seed, kVisitStream);
  std::discrete_distribution<int> visit(weights.data(), weights.data() + weights.size());
  std::vector<int> counts(static_cast<std::size_t>(config.pool_size), 0);
  for (int v = 0; v < config.test_visits; ++v) ++counts[static_cast<std::size_t>(visit(visit_rng))];
  std::vector<int> seen;
  for (int i = 0; i < config.pool_size; ++i)
    if (counts[static_cast<std::size_t>(i)] > 0) seen.push_back(i);
  std::stable_sort(seen.begin(), seen.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });
  const std::vector<std::pair<std::string, int>> picks = {
      {"most", seen.front()}, {"median", seen[seen.size() / 2]}, {"least", seen.back()}};

  const BanditConfig bandit = config.bandit();
  const std::vector<double> thresholds = uniform_thresholds(config.threshold_count);
  report.targets.resize(picks.size());
  parallel_for(static_cast<int>(picks.size()), config.threads, [&](int k) {
    BinaryTarget& target = report.targets[static_cast<std::size_t>(k)];
    target.label = picks[static_cast<std::size_t>(k)].first;
    target.pool_index = picks[static_cast<std::size_t>(k)].second;
    target.visits = counts[static_cast<std::size_t>(target.pool_index)];
    try {
      AttackSpec spec;
      spec.target_context = pool.row(target.pool_index).transpose();
      spec.epsilon = config.epsilon;
      spec.reward_box = RewardBox{0.0, 1.0};
      spec.target_arm = worst_arm(history, bandit, spec.target_context);
      target.target_arm = spec.target_arm;
      const AttackResult relaxed = strong_attack(history, bandit, spec);
      target.status = to_string(relaxed.status);
      target.relaxed_effort = relaxed.effort_ratio;
      if (relaxed.status != QPStatus::Optimal) return;
      const RoundingResult rounded = round_binary(history, bandit, spec, relaxed, thresholds);
      target.threshold = rounded.threshold;
      target.flipped = rounded.flipped;
      target.flipped_fraction = report.history_size > 0 ? static_cast<double>(rounded.flipped) / report.history_size : 0.0;
      if (clicks > 0.0) target.rounded_effort = effort_ratio(rounded.deltas, history);
      target.rounded_margin = attack_margin(rounded.rounded, bandit, spec.target_context, spec.target_arm);
      target.target_selected = select_arm(rounded.rounded, bandit, spec.target_context).arm == spec.target_arm;
    } catch (const std::exception& e) {
      target.status = "Error";
      target.error = e.what();
    }
  });
  return report;
}

void BinaryReport::write_csv(std::ostream& os) const {
  os << "label,pool_index,visits,target_arm,status,threshold,flipped,flipped_fraction,relaxed_effort,rounded_effort,"
        "rounded_margin,target_selected\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& t : targets) {
    os << t.label << ',' << t.pool_index << ',' << t.visits << ',' << t.target_arm << ',' << t.status << ',';
    write_optional(os, t.threshold);
    os << ',';
    write_optional(os, t.flipped);
    os << ',';
    write_optional(os, t.flipped_fraction);
    os << ',';
    write_optional(os, t.relaxed_effort);
    os << ',';
    write_optional(os, t.rounded_effort);
    os << ',';
    write_optional(os, t.rounded_margin);
    os << ',' << (t.target_selected ? 1 : 0) << '\n';
  }
}

ScanReport run_feasibility_scan(const ExperimentConfig& config) {
  config.validate();
  ScanReport report;
  report.config = config;
  for (const auto& p : config.presets)
    for (double e : config.epsilons) report.scans.push_back({p, e, {}, 0});
  const BanditConfig bandit = config.bandit();
  const ScanPlane plane = preset_plane(config.extent, config.resolution);
  parallel_for(static_cast<int>(report.scans.size()), config.threads, [&](int i) {
    PresetScan& s = report.scans[static_cast<std::size_t>(i)];
    s.scan = infeasible_region_scan(preset_history(s.preset), bandit, kPresetTargetArm, plane, s.epsilon);
    s.blocked = static_cast<int>(std::count_if(s.scan.points.begin(), s.scan.points.end(),
                                               [](const ScanPoint& p) { return !p.feasible; }));
  });
  return report;
}

void to_json(nlohmann::json& j, const ToyReport& r) {
  auto trials = nlohmann::json::array();
  for (const auto& t : r.trials)
    trials.push_back({{"trial", t.trial},
                      {"seed", t.seed},
                      {"target_arm", t.target_arm},
                      {"status", t.status},
                      {"verified", t.verified},
                      {"effort_ratio", optional_json(t.effort_ratio)},
                      {"margin", optional_json(t.margin)},
                      {"objective", t.objective},
                      {"error", t.error}});
  j = {{"experiment", r.config.experiment},
       {"seed", r.config.seed},
       {"config", r.config},
       {"success_rate", r.success_rate},
       {"effort_median", std::isnan(r.effort_median) ? nlohmann::json(nullptr) : nlohmann::json(r.effort_median)},
       {"trials", trials}};
}

void to_json(nlohmann::json& j, const SweepReport& r) {
  auto cells = nlohmann::json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"K", c.K},
                     {"d", c.d},
                     {"completed", c.completed},
                     {"median", std::isnan(c.median) ? nlohmann::json(nullptr) : nlohmann::json(c.median)}});
  auto trials = nlohmann::json::array();
  for (const auto& t : r.trials)
    trials.push_back({{"K", t.K},
                      {"d", t.d},
                      {"trial", t.trial},
                      {"seed", t.seed},
                      {"status", t.status},
                      {"fraction_hat", optional_json(t.fraction_hat)},
                      {"error", t.error}});
  j = {{"experiment", r.config.experiment}, {"seed", r.config.seed}, {"config", r.config},
       {"cells", cells},                    {"trials", trials}};
}

void to_json(nlohmann::json& j, const BinaryReport& r) {
  auto targets = nlohmann::json::array();
  for (const auto& t : r.targets)
    targets.push_back({{"label", t.label},
                       {"pool_index", t.pool_index},
                       {"visits", t.visits},
                       {"target_arm", t.target_arm},
                       {"status", t.status},
                       {"relaxed_effort", optional_json(t.relaxed_effort)},
                       {"threshold", optional_json(t.threshold)},
                       {"flipped", optional_json(t.flipped)},
                       {"flipped_fraction", optional_json(t.flipped_fraction)},
                       {"rounded_effort", optional_json(t.rounded_effort)},
                       {"rounded_margin", optional_json(t.rounded_margin)},
                       {"target_selected", t.target_selected},
                       {"error", t.error}});
  j = {{"experiment", r.config.experiment}, {"seed", r.config.seed},
       {"config", r.config},                {"history_size", r.history_size},
       {"click_rate", r.click_rate},        {"targets", targets}};
}

void to_json(nlohmann::json& j, const ScanReport& r) {
  auto scans = nlohmann::json::array();
  for (const auto& s : r.scans) {
    const auto origin = std::find_if(s.scan.points.begin(), s.scan.points.end(),
                                     [](const ScanPoint& p) { return p.s == 0.0 && p.t == 0.0; });
    scans.push_back({{"preset", s.preset},
                     {"epsilon", s.epsilon},
                     {"points", s.scan.points.size()},
                     {"blocked", s.blocked},
                     {"origin_feasible", origin == s.scan.points.end() ? nlohmann::json(nullptr)
                                                                       : nlohmann::json(origin->feasible)}});
  }
  j = {{"experiment", r.config.experiment}, {"seed", r.config.seed}, {"config", r.config}, {"scans", scans}};
}

}  // namespace cbpoison
