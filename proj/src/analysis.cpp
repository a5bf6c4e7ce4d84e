#include "cbpoison/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

#include "cbpoison/error.hpp"

namespace cbpoison {

namespace {

constexpr std::uint64_t kSideEffectStream = 0x5345;

FeasibilityVerdict evaluate_oracle(const History& history, std::span<const ArmPosterior> posteriors, int target,
                                   const Eigen::VectorXd& x, double epsilon) {
  const auto ut = static_cast<std::size_t>(target);
  FeasibilityVerdict verdict;
  const bool target_null = in_null_space(history.arms[ut].contexts, x);
  const double lhs = posteriors[ut].width * posteriors[ut].confidence_norm(x);
  for (int a = 0; a < history.num_arms(); ++a) {
    if (a == target) continue;
    const auto ua = static_cast<std::size_t>(a);
    ArmBlockDetail d;
    d.arm = a;
    d.target_null = target_null;
    d.arm_null = in_null_space(history.arms[ua].contexts, x);
    d.width_lhs = lhs;
    d.width_rhs = epsilon + posteriors[ua].width * posteriors[ua].confidence_norm(x);
    d.blocking = d.target_null && d.arm_null && d.width_lhs < d.width_rhs;
    if (d.blocking) verdict.blocking_arms.push_back(a);
    verdict.details.push_back(d);
  }
  verdict.feasible = verdict.blocking_arms.empty();
  return verdict;
}

}  // namespace

std::uint64_t FeasibilityVerdict::blocking_mask() const {
  std::uint64_t mask = 0;
  for (int a : blocking_arms) {
    require(a < 64, "blocking mask holds at most 64 arms");
    mask |= std::uint64_t{1} << a;
  }
  return mask;
}

FeasibilityVerdict feasibility_oracle(const History& history, const BanditConfig& config, const AttackSpec& spec) {
  spec.validate(history);
  const auto posteriors = fit_arms(history, config);
  return evaluate_oracle(history, posteriors, spec.target_arm, spec.target_context, spec.epsilon);
}

std::string to_string(WitnessBranch b) {
  switch (b) {
    case WitnessBranch::TargetLeverage:
      return "TargetLeverage";
    case WitnessBranch::NonTargetLeverage:
      return "NonTargetLeverage";
    case WitnessBranch::ZeroRewards:
      return "ZeroRewards";
  }
  return "Unknown";
}

Witness construct_witness(const History& history, const BanditConfig& config, const AttackSpec& spec) {
  const FeasibilityVerdict verdict = feasibility_oracle(history, config, spec);
  if (!verdict.feasible)
    throw Error(Errc::witness_unavailable, "target context cannot be strongly attacked; no witness exists");

  const AttackConstraints cons = build_constraints(history, config, spec);
  const int t = spec.target_arm;
  const Eigen::VectorXd& p = cons.weights[static_cast<std::size_t>(t)];
  Witness w;
  w.deltas = zero_deltas(history);

  const double p2 = p.squaredNorm();
  if (p2 > 0.0) {
    // Raising the target's rewards along p lifts its score by k ||p||^2
    // without touching any other arm.
    double k = 0.0;
    for (Eigen::Index r = 0; r < cons.h_vector.size(); ++r) k = std::max(k, cons.h_vector(r) / p2);
    w.branch = WitnessBranch::TargetLeverage;
    w.scale = k;
    w.deltas[static_cast<std::size_t>(t)] = k * p;
    return w;
  }

  bool widths_suffice = true;
  for (const auto& d : verdict.details)
    if (d.width_lhs < d.width_rhs) widths_suffice = false;
  if (widths_suffice) {
    w.branch = WitnessBranch::ZeroRewards;
    for (std::size_t a = 0; a < history.arms.size(); ++a) w.deltas[a] = -history.arms[a].rewards;
    return w;
  }

  w.branch = WitnessBranch::NonTargetLeverage;
  for (Eigen::Index r = 0; r < cons.h_vector.size(); ++r) {
    const double need = cons.h_vector(r);
    if (need <= 0.0) continue;
    const auto ua = static_cast<std::size_t>(cons.row_arm[static_cast<std::size_t>(r)]);
    const Eigen::VectorXd& wa = cons.weights[ua];
    // Feasibility guarantees wa != 0 for every row that still needs lifting.
    const double k = need / wa.squaredNorm();
    w.scale = std::max(w.scale, k);
    w.deltas[ua] = -k * wa;
  }
  return w;
}

SideEffectReport side_effect(const History& pre, const History& post, const BanditConfig& config,
                             const ContextSampler& contexts, int m, std::uint64_t seed, bool keep_samples) {
  require(m >= 1, "side-effect estimate needs at least one sample");
  require(pre.dim == post.dim && pre.num_arms() == post.num_arms(), "pre and post histories differ in shape",
          Errc::dimension_mismatch);
  const auto before = fit_arms(pre, config);
  const auto after = fit_arms(post, config);
  SideEffectReport report;
  report.sample_count = m;
  for (int i = 0; i < m; ++i) {
    Rng rng = make_stream(seed, kSideEffectStream, static_cast<std::uint64_t>(i));
    Eigen::VectorXd x = contexts(rng);
    const int a = select_arm(before, x).arm;
    const int b = select_arm(after, x).arm;
    if (a != b) ++report.changed;
    if (keep_samples) report.samples.push_back({std::move(x), a, b});
  }
  report.fraction_hat = static_cast<double>(report.changed) / m;
  return report;
}

Eigen::VectorXd margin_functions(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x, int target_arm) {
  const Eigen::VectorXd scores = select_arm(posteriors, x).scores;
  return (scores(target_arm) - scores.array()).matrix();
}

RayCheck ray_property_check(const History& pre, const History& post, const BanditConfig& config,
                            const Eigen::VectorXd& x, int target_arm, double epsilon,
                            std::span<const double> same_arm_scales, std::span<const double> margin_scales) {
  require(target_arm >= 0 && target_arm < post.num_arms(), "target arm out of range");
  const auto before = fit_arms(pre, config);
  const auto after = fit_arms(post, config);
  const int a_x = select_arm(before, x).arm;
  const int post_x = select_arm(after, x).arm;

  RayCheck out;
  auto fail = [&](double c, std::string what) {
    out.passed = false;
    out.falsifying_scale = c;
    out.violation = std::move(what);
    return out;
  };
  for (const double c : same_arm_scales) {
    require(c > 0.0, "same-arm checks need c > 0");
    const Eigen::VectorXd cx = c * x;
    if (select_arm(before, cx).arm != a_x) return fail(c, "pre-attack arm changed along the ray");
    if (select_arm(after, cx).arm != post_x) return fail(c, "post-attack arm changed along the ray");
  }
  const double margin_x = attack_margin(after, x, target_arm);
  for (const double c : margin_scales) {
    require(c >= 1.0, "margin checks need c >= 1");
    if (margin_x < epsilon) continue;
    if (attack_margin(after, c * x, target_arm) < epsilon) return fail(c, "strong-attack margin lost along the ray");
  }
  return out;
}

double ScanPlane::coordinate(int i) const {
  if (resolution <= 1) return lo;
  return lo + (hi - lo) * (static_cast<double>(i) / (resolution - 1));
}

Eigen::VectorXd ScanPlane::point(double s, double t) const { return origin + s * u + t * v; }

void RegionScan::write_csv(std::ostream& os) const {
  os << "x1,x2,feasible,blocking_mask\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : points) os << p.s << ',' << p.t << ',' << (p.feasible ? 1 : 0) << ',' << p.blocking_mask << '\n';
}

RegionScan infeasible_region_scan(const History& history, const BanditConfig& config, int target_arm,
                                  const ScanPlane& plane, double epsilon) {
  history.validate();
  require(history.num_arms() <= 64, "region scans support at most 64 arms");
  require(target_arm >= 0 && target_arm < history.num_arms(), "target arm out of range");
  require(plane.resolution >= 1, "scan resolution must be positive");
  require(plane.origin.size() == history.dim && plane.u.size() == history.dim && plane.v.size() == history.dim,
          "scan plane dimension mismatch", Errc::dimension_mismatch);
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  const auto posteriors = fit_arms(history, config);

  RegionScan scan;
  scan.epsilon = epsilon;
  scan.target_arm = target_arm;
  scan.resolution = plane.resolution;
  scan.points.reserve(static_cast<std::size_t>(plane.resolution) * static_cast<std::size_t>(plane.resolution));
  for (int i = 0; i < plane.resolution; ++i) {
    const double s = plane.coordinate(i);
    for (int j = 0; j < plane.resolution; ++j) {
      const double t = plane.coordinate(j);
      const FeasibilityVerdict v = evaluate_oracle(history, posteriors, target_arm, plane.point(s, t), epsilon);
      scan.points.push_back({s, t, v.feasible, v.blocking_mask()});
    }
  }
  return scan;
}

namespace {

History from_rows(const std::vector<std::vector<std::vector<double>>>& arms) {
  History h = History::empty(3, static_cast<int>(arms.size()));
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto m = static_cast<Eigen::Index>(arms[a].size());
    h.arms[a].contexts.resize(m, 3);
    h.arms[a].rewards = Eigen::VectorXd::Ones(m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index k = 0; k < 3; ++k) h.arms[a].contexts(i, k) = arms[a][static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return h;
}

}  // namespace

std::vector<std::string> preset_names() { return {"baseline", "extra-arm1", "extra-arm1-target"}; }

History preset_history(std::string_view name) {
  if (name == "baseline") return from_rows({{{1, 0, 0}}, {{0, -1, 1}}, {{0, 2, 0}}, {{2, 0, 0}}});
  if (name == "extra-arm1") return from_rows({{{1, 0, 0}, {0, 0, 0.5}}, {{0, -1, 1}}, {{0, 2, 0}}, {{2, 0, 0}}});
  if (name == "extra-arm1-target")
    return from_rows({{{1, 0, 0}, {0, 0, 0.5}}, {{0, -1, 1}}, {{0, 2, 0}}, {{2, 0, 0}, {0, 1, 0}}});
  throw Error(Errc::unknown_preset, "unknown preset '" + std::string(name) + "'");
}

ScanPlane preset_plane(double extent, int resolution) {
  ScanPlane p;
  p.origin = Eigen::Vector3d::Zero();
  p.u = Eigen::Vector3d::UnitY();
  p.v = Eigen::Vector3d::UnitZ();
  p.lo = -extent;
  p.hi = extent;
  p.resolution = resolution;
  return p;
}

void to_json(nlohmann::json& j, const SideEffectReport& r) {
  j = {{"sample_count", r.sample_count}, {"changed", r.changed}, {"fraction_hat", r.fraction_hat}};
  if (!r.samples.empty()) {
    auto samples = nlohmann::json::array();
    for (const auto& s : r.samples)
      samples.push_back({{"context", std::vector<double>(s.context.data(), s.context.data() + s.context.size())},
                         {"pre_arm", s.pre_arm},
                         {"post_arm", s.post_arm}});
    j["samples"] = samples;
  }
}

void to_json(nlohmann::json& j, const FeasibilityVerdict& v) {
  j = {{"feasible", v.feasible}, {"blocking_arms", v.blocking_arms}};
  auto details = nlohmann::json::array();
  for (const auto& d : v.details)
    details.push_back({{"arm", d.arm},
                       {"target_null", d.target_null},
                       {"arm_null", d.arm_null},
                       {"width_lhs", d.width_lhs},
                       {"width_rhs", d.width_rhs},
                       {"blocking", d.blocking}});
  j["details"] = details;
}

}  // namespace cbpoison
