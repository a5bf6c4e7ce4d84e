#pragma once

// Feasibility of strong attacks, a constructive (non-minimal) attack, side
// effects of an attack on other contexts, and scans of infeasible regions.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cbpoison/attack.hpp"
#include "cbpoison/bandit.hpp"
#include "cbpoison/rng.hpp"

namespace cbpoison {

struct ArmBlockDetail {
  int arm = 0;
  bool target_null = false;  // X_target x = 0
  bool arm_null = false;     // X_a x = 0
  double width_lhs = 0.0;    // alpha_target ||x||_{V_target^{-1}}
  double width_rhs = 0.0;    // epsilon + alpha_a ||x||_{V_a^{-1}}
  bool blocking = false;     // both nulls and width_lhs < width_rhs
};

struct FeasibilityVerdict {
  bool feasible = true;
  std::vector<int> blocking_arms;
  std::vector<ArmBlockDetail> details;  // one per non-target arm

  /// Bit a is set when arm a blocks. Requires K <= 64.
  std::uint64_t blocking_mask() const;
};

/// A target context cannot be strongly attacked exactly when some other arm
/// shares its null space with the target arm and has the larger exploration
/// bonus (by more than epsilon). Ties in the bonus comparison count as feasible.
FeasibilityVerdict feasibility_oracle(const History& history, const BanditConfig& config, const AttackSpec& spec);

enum class WitnessBranch {
  TargetLeverage,     // delta_target = k p with p = X_target V_target^{-1} x
  NonTargetLeverage,  // target has no leverage; push each other arm down along its own weights
  ZeroRewards,        // delta_a = -y_a for every arm
};

std::string to_string(WitnessBranch b);

struct Witness {
  WitnessBranch branch = WitnessBranch::TargetLeverage;
  double scale = 0.0;  // k, clamped at zero
  std::vector<Eigen::VectorXd> deltas;
};

/// A feasible strong attack built in closed form. Errc::witness_unavailable
/// when the instance is infeasible.
Witness construct_witness(const History& history, const BanditConfig& config, const AttackSpec& spec);

struct SideEffectSample {
  Eigen::VectorXd context;
  int pre_arm = 0;
  int post_arm = 0;
};

struct SideEffectReport {
  int sample_count = 0;
  int changed = 0;
  double fraction_hat = 0.0;
  std::vector<SideEffectSample> samples;  // empty unless requested
};

/// Fraction of m sampled contexts whose chosen arm differs between the two
/// histories. Sample i uses its own generator stream under `seed`.
SideEffectReport side_effect(const History& pre, const History& post, const BanditConfig& config,
                             const ContextSampler& contexts, int m, std::uint64_t seed, bool keep_samples = false);

struct RayCheck {
  bool passed = true;
  std::optional<double> falsifying_scale;
  std::string violation;
};

/// Scaling a context by c > 0 keeps the chosen arm before and after the
/// attack (`same_arm_scales`), and scaling by c >= 1 keeps an epsilon margin
/// for the target arm (`margin_scales`). Returns the first counterexample.
RayCheck ray_property_check(const History& pre, const History& post, const BanditConfig& config,
                            const Eigen::VectorXd& x, int target_arm, double epsilon,
                            std::span<const double> same_arm_scales, std::span<const double> margin_scales);

/// UCB_target(x) - UCB_a(x) for every a != target (entry for the target is 0).
Eigen::VectorXd margin_functions(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x, int target_arm);

/// Affine 2-D slice origin + s u + t v with s, t on a uniform grid over [lo, hi].
struct ScanPlane {
  Eigen::VectorXd origin;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  double lo = -12.0;
  double hi = 12.0;
  int resolution = 201;

  double coordinate(int i) const;
  Eigen::VectorXd point(double s, double t) const;
};

struct ScanPoint {
  double s = 0.0;
  double t = 0.0;
  bool feasible = true;
  std::uint64_t blocking_mask = 0;
};

struct RegionScan {
  double epsilon = 0.0;
  int target_arm = 0;
  int resolution = 0;
  std::vector<ScanPoint> points;  // row-major in (s, t)

  /// Columns x1, x2, feasible, blocking_mask.
  void write_csv(std::ostream& os) const;
};

RegionScan infeasible_region_scan(const History& history, const BanditConfig& config, int target_arm,
                                  const ScanPlane& plane, double epsilon);

/// The four-arm, three-dimensional histories used to visualize infeasible
/// regions: "baseline", "extra-arm1" (adds [0, 0, 0.5] to arm 1) and
/// "extra-arm1-target" (additionally adds [0, 1, 0] to the target arm 4).
/// Every logged reward is 1. Errc::unknown_preset otherwise.
History preset_history(std::string_view name);
std::vector<std::string> preset_names();
/// 0-based index of the preset target arm.
inline constexpr int kPresetTargetArm = 3;
/// The plane x1 = 0, spanned by e2 and e3.
ScanPlane preset_plane(double extent = 12.0, int resolution = 201);

void to_json(nlohmann::json& j, const SideEffectReport& r);
void to_json(nlohmann::json& j, const FeasibilityVerdict& v);

}  // namespace cbpoison
