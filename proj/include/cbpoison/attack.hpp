#pragma once

// Reward poisoning against a linear UCB victim. Because the ridge estimate is
// linear in the rewards, every "target arm wins by epsilon" requirement is a
// linear inequality in the stacked perturbation, so the cheapest attack is a
// minimum-norm QP.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cbpoison/bandit.hpp"
#include "cbpoison/qp.hpp"

namespace cbpoison {

/// Allowed range of every post-attack reward.
struct RewardBox {
  double lower = 0.0;
  double upper = 1.0;
};

struct AttackSpec {
  Eigen::VectorXd target_context;
  int target_arm = 0;
  double epsilon = 1e-3;
  std::optional<RewardBox> reward_box;

  void validate(const History& history) const;
};

/// Margin slack allowed when re-scoring a poisoned history from scratch.
inline constexpr double kMarginTolerance = 1e-6;

/// One row per non-target arm a:
///   w_target^T delta_target - w_a^T delta_a >= epsilon + (score_a - score_target)
/// Variables are stacked arm-major, each arm's block in history order.
struct AttackConstraints {
  Eigen::MatrixXd g_matrix;
  Eigen::VectorXd h_vector;
  std::vector<int> row_arm;                 // non-target arm owning each row
  std::vector<Eigen::Index> offsets;        // column offset of each arm's block; size K + 1
  std::vector<Eigen::VectorXd> weights;     // X_a V_a^{-1} x*, per arm
  Eigen::VectorXd pre_scores;               // pre-attack UCB per arm at x*
  Eigen::VectorXd widths;                   // alpha_a
  Eigen::VectorXd confidence_norms;         // ||x*||_{V_a^{-1}}
  int target_arm = 0;

  Eigen::Index num_variables() const { return g_matrix.cols(); }
};

/// Entry-wise tolerance for treating X x as zero: 1e-9 (1 + max|X| max|x|).
double null_tolerance(const Eigen::MatrixXd& contexts, const Eigen::VectorXd& x);
/// max |X x| <= null_tolerance; an arm with no data has every x in its null space.
bool in_null_space(const Eigen::MatrixXd& contexts, const Eigen::VectorXd& x);

AttackConstraints build_constraints(const History& history, const BanditConfig& config, const AttackSpec& spec);

struct AttackResult {
  QPStatus status = QPStatus::IterLimit;
  double epsilon = 0.0;
  std::vector<Eigen::VectorXd> deltas;
  std::optional<double> achieved_margin;  // from a from-scratch refit; set on Optimal
  std::optional<double> effort_ratio;     // unset when every reward is zero
  double objective = 0.0;
  bool verified = false;                  // refit selects the target with margin >= epsilon - tol
  QPSolution solution;
};

AttackResult strong_attack(const History& history, const BanditConfig& config, const AttackSpec& spec,
                           const QPTolerances& tol = {});

Eigen::VectorXd stack(std::span<const Eigen::VectorXd> per_arm);
std::vector<Eigen::VectorXd> unstack(const Eigen::VectorXd& stacked, const History& history);
std::vector<Eigen::VectorXd> zero_deltas(const History& history);

/// y_a + delta_a for every arm.
History apply_deltas(const History& history, std::span<const Eigen::VectorXd> deltas);

/// min over a != target of UCB_target(x) - UCB_a(x), refit from scratch.
double attack_margin(const History& history, const BanditConfig& config, const Eigen::VectorXd& x, int target_arm);
double attack_margin(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x, int target_arm);

/// sqrt(sum ||delta_a||^2 / sum ||y_a||^2); Errc::zero_denominator when all
/// rewards are zero.
double effort_ratio(std::span<const Eigen::VectorXd> deltas, const History& history);

struct RoundingResult {
  double threshold = 0.0;
  int flipped = 0;
  History rounded;
  std::vector<Eigen::VectorXd> deltas;  // rounded - original
};

/// `count` thresholds spread evenly over [0, 1] (the single threshold 0 when
/// count is 1).
std::vector<double> uniform_thresholds(int count);

/// Thresholds y + delta at each c (value > c becomes 1, otherwise 0), keeps
/// the thresholds whose rounded history still selects the target arm, and
/// returns the one flipping the fewest rewards (smallest c on ties).
/// Errc::no_admissible_threshold when none qualifies.
RoundingResult round_binary(const History& history, const BanditConfig& config, const AttackSpec& spec,
                            const AttackResult& relaxed, std::span<const double> thresholds);

void to_json(nlohmann::json& j, const AttackSpec& s);
void from_json(const nlohmann::json& j, AttackSpec& s);
void to_json(nlohmann::json& j, const AttackResult& r);

}  // namespace cbpoison
