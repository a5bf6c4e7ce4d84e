#pragma once

// The victim: per-arm ridge regression, UCB scoring and the sequential
// observe/select/reward/append loop of a linear contextual bandit.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cbpoison/rng.hpp"

namespace cbpoison {

enum class WidthVariant { LinUCB, OFUL };

std::string to_string(WidthVariant v);
WidthVariant width_variant_from_string(const std::string& s);

struct BanditConfig {
  double lambda = 1.0;   // ridge regularizer
  double delta = 0.05;   // confidence level
  double sigma = 0.1;    // subGaussian noise scale
  double s_bound = 1.0;  // bound on ||theta_a||
  WidthVariant width_variant = WidthVariant::OFUL;

  void validate() const;
};

/// Logged data of one arm: row i of `contexts` was answered with `rewards[i]`.
struct ArmData {
  Eigen::MatrixXd contexts;  // m_a x d
  Eigen::VectorXd rewards;   // m_a

  Eigen::Index size() const { return rewards.size(); }
};

struct History {
  int dim = 0;
  std::vector<ArmData> arms;

  /// K arms with no data in dimension d.
  static History empty(int dim, int num_arms);

  int num_arms() const { return static_cast<int>(arms.size()); }
  Eigen::Index total_samples() const;

  /// Appends one (x, r) pair to `arm`. Linear in the arm size; bulk
  /// construction should fill the matrices directly.
  void append(int arm, const Eigen::VectorXd& x, double reward);

  /// Throws Errc::dimension_mismatch on ragged shapes.
  void validate() const;
};

bool operator==(const History& a, const History& b);

/// Ridge posterior of one arm. The Cholesky factor of the gram matrix is kept
/// so that Mahalanobis norms never form an explicit inverse.
struct ArmPosterior {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd gram;
  double width = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol;

  /// V^{-1} x
  Eigen::VectorXd solve(const Eigen::VectorXd& x) const { return chol.solve(x); }
  /// ||x||_{V^{-1}}
  double confidence_norm(const Eigen::VectorXd& x) const;
};

/// log det V via its Cholesky factor.
double log_det(const Eigen::LLT<Eigen::MatrixXd>& chol);

/// Exploration multiplier alpha_a. `samples` is m_a; neither variant depends
/// on the query context. The OFUL determinant ratio is evaluated in log space.
double exploration_width(const Eigen::MatrixXd& gram, Eigen::Index samples, const BanditConfig& config);

ArmPosterior ridge_fit(const History& history, int arm, const BanditConfig& config);
std::vector<ArmPosterior> fit_arms(const History& history, const BanditConfig& config);

/// Posterior from sufficient statistics: gram = X^T X + lambda I, xty = X^T y.
ArmPosterior posterior_from_stats(Eigen::MatrixXd gram, const Eigen::VectorXd& xty, Eigen::Index samples,
                                  const BanditConfig& config);

/// x^T theta_hat + alpha ||x||_{V^{-1}}
double ucb_score(const ArmPosterior& posterior, const Eigen::VectorXd& x);

struct ArmChoice {
  int arm = 0;
  Eigen::VectorXd scores;
};

/// Highest UCB; ties go to the lowest arm index.
ArmChoice select_arm(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x);
ArmChoice select_arm(const History& history, const BanditConfig& config, const Eigen::VectorXd& x);

/// Lowest UCB; ties go to the lowest arm index.
int worst_arm(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x);
int worst_arm(const History& history, const BanditConfig& config, const Eigen::VectorXd& x);

int argmax_lowest(const Eigen::VectorXd& v);
int argmin_lowest(const Eigen::VectorXd& v);

struct GroundTruth {
  std::vector<Eigen::VectorXd> thetas;
  double sigma = 0.0;

  int num_arms() const { return static_cast<int>(thetas.size()); }
};

/// Runs the bandit for `rounds` rounds against `truth`, starting from no data.
/// Rewards are x^T theta_{a_t} plus Gaussian(0, sigma^2) noise.
History simulate_rounds(const GroundTruth& truth, const BanditConfig& config, const ContextSampler& contexts,
                        int rounds, std::uint64_t seed);

void to_json(nlohmann::json& j, const History& h);
void from_json(const nlohmann::json& j, History& h);
void to_json(nlohmann::json& j, const BanditConfig& c);
void from_json(const nlohmann::json& j, BanditConfig& c);

}  // namespace cbpoison
