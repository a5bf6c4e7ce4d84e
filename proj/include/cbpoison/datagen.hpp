#pragma once

// Synthetic arm parameters, contexts and off-policy logged histories. Nothing
// here consults the victim's estimates: the logging policy is a softmax over
// the realized rewards of all arms.

#include <cstdint>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cbpoison/bandit.hpp"
#include "cbpoison/rng.hpp"

namespace cbpoison {

enum class RewardMode { Gaussian, BernoulliClick };

struct SynthSpec {
  int d = 10;
  int K = 5;
  int n = 1000;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  RewardMode reward_mode = RewardMode::Gaussian;
  double click_offset = 0.0;  // click probability is clamp(offset + x^T theta, 0, 1)

  void validate() const;
};

/// One uniform draw from the unit sphere in R^d.
Eigen::VectorXd sample_sphere_point(int d, Rng& rng);
/// `count` draws stacked as rows.
Eigen::MatrixXd sample_sphere(int d, int count, Rng& rng);

ContextSampler sphere_sampler(int d);
/// Draws row i of `pool` with probability proportional to weights(i).
ContextSampler pool_sampler(Eigen::MatrixXd pool, Eigen::VectorXd weights);

/// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// K parameters uniform on the unit sphere, scaled by `scale`.
GroundTruth sample_ground_truth(int d, int K, double sigma, Rng& rng, double scale = 1.0);
GroundTruth sample_ground_truth(const SynthSpec& spec);

/// For each of spec.n contexts: draw all K rewards, log one arm drawn from the
/// softmax of those rewards, keep only that arm's (x, r). Each data point
/// uses its own generator stream derived from spec.seed.
History log_history(const GroundTruth& truth, const SynthSpec& spec, const ContextSampler& contexts);
History log_history(const GroundTruth& truth, const SynthSpec& spec);

/// Same logging policy with Bernoulli(clamp(offset + x^T theta_a, 0, 1)) rewards.
History log_binary_history(const GroundTruth& truth, const SynthSpec& spec, const ContextSampler& contexts);

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

}  // namespace cbpoison
