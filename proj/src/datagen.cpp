#include "cbpoison/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cbpoison/error.hpp"

namespace cbpoison {

namespace {

// Stream tags keep the generators of different purposes apart.
constexpr std::uint64_t kTruthStream = 0x7452;
constexpr std::uint64_t kLogStream = 0x4c6f;

std::string to_string(RewardMode m) { return m == RewardMode::Gaussian ? "Gaussian" : "BernoulliClick"; }

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "Gaussian") return RewardMode::Gaussian;
  if (s == "BernoulliClick") return RewardMode::BernoulliClick;
  throw Error(Errc::invalid_argument, "unknown reward mode '" + s + "'");
}

int draw_categorical(const Eigen::VectorXd& p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

struct LoggedPoint {
  Eigen::VectorXd x;
  int arm;
  double reward;
};

template <typename RewardFn>
History group_points(const GroundTruth& truth, const SynthSpec& spec, const ContextSampler& contexts,
                     RewardFn&& reward_of) {
  spec.validate();
  require(truth.num_arms() == spec.K, "ground truth arm count differs from spec.K", Errc::dimension_mismatch);
  std::vector<LoggedPoint> points;
  points.reserve(static_cast<std::size_t>(spec.n));
  Eigen::VectorXd rewards(spec.K);
  for (int i = 0; i < spec.n; ++i) {
    Rng rng = make_stream(spec.seed, kLogStream, static_cast<std::uint64_t>(i));
    Eigen::VectorXd x = contexts(rng);
    require(x.size() == spec.d, "context sampler dimension mismatch", Errc::dimension_mismatch);
    for (int a = 0; a < spec.K; ++a) rewards(a) = reward_of(x, truth.thetas[static_cast<std::size_t>(a)], rng);
    const int arm = draw_categorical(softmax(rewards), rng);
    points.push_back({std::move(x), arm, rewards(arm)});
  }

  std::vector<Eigen::Index> counts(static_cast<std::size_t>(spec.K), 0);
  for (const auto& p : points) ++counts[static_cast<std::size_t>(p.arm)];
  History h = History::empty(spec.d, spec.K);
  for (int a = 0; a < spec.K; ++a) {
    h.arms[static_cast<std::size_t>(a)].contexts.resize(counts[static_cast<std::size_t>(a)], spec.d);
    h.arms[static_cast<std::size_t>(a)].rewards.resize(counts[static_cast<std::size_t>(a)]);
  }
  std::vector<Eigen::Index> fill(static_cast<std::size_t>(spec.K), 0);
  for (const auto& p : points) {
    const auto ua = static_cast<std::size_t>(p.arm);
    h.arms[ua].contexts.row(fill[ua]) = p.x.transpose();
    h.arms[ua].rewards(fill[ua]) = p.reward;
    ++fill[ua];
  }
  return h;
}

}  // namespace

void SynthSpec::validate() const {
  require(d >= 1, "d must be at least 1");
  require(K >= 2, "K must be at least 2");
  require(n >= 0, "n must be nonnegative");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be nonnegative");
}

Eigen::VectorXd sample_sphere_point(int d, Rng& rng) {
  require(d >= 1, "sphere dimension must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(d);
  double norm = 0.0;
  do {
    for (int k = 0; k < d; ++k) v(k) = gauss(rng);
    norm = v.norm();
  } while (!(norm > 0.0));
  return v / norm;
}

Eigen::MatrixXd sample_sphere(int d, int count, Rng& rng) {
  require(count >= 0, "sample count must be nonnegative");
  Eigen::MatrixXd out(count, d);
  for (int i = 0; i < count; ++i) out.row(i) = sample_sphere_point(d, rng).transpose();
  return out;
}

ContextSampler sphere_sampler(int d) {
  require(d >= 1, "sphere dimension must be positive");
  return [d](Rng& rng) { return sample_sphere_point(d, rng); };
}

ContextSampler pool_sampler(Eigen::MatrixXd pool, Eigen::VectorXd weights) {
  require(pool.rows() >= 1 && pool.rows() == weights.size(), "pool needs one weight per row", Errc::dimension_mismatch);
  require((weights.array() >= 0.0).all() && weights.sum() > 0.0, "pool weights must be nonnegative and not all zero");
  Eigen::VectorXd p = weights / weights.sum();
  return [pool = std::move(pool), p = std::move(p)](Rng& rng) -> Eigen::VectorXd {
    return pool.row(draw_categorical(p, rng)).transpose();
  };
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  require(logits.size() >= 1, "softmax of an empty vector");
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

GroundTruth sample_ground_truth(int d, int K, double sigma, Rng& rng, double scale) {
  require(K >= 1, "ground truth needs at least one arm");
  GroundTruth truth;
  truth.sigma = sigma;
  for (int a = 0; a < K; ++a) truth.thetas.push_back(scale * sample_sphere_point(d, rng));
  return truth;
}

GroundTruth sample_ground_truth(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_stream(spec.seed, kTruthStream);
  return sample_ground_truth(spec.d, spec.K, spec.sigma, rng);
}

History log_history(const GroundTruth& truth, const SynthSpec& spec, const ContextSampler& contexts) {
  require(spec.reward_mode == RewardMode::Gaussian, "log_history needs Gaussian rewards");
  const double sigma = truth.sigma;
  return group_points(truth, spec, contexts, [sigma](const Eigen::VectorXd& x, const Eigen::VectorXd& theta, Rng& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    return x.dot(theta) + sigma * noise(rng);
  });
}

History log_history(const GroundTruth& truth, const SynthSpec& spec) {
  return log_history(truth, spec, sphere_sampler(spec.d));
}

History log_binary_history(const GroundTruth& truth, const SynthSpec& spec, const ContextSampler& contexts) {
  require(spec.reward_mode == RewardMode::BernoulliClick, "log_binary_history needs BernoulliClick rewards");
  const double offset = spec.click_offset;
  return group_points(truth, spec, contexts, [offset](const Eigen::VectorXd& x, const Eigen::VectorXd& theta, Rng& rng) {
    const double p = std::clamp(offset + x.dot(theta), 0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng) < p ? 1.0 : 0.0;
  });
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"d", s.d},         {"K", s.K},       {"n", s.n},
       {"sigma", s.sigma}, {"seed", s.seed}, {"reward_mode", to_string(s.reward_mode)},
       {"click_offset", s.click_offset}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  s.d = j.value("d", s.d);
  s.K = j.value("K", s.K);
  s.n = j.value("n", s.n);
  s.sigma = j.value("sigma", s.sigma);
  s.seed = j.value("seed", s.seed);
  if (j.contains("reward_mode")) s.reward_mode = reward_mode_from_string(j.at("reward_mode").get<std::string>());
  s.click_offset = j.value("click_offset", s.click_offset);
}

}  // namespace cbpoison
