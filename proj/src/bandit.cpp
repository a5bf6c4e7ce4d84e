#include "cbpoison/bandit.hpp"

#include <cmath>
#include <limits>

#include "cbpoison/error.hpp"

namespace cbpoison {

std::string to_string(WidthVariant v) { return v == WidthVariant::LinUCB ? "LinUCB" : "OFUL"; }

WidthVariant width_variant_from_string(const std::string& s) {
  if (s == "LinUCB") return WidthVariant::LinUCB;
  if (s == "OFUL") return WidthVariant::OFUL;
  throw Error(Errc::invalid_argument, "unknown width variant '" + s + "'");
}

void BanditConfig::validate() const {
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be nonnegative");
  require(std::isfinite(s_bound) && s_bound > 0.0, "s_bound must be positive");
}

History History::empty(int dim, int num_arms) {
  require(dim >= 1, "history dimension must be positive");
  require(num_arms >= 1, "history needs at least one arm");
  History h;
  h.dim = dim;
  h.arms.resize(static_cast<std::size_t>(num_arms));
  for (auto& arm : h.arms) {
    arm.contexts.resize(0, dim);
    arm.rewards.resize(0);
  }
  return h;
}

Eigen::Index History::total_samples() const {
  Eigen::Index total = 0;
  for (const auto& arm : arms) total += arm.size();
  return total;
}

void History::append(int arm, const Eigen::VectorXd& x, double reward) {
  require(arm >= 0 && arm < num_arms(), "arm index out of range");
  require(x.size() == dim, "context dimension mismatch", Errc::dimension_mismatch);
  auto& a = arms[static_cast<std::size_t>(arm)];
  const Eigen::Index m = a.size();
  a.contexts.conservativeResize(m + 1, dim);
  a.contexts.row(m) = x.transpose();
  a.rewards.conservativeResize(m + 1);
  a.rewards(m) = reward;
}

void History::validate() const {
  require(dim >= 1, "history dimension must be positive", Errc::dimension_mismatch);
  require(!arms.empty(), "history needs at least one arm", Errc::dimension_mismatch);
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto& arm = arms[a];
    require(arm.contexts.cols() == dim || arm.contexts.rows() == 0,
            "arm " + std::to_string(a) + ": context rows must have length " + std::to_string(dim),
            Errc::dimension_mismatch);
    require(arm.contexts.rows() == arm.rewards.size(),
            "arm " + std::to_string(a) + ": reward count differs from context count", Errc::dimension_mismatch);
  }
}

bool operator==(const History& a, const History& b) {
  if (a.dim != b.dim || a.arms.size() != b.arms.size()) return false;
  for (std::size_t i = 0; i < a.arms.size(); ++i) {
    const auto& x = a.arms[i];
    const auto& y = b.arms[i];
    if (x.size() != y.size()) return false;
    if (x.size() == 0) continue;
    if (x.contexts != y.contexts || x.rewards != y.rewards) return false;
  }
  return true;
}

double ArmPosterior::confidence_norm(const Eigen::VectorXd& x) const {
  // x^T V^{-1} x = ||L^{-1} x||^2
  const Eigen::VectorXd z = chol.matrixL().solve(x);
  return z.norm();
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& chol) {
  return 2.0 * chol.matrixLLT().diagonal().array().log().sum();
}

namespace {

double width_from_log_det(double logdet, Eigen::Index dim, const BanditConfig& config) {
  if (config.width_variant == WidthVariant::LinUCB) {
    return 1.0 + std::sqrt(0.5 * std::log(2.0 / config.delta));
  }
  // log( det(V)^{1/2} det(lambda I)^{-1/2} / delta )
  const double log_ratio = 0.5 * (logdet - static_cast<double>(dim) * std::log(config.lambda));
  const double inner = 2.0 * (log_ratio - std::log(config.delta));
  return config.sigma * std::sqrt(std::max(inner, 0.0)) + std::sqrt(config.lambda) * config.s_bound;
}

}  // namespace

double exploration_width(const Eigen::MatrixXd& gram, Eigen::Index /*samples*/, const BanditConfig& config) {
  if (config.width_variant == WidthVariant::LinUCB) return width_from_log_det(0.0, gram.rows(), config);
  Eigen::LLT<Eigen::MatrixXd> chol(gram);
  require(chol.info() == Eigen::Success, "gram matrix is not positive definite");
  return width_from_log_det(log_det(chol), gram.rows(), config);
}

ArmPosterior posterior_from_stats(Eigen::MatrixXd gram, const Eigen::VectorXd& xty, Eigen::Index samples,
                                  const BanditConfig& config) {
  (void)samples;
  ArmPosterior p;
  p.chol.compute(gram);
  require(p.chol.info() == Eigen::Success, "gram matrix is not positive definite");
  p.theta_hat = p.chol.solve(xty);
  p.width = width_from_log_det(log_det(p.chol), gram.rows(), config);
  p.gram = std::move(gram);
  return p;
}

ArmPosterior ridge_fit(const History& history, int arm, const BanditConfig& config) {
  require(arm >= 0 && arm < history.num_arms(), "arm index out of range");
  const auto& data = history.arms[static_cast<std::size_t>(arm)];
  const Eigen::Index d = history.dim;
  Eigen::MatrixXd gram = config.lambda * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(d);
  if (data.size() > 0) {
    require(data.contexts.cols() == d, "context dimension mismatch", Errc::dimension_mismatch);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(data.contexts.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    xty.noalias() = data.contexts.transpose() * data.rewards;
  }
  return posterior_from_stats(std::move(gram), xty, data.size(), config);
}

std::vector<ArmPosterior> fit_arms(const History& history, const BanditConfig& config) {
  history.validate();
  config.validate();
  std::vector<ArmPosterior> out;
  out.reserve(history.arms.size());
  for (int a = 0; a < history.num_arms(); ++a) out.push_back(ridge_fit(history, a, config));
  return out;
}

double ucb_score(const ArmPosterior& posterior, const Eigen::VectorXd& x) {
  require(x.size() == posterior.theta_hat.size(), "context dimension mismatch", Errc::dimension_mismatch);
  return x.dot(posterior.theta_hat) + posterior.width * posterior.confidence_norm(x);
}

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

int argmin_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) < v(best)) best = static_cast<int>(i);
  return best;
}

namespace {

Eigen::VectorXd score_all(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x) {
  require(!posteriors.empty(), "no arms to score");
  Eigen::VectorXd scores(static_cast<Eigen::Index>(posteriors.size()));
  for (std::size_t a = 0; a < posteriors.size(); ++a)
    scores(static_cast<Eigen::Index>(a)) = ucb_score(posteriors[a], x);
  return scores;
}

}  // namespace

ArmChoice select_arm(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x) {
  ArmChoice choice;
  choice.scores = score_all(posteriors, x);
  choice.arm = argmax_lowest(choice.scores);
  return choice;
}

ArmChoice select_arm(const History& history, const BanditConfig& config, const Eigen::VectorXd& x) {
  const auto posteriors = fit_arms(history, config);
  return select_arm(posteriors, x);
}

int worst_arm(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x) {
  return argmin_lowest(score_all(posteriors, x));
}

int worst_arm(const History& history, const BanditConfig& config, const Eigen::VectorXd& x) {
  const auto posteriors = fit_arms(history, config);
  return worst_arm(posteriors, x);
}

History simulate_rounds(const GroundTruth& truth, const BanditConfig& config, const ContextSampler& contexts,
                        int rounds, std::uint64_t seed) {
  config.validate();
  require(rounds >= 0, "round count must be nonnegative");
  require(truth.num_arms() >= 1, "ground truth needs at least one arm");
  const int K = truth.num_arms();
  const auto d = truth.thetas.front().size();
  for (const auto& t : truth.thetas) require(t.size() == d, "ground-truth dimension mismatch", Errc::dimension_mismatch);

  // Sufficient statistics are updated in place; refitting from them each
  // round gives the same estimates as refitting from the raw history.
  std::vector<Eigen::MatrixXd> grams(static_cast<std::size_t>(K), config.lambda * Eigen::MatrixXd::Identity(d, d));
  std::vector<Eigen::VectorXd> xty(static_cast<std::size_t>(K), Eigen::VectorXd::Zero(d));
  std::vector<std::vector<Eigen::VectorXd>> xs(static_cast<std::size_t>(K));
  std::vector<std::vector<double>> ys(static_cast<std::size_t>(K));

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<ArmPosterior> posteriors;
  for (int t = 0; t < rounds; ++t) {
    const Eigen::VectorXd x = contexts(rng);
    require(x.size() == d, "context sampler dimension mismatch", Errc::dimension_mismatch);
    posteriors.clear();
    for (int a = 0; a < K; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      posteriors.push_back(posterior_from_stats(grams[ua], xty[ua], static_cast<Eigen::Index>(ys[ua].size()), config));
    }
    const int arm = select_arm(posteriors, x).arm;
    const auto ua = static_cast<std::size_t>(arm);
    const double reward = x.dot(truth.thetas[ua]) + truth.sigma * noise(rng);
    grams[ua].noalias() += x * x.transpose();
    xty[ua] += reward * x;
    xs[ua].push_back(x);
    ys[ua].push_back(reward);
  }

  History h = History::empty(static_cast<int>(d), K);
  for (int a = 0; a < K; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const auto m = static_cast<Eigen::Index>(ys[ua].size());
    h.arms[ua].contexts.resize(m, d);
    h.arms[ua].rewards.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      h.arms[ua].contexts.row(i) = xs[ua][static_cast<std::size_t>(i)].transpose();
      h.arms[ua].rewards(i) = ys[ua][static_cast<std::size_t>(i)];
    }
  }
  return h;
}

void to_json(nlohmann::json& j, const History& h) {
  j = nlohmann::json::object();
  j["dim"] = h.dim;
  auto arms = nlohmann::json::array();
  for (const auto& arm : h.arms) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < arm.contexts.rows(); ++i) {
      auto row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < arm.contexts.cols(); ++k) row.push_back(arm.contexts(i, k));
      rows.push_back(std::move(row));
    }
    std::vector<double> rewards(arm.rewards.data(), arm.rewards.data() + arm.rewards.size());
    arms.push_back({{"contexts", rows}, {"rewards", rewards}});
  }
  j["arms"] = arms;
}

void from_json(const nlohmann::json& j, History& h) {
  require(j.is_object() && j.contains("dim") && j.contains("arms"), "history JSON needs 'dim' and 'arms'");
  h.dim = j.at("dim").get<int>();
  require(h.dim >= 1, "history dimension must be positive", Errc::dimension_mismatch);
  h.arms.clear();
  for (const auto& ja : j.at("arms")) {
    ArmData arm;
    const auto& rows = ja.at("contexts");
    const auto& rewards = ja.at("rewards");
    const auto m = static_cast<Eigen::Index>(rows.size());
    require(static_cast<Eigen::Index>(rewards.size()) == m, "reward count differs from context count",
            Errc::dimension_mismatch);
    arm.contexts.resize(m, h.dim);
    arm.rewards.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      require(static_cast<int>(row.size()) == h.dim, "context row length differs from dim", Errc::dimension_mismatch);
      for (int k = 0; k < h.dim; ++k) arm.contexts(i, k) = row[static_cast<std::size_t>(k)].get<double>();
      arm.rewards(i) = rewards[static_cast<std::size_t>(i)].get<double>();
    }
    h.arms.push_back(std::move(arm));
  }
  h.validate();
}

void to_json(nlohmann::json& j, const BanditConfig& c) {
  j = {{"lambda", c.lambda},
       {"delta", c.delta},
       {"sigma", c.sigma},
       {"s_bound", c.s_bound},
       {"width_variant", to_string(c.width_variant)}};
}

void from_json(const nlohmann::json& j, BanditConfig& c) {
  c.lambda = j.value("lambda", c.lambda);
  c.delta = j.value("delta", c.delta);
  c.sigma = j.value("sigma", c.sigma);
  c.s_bound = j.value("s_bound", c.s_bound);
  if (j.contains("width_variant")) c.width_variant = width_variant_from_string(j.at("width_variant").get<std::string>());
}

}  // namespace cbpoison
