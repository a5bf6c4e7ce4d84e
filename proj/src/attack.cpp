#include "cbpoison/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cbpoison/error.hpp"

namespace cbpoison {

void AttackSpec::validate(const History& history) const {
  require(history.num_arms() >= 2, "an attack needs at least two arms");
  require(target_context.size() == history.dim, "target context dimension mismatch", Errc::dimension_mismatch);
  require(target_context.allFinite(), "target context must be finite");
  require(target_arm >= 0 && target_arm < history.num_arms(), "target arm out of range");
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  if (reward_box) require(reward_box->lower < reward_box->upper, "reward box needs lower < upper");
}

double null_tolerance(const Eigen::MatrixXd& contexts, const Eigen::VectorXd& x) {
  const double xmax = x.size() > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
  const double amax = contexts.size() > 0 ? contexts.cwiseAbs().maxCoeff() : 0.0;
  return 1e-9 * (1.0 + amax * xmax);
}

bool in_null_space(const Eigen::MatrixXd& contexts, const Eigen::VectorXd& x) {
  if (contexts.rows() == 0) return true;
  return (contexts * x).cwiseAbs().maxCoeff() <= null_tolerance(contexts, x);
}

AttackConstraints build_constraints(const History& history, const BanditConfig& config, const AttackSpec& spec) {
  history.validate();
  config.validate();
  spec.validate(history);
  const int K = history.num_arms();
  const Eigen::VectorXd& x = spec.target_context;

  AttackConstraints c;
  c.target_arm = spec.target_arm;
  c.offsets.assign(static_cast<std::size_t>(K) + 1, 0);
  for (int a = 0; a < K; ++a)
    c.offsets[static_cast<std::size_t>(a) + 1] = c.offsets[static_cast<std::size_t>(a)] + history.arms[static_cast<std::size_t>(a)].size();
  c.weights.resize(static_cast<std::size_t>(K));
  c.pre_scores.resize(K);
  c.widths.resize(K);
  c.confidence_norms.resize(K);

  for (int a = 0; a < K; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const auto& data = history.arms[ua];
    const ArmPosterior post = ridge_fit(history, a, config);
    c.widths(a) = post.width;
    c.confidence_norms(a) = post.confidence_norm(x);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(data.size());
    // x in Null(X_a) iff X_a V_a^{-1} x = 0; snap so that round-off cannot
    // turn a structurally zero row into a tiny, "feasible" one.
    if (data.size() > 0 && !in_null_space(data.contexts, x)) w = data.contexts * post.solve(x);
    const double fit = data.size() > 0 ? w.dot(data.rewards) : 0.0;
    c.pre_scores(a) = fit + c.widths(a) * c.confidence_norms(a);
    c.weights[ua] = std::move(w);
  }

  const Eigen::Index n = c.offsets.back();
  c.g_matrix = Eigen::MatrixXd::Zero(K - 1, n);
  c.h_vector.resize(K - 1);
  const int t = spec.target_arm;
  const auto& wt = c.weights[static_cast<std::size_t>(t)];
  Eigen::Index row = 0;
  for (int a = 0; a < K; ++a) {
    if (a == t) continue;
    const auto ua = static_cast<std::size_t>(a);
    c.g_matrix.block(row, c.offsets[static_cast<std::size_t>(t)], 1, wt.size()) = wt.transpose();
    c.g_matrix.block(row, c.offsets[ua], 1, c.weights[ua].size()) = -c.weights[ua].transpose();
    c.h_vector(row) = (spec.epsilon + c.pre_scores(a)) - c.pre_scores(t);
    c.row_arm.push_back(a);
    ++row;
  }
  return c;
}

Eigen::VectorXd stack(std::span<const Eigen::VectorXd> per_arm) {
  Eigen::Index n = 0;
  for (const auto& v : per_arm) n += v.size();
  Eigen::VectorXd out(n);
  Eigen::Index off = 0;
  for (const auto& v : per_arm) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

std::vector<Eigen::VectorXd> unstack(const Eigen::VectorXd& stacked, const History& history) {
  require(stacked.size() == history.total_samples(), "stacked vector length differs from sample count",
          Errc::dimension_mismatch);
  std::vector<Eigen::VectorXd> out;
  Eigen::Index off = 0;
  for (const auto& arm : history.arms) {
    out.emplace_back(stacked.segment(off, arm.size()));
    off += arm.size();
  }
  return out;
}

std::vector<Eigen::VectorXd> zero_deltas(const History& history) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& arm : history.arms) out.push_back(Eigen::VectorXd::Zero(arm.size()));
  return out;
}

History apply_deltas(const History& history, std::span<const Eigen::VectorXd> deltas) {
  require(deltas.size() == history.arms.size(), "one delta vector per arm is required", Errc::dimension_mismatch);
  History out = history;
  for (std::size_t a = 0; a < deltas.size(); ++a) {
    require(deltas[a].size() == out.arms[a].size(), "delta length differs from arm size", Errc::dimension_mismatch);
    out.arms[a].rewards += deltas[a];
  }
  return out;
}

double attack_margin(std::span<const ArmPosterior> posteriors, const Eigen::VectorXd& x, int target_arm) {
  const ArmChoice choice = select_arm(posteriors, x);
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < choice.scores.size(); ++a)
    if (a != target_arm) margin = std::min(margin, choice.scores(target_arm) - choice.scores(a));
  return margin;
}

double attack_margin(const History& history, const BanditConfig& config, const Eigen::VectorXd& x, int target_arm) {
  const auto posteriors = fit_arms(history, config);
  return attack_margin(posteriors, x, target_arm);
}

double effort_ratio(std::span<const Eigen::VectorXd> deltas, const History& history) {
  require(deltas.size() == history.arms.size(), "one delta vector per arm is required", Errc::dimension_mismatch);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t a = 0; a < deltas.size(); ++a) {
    require(deltas[a].size() == history.arms[a].size(), "delta length differs from arm size", Errc::dimension_mismatch);
    num += deltas[a].squaredNorm();
    den += history.arms[a].rewards.squaredNorm();
  }
  require(den > 0.0, "effort ratio undefined: all rewards are zero", Errc::zero_denominator);
  return std::sqrt(num / den);
}

AttackResult strong_attack(const History& history, const BanditConfig& config, const AttackSpec& spec,
                           const QPTolerances& tol) {
  const AttackConstraints cons = build_constraints(history, config, spec);
  MinNormQP qp{cons.g_matrix, cons.h_vector, std::nullopt};
  if (spec.reward_box) {
    const Eigen::Index n = cons.num_variables();
    std::vector<Eigen::VectorXd> ys;
    for (const auto& arm : history.arms) ys.push_back(arm.rewards);
    qp.box = BoxBounds{Eigen::VectorXd::Constant(n, spec.reward_box->lower),
                       Eigen::VectorXd::Constant(n, spec.reward_box->upper), stack(ys)};
  }

  AttackResult result;
  result.epsilon = spec.epsilon;
  result.solution = solve_min_norm(qp, tol);
  result.status = result.solution.status;
  if (result.status != QPStatus::Optimal) {
    result.deltas = zero_deltas(history);
    return result;
  }
  result.deltas = unstack(result.solution.delta, history);
  result.objective = result.solution.objective;

  const History poisoned = apply_deltas(history, result.deltas);
  const auto posteriors = fit_arms(poisoned, config);
  const double margin = attack_margin(posteriors, spec.target_context, spec.target_arm);
  result.achieved_margin = margin;
  result.verified = select_arm(posteriors, spec.target_context).arm == spec.target_arm &&
                    margin >= spec.epsilon - kMarginTolerance;
  double den = 0.0;
  for (const auto& arm : history.arms) den += arm.rewards.squaredNorm();
  if (den > 0.0) result.effort_ratio = effort_ratio(result.deltas, history);
  return result;
}

std::vector<double> uniform_thresholds(int count) {
  require(count >= 1, "threshold grid needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(count), 0.0);
  for (int j = 1; j < count; ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(j) / (count - 1);
  return out;
}

RoundingResult round_binary(const History& history, const BanditConfig& config, const AttackSpec& spec,
                            const AttackResult& relaxed, std::span<const double> thresholds) {
  spec.validate(history);
  require(spec.reward_box && spec.reward_box->lower == 0.0 && spec.reward_box->upper == 1.0,
          "binary rounding needs the reward box [0, 1]");
  require(relaxed.status == QPStatus::Optimal, "binary rounding needs an optimal relaxed attack");
  require(relaxed.deltas.size() == history.arms.size(), "relaxed attack does not match the history",
          Errc::dimension_mismatch);
  for (const auto& arm : history.arms)
    for (Eigen::Index i = 0; i < arm.size(); ++i)
      require(arm.rewards(i) == 0.0 || arm.rewards(i) == 1.0, "binary rounding needs rewards in {0, 1}");
  require(!thresholds.empty(), "threshold grid is empty");

  std::vector<Eigen::VectorXd> relaxed_values;
  std::vector<double> sorted;
  for (std::size_t a = 0; a < history.arms.size(); ++a) {
    relaxed_values.push_back(history.arms[a].rewards + relaxed.deltas[a]);
    for (Eigen::Index i = 0; i < relaxed_values.back().size(); ++i) sorted.push_back(relaxed_values.back()(i));
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  auto round_at = [&](double c) {
    History h = history;
    for (std::size_t a = 0; a < h.arms.size(); ++a)
      h.arms[a].rewards = (relaxed_values[a].array() > c).cast<double>();
    return h;
  };
  auto count_flips = [&](const History& h) {
    int flips = 0;
    for (std::size_t a = 0; a < h.arms.size(); ++a)
      flips += static_cast<int>((h.arms[a].rewards.array() != history.arms[a].rewards.array()).count());
    return flips;
  };

  // Thresholds between the same two consecutive relaxed values round
  // identically; evaluate each distinct rounding once.
  struct Outcome {
    bool admissible;
    int flips;
  };
  std::map<std::size_t, Outcome> seen;
  std::optional<double> best_c;
  int best_flips = std::numeric_limits<int>::max();
  for (const double c : thresholds) {
    const auto key = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), c) - sorted.begin());
    auto it = seen.find(key);
    if (it == seen.end()) {
      const History h = round_at(c);
      const bool ok = select_arm(h, config, spec.target_context).arm == spec.target_arm;
      it = seen.emplace(key, Outcome{ok, count_flips(h)}).first;
    }
    if (!it->second.admissible) continue;
    if (it->second.flips < best_flips || (it->second.flips == best_flips && c < *best_c)) {
      best_flips = it->second.flips;
      best_c = c;
    }
  }
  if (!best_c) throw Error(Errc::no_admissible_threshold, "no threshold keeps the target arm selected");

  RoundingResult out;
  out.threshold = *best_c;
  out.flipped = best_flips;
  out.rounded = round_at(*best_c);
  for (std::size_t a = 0; a < history.arms.size(); ++a)
    out.deltas.push_back(out.rounded.arms[a].rewards - history.arms[a].rewards);
  return out;
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void to_json(nlohmann::json& j, const AttackSpec& s) {
  j = {{"target_context", to_vector(s.target_context)}, {"target_arm", s.target_arm}, {"epsilon", s.epsilon}};
  if (s.reward_box)
    j["reward_box"] = {s.reward_box->lower, s.reward_box->upper};
  else
    j["reward_box"] = nullptr;
}

void from_json(const nlohmann::json& j, AttackSpec& s) {
  require(j.contains("target_context") && j.contains("target_arm"), "attack spec needs target_context and target_arm");
  const auto ctx = j.at("target_context").get<std::vector<double>>();
  s.target_context = Eigen::Map<const Eigen::VectorXd>(ctx.data(), static_cast<Eigen::Index>(ctx.size()));
  s.target_arm = j.at("target_arm").get<int>();
  s.epsilon = j.value("epsilon", s.epsilon);
  s.reward_box.reset();
  if (j.contains("reward_box") && !j.at("reward_box").is_null()) {
    const auto box = j.at("reward_box").get<std::vector<double>>();
    require(box.size() == 2, "reward_box must be [lower, upper]");
    s.reward_box = RewardBox{box[0], box[1]};
  }
}

void to_json(nlohmann::json& j, const AttackResult& r) {
  j = nlohmann::json::object();
  j["status"] = to_string(r.status);
  j["epsilon"] = r.epsilon;
  j["achieved_margin"] = r.achieved_margin ? nlohmann::json(*r.achieved_margin) : nlohmann::json(nullptr);
  j["effort_ratio"] = r.effort_ratio ? nlohmann::json(*r.effort_ratio) : nlohmann::json(nullptr);
  j["objective"] = r.objective;
  j["verified"] = r.verified;
  auto deltas = nlohmann::json::array();
  for (const auto& d : r.deltas) deltas.push_back(to_vector(d));
  j["deltas"] = deltas;
}

}  // namespace cbpoison
