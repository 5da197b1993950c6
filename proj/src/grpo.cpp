#include "rubricrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rubricrl/errors.hpp"

namespace rubricrl {

void GrpoConfig::validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
        throw ConfigError("clip_epsilon must lie in (0,1)");
    }
    if (kl_coefficient < 0.0) throw ConfigError("kl_coefficient must be >= 0");
    if (group_size < 2) throw ConfigError("group_size must be >= 2");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (warmup_ratio < 0.0 || warmup_ratio > 1.0) throw ConfigError("warmup_ratio must lie in [0,1]");
}

std::vector<double> compute_advantages(const std::vector<double>& rewards, double std_epsilon) {
    const std::size_t g = rewards.size();
    if (g < 2) throw DataError("advantage computation needs a group of at least 2");
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / double(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= double(g);
    const double std = std::sqrt(var);
    std::vector<double> out(g, 0.0);
    if (std < std_epsilon) return out;
    for (std::size_t j = 0; j < g; ++j) out[j] = (rewards[j] - mean) / std;
    return out;
}

double surrogate_objective(const std::vector<double>& ratios,
                           const std::vector<double>& advantages,
                           double kl_value,
                           const GrpoConfig& config) {
    if (ratios.size() != advantages.size()) {
        throw DataError("ratios and advantages must have equal length");
    }
    if (ratios.empty()) throw DataError("empty sample set");
    double total = 0.0;
    for (std::size_t j = 0; j < ratios.size(); ++j) {
        const double r = ratios[j];
        if (r <= 0.0) throw DataError("non-positive probability ratio");
        const double a = advantages[j];
        const double clipped = std::clamp(r, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
        total += std::min(r * a, clipped * a);
    }
    return total / double(ratios.size()) - config.kl_coefficient * kl_value;
}

std::vector<double> SimPolicy::probs() const {
    if (logits.size() < 2) throw DataError("simulated policy needs at least 2 candidates");
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - max_logit);
        z += p[k];
    }
    for (double& v : p) v /= z;
    return p;
}

double SimPolicy::log_prob(std::size_t index) const {
    if (index >= logits.size()) throw DataError("candidate index out of range");
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - max_logit);
    return logits[index] - max_logit - std::log(z);
}

std::vector<double> sim_log_prob_gradient(const SimPolicy& policy, std::size_t index) {
    if (index >= policy.size()) throw DataError("candidate index out of range");
    std::vector<double> grad = policy.probs();
    for (double& v : grad) v = -v;
    grad[index] += 1.0;
    return grad;
}

std::vector<double> exact_policy_gradient(const SimPolicy& policy,
                                          const std::function<double(std::size_t)>& reward_fn) {
    const std::vector<double> p = policy.probs();
    std::vector<double> grad(policy.size(), 0.0);
    for (std::size_t k = 0; k < policy.size(); ++k) {
        const double scale = p[k] * reward_fn(k);
        const std::vector<double> score = sim_log_prob_gradient(policy, k);
        for (std::size_t m = 0; m < grad.size(); ++m) grad[m] += scale * score[m];
    }
    return grad;
}

double exact_kl(const SimPolicy& policy, const SimPolicy& reference) {
    if (policy.size() != reference.size()) throw DataError("policy/reference size mismatch");
    const std::vector<double> p = policy.probs();
    const std::vector<double> q = reference.probs();
    double kl = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        kl += p[k] * (std::log(p[k]) - std::log(q[k]));
    }
    return kl;
}

std::vector<double> exact_kl_gradient(const SimPolicy& policy, const SimPolicy& reference) {
    if (policy.size() != reference.size()) throw DataError("policy/reference size mismatch");
    const std::vector<double> p = policy.probs();
    const std::vector<double> q = reference.probs();
    // d pi_k / d theta_m = pi_k (delta_km - pi_m); the +1 from d(p log p)
    // cancels because the jacobian columns sum to zero.
    std::vector<double> inner(p.size());
    double weighted = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        inner[k] = std::log(p[k]) - std::log(q[k]);
        weighted += p[k] * inner[k];
    }
    std::vector<double> grad(p.size());
    for (std::size_t m = 0; m < p.size(); ++m) {
        grad[m] = p[m] * (inner[m] - weighted);
    }
    return grad;
}

void TrueRewardModel::validate(std::size_t candidate_count) const {
    if (explicit_ids.size() != explicit_weights.size()) {
        throw DataError("explicit ids/weights size mismatch");
    }
    if (implicit_ids.size() != implicit_weights.size()) {
        throw DataError("implicit ids/weights size mismatch");
    }
    if (explicit_table.size() != candidate_count || implicit_table.size() != candidate_count) {
        throw DataError("satisfaction tables must cover all candidates");
    }
    for (const auto& row : explicit_table) {
        if (row.size() != explicit_ids.size()) throw DataError("explicit table row size mismatch");
    }
    for (const auto& row : implicit_table) {
        if (row.size() != implicit_ids.size()) throw DataError("implicit table row size mismatch");
    }
    for (const std::string& id : explicit_ids) {
        for (const std::string& other : implicit_ids) {
            if (id == other) throw DataError("criterion " + id + " is both explicit and implicit");
        }
    }
}

double TrueRewardModel::true_reward(std::size_t candidate) const {
    double u = estimated_reward(candidate);
    for (std::size_t k = 0; k < implicit_weights.size(); ++k) {
        u += implicit_weights[k] * implicit_table[candidate][k];
    }
    return u;
}

double TrueRewardModel::estimated_reward(std::size_t candidate) const {
    double r = 0.0;
    for (std::size_t k = 0; k < explicit_weights.size(); ++k) {
        r += explicit_weights[k] * explicit_table[candidate][k];
    }
    return r;
}

double TrueRewardModel::implicit_weight_l1() const {
    double l1 = 0.0;
    for (double w : implicit_weights) l1 += std::abs(w);
    return l1;
}

BoundReport verify_gradient_bound(const SimPolicy& policy, const TrueRewardModel& model) {
    model.validate(policy.size());
    const auto g_true = exact_policy_gradient(
        policy, [&](std::size_t k) { return model.true_reward(k); });
    const auto g_est = exact_policy_gradient(
        policy, [&](std::size_t k) { return model.estimated_reward(k); });

    double gap_sq = 0.0;
    for (std::size_t m = 0; m < g_true.size(); ++m) {
        const double d = g_true[m] - g_est[m];
        gap_sq += d * d;
    }

    const std::vector<double> p = policy.probs();
    double expected_score_sq = 0.0;
    for (std::size_t k = 0; k < policy.size(); ++k) {
        const std::vector<double> score = sim_log_prob_gradient(policy, k);
        double norm_sq = 0.0;
        for (double v : score) norm_sq += v * v;
        expected_score_sq += p[k] * norm_sq;
    }

    BoundReport report;
    report.gap_norm = std::sqrt(gap_sq);
    report.bound_value = std::sqrt(expected_score_sq) * model.implicit_weight_l1();
    report.holds = report.gap_norm <= report.bound_value + 1e-10;
    return report;
}

}  // namespace rubricrl
