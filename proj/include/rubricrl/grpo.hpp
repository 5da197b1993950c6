#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace rubricrl {

struct GrpoConfig {
    double clip_epsilon = 0.2;
    double kl_coefficient = 0.01;
    double learning_rate = 5e-6;
    double warmup_ratio = 0.1;
    int group_size = 16;
    double std_epsilon = 1e-8;

    void validate() const;  // throws ConfigError
};

// Group-normalized advantages: (R_j - mean) / population std. A group
// whose std falls below std_epsilon carries no signal and yields zeros.
std::vector<double> compute_advantages(const std::vector<double>& rewards, double std_epsilon);

// Clipped surrogate minus the KL penalty, averaged over the group.
double surrogate_objective(const std::vector<double>& ratios,
                           const std::vector<double>& advantages,
                           double kl_value,
                           const GrpoConfig& config);

// Softmax policy over a finite candidate-response set. Small enough to
// enumerate exactly, which is the whole point.
struct SimPolicy {
    std::vector<double> logits;

    std::size_t size() const { return logits.size(); }
    std::vector<double> probs() const;
    double log_prob(std::size_t index) const;
};

// one_hot(index) - softmax(logits)
std::vector<double> sim_log_prob_gradient(const SimPolicy& policy, std::size_t index);

// sum_k pi_k * grad log pi(k) * reward(k), by full enumeration.
std::vector<double> exact_policy_gradient(const SimPolicy& policy,
                                          const std::function<double(std::size_t)>& reward_fn);

double exact_kl(const SimPolicy& policy, const SimPolicy& reference);
std::vector<double> exact_kl_gradient(const SimPolicy& policy, const SimPolicy& reference);

// Ground truth as a criteria split: explicit criteria appear in the
// rubric and drive the estimated reward; implicit criteria only affect
// the true reward.
struct TrueRewardModel {
    std::vector<std::string> explicit_ids;
    std::vector<double> explicit_weights;
    std::vector<std::string> implicit_ids;
    std::vector<double> implicit_weights;
    // satisfaction[candidate][criterion] in {0,1}
    std::vector<std::vector<int>> explicit_table;
    std::vector<std::vector<int>> implicit_table;

    void validate(std::size_t candidate_count) const;  // throws DataError
    double true_reward(std::size_t candidate) const;
    double estimated_reward(std::size_t candidate) const;
    double implicit_weight_l1() const;
};

struct BoundReport {
    double gap_norm = 0.0;
    double bound_value = 0.0;
    bool holds = false;
};

// Checks that the L2 gap between the exact gradients under the true and
// estimated rewards stays below sqrt(E||grad log pi||^2) * ||w_I||_1.
BoundReport verify_gradient_bound(const SimPolicy& policy, const TrueRewardModel& model);

}  // namespace rubricrl
