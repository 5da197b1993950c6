#include "rubricrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rubricrl/errors.hpp"
#include "rubricrl/rng.hpp"

namespace rubricrl {

using json = nlohmann::json;

Trainer::Trainer(Gateway& gateway, TrainerOptions options)
    : gateway_(gateway), options_(std::move(options)) {
    options_.grpo.validate();
    if (options_.elicitation.pair_count < 0) throw ConfigError("pair count must be >= 0");
}

PromptState Trainer::init_state(const DatasetRecord& record) {
    if (record.candidates.size() < 2) {
        throw DataError("prompt '" + record.prompt.prompt_id +
                        "' needs at least 2 candidates for simulated training");
    }
    PromptState state;
    state.policy.logits.assign(record.candidates.size(), 0.0);
    state.reference = state.policy;
    state.offline_rubric = record.prompt.rubric;
    if (options_.strategy == RewardStrategyKind::synthetic_rubric) {
        const WeightProfile profile = WeightProfile::for_domain(record.prompt.domain);
        state.offline_rubric =
            generate_synthetic_rubric(record.prompt.prompt_text, record.prompt.prompt_id, gateway_,
                                      options_.backends.extractor, profile);
    }
    return state;
}

std::vector<std::size_t> Trainer::sample_group(const SimPolicy& policy, int count,
                                               std::uint64_t step,
                                               std::string_view stream_tag) const {
    const std::vector<double> p = policy.probs();
    Rng rng = Rng::stream(options_.seed, step, stream_tag);
    std::vector<std::size_t> out;
    out.reserve(count);
    for (int j = 0; j < count; ++j) {
        const double u = rng.next_double();
        double cumulative = 0.0;
        std::size_t pick = p.size() - 1;
        for (std::size_t k = 0; k < p.size(); ++k) {
            cumulative += p[k];
            if (u < cumulative) {
                pick = k;
                break;
            }
        }
        out.push_back(pick);
    }
    return out;
}

Rubric Trainer::build_step_rubric(PromptState& state, const DatasetRecord& record, int step_index,
                                  int& elicited_count) {
    elicited_count = 0;
    Rubric base = state.offline_rubric;
    if (options_.elicitation.persistence == Persistence::accumulate && !state.accumulated.empty()) {
        base = merge_rubrics(base, state.accumulated);
    }

    switch (options_.strategy) {
        case RewardStrategyKind::offline_rubric:
        case RewardStrategyKind::llm_judge_likert:
        case RewardStrategyKind::synthetic_rubric:
            return base;
        case RewardStrategyKind::offline_plus_universal:
            return apply_universal(base, options_.universal_criteria);
        case RewardStrategyKind::offline_plus_pointwise: {
            const std::vector<std::size_t> picks =
                sample_group(state.reference, 1, std::uint64_t(step_index), "pointwise");
            const SimCandidate& candidate = record.candidates[picks[0]];
            const ElicitedCriteria elicited =
                elicit_pointwise(record.prompt.prompt_text, candidate.text, base, gateway_,
                                 options_.backends.extractor, options_.elicitation);
            for (const Criterion& c : elicited.criteria) {
                elicitation_log_.push_back({{"step", step_index},
                                            {"prompt_id", record.prompt.prompt_id},
                                            {"pair_index", 0},
                                            {"criterion",
                                             {{"id", c.id}, {"text", c.text}, {"weight", c.weight}}},
                                            {"kept_after_dedup", true}});
            }
            elicited_count = static_cast<int>(elicited.criteria.size());
            Rubric merged = merge_rubrics(base, elicited.criteria);
            if (options_.elicitation.persistence == Persistence::accumulate) {
                for (const Criterion& c : elicited.criteria) state.accumulated.push_back(c);
            }
            return merged;
        }
        case RewardStrategyKind::offline_plus_online: {
            const int m = options_.elicitation.pair_count;
            if (m == 0) return base;  // elicitation disabled; consumes no randomness

            const std::vector<std::size_t> current_picks =
                sample_group(state.policy, m, std::uint64_t(step_index), "pair_current");
            const SimPolicy& control = options_.elicitation.control == ControlVariant::reference
                                           ? state.reference
                                           : state.policy;  // pre-update snapshot of this step
            const std::vector<std::size_t> control_picks =
                sample_group(control, m, std::uint64_t(step_index), "pair_control");

            std::vector<ResponsePair> pairs;
            pairs.reserve(m);
            for (int k = 0; k < m; ++k) {
                const SimCandidate& cur = record.candidates[current_picks[k]];
                const SimCandidate& ctl = record.candidates[control_picks[k]];
                pairs.push_back({cur.text, ctl.text, cur.id, ctl.id, k + 1});
            }

            // Union + exact dedup first; the backend dedup pass runs
            // separately so dropped criteria still get logged.
            const ElicitedCriteria unioned =
                elicit_pairwise(record.prompt.prompt_text, pairs, base, gateway_,
                                options_.backends.extractor, "", options_.elicitation);
            std::vector<Criterion> kept = unioned.criteria;
            if (!options_.backends.dedup.empty() && !unioned.criteria.empty()) {
                kept = deduplicate(unioned.criteria, gateway_, options_.backends.dedup,
                                   options_.elicitation.dedup_template);
            }
            std::set<std::string> kept_texts;
            for (const Criterion& c : kept) kept_texts.insert(normalize_text(c.text));
            for (std::size_t k = 0; k < unioned.criteria.size(); ++k) {
                const Criterion& c = unioned.criteria[k];
                elicitation_log_.push_back(
                    {{"step", step_index},
                     {"prompt_id", record.prompt.prompt_id},
                     {"pair_index", unioned.provenance[k].front()},
                     {"criterion", {{"id", c.id}, {"text", c.text}, {"weight", c.weight}}},
                     {"kept_after_dedup", kept_texts.count(normalize_text(c.text)) > 0}});
            }
            elicited_count = static_cast<int>(kept.size());
            Rubric merged = merge_rubrics(base, kept);
            if (options_.elicitation.persistence == Persistence::accumulate) {
                for (const Criterion& c : kept) state.accumulated.push_back(c);
            }
            return merged;
        }
    }
    return base;
}

double Trainer::candidate_reward(const DatasetRecord& record, const Rubric& rubric,
                                 std::size_t candidate_index) {
    const SimCandidate& candidate = record.candidates[candidate_index];
    if (options_.strategy == RewardStrategyKind::llm_judge_likert) {
        return likert_reward(record.prompt.prompt_text, candidate.text, gateway_,
                             options_.backends.grader, options_.likert_lo, options_.likert_hi);
    }
    const GradeVector grades = gateway_.grade(record.prompt.prompt_text, candidate.text,
                                              candidate.id, rubric, options_.backends.grader);
    return reduce_reward(rubric, grades);
}

double Trainer::warmed_learning_rate(int step_index) const {
    const double lr = options_.grpo.learning_rate;
    if (options_.total_steps <= 0 || options_.grpo.warmup_ratio <= 0.0) return lr;
    const int warmup_steps =
        static_cast<int>(std::ceil(options_.grpo.warmup_ratio * options_.total_steps));
    if (warmup_steps <= 0 || step_index >= warmup_steps) return lr;
    return lr * double(step_index + 1) / double(warmup_steps);
}

StepMetrics Trainer::train_step(PromptState& state, const DatasetRecord& record, int step_index) {
    try {
        const SimPolicy old_policy = state.policy;  // pi_old snapshot

        const std::vector<std::size_t> rollouts =
            sample_group(old_policy, options_.grpo.group_size, std::uint64_t(step_index), "rollout");

        int elicited_count = 0;
        const Rubric rubric = build_step_rubric(state, record, step_index, elicited_count);

        std::vector<double> rewards;
        rewards.reserve(rollouts.size());
        for (std::size_t index : rollouts) {
            rewards.push_back(candidate_reward(record, rubric, index));
        }

        const std::vector<double> advantages =
            compute_advantages(rewards, options_.grpo.std_epsilon);
        const double kl = exact_kl(state.policy, state.reference);
        const std::vector<double> ratios(rollouts.size(), 1.0);
        const double objective = surrogate_objective(ratios, advantages, kl, options_.grpo);

        // Single update per snapshot, so all ratios sit at 1 and the
        // clipped surrogate's gradient is the plain score-function form.
        const std::vector<double> old_probs = old_policy.probs();
        std::vector<double> gradient(state.policy.size(), 0.0);
        for (std::size_t j = 0; j < rollouts.size(); ++j) {
            const double scale = advantages[j] / double(rollouts.size());
            for (std::size_t m = 0; m < gradient.size(); ++m) {
                gradient[m] -= scale * old_probs[m];
            }
            gradient[rollouts[j]] += scale;
        }
        if (options_.grpo.kl_coefficient > 0.0) {
            const std::vector<double> kl_grad = exact_kl_gradient(state.policy, state.reference);
            for (std::size_t m = 0; m < gradient.size(); ++m) {
                gradient[m] -= options_.grpo.kl_coefficient * kl_grad[m];
            }
        }

        const double lr = warmed_learning_rate(step_index);
        for (std::size_t m = 0; m < state.policy.logits.size(); ++m) {
            state.policy.logits[m] += lr * gradient[m];
        }

        StepMetrics metrics;
        metrics.step = step_index;
        double total = 0.0;
        for (double r : rewards) total += r;
        metrics.mean_reward = total / double(rewards.size());
        metrics.kl = kl;
        metrics.elicited_count = elicited_count;
        metrics.objective = objective;
        return metrics;
    } catch (const BackendError& e) {
        throw BackendError("step " + std::to_string(step_index) + ": " + e.what());
    }
}

double Trainer::true_expected_reward(const PromptState& state, const DatasetRecord& record) const {
    const std::vector<double> p = state.policy.probs();
    double expected = 0.0;
    for (std::size_t k = 0; k < record.candidates.size(); ++k) {
        const SimCandidate& candidate = record.candidates[k];
        double u = 0.0;
        for (const Criterion& c : record.prompt.rubric.criteria) {
            const auto it = candidate.truth.find(c.id);
            if (it == candidate.truth.end()) {
                throw DataError("candidate '" + candidate.id + "' has no truth entry for '" +
                                c.id + "'");
            }
            u += c.weight * it->second;
        }
        for (const Criterion& c : record.implicit_criteria) {
            const auto it = candidate.truth.find(c.id);
            if (it == candidate.truth.end()) {
                throw DataError("candidate '" + candidate.id + "' has no truth entry for '" +
                                c.id + "'");
            }
            u += c.weight * it->second;
        }
        expected += p[k] * u;
    }
    return expected;
}

}  // namespace rubricrl
