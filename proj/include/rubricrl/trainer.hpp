#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubricrl/dataio.hpp"
#include "rubricrl/elicit.hpp"
#include "rubricrl/gateway.hpp"
#include "rubricrl/grpo.hpp"

namespace rubricrl {

struct RolloutGroup {
    enum class Origin { current, control };
    std::string prompt_id;
    std::vector<std::size_t> responses;  // candidate indices
    Origin origin = Origin::current;
};

struct BackendBindings {
    std::string grader;
    std::string extractor;
    std::string dedup;  // optional; empty means exact-normalized dedup only
    std::string judge;
};

struct TrainerOptions {
    RewardStrategyKind strategy = RewardStrategyKind::offline_rubric;
    ElicitationConfig elicitation;
    GrpoConfig grpo;
    BackendBindings backends;
    std::uint64_t seed = 0;
    int total_steps = 0;  // for the linear warmup schedule
    std::vector<Criterion> universal_criteria;
    int likert_lo = 1;
    int likert_hi = 10;
};

// Per-prompt training state. The reference policy is the frozen
// initial snapshot used for the KL term and as one control variant.
struct PromptState {
    SimPolicy policy;
    SimPolicy reference;
    Rubric offline_rubric;                  // human, or synthetic under that strategy
    std::vector<Criterion> accumulated;     // elicited criteria kept across steps
};

class Trainer {
public:
    Trainer(Gateway& gateway, TrainerOptions options);

    const TrainerOptions& options() const { return options_; }

    // Uniform logits; generates the synthetic rubric up front when that
    // strategy is active.
    PromptState init_state(const DatasetRecord& record);

    // One pass of sample -> (elicit) -> grade -> advantages -> ascent.
    StepMetrics train_step(PromptState& state, const DatasetRecord& record, int step_index);

    double true_expected_reward(const PromptState& state, const DatasetRecord& record) const;

    // JSON-lines rows: {"step", "prompt_id", "pair_index", "criterion",
    // "kept_after_dedup"}
    const std::vector<nlohmann::json>& elicitation_log() const { return elicitation_log_; }

private:
    std::vector<std::size_t> sample_group(const SimPolicy& policy, int count, std::uint64_t step,
                                          std::string_view stream_tag) const;
    Rubric build_step_rubric(PromptState& state, const DatasetRecord& record, int step_index,
                             int& elicited_count);
    double candidate_reward(const DatasetRecord& record, const Rubric& rubric,
                            std::size_t candidate_index);
    double warmed_learning_rate(int step_index) const;

    Gateway& gateway_;
    TrainerOptions options_;
    std::vector<nlohmann::json> elicitation_log_;
};

}  // namespace rubricrl
