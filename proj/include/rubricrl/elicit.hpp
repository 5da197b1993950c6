#pragma once

#include <string>
#include <vector>

#include "rubricrl/gateway.hpp"
#include "rubricrl/rubric.hpp"

namespace rubricrl {

enum class RewardStrategyKind {
    offline_rubric,
    offline_plus_online,
    offline_plus_pointwise,
    offline_plus_universal,
    llm_judge_likert,
    synthetic_rubric,
};

RewardStrategyKind reward_strategy_from_string(std::string_view s);
const char* to_string(RewardStrategyKind kind);

enum class ControlVariant { reference, previous_step };
enum class Persistence { ephemeral, accumulate };

struct ElicitationConfig {
    int pair_count = 8;  // M
    ControlVariant control = ControlVariant::reference;
    std::string extraction_template = "pairwise_extract";
    std::string dedup_template = "dedup";
    WeightProfile clamp_profile = WeightProfile::generalist();
    Persistence persistence = Persistence::ephemeral;
};

struct ResponsePair {
    std::string current_response;
    std::string control_response;
    std::string current_id;
    std::string control_id;
    int pair_index = 0;
};

struct ElicitedCriteria {
    std::vector<Criterion> criteria;
    // pair indices that produced each criterion, aligned with criteria
    std::vector<std::vector<int>> provenance;

    bool empty() const { return criteria.empty(); }
};

// Index-aligned pairing: k-th current response with k-th control
// response, for k = 1..M.
std::vector<ResponsePair> pair_rollouts(const std::vector<std::string>& current,
                                        const std::vector<std::string>& control, int pair_count);

// One extraction call per pair, union, exact-normalized dedup (plus a
// backend dedup pass when dedup_backend_id is non-empty), weight clamp.
ElicitedCriteria elicit_pairwise(const std::string& prompt, const std::vector<ResponsePair>& pairs,
                                 const Rubric& base, Gateway& gateway,
                                 const std::string& extractor_backend_id,
                                 const std::string& dedup_backend_id,
                                 const ElicitationConfig& config);

// Backend-assisted deduplication. Exact-normalized duplicates are
// removed even if the backend keeps them; first occurrence wins.
std::vector<Criterion> deduplicate(const std::vector<Criterion>& criteria, Gateway& gateway,
                                   const std::string& backend_id, const std::string& template_id);

ElicitedCriteria elicit_pointwise(const std::string& prompt, const std::string& response,
                                  const Rubric& base, Gateway& gateway,
                                  const std::string& extractor_backend_id,
                                  const ElicitationConfig& config);

// Appends a fixed criteria list (source = universal) to the rubric.
Rubric apply_universal(const Rubric& base, const std::vector<Criterion>& universal);

// Integer Likert score mapped linearly onto [0,1].
double likert_reward(const std::string& prompt, const std::string& response, Gateway& gateway,
                     const std::string& backend_id, int lo, int hi);

Rubric generate_synthetic_rubric(const std::string& prompt, const std::string& prompt_id,
                                 Gateway& gateway, const std::string& backend_id,
                                 const WeightProfile& profile);

}  // namespace rubricrl
