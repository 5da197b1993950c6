#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubricrl/gateway.hpp"
#include "rubricrl/rubric.hpp"

namespace rubricrl {

// A finite candidate response for the simulated policy, with ground
// truth satisfaction over criteria it can be graded on.
struct SimCandidate {
    std::string id;
    std::string text;
    std::map<std::string, int> truth;  // criterion id -> {0,1}
};

struct DatasetRecord {
    PromptRecord prompt;
    std::string split = "train";
    // Simulated-policy extras (optional in the schema)
    std::vector<SimCandidate> candidates;
    std::vector<Criterion> implicit_criteria;  // hidden from the rubric
};

// JSON-lines loader. Every record must pass rubric validation under the
// profile implied by its domain; duplicate prompt ids are rejected.
std::vector<DatasetRecord> load_dataset(const std::string& path);

struct DomainStats {
    std::size_t sample_count = 0;
    std::size_t criterion_count = 0;
};

struct DatasetStats {
    std::size_t sample_count = 0;
    std::size_t criterion_count = 0;
    double mean_criteria_per_sample = 0.0;
    std::map<std::string, DomainStats> per_domain;
};

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records);
std::string render_stats_table(const DatasetStats& stats);

struct StepMetrics {
    int step = 0;
    double mean_reward = 0.0;
    double kl = 0.0;
    int elicited_count = 0;
    double objective = 0.0;
};

nlohmann::json step_metrics_to_json(const StepMetrics& metrics);
StepMetrics step_metrics_from_json(const nlohmann::json& doc);

struct EvalPoint {
    int step = 0;
    double true_expected_reward = 0.0;
};

struct TrainingLog {
    int version = 1;
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<StepMetrics> steps;
    std::vector<EvalPoint> evals;

    void append(StepMetrics metrics);  // enforces strictly increasing steps
};

void persist_run(const TrainingLog& log, const std::string& path);
TrainingLog load_run(const std::string& path);

// Mean of reduce_reward over prompts, grading one response per prompt
// against the fixed offline rubric. Grading failures are recorded per
// prompt; the mean covers the graded subset.
struct RubricScoreResult {
    double mean_score = 0.0;
    int graded = 0;
    int failed = 0;
    nlohmann::json details;
};

// response_ids key mock_table lookups; when empty the response text is
// used as its own id.
RubricScoreResult rubric_score_eval(const std::vector<std::string>& responses,
                                    const std::vector<DatasetRecord>& eval_records,
                                    Gateway& gateway, const std::string& grader_backend_id,
                                    const std::vector<std::string>& response_ids = {});

// Order-flipped win rule: a prompt counts as a win only when the judge
// picks our response in both slot orders.
struct WinRateResult {
    double win_rate = 0.0;
    double loss_rate = 0.0;
    double inconsistent_rate = 0.0;
    int judged = 0;
    int excluded = 0;
    nlohmann::json details;
};

WinRateResult win_rate_eval(const std::vector<std::string>& our_responses,
                            const std::vector<std::string>& reference_responses,
                            const std::vector<DatasetRecord>& eval_records, Gateway& gateway,
                            const std::string& judge_backend_id);

}  // namespace rubricrl
