#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubricrl/dataio.hpp"
#include "rubricrl/trainer.hpp"

namespace rubricrl {

struct RunConfig {
    std::string dataset_path;
    std::string registry_path;
    std::string templates_dir;  // optional
    RewardStrategyKind strategy = RewardStrategyKind::offline_rubric;
    ElicitationConfig elicitation;
    GrpoConfig grpo;
    BackendBindings backends;
    std::uint64_t seed = 0;
    int epochs = 3;
    int evals_per_epoch = 10;
    std::string out_dir = "run_out";
    std::vector<Criterion> universal_criteria;
    int likert_lo = 1;
    int likert_hi = 10;

    nlohmann::json to_json() const;
};

RunConfig load_run_config(const std::string& path);

// Replaces mock backends with implementations grounded in the dataset's
// candidate truth tables: a verdict-table grader, a difference-revealing
// extractor, a true-reward judge, and a Likert scorer.
void wire_sim_mocks(Gateway& gateway, const std::vector<DatasetRecord>& records,
                    const BackendBindings& bindings);

// Sets up gateway + trainer from the config, runs epochs x train
// records, and writes training_log.json, elicitation_log.jsonl and
// policy_snapshot.json under out_dir. Partial logs survive failures.
TrainingLog run_train(const RunConfig& config);

nlohmann::json run_eval(const RunConfig& config, const std::string& policy_snapshot_path,
                        const std::string& baseline_snapshot_path, bool score_only);

nlohmann::json run_bench_graders(const std::string& records_path,
                                 const std::string& registry_path);

DatasetStats run_stats(const std::string& dataset_path);

nlohmann::json run_verify_bound(int instance_count, std::uint64_t seed);

}  // namespace rubricrl
