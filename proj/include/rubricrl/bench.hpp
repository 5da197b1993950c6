#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubricrl/gateway.hpp"

namespace rubricrl {

struct GraderEvalRecord {
    std::string prompt_id;
    std::string response_id;
    std::string criterion_id;
    int human_label = 0;      // {0,1}
    double grader_score = 0;  // [0,1]
    UsageRecord usage;
};

struct ParetoPoint {
    std::string backend_id;
    double auc = 0.0;
    double cost_per_sample = 0.0;
    bool on_frontier = false;
};

// Pairwise concordance probability, ties scored at 0.5. Throws
// DataError on single-class input or length mismatch.
double roc_auc(const std::vector<int>& labels, const std::vector<double>& scores);

double cost_per_sample(const std::vector<UsageRecord>& usages, int sample_count,
                       const std::map<std::string, BackendSpec>& specs);

// Flags every point not dominated in the (lower cost, higher auc)
// partial order; input order is preserved.
std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points);

std::vector<GraderEvalRecord> load_grader_eval_records(const std::string& path);

// Per-backend AUC + cost + frontier membership, as a report object:
// {"backends": [{"id", "auc", "cost_per_sample", "on_frontier"}]}
nlohmann::json benchmark_graders(
    const std::map<std::string, std::vector<GraderEvalRecord>>& records_by_backend,
    const std::map<std::string, BackendSpec>& specs);

std::string render_benchmark_table(const nlohmann::json& report);

}  // namespace rubricrl
