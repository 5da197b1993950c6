#include "rubricrl/bench.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "rubricrl/errors.hpp"

namespace rubricrl {

using json = nlohmann::json;

double roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size()) throw DataError("labels/scores length mismatch");
    if (labels.empty()) throw DataError("empty input to roc_auc");
    std::size_t positives = 0;
    for (int label : labels) {
        if (label != 0 && label != 1) throw DataError("labels must be binary");
        positives += static_cast<std::size_t>(label);
    }
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw DataError("roc_auc needs both label classes present");
    }

    // Mann-Whitney with mid-ranks for tied scores.
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = (double(i + 1) + double(j)) / 2.0;  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) positive_rank_sum += mid_rank;
        }
        i = j;
    }
    const double n_pos = double(positives);
    const double n_neg = double(negatives);
    return (positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double cost_per_sample(const std::vector<UsageRecord>& usages, int sample_count,
                       const std::map<std::string, BackendSpec>& specs) {
    if (sample_count <= 0) throw DataError("cost_per_sample requires a positive sample count");
    double total = 0.0;
    for (const UsageRecord& usage : usages) {
        const auto it = specs.find(usage.backend_id);
        if (it == specs.end()) throw ConfigError("unknown backend id in usage: " + usage.backend_id);
        total += usage_cost(usage, it->second);
    }
    return total / double(sample_count);
}

std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points) {
    // Sweep cheapest-first; a point survives unless something strictly
    // cheaper reaches its auc, or an equal-cost point strictly beats it.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points[a].cost_per_sample < points[b].cost_per_sample;
    });

    double best_auc_cheaper = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double group_max_auc = -std::numeric_limits<double>::infinity();
        while (j < order.size() &&
               points[order[j]].cost_per_sample == points[order[i]].cost_per_sample) {
            group_max_auc = std::max(group_max_auc, points[order[j]].auc);
            ++j;
        }
        for (std::size_t k = i; k < j; ++k) {
            ParetoPoint& p = points[order[k]];
            p.on_frontier = !(best_auc_cheaper >= p.auc || group_max_auc > p.auc);
        }
        best_auc_cheaper = std::max(best_auc_cheaper, group_max_auc);
        i = j;
    }
    return points;
}

std::vector<GraderEvalRecord> load_grader_eval_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grader eval records: " + path);
    std::vector<GraderEvalRecord> records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("malformed record at line " + std::to_string(line_number) + ": " +
                            e.what());
        }
        try {
            GraderEvalRecord record;
            record.prompt_id = doc.at("prompt_id").get<std::string>();
            record.response_id = doc.at("response_id").get<std::string>();
            record.criterion_id = doc.at("criterion_id").get<std::string>();
            record.human_label = doc.at("human_label").get<int>();
            record.grader_score = doc.at("grader_score").get<double>();
            if (record.human_label != 0 && record.human_label != 1) {
                throw DataError("human_label must be binary");
            }
            if (record.grader_score < 0.0 || record.grader_score > 1.0) {
                throw DataError("grader_score must lie in [0,1]");
            }
            record.usage.backend_id = doc.at("backend_id").get<std::string>();
            record.usage.input_tokens = doc.value("input_tokens", std::int64_t{0});
            record.usage.output_tokens = doc.value("output_tokens", std::int64_t{0});
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            throw DataError("invalid record at line " + std::to_string(line_number) + ": " +
                            e.what());
        } catch (const DataError& e) {
            throw DataError("invalid record at line " + std::to_string(line_number) + ": " +
                            e.what());
        }
    }
    return records;
}

json benchmark_graders(const std::map<std::string, std::vector<GraderEvalRecord>>& records_by_backend,
                       const std::map<std::string, BackendSpec>& specs) {
    std::vector<ParetoPoint> points;
    for (const auto& [backend_id, records] : records_by_backend) {
        if (records.empty()) throw DataError("backend '" + backend_id + "' has no records");
        std::vector<int> labels;
        std::vector<double> scores;
        std::vector<UsageRecord> usages;
        std::set<std::pair<std::string, std::string>> samples;
        for (const GraderEvalRecord& record : records) {
            labels.push_back(record.human_label);
            scores.push_back(record.grader_score);
            usages.push_back(record.usage);
            samples.insert({record.prompt_id, record.response_id});
        }
        ParetoPoint point;
        point.backend_id = backend_id;
        try {
            point.auc = roc_auc(labels, scores);
        } catch (const DataError& e) {
            throw DataError("backend '" + backend_id + "': " + e.what());
        }
        point.cost_per_sample = cost_per_sample(usages, static_cast<int>(samples.size()), specs);
        points.push_back(std::move(point));
    }
    points = pareto_frontier(std::move(points));

    json report;
    report["backends"] = json::array();
    for (const ParetoPoint& p : points) {
        report["backends"].push_back({{"id", p.backend_id},
                                      {"auc", p.auc},
                                      {"cost_per_sample", p.cost_per_sample},
                                      {"on_frontier", p.on_frontier}});
    }
    return report;
}

std::string render_benchmark_table(const json& report) {
    std::ostringstream out;
    out << std::left << std::setw(24) << "backend" << std::right << std::setw(10) << "auc"
        << std::setw(16) << "cost/sample" << std::setw(10) << "frontier" << "\n";
    for (const auto& entry : report.at("backends")) {
        out << std::left << std::setw(24) << entry.at("id").get<std::string>() << std::right
            << std::fixed << std::setprecision(4) << std::setw(10) << entry.at("auc").get<double>()
            << std::setw(16) << entry.at("cost_per_sample").get<double>() << std::setw(10)
            << (entry.at("on_frontier").get<bool>() ? "yes" : "no") << "\n";
    }
    return out.str();
}

}  // namespace rubricrl
