#include "rubricrl/dataio.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "rubricrl/errors.hpp"

namespace rubricrl {

using json = nlohmann::json;

namespace {

constexpr int kLogSchemaVersion = 1;

Criterion criterion_from_json(const json& doc) {
    Criterion c;
    c.id = doc.at("id").get<std::string>();
    c.text = doc.at("text").get<std::string>();
    c.weight = doc.at("weight").get<double>();
    c.source = criterion_source_from_string(doc.value("source", "human"));
    return c;
}

json criterion_to_json(const Criterion& c) {
    return {{"id", c.id}, {"text", c.text}, {"weight", c.weight}, {"source", to_string(c.source)}};
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);

    std::vector<DatasetRecord> records;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("malformed dataset line " + std::to_string(line_number) + ": " +
                            e.what());
        }
        try {
            DatasetRecord record;
            record.prompt.prompt_id = doc.at("prompt_id").get<std::string>();
            record.prompt.prompt_text = doc.at("prompt").get<std::string>();
            record.prompt.domain = doc.at("domain").get<std::string>();
            record.split = doc.value("split", "train");
            record.prompt.rubric.prompt_id = record.prompt.prompt_id;
            for (const auto& entry : doc.at("criteria")) {
                record.prompt.rubric.criteria.push_back(criterion_from_json(entry));
            }
            if (doc.contains("candidates")) {
                for (const auto& entry : doc["candidates"]) {
                    SimCandidate candidate;
                    candidate.id = entry.at("id").get<std::string>();
                    candidate.text = entry.at("text").get<std::string>();
                    for (const auto& [key, value] : entry.at("truth").items()) {
                        candidate.truth[key] = value.get<int>();
                    }
                    record.candidates.push_back(std::move(candidate));
                }
            }
            if (doc.contains("implicit")) {
                for (const auto& entry : doc["implicit"]) {
                    record.implicit_criteria.push_back(criterion_from_json(entry));
                }
            }

            if (record.prompt.prompt_text.empty()) {
                throw DataError("empty prompt text");
            }
            if (!seen_ids.insert(record.prompt.prompt_id).second) {
                throw DataError("duplicate prompt_id '" + record.prompt.prompt_id + "'");
            }
            const WeightProfile profile = WeightProfile::for_domain(record.prompt.domain);
            const std::vector<Violation> violations =
                validate_rubric(record.prompt.rubric, profile);
            if (!violations.empty()) {
                throw DataError("rubric validation failed for '" + record.prompt.prompt_id +
                                "': " + violations.front().message);
            }
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            throw DataError("invalid dataset line " + std::to_string(line_number) + ": " +
                            e.what());
        } catch (const DataError& e) {
            throw DataError("dataset line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    return records;
}

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records) {
    if (records.empty()) throw DataError("dataset_stats requires a non-empty dataset");
    DatasetStats stats;
    for (const DatasetRecord& record : records) {
        stats.sample_count += 1;
        stats.criterion_count += record.prompt.rubric.size();
        DomainStats& domain = stats.per_domain[record.prompt.domain];
        domain.sample_count += 1;
        domain.criterion_count += record.prompt.rubric.size();
    }
    stats.mean_criteria_per_sample = double(stats.criterion_count) / double(stats.sample_count);
    return stats;
}

std::string render_stats_table(const DatasetStats& stats) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "domain" << std::right << std::setw(10) << "samples"
        << std::setw(12) << "criteria" << std::setw(12) << "mean" << "\n";
    for (const auto& [domain, d] : stats.per_domain) {
        out << std::left << std::setw(16) << domain << std::right << std::setw(10) << d.sample_count
            << std::setw(12) << d.criterion_count << std::setw(12) << std::fixed
            << std::setprecision(1) << double(d.criterion_count) / double(d.sample_count) << "\n";
    }
    out << std::left << std::setw(16) << "total" << std::right << std::setw(10) << stats.sample_count
        << std::setw(12) << stats.criterion_count << std::setw(12) << std::fixed
        << std::setprecision(1) << stats.mean_criteria_per_sample << "\n";
    return out.str();
}

json step_metrics_to_json(const StepMetrics& metrics) {
    return {{"step", metrics.step},
            {"mean_reward", metrics.mean_reward},
            {"kl", metrics.kl},
            {"elicited_count", metrics.elicited_count},
            {"objective", metrics.objective}};
}

StepMetrics step_metrics_from_json(const json& doc) {
    StepMetrics metrics;
    metrics.step = doc.at("step").get<int>();
    metrics.mean_reward = doc.at("mean_reward").get<double>();
    metrics.kl = doc.at("kl").get<double>();
    metrics.elicited_count = doc.at("elicited_count").get<int>();
    metrics.objective = doc.at("objective").get<double>();
    return metrics;
}

void TrainingLog::append(StepMetrics metrics) {
    if (!steps.empty() && metrics.step <= steps.back().step) {
        throw InvariantError("training log steps must be strictly increasing");
    }
    steps.push_back(metrics);
}

void persist_run(const TrainingLog& log, const std::string& path) {
    json doc;
    doc["version"] = log.version;
    doc["seed"] = log.seed;
    doc["config"] = log.config;
    doc["steps"] = json::array();
    for (const StepMetrics& metrics : log.steps) doc["steps"].push_back(step_metrics_to_json(metrics));
    doc["evals"] = json::array();
    for (const EvalPoint& point : log.evals) {
        doc["evals"].push_back({{"step", point.step},
                                {"true_expected_reward", point.true_expected_reward}});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write training log: " + path);
    out << doc.dump(2) << "\n";
}

TrainingLog load_run(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open training log: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw DataError("corrupted training log " + path + ": " + e.what());
    }
    TrainingLog log;
    try {
        log.version = doc.at("version").get<int>();
        if (log.version != kLogSchemaVersion) {
            throw DataError("training log schema version " + std::to_string(log.version) +
                            " unsupported (expected " + std::to_string(kLogSchemaVersion) + ")");
        }
        log.seed = doc.at("seed").get<std::uint64_t>();
        log.config = doc.at("config");
        for (const auto& entry : doc.at("steps")) {
            log.append(step_metrics_from_json(entry));
        }
        for (const auto& entry : doc.value("evals", json::array())) {
            log.evals.push_back(
                {entry.at("step").get<int>(), entry.at("true_expected_reward").get<double>()});
        }
    } catch (const json::exception& e) {
        throw DataError("schema error in training log " + path + ": " + e.what());
    }
    return log;
}

RubricScoreResult rubric_score_eval(const std::vector<std::string>& responses,
                                    const std::vector<DatasetRecord>& eval_records,
                                    Gateway& gateway, const std::string& grader_backend_id,
                                    const std::vector<std::string>& response_ids) {
    if (responses.size() != eval_records.size()) {
        throw DataError("one response per eval prompt required");
    }
    if (!response_ids.empty() && response_ids.size() != responses.size()) {
        throw DataError("response_ids must align with responses");
    }
    RubricScoreResult result;
    result.details = json::array();
    double total = 0.0;
    for (std::size_t i = 0; i < eval_records.size(); ++i) {
        const DatasetRecord& record = eval_records[i];
        json row = {{"prompt_id", record.prompt.prompt_id}};
        try {
            // Eval rubrics are the fixed offline ones; nothing elicited.
            const std::string& response_id = response_ids.empty() ? responses[i] : response_ids[i];
            const GradeVector grades =
                gateway.grade(record.prompt.prompt_text, responses[i], response_id,
                              record.prompt.rubric, grader_backend_id);
            const double score = reduce_reward(record.prompt.rubric, grades);
            total += score;
            result.graded += 1;
            row["score"] = score;
        } catch (const BackendError& e) {
            result.failed += 1;
            row["error"] = e.what();
        }
        result.details.push_back(std::move(row));
    }
    if (result.graded > 0) result.mean_score = total / double(result.graded);
    return result;
}

WinRateResult win_rate_eval(const std::vector<std::string>& our_responses,
                            const std::vector<std::string>& reference_responses,
                            const std::vector<DatasetRecord>& eval_records, Gateway& gateway,
                            const std::string& judge_backend_id) {
    if (our_responses.size() != reference_responses.size() ||
        our_responses.size() != eval_records.size()) {
        throw DataError("win_rate_eval requires aligned response lists");
    }
    WinRateResult result;
    result.details = json::array();
    int wins = 0;
    int losses = 0;
    int inconsistent = 0;
    for (std::size_t i = 0; i < eval_records.size(); ++i) {
        const std::string& prompt = eval_records[i].prompt.prompt_text;
        json row = {{"prompt_id", eval_records[i].prompt.prompt_id}};
        try {
            const auto first =
                gateway.judge_pair(prompt, our_responses[i], reference_responses[i], judge_backend_id);
            const auto second =
                gateway.judge_pair(prompt, reference_responses[i], our_responses[i], judge_backend_id);
            const bool ours_first = first == Gateway::JudgeChoice::A;
            const bool ours_second = second == Gateway::JudgeChoice::B;
            if (ours_first && ours_second) {
                ++wins;
                row["outcome"] = "win";
            } else if (!ours_first && !ours_second) {
                ++losses;
                row["outcome"] = "loss";
            } else {
                ++inconsistent;
                row["outcome"] = "inconsistent";
            }
        } catch (const BackendError& e) {
            result.excluded += 1;
            row["outcome"] = "excluded";
            row["error"] = e.what();
        }
        result.details.push_back(std::move(row));
    }
    result.judged = wins + losses + inconsistent;
    if (result.judged > 0) {
        result.win_rate = double(wins) / double(result.judged);
        result.loss_rate = double(losses) / double(result.judged);
        result.inconsistent_rate = double(inconsistent) / double(result.judged);
    }
    return result;
}

}  // namespace rubricrl
