#include "rubricrl/driver.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "rubricrl/bench.hpp"
#include "rubricrl/errors.hpp"
#include "rubricrl/rng.hpp"
#include "rubricrl/synth.hpp"

namespace rubricrl {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

double candidate_true_reward(const DatasetRecord& record, const SimCandidate& candidate) {
    double u = 0.0;
    auto add = [&](const Criterion& c) {
        const auto it = candidate.truth.find(c.id);
        if (it == candidate.truth.end()) {
            throw DataError("candidate '" + candidate.id + "' has no truth entry for '" + c.id +
                            "'");
        }
        u += c.weight * it->second;
    };
    for (const Criterion& c : record.prompt.rubric.criteria) add(c);
    for (const Criterion& c : record.implicit_criteria) add(c);
    return u;
}

// Shared lookup tables for the dataset-grounded mock backends.
struct SimWorld {
    std::vector<DatasetRecord> storage;  // owned copy; the maps point into it
    std::map<std::string, const DatasetRecord*> record_by_candidate_id;
    std::map<std::string, const SimCandidate*> candidate_by_id;
    std::map<std::string, const SimCandidate*> candidate_by_text;
    std::map<std::string, const DatasetRecord*> record_by_prompt_text;

    explicit SimWorld(std::vector<DatasetRecord> records_in) : storage(std::move(records_in)) {
        for (const DatasetRecord& record : storage) {
            record_by_prompt_text[record.prompt.prompt_text] = &record;
            for (const SimCandidate& candidate : record.candidates) {
                record_by_candidate_id[candidate.id] = &record;
                candidate_by_id[candidate.id] = &candidate;
                candidate_by_text[candidate.text] = &candidate;
            }
        }
    }

    const SimCandidate& candidate_for_id(const std::string& id) const {
        const auto it = candidate_by_id.find(id);
        if (it == candidate_by_id.end()) {
            throw BackendError("mock backend does not recognize response id '" + id + "'");
        }
        return *it->second;
    }

    const SimCandidate& candidate_for_text(const std::string& text) const {
        const auto it = candidate_by_text.find(text);
        if (it == candidate_by_text.end()) {
            throw BackendError("mock backend does not recognize response text");
        }
        return *it->second;
    }
};

std::string binding(const CompletionRequest& request, const std::string& key) {
    const auto it = request.bindings.find(key);
    if (it == request.bindings.end()) {
        throw BackendError("mock backend missing binding '" + key + "'");
    }
    return it->second;
}

json criteria_reply(const std::vector<const Criterion*>& criteria) {
    json reply;
    reply["criteria"] = json::array();
    for (const Criterion* c : criteria) {
        reply["criteria"].push_back({{"id", c->id}, {"text", c->text}, {"weight", c->weight}});
    }
    return reply;
}

json snapshot_to_json(const std::map<std::string, SimPolicy>& policies) {
    json doc;
    doc["prompts"] = json::object();
    for (const auto& [prompt_id, policy] : policies) {
        doc["prompts"][prompt_id] = {{"logits", policy.logits}};
    }
    return doc;
}

std::map<std::string, SimPolicy> load_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open policy snapshot: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw DataError("corrupted policy snapshot " + path + ": " + e.what());
    }
    std::map<std::string, SimPolicy> policies;
    for (const auto& [prompt_id, entry] : doc.at("prompts").items()) {
        SimPolicy policy;
        policy.logits = entry.at("logits").get<std::vector<double>>();
        policies[prompt_id] = std::move(policy);
    }
    return policies;
}

}  // namespace

json RunConfig::to_json() const {
    json universal = json::array();
    for (const Criterion& c : universal_criteria) {
        universal.push_back(
            {{"id", c.id}, {"text", c.text}, {"weight", c.weight}, {"source", to_string(c.source)}});
    }
    return {
        {"dataset", dataset_path},
        {"registry", registry_path},
        {"templates_dir", templates_dir},
        {"strategy", to_string(strategy)},
        {"seed", seed},
        {"epochs", epochs},
        {"evals_per_epoch", evals_per_epoch},
        {"out_dir", out_dir},
        {"grpo",
         {{"clip_epsilon", grpo.clip_epsilon},
          {"kl_coefficient", grpo.kl_coefficient},
          {"learning_rate", grpo.learning_rate},
          {"warmup_ratio", grpo.warmup_ratio},
          {"group_size", grpo.group_size},
          {"std_epsilon", grpo.std_epsilon}}},
        {"elicitation",
         {{"pairs", elicitation.pair_count},
          {"control",
           elicitation.control == ControlVariant::reference ? "reference" : "previous_step"},
          {"persistence",
           elicitation.persistence == Persistence::ephemeral ? "ephemeral" : "accumulate"},
          {"profile", elicitation.clamp_profile.name}}},
        {"backends",
         {{"grader", backends.grader},
          {"extractor", backends.extractor},
          {"dedup", backends.dedup},
          {"judge", backends.judge}}},
        {"likert", {{"lo", likert_lo}, {"hi", likert_hi}}},
        {"universal", universal},
    };
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    RunConfig config;
    try {
        config.dataset_path = doc.at("dataset").get<std::string>();
        config.registry_path = doc.at("registry").get<std::string>();
        config.templates_dir = doc.value("templates_dir", "");
        config.strategy = reward_strategy_from_string(doc.value("strategy", "offline_rubric"));
        config.seed = doc.value("seed", std::uint64_t{0});
        config.epochs = doc.value("epochs", 3);
        config.evals_per_epoch = doc.value("evals_per_epoch", 10);
        config.out_dir = doc.value("out_dir", "run_out");
        if (doc.contains("grpo")) {
            const json& g = doc["grpo"];
            config.grpo.clip_epsilon = g.value("clip_epsilon", config.grpo.clip_epsilon);
            config.grpo.kl_coefficient = g.value("kl_coefficient", config.grpo.kl_coefficient);
            config.grpo.learning_rate = g.value("learning_rate", config.grpo.learning_rate);
            config.grpo.warmup_ratio = g.value("warmup_ratio", config.grpo.warmup_ratio);
            config.grpo.group_size = g.value("group_size", config.grpo.group_size);
            config.grpo.std_epsilon = g.value("std_epsilon", config.grpo.std_epsilon);
        }
        if (doc.contains("elicitation")) {
            const json& e = doc["elicitation"];
            config.elicitation.pair_count = e.value("pairs", config.elicitation.pair_count);
            const std::string control = e.value("control", "reference");
            if (control == "reference") {
                config.elicitation.control = ControlVariant::reference;
            } else if (control == "previous_step") {
                config.elicitation.control = ControlVariant::previous_step;
            } else {
                throw ConfigError("unknown control variant: " + control);
            }
            const std::string persistence = e.value("persistence", "ephemeral");
            if (persistence == "ephemeral") {
                config.elicitation.persistence = Persistence::ephemeral;
            } else if (persistence == "accumulate") {
                config.elicitation.persistence = Persistence::accumulate;
            } else {
                throw ConfigError("unknown persistence mode: " + persistence);
            }
            config.elicitation.clamp_profile =
                WeightProfile::for_domain(e.value("profile", "expert"));
        }
        if (doc.contains("backends")) {
            const json& b = doc["backends"];
            config.backends.grader = b.value("grader", "");
            config.backends.extractor = b.value("extractor", "");
            config.backends.dedup = b.value("dedup", "");
            config.backends.judge = b.value("judge", "");
        }
        if (doc.contains("likert")) {
            config.likert_lo = doc["likert"].value("lo", 1);
            config.likert_hi = doc["likert"].value("hi", 10);
        }
        for (const auto& entry : doc.value("universal", json::array())) {
            Criterion c;
            c.id = entry.at("id").get<std::string>();
            c.text = entry.at("text").get<std::string>();
            c.weight = entry.at("weight").get<double>();
            c.source = CriterionSource::universal;
            config.universal_criteria.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw ConfigError("invalid config " + path + ": " + e.what());
    }
    return config;
}

void wire_sim_mocks(Gateway& gateway, const std::vector<DatasetRecord>& records,
                    const BackendBindings& bindings) {
    auto world = std::make_shared<SimWorld>(records);

    auto rewire = [&](const std::string& backend_id) {
        if (backend_id.empty() || !gateway.has_backend(backend_id)) return;
        const BackendSpec spec = gateway.spec(backend_id);
        if (spec.kind == BackendKind::http_openai_compatible) return;

        if (spec.kind == BackendKind::mock_table) {
            auto table = std::make_shared<TableBackend>();
            for (const DatasetRecord& record : records) {
                for (const SimCandidate& candidate : record.candidates) {
                    for (const auto& [criterion_id, verdict] : candidate.truth) {
                        table->set_verdict(candidate.id, criterion_id, verdict);
                    }
                }
            }
            gateway.register_backend(spec, std::move(table));
            return;
        }

        auto script = [world](const CompletionRequest& request) -> std::string {
            if (request.template_id == "pairwise_extract") {
                const auto& a = world->candidate_for_id(binding(request, "response_a_id"));
                const auto& b = world->candidate_for_id(binding(request, "response_b_id"));
                const DatasetRecord& record = *world->record_by_candidate_id.at(a.id);
                std::vector<const Criterion*> revealed;
                for (const Criterion& c : record.implicit_criteria) {
                    const int fa = a.truth.at(c.id);
                    const int fb = b.truth.at(c.id);
                    if (fa != fb) revealed.push_back(&c);  // exactly one side triggers it
                }
                return criteria_reply(revealed).dump();
            }
            if (request.template_id == "pointwise_extract") {
                const auto& candidate = world->candidate_for_text(binding(request, "response"));
                const DatasetRecord& record = *world->record_by_candidate_id.at(candidate.id);
                std::vector<const Criterion*> revealed;
                for (const Criterion& c : record.implicit_criteria) {
                    if (candidate.truth.at(c.id) == 1) revealed.push_back(&c);
                }
                return criteria_reply(revealed).dump();
            }
            if (request.template_id == "synthetic_rubric") {
                const auto it = world->record_by_prompt_text.find(binding(request, "prompt"));
                if (it == world->record_by_prompt_text.end()) {
                    throw BackendError("mock extractor does not recognize the prompt");
                }
                std::vector<const Criterion*> criteria;
                for (const Criterion& c : it->second->prompt.rubric.criteria) criteria.push_back(&c);
                return criteria_reply(criteria).dump();
            }
            if (request.template_id == "judge") {
                const auto& a = world->candidate_for_text(binding(request, "response_a"));
                const auto& b = world->candidate_for_text(binding(request, "response_b"));
                const DatasetRecord& record = *world->record_by_candidate_id.at(a.id);
                const double ua = candidate_true_reward(record, a);
                const double ub = candidate_true_reward(record, b);
                return json{{"winner", ua >= ub ? "A" : "B"}}.dump();
            }
            if (request.template_id == "likert") {
                const auto& candidate = world->candidate_for_text(binding(request, "response"));
                const DatasetRecord& record = *world->record_by_candidate_id.at(candidate.id);
                double lo_u = 0.0, hi_u = 0.0;
                bool first = true;
                for (const SimCandidate& other : record.candidates) {
                    const double u = candidate_true_reward(record, other);
                    lo_u = first ? u : std::min(lo_u, u);
                    hi_u = first ? u : std::max(hi_u, u);
                    first = false;
                }
                const int lo = std::stoi(binding(request, "lo"));
                const int hi = std::stoi(binding(request, "hi"));
                const double u = candidate_true_reward(record, candidate);
                const double t = hi_u > lo_u ? (u - lo_u) / (hi_u - lo_u) : 0.5;
                const int score = lo + static_cast<int>(std::lround(t * (hi - lo)));
                return json{{"score", score}}.dump();
            }
            if (request.template_id == "dedup") {
                // Count input lines; keep everything (exact dedup ran upstream).
                const std::string text = binding(request, "criteria");
                json keep = json::array();
                int index = 0;
                std::istringstream lines(text);
                for (std::string line; std::getline(lines, line);) {
                    if (!line.empty()) keep.push_back(index++);
                }
                return json{{"keep", keep}}.dump();
            }
            throw BackendError("mock backend has no script for template '" + request.template_id +
                               "'");
        };
        gateway.register_backend(spec, std::make_shared<ScriptedBackend>(script));
    };

    rewire(bindings.grader);
    rewire(bindings.extractor);
    rewire(bindings.dedup);
    rewire(bindings.judge);
}

TrainingLog run_train(const RunConfig& config) {
    Gateway gateway;
    if (!config.templates_dir.empty()) gateway.templates().load_directory(config.templates_dir);
    load_backend_registry(gateway, config.registry_path);

    if (config.backends.grader.empty() || !gateway.has_backend(config.backends.grader)) {
        throw ConfigError("grader binding '" + config.backends.grader +
                          "' does not resolve to a registered backend");
    }
    const bool needs_extractor = config.strategy == RewardStrategyKind::offline_plus_online ||
                                 config.strategy == RewardStrategyKind::offline_plus_pointwise ||
                                 config.strategy == RewardStrategyKind::synthetic_rubric;
    if (needs_extractor &&
        (config.backends.extractor.empty() || !gateway.has_backend(config.backends.extractor))) {
        throw ConfigError("extractor binding '" + config.backends.extractor +
                          "' does not resolve to a registered backend");
    }
    if (!config.backends.dedup.empty() && !gateway.has_backend(config.backends.dedup)) {
        throw ConfigError("dedup binding '" + config.backends.dedup +
                          "' does not resolve to a registered backend");
    }

    const std::vector<DatasetRecord> records = load_dataset(config.dataset_path);
    std::vector<DatasetRecord> train;
    for (const DatasetRecord& record : records) {
        if (record.split == "train") train.push_back(record);
    }
    if (train.empty()) throw DataError("dataset has no train-split records");

    wire_sim_mocks(gateway, records, config.backends);

    TrainerOptions options;
    options.strategy = config.strategy;
    options.elicitation = config.elicitation;
    options.grpo = config.grpo;
    options.backends = config.backends;
    options.seed = config.seed;
    options.total_steps = config.epochs * static_cast<int>(train.size());
    options.universal_criteria = config.universal_criteria;
    options.likert_lo = config.likert_lo;
    options.likert_hi = config.likert_hi;
    Trainer trainer(gateway, options);

    std::vector<PromptState> states;
    states.reserve(train.size());
    for (const DatasetRecord& record : train) states.push_back(trainer.init_state(record));

    TrainingLog log;
    log.seed = config.seed;
    log.config = config.to_json();

    fs::create_directories(config.out_dir);
    const std::string log_path = (fs::path(config.out_dir) / "training_log.json").string();
    const std::string elicit_path = (fs::path(config.out_dir) / "elicitation_log.jsonl").string();
    const std::string snapshot_path = (fs::path(config.out_dir) / "policy_snapshot.json").string();

    auto flush = [&]() {
        persist_run(log, log_path);
        std::ofstream elicit_out(elicit_path);
        for (const json& row : trainer.elicitation_log()) elicit_out << row.dump() << "\n";
        std::map<std::string, SimPolicy> policies;
        for (std::size_t i = 0; i < train.size(); ++i) {
            policies[train[i].prompt.prompt_id] = states[i].policy;
        }
        std::ofstream snapshot_out(snapshot_path);
        snapshot_out << snapshot_to_json(policies).dump(2) << "\n";
    };

    const int steps_per_epoch = static_cast<int>(train.size());
    const int eval_every = std::max(1, steps_per_epoch / std::max(1, config.evals_per_epoch));
    int step = 0;
    try {
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            for (std::size_t i = 0; i < train.size(); ++i) {
                log.append(trainer.train_step(states[i], train[i], step));
                ++step;
                if (step % eval_every == 0) {
                    double total = 0.0;
                    for (std::size_t j = 0; j < train.size(); ++j) {
                        total += trainer.true_expected_reward(states[j], train[j]);
                    }
                    log.evals.push_back({step, total / double(train.size())});
                }
            }
        }
    } catch (...) {
        flush();
        throw;
    }
    flush();
    return log;
}

json run_eval(const RunConfig& config, const std::string& policy_snapshot_path,
              const std::string& baseline_snapshot_path, bool score_only) {
    Gateway gateway;
    if (!config.templates_dir.empty()) gateway.templates().load_directory(config.templates_dir);
    load_backend_registry(gateway, config.registry_path);

    const std::vector<DatasetRecord> records = load_dataset(config.dataset_path);
    wire_sim_mocks(gateway, records, config.backends);

    const std::map<std::string, SimPolicy> ours = load_snapshot(policy_snapshot_path);
    std::map<std::string, SimPolicy> baseline;
    if (!score_only) baseline = load_snapshot(baseline_snapshot_path);

    std::vector<DatasetRecord> eval_records;
    std::vector<std::string> our_responses, our_ids, baseline_responses;
    auto argmax_candidate = [](const SimPolicy& policy,
                               const DatasetRecord& record) -> const SimCandidate& {
        if (policy.logits.size() != record.candidates.size()) {
            throw DataError("snapshot logits do not match candidate count for '" +
                            record.prompt.prompt_id + "'");
        }
        const std::size_t best = static_cast<std::size_t>(
            std::max_element(policy.logits.begin(), policy.logits.end()) - policy.logits.begin());
        return record.candidates[best];
    };
    for (const DatasetRecord& record : records) {
        const auto it = ours.find(record.prompt.prompt_id);
        if (it == ours.end()) continue;
        const SimCandidate& best = argmax_candidate(it->second, record);
        if (!score_only) {
            const auto bit = baseline.find(record.prompt.prompt_id);
            if (bit == baseline.end()) continue;
            baseline_responses.push_back(argmax_candidate(bit->second, record).text);
        }
        eval_records.push_back(record);
        our_responses.push_back(best.text);
        our_ids.push_back(best.id);
    }
    if (eval_records.empty()) {
        throw DataError("no dataset prompts match the policy snapshot");
    }

    const RubricScoreResult score = rubric_score_eval(our_responses, eval_records, gateway,
                                                      config.backends.grader, our_ids);
    json report;
    report["score"] = score.mean_score;
    report["graded"] = score.graded;
    report["grade_failures"] = score.failed;
    report["details"] = score.details;
    if (!score_only) {
        if (config.backends.judge.empty() || !gateway.has_backend(config.backends.judge)) {
            throw ConfigError("judge binding '" + config.backends.judge +
                              "' does not resolve to a registered backend");
        }
        const WinRateResult wins = win_rate_eval(our_responses, baseline_responses, eval_records,
                                                 gateway, config.backends.judge);
        report["win_rate"] = wins.win_rate;
        report["loss_rate"] = wins.loss_rate;
        report["inconsistent_rate"] = wins.inconsistent_rate;
        report["excluded"] = wins.excluded;
        report["judged"] = wins.judged;
        report["judge_details"] = wins.details;
    }
    return report;
}

json run_bench_graders(const std::string& records_path, const std::string& registry_path) {
    Gateway gateway;
    load_backend_registry(gateway, registry_path);
    std::map<std::string, BackendSpec> specs;
    for (const std::string& id : gateway.backend_ids()) specs[id] = gateway.spec(id);

    const std::vector<GraderEvalRecord> records = load_grader_eval_records(records_path);
    if (records.empty()) throw DataError("no grader eval records in " + records_path);
    std::map<std::string, std::vector<GraderEvalRecord>> by_backend;
    for (const GraderEvalRecord& record : records) {
        by_backend[record.usage.backend_id].push_back(record);
    }
    return benchmark_graders(by_backend, specs);
}

DatasetStats run_stats(const std::string& dataset_path) {
    return dataset_stats(load_dataset(dataset_path));
}

json run_verify_bound(int instance_count, std::uint64_t seed) {
    if (instance_count <= 0) throw ConfigError("instance count must be positive");
    json report;
    report["instances"] = instance_count;
    report["failures"] = json::array();
    double max_gap = 0.0;
    double max_bound = 0.0;
    bool all_hold = true;
    for (int i = 0; i < instance_count; ++i) {
        Rng rng = Rng::stream(seed, std::uint64_t(i), "bound");
        const BoundInstance instance = make_random_bound_instance(rng);
        const BoundReport result = verify_gradient_bound(instance.policy, instance.model);
        max_gap = std::max(max_gap, result.gap_norm);
        max_bound = std::max(max_bound, result.bound_value);
        if (!result.holds) {
            all_hold = false;
            report["failures"].push_back(
                {{"instance", i}, {"gap_norm", result.gap_norm}, {"bound", result.bound_value}});
        }
    }
    report["all_hold"] = all_hold;
    report["max_gap_norm"] = max_gap;
    report["max_bound_value"] = max_bound;
    return report;
}

}  // namespace rubricrl
