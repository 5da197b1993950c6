#include "rubricrl/elicit.hpp"

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rubricrl/errors.hpp"

namespace rubricrl {

using json = nlohmann::json;

namespace {

json parse_reply_object(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
    }
    const auto start = text.find('{');
    const auto end = text.rfind('}');
    if (start != std::string::npos && end != std::string::npos && end > start) {
        try {
            return json::parse(text.substr(start, end - start + 1));
        } catch (const json::parse_error&) {
        }
    }
    throw BackendError("unparseable backend reply");
}

std::string derived_criterion_id(const std::string& text) {
    // FNV-1a over the normalized text keeps ids stable across runs.
    std::uint64_t h = 1469598103934665603ull;
    for (char c : normalize_text(text)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << "e" << std::hex << h;
    return out.str();
}

std::vector<Criterion> parse_criteria_reply(const json& doc, const WeightProfile& clamp_profile,
                                            CriterionSource source) {
    std::vector<Criterion> out;
    const auto it = doc.find("criteria");
    if (it == doc.end() || !it->is_array()) {
        throw BackendError("reply has no 'criteria' array");
    }
    for (const auto& entry : *it) {
        Criterion c;
        c.text = entry.at("text").get<std::string>();
        if (normalize_text(c.text).empty()) throw BackendError("criterion with empty text");
        c.weight = clamp_profile.clamp(entry.at("weight").get<double>());
        c.id = entry.value("id", derived_criterion_id(c.text));
        c.source = source;
        out.push_back(std::move(c));
    }
    return out;
}

std::string numbered_texts(const std::vector<Criterion>& criteria) {
    std::ostringstream out;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        out << k << ". " << criteria[k].text << "\n";
    }
    return out.str();
}

std::vector<Criterion> exact_dedup(const std::vector<Criterion>& criteria) {
    std::vector<Criterion> out;
    std::set<std::string> seen;
    for (const Criterion& c : criteria) {
        if (seen.insert(normalize_text(c.text)).second) out.push_back(c);
    }
    return out;
}

}  // namespace

RewardStrategyKind reward_strategy_from_string(std::string_view s) {
    if (s == "offline_rubric") return RewardStrategyKind::offline_rubric;
    if (s == "offline_plus_online") return RewardStrategyKind::offline_plus_online;
    if (s == "offline_plus_pointwise") return RewardStrategyKind::offline_plus_pointwise;
    if (s == "offline_plus_universal") return RewardStrategyKind::offline_plus_universal;
    if (s == "llm_judge_likert") return RewardStrategyKind::llm_judge_likert;
    if (s == "synthetic_rubric") return RewardStrategyKind::synthetic_rubric;
    throw ConfigError("unknown reward strategy: " + std::string(s));
}

const char* to_string(RewardStrategyKind kind) {
    switch (kind) {
        case RewardStrategyKind::offline_rubric: return "offline_rubric";
        case RewardStrategyKind::offline_plus_online: return "offline_plus_online";
        case RewardStrategyKind::offline_plus_pointwise: return "offline_plus_pointwise";
        case RewardStrategyKind::offline_plus_universal: return "offline_plus_universal";
        case RewardStrategyKind::llm_judge_likert: return "llm_judge_likert";
        case RewardStrategyKind::synthetic_rubric: return "synthetic_rubric";
    }
    return "offline_rubric";
}

std::vector<ResponsePair> pair_rollouts(const std::vector<std::string>& current,
                                        const std::vector<std::string>& control, int pair_count) {
    if (pair_count < 0) throw DataError("pair count must be >= 0");
    const auto m = static_cast<std::size_t>(pair_count);
    if (m > current.size() || m > control.size()) {
        throw DataError("pair count " + std::to_string(pair_count) + " exceeds group sizes " +
                        std::to_string(current.size()) + "/" + std::to_string(control.size()));
    }
    std::vector<ResponsePair> pairs;
    pairs.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        pairs.push_back({current[k], control[k], "", "", static_cast<int>(k + 1)});
    }
    return pairs;
}

ElicitedCriteria elicit_pairwise(const std::string& prompt, const std::vector<ResponsePair>& pairs,
                                 const Rubric& base, Gateway& gateway,
                                 const std::string& extractor_backend_id,
                                 const std::string& dedup_backend_id,
                                 const ElicitationConfig& config) {
    (void)base;  // the extractor does not see the existing rubric in pairwise mode
    ElicitedCriteria elicited;
    if (pairs.empty()) return elicited;

    std::vector<CompletionRequest> requests;
    requests.reserve(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        CompletionRequest request;
        request.backend_id = extractor_backend_id;
        request.template_id = config.extraction_template;
        request.bindings = {{"prompt", prompt},
                            {"response_a", pairs[k].current_response},
                            {"response_b", pairs[k].control_response},
                            {"response_a_id", pairs[k].current_id},
                            {"response_b_id", pairs[k].control_id}};
        request.request_index = k;
        requests.push_back(std::move(request));
    }

    const int max_attempts = gateway.spec(extractor_backend_id).retry.max_attempts;
    std::vector<CompletionResult> replies = gateway.complete_batch(requests);

    // Union in pair-index order, tracking which pairs produced each text.
    std::map<std::string, std::size_t> slot_by_text;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        std::vector<Criterion> parsed;
        std::string last_error;
        bool ok = false;
        for (int attempt = 1; attempt <= max_attempts && !ok; ++attempt) {
            try {
                const CompletionResult& reply =
                    attempt == 1 ? replies[k] : (replies[k] = gateway.complete(requests[k]));
                parsed = parse_criteria_reply(parse_reply_object(reply.text), config.clamp_profile,
                                              CriterionSource::elicited);
                ok = true;
            } catch (const BackendError& e) {
                last_error = e.what();
            } catch (const json::exception& e) {
                last_error = e.what();
            }
        }
        if (!ok) {
            throw BackendError("criteria extraction failed for pair " +
                               std::to_string(pairs[k].pair_index) + ": " + last_error);
        }
        for (Criterion& c : parsed) {
            const std::string key = normalize_text(c.text);
            const auto it = slot_by_text.find(key);
            if (it == slot_by_text.end()) {
                slot_by_text[key] = elicited.criteria.size();
                elicited.criteria.push_back(std::move(c));
                elicited.provenance.push_back({pairs[k].pair_index});
            } else {
                elicited.provenance[it->second].push_back(pairs[k].pair_index);
            }
        }
    }

    if (!dedup_backend_id.empty() && !elicited.criteria.empty()) {
        const std::vector<Criterion> kept =
            deduplicate(elicited.criteria, gateway, dedup_backend_id, config.dedup_template);
        ElicitedCriteria filtered;
        for (const Criterion& c : kept) {
            const auto slot = slot_by_text.at(normalize_text(c.text));
            filtered.criteria.push_back(c);
            filtered.provenance.push_back(elicited.provenance[slot]);
        }
        return filtered;
    }
    return elicited;
}

std::vector<Criterion> deduplicate(const std::vector<Criterion>& criteria, Gateway& gateway,
                                   const std::string& backend_id, const std::string& template_id) {
    if (criteria.empty()) return {};
    CompletionRequest request;
    request.backend_id = backend_id;
    request.template_id = template_id;
    request.bindings = {{"criteria", numbered_texts(criteria)}};

    const int max_attempts = gateway.spec(backend_id).retry.max_attempts;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        const CompletionResult reply = gateway.complete(request);
        try {
            const json doc = parse_reply_object(reply.text);
            std::set<std::size_t> keep;
            for (const auto& idx : doc.at("keep")) {
                const auto i = idx.get<std::int64_t>();
                if (i < 0 || static_cast<std::size_t>(i) >= criteria.size()) {
                    throw BackendError("dedup kept index " + std::to_string(i) +
                                       " outside input range of " + std::to_string(criteria.size()));
                }
                keep.insert(static_cast<std::size_t>(i));
            }
            std::vector<Criterion> out;
            for (std::size_t i = 0; i < criteria.size(); ++i) {
                if (keep.count(i)) out.push_back(criteria[i]);
            }
            return exact_dedup(out);
        } catch (const BackendError& e) {
            last_error = e.what();
        } catch (const json::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("deduplication via '" + backend_id + "' failed: " + last_error);
}

ElicitedCriteria elicit_pointwise(const std::string& prompt, const std::string& response,
                                  const Rubric& base, Gateway& gateway,
                                  const std::string& extractor_backend_id,
                                  const ElicitationConfig& config) {
    CompletionRequest request;
    request.backend_id = extractor_backend_id;
    request.template_id = "pointwise_extract";
    request.bindings = {{"prompt", prompt},
                        {"response", response},
                        {"rubric", numbered_texts(base.criteria)}};

    const int max_attempts = gateway.spec(extractor_backend_id).retry.max_attempts;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        const CompletionResult reply = gateway.complete(request);
        try {
            const std::vector<Criterion> parsed =
                exact_dedup(parse_criteria_reply(parse_reply_object(reply.text),
                                                 config.clamp_profile, CriterionSource::elicited));
            ElicitedCriteria elicited;
            for (const Criterion& c : parsed) {
                elicited.criteria.push_back(c);
                elicited.provenance.push_back({0});
            }
            return elicited;
        } catch (const BackendError& e) {
            last_error = e.what();
        } catch (const json::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("pointwise extraction failed: " + last_error);
}

Rubric apply_universal(const Rubric& base, const std::vector<Criterion>& universal) {
    std::vector<Criterion> tagged = universal;
    for (Criterion& c : tagged) c.source = CriterionSource::universal;
    return merge_rubrics(base, tagged);
}

double likert_reward(const std::string& prompt, const std::string& response, Gateway& gateway,
                     const std::string& backend_id, int lo, int hi) {
    if (lo >= hi) throw ConfigError("likert scale requires lo < hi");
    CompletionRequest request;
    request.backend_id = backend_id;
    request.template_id = "likert";
    request.bindings = {{"prompt", prompt},
                        {"response", response},
                        {"lo", std::to_string(lo)},
                        {"hi", std::to_string(hi)}};

    const int max_attempts = gateway.spec(backend_id).retry.max_attempts;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        const CompletionResult reply = gateway.complete(request);
        try {
            const json doc = parse_reply_object(reply.text);
            const int score = doc.at("score").get<int>();
            if (score < lo || score > hi) {
                throw BackendError("likert score " + std::to_string(score) + " outside [" +
                                   std::to_string(lo) + "," + std::to_string(hi) + "]");
            }
            return double(score - lo) / double(hi - lo);
        } catch (const BackendError& e) {
            last_error = e.what();
        } catch (const json::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("likert scoring via '" + backend_id + "' failed: " + last_error);
}

Rubric generate_synthetic_rubric(const std::string& prompt, const std::string& prompt_id,
                                 Gateway& gateway, const std::string& backend_id,
                                 const WeightProfile& profile) {
    CompletionRequest request;
    request.backend_id = backend_id;
    request.template_id = "synthetic_rubric";
    request.bindings = {{"prompt", prompt}};

    const int max_attempts = gateway.spec(backend_id).retry.max_attempts;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        const CompletionResult reply = gateway.complete(request);
        try {
            const json doc = parse_reply_object(reply.text);
            Rubric rubric;
            rubric.prompt_id = prompt_id;
            const auto& entries = doc.at("criteria");
            int counter = 0;
            for (const auto& entry : entries) {
                Criterion c;
                c.text = entry.at("text").get<std::string>();
                c.weight = entry.at("weight").get<double>();  // not clamped: must validate as-is
                c.id = entry.value("id", "s" + std::to_string(++counter));
                c.source = CriterionSource::synthetic;
                rubric.criteria.push_back(std::move(c));
            }
            if (rubric.criteria.empty()) throw BackendError("empty synthetic rubric");
            const std::vector<Violation> violations = validate_rubric(rubric, profile);
            if (!violations.empty()) {
                throw BackendError("synthetic rubric invalid: " + violations.front().message);
            }
            return rubric;
        } catch (const BackendError& e) {
            last_error = e.what();
        } catch (const json::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("synthetic rubric generation via '" + backend_id + "' failed: " + last_error);
}

}  // namespace rubricrl
