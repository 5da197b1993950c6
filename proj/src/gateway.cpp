#include "rubricrl/gateway.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rubricrl/errors.hpp"

namespace rubricrl {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::int64_t synthetic_token_count(const std::string& text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// Accepts either a bare JSON document or a reply with surrounding
// free text; grabs the first parseable object.
json extract_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
    }
    const auto start = text.find('{');
    if (start != std::string::npos) {
        for (std::size_t end = text.rfind('}'); end != std::string::npos && end > start;
             end = text.rfind('}', end - 1)) {
            try {
                return json::parse(text.substr(start, end - start + 1));
            } catch (const json::parse_error&) {
            }
        }
    }
    throw BackendError("no parseable JSON object in backend reply");
}

std::string numbered_criteria(const Rubric& rubric) {
    std::ostringstream out;
    for (std::size_t k = 0; k < rubric.criteria.size(); ++k) {
        out << (k + 1) << ". " << rubric.criteria[k].text << "\n";
    }
    return out.str();
}

}  // namespace

BackendKind backend_kind_from_string(std::string_view s) {
    if (s == "http_openai_compatible") return BackendKind::http_openai_compatible;
    if (s == "mock_table") return BackendKind::mock_table;
    if (s == "mock_scripted") return BackendKind::mock_scripted;
    throw ConfigError("unknown backend kind: " + std::string(s));
}

const char* to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::http_openai_compatible: return "http_openai_compatible";
        case BackendKind::mock_table: return "mock_table";
        case BackendKind::mock_scripted: return "mock_scripted";
    }
    return "mock_scripted";
}

void BackendSpec::validate() const {
    if (id.empty()) throw ConfigError("backend id must be non-empty");
    if (pricing.in_per_million < 0.0 || pricing.out_per_million < 0.0) {
        throw ConfigError("backend " + id + ": pricing must be non-negative");
    }
    if (concurrency < 1) throw ConfigError("backend " + id + ": concurrency cap must be >= 1");
    if (retry.max_attempts < 1) throw ConfigError("backend " + id + ": max_attempts must be >= 1");
    if (kind == BackendKind::http_openai_compatible && endpoint.empty()) {
        throw ConfigError("backend " + id + ": http backend needs an endpoint");
    }
}

TemplateRegistry::TemplateRegistry() {
    templates_["grader"] =
        "You are checking a response against a rubric.\n"
        "Question:\n{{prompt}}\n\nResponse:\n{{response}}\n\n"
        "Criteria, one per line:\n{{criteria}}\n"
        "For each criterion decide whether the response satisfies it.\n"
        "Reply with JSON only: {\"verdicts\": [0 or 1 per criterion, in order]}";
    templates_["pairwise_extract"] =
        "Compare two responses to the same question and list the meaningful\n"
        "differences between them, citing where each difference appears.\n"
        "Then turn each difference into a short, checkable criterion with an\n"
        "importance weight (negative for undesired behavior).\n"
        "Question:\n{{prompt}}\n\nResponse A:\n{{response_a}}\n\nResponse B:\n{{response_b}}\n"
        "Reply with JSON only: {\"criteria\": [{\"text\": ..., \"weight\": ...}]}";
    templates_["pointwise_extract"] =
        "Read the question, one sampled response, and the current rubric.\n"
        "Propose additional checkable criteria the rubric is missing.\n"
        "Question:\n{{prompt}}\n\nResponse:\n{{response}}\n\nCurrent rubric:\n{{rubric}}\n"
        "Reply with JSON only: {\"criteria\": [{\"text\": ..., \"weight\": ...}]}";
    templates_["dedup"] =
        "Below is a numbered list of evaluation criteria. Remove entries that\n"
        "duplicate or heavily overlap an earlier entry.\n{{criteria}}\n"
        "Reply with JSON only: {\"keep\": [zero-based indices to keep, ascending]}";
    templates_["judge"] =
        "Pick the better response to the question. Answer A or B only.\n"
        "Question:\n{{prompt}}\n\nResponse A:\n{{response_a}}\n\nResponse B:\n{{response_b}}\n"
        "Reply with JSON only: {\"winner\": \"A\" or \"B\"}";
    templates_["likert"] =
        "Rate the response to the question on an integer scale from {{lo}} to {{hi}}.\n"
        "Question:\n{{prompt}}\n\nResponse:\n{{response}}\n"
        "Reply with JSON only: {\"score\": integer}";
    templates_["synthetic_rubric"] =
        "Write a rubric for grading answers to the question below: a list of\n"
        "atomic, objective, self-contained criteria with importance weights.\n"
        "Question:\n{{prompt}}\n"
        "Reply with JSON only: {\"criteria\": [{\"text\": ..., \"weight\": ...}]}";
}

void TemplateRegistry::set(const std::string& id, std::string text) {
    templates_[id] = std::move(text);
}

void TemplateRegistry::load_directory(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("template directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        std::ostringstream buf;
        buf << in.rdbuf();
        templates_[entry.path().stem().string()] = buf.str();
    }
}

bool TemplateRegistry::has(const std::string& id) const { return templates_.count(id) > 0; }

std::string TemplateRegistry::render(const std::string& id,
                                     const std::map<std::string, std::string>& bindings) const {
    const auto it = templates_.find(id);
    if (it == templates_.end()) throw ConfigError("unknown template id: " + id);
    std::string out = it->second;
    for (const auto& [key, value] : bindings) {
        const std::string marker = "{{" + key + "}}";
        for (std::size_t pos = out.find(marker); pos != std::string::npos;
             pos = out.find(marker, pos + value.size())) {
            out.replace(pos, marker.size(), value);
        }
    }
    const auto open = out.find("{{");
    if (open != std::string::npos && out.find("}}", open) != std::string::npos) {
        throw ConfigError("template " + id + " has unbound variable near: " + out.substr(open, 24));
    }
    return out;
}

CompletionResult ScriptedBackend::complete_once(const std::string& rendered_prompt,
                                                const CompletionRequest& request) {
    CompletionResult result;
    result.text = script_(request);
    result.usage.input_tokens = synthetic_token_count(rendered_prompt);
    result.usage.output_tokens = synthetic_token_count(result.text);
    result.usage.backend_id = request.backend_id;
    return result;
}

void TableBackend::set_verdict(const std::string& response_id, const std::string& criterion_id,
                               int verdict) {
    table_[{response_id, criterion_id}] = verdict;
}

int TableBackend::lookup(const std::string& response_id, const std::string& criterion_id) const {
    const auto it = table_.find({response_id, criterion_id});
    if (it == table_.end()) {
        throw BackendError("no verdict for response '" + response_id + "' criterion '" +
                           criterion_id + "'");
    }
    return it->second;
}

CompletionResult TableBackend::complete_once(const std::string& rendered_prompt,
                                             const CompletionRequest& request) {
    (void)rendered_prompt;
    throw BackendError("table backend '" + request.backend_id +
                       "' only serves grade() lookups, not free-form completions");
}

HttpBackend::HttpBackend(BackendSpec spec) : spec_(std::move(spec)) {}

std::string HttpBackend::build_payload(const BackendSpec& spec, const std::string& prompt,
                                       const CompletionRequest& request) {
    json payload = {
        {"model", spec.model},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    return payload.dump();
}

CompletionResult HttpBackend::parse_response(const std::string& body,
                                             const std::string& backend_id) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        throw BackendError("malformed completion response: " + std::string(e.what()));
    }
    CompletionResult result;
    try {
        result.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw BackendError("completion response missing choices[0].message.content");
    }
    if (doc.contains("usage")) {
        result.usage.input_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
        result.usage.output_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
    }
    result.usage.backend_id = backend_id;
    return result;
}

CompletionResult HttpBackend::complete_once(const std::string& rendered_prompt,
                                            const CompletionRequest& request) {
    std::string scheme_host = spec_.endpoint;
    std::string path = "/v1/chat/completions";
    const auto scheme_end = scheme_host.find("://");
    const auto path_start = scheme_host.find(
        '/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        path = scheme_host.substr(path_start);
        scheme_host = scheme_host.substr(0, path_start);
    }

    httplib::Client client(scheme_host);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!spec_.api_key_env.empty()) {
        const char* key = std::getenv(spec_.api_key_env.c_str());
        if (key == nullptr) {
            throw BackendError("backend " + spec_.id + ": credential env var " + spec_.api_key_env +
                               " is unset");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto start = std::chrono::steady_clock::now();
    auto response =
        client.Post(path, headers, build_payload(spec_, rendered_prompt, request), "application/json");
    if (!response) {
        throw TransportError("backend " + spec_.id + ": transport failure (" +
                             httplib::to_string(response.error()) + ")");
    }
    if (response->status == 401 || response->status == 403) {
        throw BackendError("backend " + spec_.id + ": authentication failed (HTTP " +
                           std::to_string(response->status) + ")");
    }
    if (response->status >= 500 || response->status == 429) {
        throw TransportError("backend " + spec_.id + ": HTTP " + std::to_string(response->status));
    }
    if (response->status != 200) {
        throw BackendError("backend " + spec_.id + ": HTTP " + std::to_string(response->status));
    }
    CompletionResult result = parse_response(response->body, spec_.id);
    result.usage.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

double usage_cost(const UsageRecord& usage, const BackendSpec& spec) {
    return double(usage.input_tokens) * spec.pricing.in_per_million / 1e6 +
           double(usage.output_tokens) * spec.pricing.out_per_million / 1e6;
}

Gateway::Gateway() = default;

void Gateway::register_backend(BackendSpec spec, std::shared_ptr<Backend> impl) {
    spec.validate();
    if (impl == nullptr) throw ConfigError("backend " + spec.id + ": null implementation");
    std::lock_guard lock(mutex_);
    backends_[spec.id] = std::move(impl);
    specs_[spec.id] = std::move(spec);
}

const BackendSpec& Gateway::spec(const std::string& backend_id) const {
    std::lock_guard lock(mutex_);
    const auto it = specs_.find(backend_id);
    if (it == specs_.end()) throw ConfigError("unknown backend id: " + backend_id);
    return it->second;
}

std::shared_ptr<Backend> Gateway::backend(const std::string& backend_id) const {
    std::lock_guard lock(mutex_);
    const auto it = backends_.find(backend_id);
    if (it == backends_.end()) throw ConfigError("unknown backend id: " + backend_id);
    return it->second;
}

bool Gateway::has_backend(const std::string& backend_id) const {
    std::lock_guard lock(mutex_);
    return specs_.count(backend_id) > 0;
}

std::vector<std::string> Gateway::backend_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : specs_) ids.push_back(id);
    return ids;
}

void Gateway::record_usage(const UsageRecord& usage) {
    std::lock_guard lock(mutex_);
    usage_log_.push_back(usage);
}

CompletionResult Gateway::complete(const CompletionRequest& request) {
    const BackendSpec backend_spec = spec(request.backend_id);
    const std::string prompt = templates_.render(request.template_id, request.bindings);
    auto impl = backend(request.backend_id);

    double backoff_ms = backend_spec.retry.backoff_base_ms;
    for (int attempt = 1;; ++attempt) {
        try {
            CompletionResult result = impl->complete_once(prompt, request);
            result.attempts = attempt;
            result.usage.backend_id = request.backend_id;
            record_usage(result.usage);
            return result;
        } catch (const TransportError& e) {
            if (attempt >= backend_spec.retry.max_attempts) {
                throw BackendError("request " + std::to_string(request.request_index) + " to '" +
                                   request.backend_id + "' failed after " +
                                   std::to_string(attempt) + " attempts: " + e.what());
            }
            if (backoff_ms > 0.0) {
                std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff_ms));
                backoff_ms *= backend_spec.retry.backoff_factor;
            }
        }
    }
}

std::vector<CompletionResult> Gateway::complete_batch(
    const std::vector<CompletionRequest>& requests) {
    std::vector<CompletionResult> results(requests.size());
    std::vector<std::exception_ptr> failures(requests.size());

    // Group positions by backend so each pool honors its own cap.
    std::map<std::string, std::vector<std::size_t>> by_backend;
    for (std::size_t pos = 0; pos < requests.size(); ++pos) {
        by_backend[requests[pos].backend_id].push_back(pos);
    }

    for (const auto& [backend_id, positions] : by_backend) {
        const int cap = spec(backend_id).concurrency;
        const std::size_t workers = std::min<std::size_t>(cap, positions.size());
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (std::size_t i = next.fetch_add(1); i < positions.size();
                     i = next.fetch_add(1)) {
                    const std::size_t pos = positions[i];
                    try {
                        results[pos] = complete(requests[pos]);
                    } catch (...) {
                        failures[pos] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    for (const auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }
    return results;
}

GradeVector Gateway::grade(const std::string& prompt, const std::string& response,
                           const std::string& response_id, const Rubric& rubric,
                           const std::string& backend_id) {
    const BackendSpec backend_spec = spec(backend_id);
    if (backend_spec.kind == BackendKind::mock_table) {
        auto table = std::dynamic_pointer_cast<TableBackend>(backend(backend_id));
        if (table == nullptr) {
            throw ConfigError("backend " + backend_id + " declared mock_table but is not one");
        }
        GradeVector grades;
        grades.verdicts.reserve(rubric.criteria.size());
        for (const Criterion& c : rubric.criteria) {
            grades.verdicts.push_back(table->lookup(response_id, c.id));
        }
        return grades;
    }

    CompletionRequest request;
    request.backend_id = backend_id;
    request.template_id = "grader";
    request.bindings = {{"prompt", prompt},
                        {"response", response},
                        {"criteria", numbered_criteria(rubric)}};

    std::string last_error;
    for (int attempt = 1; attempt <= backend_spec.retry.max_attempts; ++attempt) {
        const CompletionResult result = complete(request);
        try {
            const json doc = extract_json(result.text);
            const auto& verdicts = doc.at("verdicts");
            if (!verdicts.is_array() || verdicts.size() != rubric.criteria.size()) {
                throw BackendError("grader returned " + std::to_string(verdicts.size()) +
                                   " verdicts for a rubric of " +
                                   std::to_string(rubric.criteria.size()));
            }
            GradeVector grades;
            for (const auto& v : verdicts) {
                const int verdict = v.get<int>();
                if (verdict != 0 && verdict != 1) throw BackendError("non-binary verdict");
                grades.verdicts.push_back(verdict);
            }
            if (doc.contains("confidences")) {
                for (const auto& c : doc["confidences"]) grades.confidences.push_back(c.get<double>());
            }
            return grades;
        } catch (const BackendError& e) {
            last_error = e.what();
        } catch (const json::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("grading via '" + backend_id + "' failed: " + last_error);
}

Gateway::JudgeChoice Gateway::judge_pair(const std::string& prompt, const std::string& response_a,
                                         const std::string& response_b,
                                         const std::string& backend_id) {
    if (response_a.empty() || response_b.empty()) {
        throw DataError("judge_pair requires two non-empty responses");
    }
    const BackendSpec backend_spec = spec(backend_id);
    CompletionRequest request;
    request.backend_id = backend_id;
    request.template_id = "judge";
    request.bindings = {
        {"prompt", prompt}, {"response_a", response_a}, {"response_b", response_b}};

    std::string last_error;
    for (int attempt = 1; attempt <= backend_spec.retry.max_attempts; ++attempt) {
        const CompletionResult result = complete(request);
        try {
            const json doc = extract_json(result.text);
            const std::string winner = doc.at("winner").get<std::string>();
            if (winner == "A") return JudgeChoice::A;
            if (winner == "B") return JudgeChoice::B;
            throw BackendError("judge picked '" + winner + "', expected A or B");
        } catch (const BackendError& e) {
            last_error = e.what();
        } catch (const json::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("judging via '" + backend_id + "' failed: " + last_error);
}

double Gateway::total_cost() const {
    std::lock_guard lock(mutex_);
    double total = 0.0;
    for (const UsageRecord& usage : usage_log_) {
        const auto it = specs_.find(usage.backend_id);
        if (it != specs_.end()) total += usage_cost(usage, it->second);
    }
    return total;
}

void load_backend_registry(Gateway& gateway, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open backend registry: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed backend registry " + path + ": " + e.what());
    }
    for (const auto& entry : doc.at("backends")) {
        BackendSpec spec;
        spec.id = entry.at("id").get<std::string>();
        spec.kind = backend_kind_from_string(entry.at("kind").get<std::string>());
        spec.endpoint = entry.value("endpoint", "");
        spec.model = entry.value("model", "");
        spec.api_key_env = entry.value("api_key_env", "");
        if (entry.contains("pricing")) {
            spec.pricing.in_per_million = entry["pricing"].value("in", 0.0);
            spec.pricing.out_per_million = entry["pricing"].value("out", 0.0);
        }
        if (entry.contains("retry")) {
            spec.retry.max_attempts = entry["retry"].value("max_attempts", 3);
            spec.retry.backoff_base_ms = entry["retry"].value("backoff_base_ms", 0.0);
            spec.retry.backoff_factor = entry["retry"].value("backoff_factor", 2.0);
        }
        spec.concurrency = entry.value("concurrency", 1);

        std::shared_ptr<Backend> impl;
        switch (spec.kind) {
            case BackendKind::http_openai_compatible:
                impl = std::make_shared<HttpBackend>(spec);
                break;
            case BackendKind::mock_table:
                impl = std::make_shared<TableBackend>();
                break;
            case BackendKind::mock_scripted:
                impl = std::make_shared<ScriptedBackend>(
                    [](const CompletionRequest&) { return std::string("{}"); });
                break;
        }
        gateway.register_backend(std::move(spec), std::move(impl));
    }
}

}  // namespace rubricrl
