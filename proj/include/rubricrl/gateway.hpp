#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "rubricrl/rubric.hpp"

namespace rubricrl {

struct UsageRecord {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double wall_seconds = 0.0;
    std::string backend_id;
};

struct Pricing {
    double in_per_million = 0.0;
    double out_per_million = 0.0;
};

struct RetryPolicy {
    int max_attempts = 3;
    double backoff_base_ms = 0.0;  // exponential, no jitter
    double backoff_factor = 2.0;
};

enum class BackendKind { http_openai_compatible, mock_table, mock_scripted };

BackendKind backend_kind_from_string(std::string_view s);
const char* to_string(BackendKind kind);

struct BackendSpec {
    std::string id;
    BackendKind kind = BackendKind::mock_scripted;
    std::string endpoint;
    std::string model;
    std::string api_key_env;
    Pricing pricing;
    RetryPolicy retry;
    int concurrency = 1;

    void validate() const;  // throws ConfigError
};

struct CompletionRequest {
    std::string backend_id;
    std::string template_id;
    std::map<std::string, std::string> bindings;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::size_t request_index = 0;
};

struct CompletionResult {
    std::string text;
    UsageRecord usage;
    int attempts = 1;
};

// Prompt templates with {{var}} placeholders. Built-in defaults can be
// overridden from a directory of <id>.txt files.
class TemplateRegistry {
public:
    TemplateRegistry();
    void set(const std::string& id, std::string text);
    void load_directory(const std::string& dir);
    bool has(const std::string& id) const;
    // Throws ConfigError on unknown template or unbound variable.
    std::string render(const std::string& id,
                       const std::map<std::string, std::string>& bindings) const;

private:
    std::map<std::string, std::string> templates_;
};

class Backend {
public:
    virtual ~Backend() = default;
    // One attempt; may throw TransportError for retryable failures.
    virtual CompletionResult complete_once(const std::string& rendered_prompt,
                                           const CompletionRequest& request) = 0;
};

// Mock driven by a user-supplied function of the raw request. Token
// counts are deterministic: ceil(len/4) on each side.
class ScriptedBackend : public Backend {
public:
    using Script = std::function<std::string(const CompletionRequest&)>;
    explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
    CompletionResult complete_once(const std::string& rendered_prompt,
                                   const CompletionRequest& request) override;

private:
    Script script_;
};

// Ground-truth verdict table keyed by (response id, criterion id).
// The gateway short-circuits grade() calls to the table.
class TableBackend : public Backend {
public:
    void set_verdict(const std::string& response_id, const std::string& criterion_id, int verdict);
    int lookup(const std::string& response_id, const std::string& criterion_id) const;
    CompletionResult complete_once(const std::string& rendered_prompt,
                                   const CompletionRequest& request) override;

private:
    std::map<std::pair<std::string, std::string>, int> table_;
};

// OpenAI-style chat completions over HTTP.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendSpec spec);
    CompletionResult complete_once(const std::string& rendered_prompt,
                                   const CompletionRequest& request) override;

    // Exposed for wire-format tests.
    static std::string build_payload(const BackendSpec& spec, const std::string& prompt,
                                     const CompletionRequest& request);
    static CompletionResult parse_response(const std::string& body, const std::string& backend_id);

private:
    BackendSpec spec_;
};

double usage_cost(const UsageRecord& usage, const BackendSpec& spec);

class Gateway {
public:
    Gateway();

    TemplateRegistry& templates() { return templates_; }
    const TemplateRegistry& templates() const { return templates_; }

    void register_backend(BackendSpec spec, std::shared_ptr<Backend> impl);
    const BackendSpec& spec(const std::string& backend_id) const;
    std::shared_ptr<Backend> backend(const std::string& backend_id) const;
    bool has_backend(const std::string& backend_id) const;
    std::vector<std::string> backend_ids() const;

    // Completion with retries per the backend's policy.
    CompletionResult complete(const CompletionRequest& request);

    // Fan-out honoring each backend's in-flight cap; results returned
    // in request-index order regardless of completion order.
    std::vector<CompletionResult> complete_batch(const std::vector<CompletionRequest>& requests);

    GradeVector grade(const std::string& prompt, const std::string& response,
                      const std::string& response_id, const Rubric& rubric,
                      const std::string& backend_id);

    enum class JudgeChoice { A, B };
    JudgeChoice judge_pair(const std::string& prompt, const std::string& response_a,
                           const std::string& response_b, const std::string& backend_id);

    double total_cost() const;
    const std::vector<UsageRecord>& usage_log() const { return usage_log_; }

private:
    void record_usage(const UsageRecord& usage);

    TemplateRegistry templates_;
    std::map<std::string, BackendSpec> specs_;
    std::map<std::string, std::shared_ptr<Backend>> backends_;
    std::vector<UsageRecord> usage_log_;
    mutable std::mutex mutex_;
};

// Registers backends from a registry JSON file. Mock kinds get default
// implementations (an empty TableBackend / an echoing ScriptedBackend)
// which callers may replace via register_backend.
void load_backend_registry(Gateway& gateway, const std::string& path);

}  // namespace rubricrl
