#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mpr {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct CompletionRequest {
    std::string model;  // base model or adapter name for routed calls
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    std::string task_id;
    std::string step_tag;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool estimated = false;  // whitespace-token estimate, not endpoint-reported
};

struct CompletionResult {
    std::string text;
    Usage usage;
    double latency_ms = 0.0;
};

struct CallRecord {
    std::uint64_t prompt_hash = 0;
    std::string model;
    std::string task_id;
    std::string step_tag;
    double latency_ms = 0.0;
    Usage usage;
};

long estimate_tokens(const std::string& text);

// Chat-completion surface. Implementations must be safe for concurrent calls.
class Provider {
public:
    virtual ~Provider() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;

    std::vector<CallRecord> call_log() const;
    void reset_call_log();

protected:
    void record_call(const CompletionRequest& request, const CompletionResult& result);

private:
    mutable std::mutex log_mutex_;
    std::vector<CallRecord> log_;
};

// Text-embedding surface, shared by dense retrieval, TreeRAG, GraphRAG and
// K-means clustering.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
    std::vector<double> embed_one(const std::string& text);
};

// Deterministic offline embedder: L2-normalized hashed bag of words.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(int dimension = 256) : dimension_(dimension) {}
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    int dimension() const { return dimension_; }

private:
    int dimension_;
};

// One canned-response rule: first rule whose pattern occurs in the rendered
// prompt wins; responses are consumed per hit and the last one repeats.
struct ScriptedRule {
    std::string match;
    std::vector<std::string> responses;
};

class ScriptedProvider : public Provider, public Embedder {
public:
    ScriptedProvider() = default;
    explicit ScriptedProvider(std::vector<ScriptedRule> rules,
                              std::optional<std::string> default_response = std::nullopt)
        : rules_(std::move(rules)), default_response_(std::move(default_response)) {}

    static std::unique_ptr<ScriptedProvider> from_json(const nlohmann::json& j);
    static std::unique_ptr<ScriptedProvider> from_file(const std::string& path);

    void add_rule(std::string match, std::vector<std::string> responses);
    void set_default_response(std::string response) { default_response_ = std::move(response); }

    CompletionResult complete(const CompletionRequest& request) override;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    std::vector<ScriptedRule> rules_;
    std::vector<std::size_t> hits_;  // per-rule consumption counters
    std::optional<std::string> default_response_;
    HashingEmbedder hasher_;
    std::mutex mutex_;
};

struct RemoteConfig {
    std::string base_url;      // e.g. http://localhost:8000/v1
    std::string api_key;
    std::string model = "gpt-4o-mini";
    std::string embed_model = "e5-base-v2";
    int timeout_ms = 60'000;
    int max_attempts = 3;
    int backoff_ms = 250;
    int max_inflight = 8;

    static RemoteConfig from_env();  // OPENAI_BASE_URL / OPENAI_API_KEY / MPR_MODEL
};

// OpenAI-compatible chat completions + embeddings over HTTP with bounded
// retries, exponential backoff with jitter, and an in-flight request cap.
class RemoteProvider : public Provider, public Embedder {
public:
    explicit RemoteProvider(RemoteConfig config);
    ~RemoteProvider() override;

    CompletionResult complete(const CompletionRequest& request) override;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

    const RemoteConfig& config() const { return config_; }

private:
    struct Impl;
    RemoteConfig config_;
    std::unique_ptr<Impl> impl_;
};

// Runs fn up to max_attempts times, sleeping backoff_ms * 2^i plus jitter
// between attempts. Rethrows the final failure.
std::string with_retries(int max_attempts, int backoff_ms,
                         const std::function<std::string()>& fn,
                         const std::function<void(int)>& sleep_ms);

}  // namespace mpr
