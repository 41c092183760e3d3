#include "mpr/provider.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/text.hpp"

namespace mpr {

using nlohmann::json;

long estimate_tokens(const std::string& text) {
    long count = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

std::vector<CallRecord> Provider::call_log() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return log_;
}

void Provider::reset_call_log() {
    std::lock_guard<std::mutex> lock(log_mutex_);
    log_.clear();
}

void Provider::record_call(const CompletionRequest& request, const CompletionResult& result) {
    std::string prompt;
    for (const auto& m : request.messages) {
        prompt += m.role;
        prompt += '\n';
        prompt += m.content;
        prompt += '\n';
    }
    CallRecord rec;
    rec.prompt_hash = fnv1a64(prompt);
    rec.model = request.model;
    rec.task_id = request.task_id;
    rec.step_tag = request.step_tag;
    rec.latency_ms = result.latency_ms;
    rec.usage = result.usage;
    std::lock_guard<std::mutex> lock(log_mutex_);
    log_.push_back(std::move(rec));
}

std::vector<double> Embedder::embed_one(const std::string& text) {
    auto vecs = embed({text});
    return vecs.at(0);
}

std::vector<std::vector<double>> HashingEmbedder::embed(const std::vector<std::string>& texts) {
    if (dimension_ < 1) fail("ConfigInvalid", "embedder dimension must be positive");
    if (texts.empty()) fail("EmbedderFailure", "embed called with no texts");
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(static_cast<std::size_t>(dimension_), 0.0);
        for (const auto& tok : tokenize_words(text)) {
            v[fnv1a64(tok) % static_cast<std::uint64_t>(dimension_)] += 1.0;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& x : v) x /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_json(const json& j) {
    std::vector<ScriptedRule> rules;
    for (const auto& jr : j.value("rules", json::array())) {
        ScriptedRule rule;
        rule.match = jr.at("match").get<std::string>();
        if (jr.contains("responses")) {
            rule.responses = jr.at("responses").get<std::vector<std::string>>();
        } else {
            rule.responses = {jr.at("response").get<std::string>()};
        }
        rules.push_back(std::move(rule));
    }
    std::optional<std::string> fallback;
    if (j.contains("default_response")) fallback = j.at("default_response").get<std::string>();
    return std::make_unique<ScriptedProvider>(std::move(rules), std::move(fallback));
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoFailure", "cannot open scripted rules file '" + path + "'");
    json j;
    in >> j;
    return from_json(j);
}

void ScriptedProvider::add_rule(std::string match, std::vector<std::string> responses) {
    std::lock_guard<std::mutex> lock(mutex_);
    rules_.push_back({std::move(match), std::move(responses)});
}

CompletionResult ScriptedProvider::complete(const CompletionRequest& request) {
    std::string prompt;
    for (const auto& m : request.messages) {
        if (!prompt.empty()) prompt += '\n';
        prompt += m.content;
    }
    std::string text;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        hits_.resize(rules_.size(), 0);
        bool matched = false;
        for (std::size_t i = 0; i < rules_.size(); ++i) {
            if (prompt.find(rules_[i].match) == std::string::npos) continue;
            std::size_t hit = hits_[i]++;
            const auto& responses = rules_[i].responses;
            text = responses[std::min(hit, responses.size() - 1)];
            matched = true;
            break;
        }
        if (!matched) {
            if (!default_response_) {
                fail("NoRuleMatched", "no scripted rule matches the prompt");
            }
            text = *default_response_;
        }
    }
    CompletionResult result;
    result.text = text;
    result.usage.prompt_tokens = estimate_tokens(prompt);
    result.usage.completion_tokens = estimate_tokens(text);
    result.usage.estimated = true;
    result.latency_ms = 0.0;
    record_call(request, result);
    return result;
}

std::vector<std::vector<double>> ScriptedProvider::embed(const std::vector<std::string>& texts) {
    return hasher_.embed(texts);
}

std::string with_retries(int max_attempts, int backoff_ms,
                         const std::function<std::string()>& fn,
                         const std::function<void(int)>& sleep_ms) {
    static thread_local std::mt19937_64 jitter_rng(
        static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const Error&) {
            if (attempt >= max_attempts) throw;
            int delay = backoff_ms << (attempt - 1);
            int jitter = static_cast<int>(jitter_rng() % static_cast<std::uint64_t>(backoff_ms + 1));
            sleep_ms(delay + jitter);
        }
    }
}

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig cfg;
    if (const char* url = std::getenv("OPENAI_BASE_URL")) cfg.base_url = url;
    if (const char* key = std::getenv("OPENAI_API_KEY")) cfg.api_key = key;
    if (const char* model = std::getenv("MPR_MODEL")) cfg.model = model;
    if (const char* embed = std::getenv("MPR_EMBED_MODEL")) cfg.embed_model = embed;
    return cfg;
}

}  // namespace mpr
