#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/provider.hpp"

namespace mpr {

using nlohmann::json;

namespace {

class Gate {
public:
    explicit Gate(int slots) : slots_(slots) {}
    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int slots_;
};

struct GateSlot {
    explicit GateSlot(Gate& gate) : gate_(gate) { gate_.acquire(); }
    ~GateSlot() { gate_.release(); }
    Gate& gate_;
};

void split_base_url(const std::string& base_url, std::string& host, std::string& prefix) {
    auto scheme_end = base_url.find("://");
    std::size_t path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        host = base_url;
        prefix.clear();
    } else {
        host = base_url.substr(0, path_start);
        prefix = base_url.substr(path_start);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
}

}  // namespace

struct RemoteProvider::Impl {
    explicit Impl(const RemoteConfig& cfg)
        : gate(cfg.max_inflight) {
        split_base_url(cfg.base_url, host, prefix);
        client = std::make_unique<httplib::Client>(host);
        client->set_connection_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
        client->set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
        client->set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    }

    std::string post_json(const RemoteConfig& cfg, const std::string& path, const json& body) {
        GateSlot slot(gate);
        httplib::Headers headers;
        if (!cfg.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + cfg.api_key);
        }
        // httplib clients are not safe for concurrent requests on one socket
        std::lock_guard<std::mutex> lock(client_mutex);
        auto res = client->Post(prefix + path, headers, body.dump(), "application/json");
        if (!res) {
            fail("Timeout", "no response from " + host + prefix + path + " (" +
                                httplib::to_string(res.error()) + ")");
        }
        if (res->status < 200 || res->status >= 300) {
            fail("HttpError", "status " + std::to_string(res->status) + " from " + path + ": " +
                                  res->body);
        }
        return res->body;
    }

    std::string host;
    std::string prefix;
    std::unique_ptr<httplib::Client> client;
    std::mutex client_mutex;
    Gate gate;
};

RemoteProvider::RemoteProvider(RemoteConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_)) {
    if (config_.base_url.empty()) {
        fail("ConfigInvalid", "remote provider requires a base URL (OPENAI_BASE_URL)");
    }
}

RemoteProvider::~RemoteProvider() = default;

CompletionResult RemoteProvider::complete(const CompletionRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    json body = {{"model", request.model.empty() ? config_.model : request.model},
                 {"messages", messages},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};

    auto start = std::chrono::steady_clock::now();
    std::string raw = with_retries(
        config_.max_attempts, config_.backoff_ms,
        [&] { return impl_->post_json(config_, "/chat/completions", body); },
        [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); });
    auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);

    json reply = json::parse(raw);
    CompletionResult result;
    result.text = reply.at("choices").at(0).at("message").value("content", std::string());
    result.latency_ms = elapsed.count();
    if (reply.contains("usage")) {
        result.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
        result.usage.completion_tokens = reply["usage"].value("completion_tokens", 0L);
        result.usage.estimated = false;
    } else {
        std::string prompt;
        for (const auto& m : request.messages) prompt += m.content + "\n";
        result.usage.prompt_tokens = estimate_tokens(prompt);
        result.usage.completion_tokens = estimate_tokens(result.text);
        result.usage.estimated = true;
    }
    record_call(request, result);
    return result;
}

std::vector<std::vector<double>> RemoteProvider::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) fail("EmbedderFailure", "embed called with no texts");
    json body = {{"model", config_.embed_model}, {"input", texts}};
    std::string raw = with_retries(
        config_.max_attempts, config_.backoff_ms,
        [&] { return impl_->post_json(config_, "/embeddings", body); },
        [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); });
    json reply = json::parse(raw);
    std::vector<std::vector<double>> out;
    for (const auto& item : reply.at("data")) {
        out.push_back(item.at("embedding").get<std::vector<double>>());
    }
    if (out.size() != texts.size()) {
        fail("EmbedderFailure", "embedding endpoint returned " + std::to_string(out.size()) +
                                    " vectors for " + std::to_string(texts.size()) + " inputs");
    }
    for (const auto& v : out) {
        if (v.size() != out.front().size()) {
            fail("DimensionMismatch", "embedding batch has mixed dimensions");
        }
    }
    return out;
}

}  // namespace mpr
