#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/memory.hpp"
#include "mpr/provider.hpp"
#include "test_util.hpp"

using namespace mpr;

namespace {

CompletionRequest request_for(const std::string& prompt) {
    CompletionRequest req;
    req.model = "test";
    req.messages = {{"user", prompt}};
    return req;
}

}  // namespace

TEST_CASE("scripted: first matching rule wins, responses consumed per hit") {
    ScriptedProvider provider(std::vector<ScriptedRule>{{"Which city", {"first", "second"}}, {"city", {"never"}}});
    CHECK(provider.complete(request_for("[Question] Which city does Alice work in?")).text == "first");
    CHECK(provider.complete(request_for("[Question] Which city does Alice work in?")).text == "second");
    // exhausted lists repeat the last response
    CHECK(provider.complete(request_for("[Question] Which city does Alice work in?")).text == "second");
}

TEST_CASE("scripted: default response and NoRuleMatched") {
    ScriptedProvider silent(std::vector<ScriptedRule>{}, std::nullopt);
    CHECK_THROWS_WITH_AS(silent.complete(request_for("hello")), doctest::Contains("NoRuleMatched"),
                         Error);
    ScriptedProvider sentinel(std::vector<ScriptedRule>{}, std::string("UNKNOWN"));
    CHECK(sentinel.complete(request_for("anything")).text == "UNKNOWN");
    CHECK(sentinel.complete(request_for("anything else")).text == "UNKNOWN");
}

TEST_CASE("scripted: usage estimated by whitespace tokens, calls logged") {
    ScriptedProvider provider(std::vector<ScriptedRule>{}, std::string("two words"));
    auto result = provider.complete(request_for("a b c"));
    CHECK(result.usage.prompt_tokens == 3);
    CHECK(result.usage.completion_tokens == 2);
    CHECK(result.usage.estimated);
    auto log = provider.call_log();
    REQUIRE(log.size() == 1);
    CHECK(log[0].usage.prompt_tokens == 3);
}

TEST_CASE("scripted provider loads from a rules file") {
    auto dir = mpr_test::temp_dir("rules");
    {
        std::ofstream out(dir / "rules.json");
        out << R"({"rules": [{"match": "ping", "response": "pong"}], "default_response": "UNKNOWN"})";
    }
    auto provider = ScriptedProvider::from_file((dir / "rules.json").string());
    CHECK(provider->complete(request_for("ping")).text == "pong");
    CHECK(provider->complete(request_for("nothing")).text == "UNKNOWN");
    std::filesystem::remove_all(dir);
}

TEST_CASE("with_retries: two injected failures then success is three attempts") {
    int attempts = 0;
    std::vector<int> delays;
    std::string got = with_retries(
        3, 100,
        [&]() -> std::string {
            ++attempts;
            if (attempts < 3) throw Error("HttpError", "injected");
            return "ok";
        },
        [&](int ms) { delays.push_back(ms); });
    CHECK(got == "ok");
    CHECK(attempts == 3);
    REQUIRE(delays.size() == 2);
    // exponential backoff with jitter in [0, backoff]
    CHECK(delays[0] >= 100);
    CHECK(delays[0] <= 200);
    CHECK(delays[1] >= 200);
    CHECK(delays[1] <= 300);

    attempts = 0;
    CHECK_THROWS_WITH_AS(with_retries(
                             3, 1,
                             [&]() -> std::string {
                                 ++attempts;
                                 throw Error("Timeout", "always");
                             },
                             [](int) {}),
                         doctest::Contains("Timeout"), Error);
    CHECK(attempts == 3);
}

TEST_CASE("hashing embedder: determinism and hand-computed cosines") {
    HashingEmbedder hasher(256);
    auto a = hasher.embed_one("alice bob");
    auto b = hasher.embed_one("alice bob");
    CHECK(a == b);
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0));
    // disjoint vocabularies land in different buckets for these words
    auto c = hasher.embed_one("carol dave");
    CHECK(cosine_similarity(a, c) == doctest::Approx(0.0));
    // hand-computed: "alice alice bob" -> counts (2, 1) -> cos with (1, 1)
    auto d = hasher.embed_one("alice alice bob");
    double expected = (2.0 * 1.0 + 1.0 * 1.0) / (std::sqrt(5.0) * std::sqrt(2.0));
    CHECK(cosine_similarity(a, d) == doctest::Approx(expected));
}

TEST_CASE("embedding batches keep shape") {
    HashingEmbedder hasher(64);
    auto vecs = hasher.embed({"one", "two sentences here", "three"});
    REQUIRE(vecs.size() == 3);
    for (const auto& v : vecs) CHECK(v.size() == 64);
    CHECK_THROWS_WITH_AS(hasher.embed({}), doctest::Contains("EmbedderFailure"), Error);
}

TEST_CASE("scripted provider is thread-safe under concurrent calls") {
    ScriptedProvider provider(std::vector<ScriptedRule>{{"ping", {"pong"}}}, std::string("UNKNOWN"));
    std::atomic<int> pongs{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < 8; ++t) {
        pool.emplace_back([&] {
            for (int i = 0; i < 50; ++i) {
                if (provider.complete(request_for("ping")).text == "pong") ++pongs;
            }
        });
    }
    for (auto& t : pool) t.join();
    CHECK(pongs == 400);
    CHECK(provider.call_log().size() == 400);
}

// ---- live HTTP round-trip against an in-process server ----

#include <httplib.h>

TEST_CASE("remote provider: chat completion with injected failures, then success") {
    httplib::Server server;
    std::atomic<int> chat_calls{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++chat_calls;
        if (n <= 2) {
            res.status = 503;
            res.set_content("overloaded", "text/plain");
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        std::string content = body.at("messages").at(0).at("content").get<std::string>();
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "echo: " + content}}}}}},
            {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 4}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json data = nlohmann::json::array();
        for (std::size_t i = 0; i < body.at("input").size(); ++i) {
            data.push_back({{"embedding", {0.1, 0.2, 0.3}}});
        }
        res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        MESSAGE("skipping: cannot bind a local port in this environment");
        return;
    }
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.api_key = "test-key";
    config.backoff_ms = 1;
    RemoteProvider provider(config);

    CompletionRequest req;
    req.model = "test-model";
    req.messages = {{"user", "ping"}};
    auto result = provider.complete(req);
    CHECK(result.text == "echo: ping");
    CHECK(result.usage.prompt_tokens == 11);
    CHECK(result.usage.completion_tokens == 4);
    CHECK_FALSE(result.usage.estimated);
    CHECK(chat_calls == 3);  // two 503s, then success

    auto vectors = provider.embed({"a", "b"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0].size() == 3);

    server.stop();
    server_thread.join();
}
