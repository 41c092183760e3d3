#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpr/graph.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mpr {

class Provider;

// One single-hop fact sentence rendered from a non-value-oriented edge.
// Endpoint values and the relation phrase ride along so downstream corpus
// builders know the spans without running NER.
struct Statement {
    std::string id;
    std::string text;
    int edge_ref = -1;
    std::string user_id;
    std::string source_value;
    std::string relation;
    std::string target_value;

    nlohmann::json to_json() const;
    static Statement from_json(const nlohmann::json& j);
};

// The (T, M, q, a) quadruple plus enough structure to replay the path.
struct MprTask {
    std::string task_id;
    int hops = 0;
    std::string question;
    std::string answer;
    std::vector<int> path;            // edge ids, step order
    std::vector<PathStep> steps;      // direction/disambiguation detail
    std::vector<std::string> references;  // statement ids, path order
    std::string user_id;
    int anchor_node = -1;
    int answer_node = -1;

    ReasoningPath reasoning_path() const;

    nlohmann::json to_json() const;
    static MprTask from_json(const nlohmann::json& j);
};

// Statement/question wording backend. Template mode is a pure function of the
// edge; LLM mode asks the provider and validates the result.
struct TextGen {
    enum class Mode { template_text, llm };
    Mode mode = Mode::template_text;
    Provider* provider = nullptr;  // required in llm mode
    std::string model = "default";
    int max_retries = 3;

    static TextGen templates() { return TextGen{}; }
};

struct SubDataset {
    std::string user_id;
    SpecificGraph graph;
    std::vector<Statement> statements;
    std::vector<MprTask> tasks;
};

struct BundleConfig {
    int users = 3;
    int hop_min = 2;
    int hop_max = 10;
    int per_hop = 10;
    std::uint64_t seed = 0;
    GraphScaleConfig scale;
    PathPolicy policy;
    int max_task_attempts = 60;  // per quota slot, on top of the path sampler's own retries

    nlohmann::json to_json() const;
};

struct BundleManifest {
    std::string version = "mpr-bundle/1";
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::string> user_ids;
    int hop_min = 2;
    int hop_max = 10;
    int per_hop = 0;
    std::vector<std::pair<int, int>> tasks_per_hop;  // hop -> count, ascending
    int statement_count = 0;
    int reference_count = 0;  // total references, may trail total hops (value hops)
    int rejected_paths = 0;
    std::string textgen_mode = "template";

    nlohmann::json to_json() const;
    static BundleManifest from_json(const nlohmann::json& j);
};

struct DatasetBundle {
    std::vector<SubDataset> users;
    BundleManifest manifest;

    void save(const std::string& dir) const;
    static DatasetBundle load(const std::string& dir);
};

// Renders the statement for one non-value-oriented edge.
Statement render_statement(const Edge& edge, const SpecificGraph& graph, const TextGen& gen);

// Nested question for a sampled path; the anchor value is visible, every
// chain value (including the answer) is not.
std::string derive_question(const ReasoningPath& path, const std::vector<Statement>& refs,
                            const SpecificGraph& graph, const TextGen& gen);

// Throws LeakageDetected when the question exposes a hidden path value
// or omits the anchor.
void check_question_leakage(const std::string& question, const SpecificGraph& graph,
                            const ReasoningPath& path);

// Full pipeline: graphs, statements, per-hop task quotas, manifest.
DatasetBundle build_bundle(const MetaGraph& meta, const BundleConfig& config, const TextGen& gen);

struct BundleValidation {
    int tasks_checked = 0;
    int singleton_failures = 0;
    int reference_failures = 0;
    int leakage_failures = 0;
    int direct_edge_failures = 0;
    int statement_failures = 0;
    int manifest_failures = 0;

    bool ok() const {
        return singleton_failures == 0 && reference_failures == 0 && leakage_failures == 0 &&
               direct_edge_failures == 0 && statement_failures == 0 && manifest_failures == 0;
    }
};

// The dataset oracle sweep: resolve_answer singletons, referential integrity,
// leakage freedom, the no-direct-edge condition, statement endpoint checks,
// and manifest counts.
BundleValidation validate_bundle(const DatasetBundle& bundle);

}  // namespace mpr
