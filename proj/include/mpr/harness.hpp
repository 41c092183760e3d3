#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpr/dataset.hpp"
#include "mpr/implicit.hpp"
#include "mpr/memory.hpp"
#include "mpr/reasoning.hpp"

#include <nlohmann/json.hpp>

namespace mpr {

// Versioned normalization applied before Exact Match: lowercase, trimmed,
// terminal punctuation stripped, whitespace collapsed, standalone articles
// removed, thousands separators dropped, "<number> (<unit>)" spacing fixed.
inline constexpr const char* kNormalizationVersion = "mpr-norm/1";

std::string normalize_answer(const std::string& text);
int exact_match(const std::string& prediction, const std::string& gold);

struct RunRecord {
    std::string task_id;
    std::string prediction;
    std::string gold;
    int em = 0;
    int hops = 0;
    double latency_ms = 0.0;
    long tokens_in = 0;
    long tokens_out = 0;
    std::string structure;
    std::string backend;
    std::string user_id;
    std::string error;      // error code for failed tasks (scored em = 0)
    std::string trace_ref;  // task id within traces.jsonl

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);
};

struct EvalReport {
    double acc_overall = 0.0;
    std::map<int, double> acc_by_hop;
    std::map<std::string, double> acc_by_user;
    std::map<int, double> latency_by_hop;
    std::map<int, int> count_by_hop;
    int task_count = 0;
    nlohmann::json config;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

struct AgentConfig {
    Structure structure = Structure::NR;
    std::string backend = "sparse";  // sparse|dense|tree|graph|oracle|ignoramus
    int k = kDefaultRetrievalCount;
    int max_steps = 5;
    int branches = 2;
    int max_subquestions = 5;
    std::string model = "default";
    Provider* provider = nullptr;
    Embedder* embedder = nullptr;          // dense/tree/graph and hybrid routing
    Summarizer summarizer;                 // tree; defaults to concat
    Extractor extractor;                   // graph; defaults to edge metadata
    const ClusterAssignment* clusters = nullptr;  // hybrid routing
    const AdapterRegistry* adapters = nullptr;
    std::string index_dir;  // per-user persisted indices to load instead of building
    std::string out_dir;    // empty: in-memory only
    int jobs = 1;

    nlohmann::json snapshot() const;
};

struct EvalOutcome {
    EvalReport report;
    std::vector<RunRecord> records;
    std::vector<ReasoningTrace> traces;  // only for tasks run in this invocation
};

// Runs every task of the bundle under the agent configuration. Existing
// run.jsonl records under out_dir are kept and their task ids skipped, so an
// interrupted run resumes to an identical report.
EvalOutcome evaluate(const DatasetBundle& bundle, const AgentConfig& config);

// Two-level accuracy: mean over sub-datasets of the per-sub-dataset mean EM.
EvalReport aggregate_records(const std::vector<RunRecord>& records, nlohmann::json config);

// A persisted run directory: config.json + run.jsonl (+ traces.jsonl).
struct RunData {
    nlohmann::json config;
    std::vector<RunRecord> records;
};

RunData load_run_dir(const std::string& dir);

// json: report.json; csv: one row per (structure, backend, hop);
// markdown: one hops-by-backend table per structure.
void emit_report(const std::vector<RunData>& runs, const std::string& format,
                 const std::string& out_path);

}  // namespace mpr
