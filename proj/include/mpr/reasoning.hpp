#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mpr/memory.hpp"
#include "mpr/prompts.hpp"
#include "mpr/provider.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mpr {

enum class Structure { NR, SR, MR, DR };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& s);

struct ReasoningConfig {
    Structure structure = Structure::NR;
    int max_steps = 5;         // l
    int branches = 2;          // b, multi-path only
    int max_subquestions = 5;  // decomposition only
    std::string model;         // used when no adapter router is installed
    double temperature = 0.0;
    int max_tokens = 512;
};

// One provider call. Re-rendering (template_id, slots) must reproduce the
// prompt byte-for-byte; the replay tests rely on it.
struct StepRecord {
    std::string step_tag;
    std::string template_id;
    SlotMap slots;
    std::vector<std::string> retrieved_ids;
    std::vector<double> retrieved_scores;
    std::string model;
    std::string prompt;
    std::string response;
    std::string parsed;  // extracted thought / answer / selection
    double latency_ms = 0.0;
    long tokens_in = 0;
    long tokens_out = 0;
    bool flagged = false;
    std::string flag;

    nlohmann::json to_json() const;
    static StepRecord from_json(const nlohmann::json& j);
};

struct ReasoningTrace {
    std::string task_id;
    std::string structure;
    std::vector<StepRecord> steps;
    std::string final_answer;

    double total_latency_ms() const;
    long total_tokens_in() const;
    long total_tokens_out() const;

    nlohmann::json to_json() const;
    static ReasoningTrace from_json(const nlohmann::json& j);
};

struct RunResult {
    std::string answer;
    ReasoningTrace trace;
};

// Picks the serving model per call from that call's retrieved statements
// (adapter routing); null means the configured base model.
using AdapterRouter = std::function<std::string(const std::vector<RetrievedStatement>&)>;

RunResult run_naive(const std::string& question, const MemoryView& memory, Provider& provider,
                    const ReasoningConfig& config, const AdapterRouter& router = nullptr,
                    const std::string& task_id = "");
RunResult run_sequential(const std::string& question, const MemoryView& memory, Provider& provider,
                         const ReasoningConfig& config, const AdapterRouter& router = nullptr,
                         const std::string& task_id = "");
RunResult run_multipath(const std::string& question, const MemoryView& memory, Provider& provider,
                        const ReasoningConfig& config, const AdapterRouter& router = nullptr,
                        const std::string& task_id = "");
RunResult run_decomposition(const std::string& question, const MemoryView& memory,
                            Provider& provider, const ReasoningConfig& config,
                            const AdapterRouter& router = nullptr, const std::string& task_id = "");

// Dispatch on config.structure.
RunResult run_structure(const std::string& question, const MemoryView& memory, Provider& provider,
                        const ReasoningConfig& config, const AdapterRouter& router = nullptr,
                        const std::string& task_id = "");

// Last nonempty line with code fences stripped.
std::string extract_answer_line(const std::string& response);

}  // namespace mpr
