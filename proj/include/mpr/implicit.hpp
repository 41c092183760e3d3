#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpr/dataset.hpp"
#include "mpr/memory.hpp"
#include "mpr/provider.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mpr {

// LoRA settings exported alongside every corpus; training itself runs on an
// external serving stack.
struct SftHyperparams {
    int lora_rank = 8;
    int lora_alpha = 32;
    int epochs_min = 1;
    int epochs_max = 10;

    nlohmann::json to_json() const;
};

struct SftExample {
    std::string input;
    std::string output;
    std::string source_statement;
    std::string scheme;  // "mask" | "ask"

    nlohmann::json to_json() const;
    static SftExample from_json(const nlohmann::json& j);
};

extern const char* const kMaskInstruction;  // preamble ahead of the masked statement
extern const char* const kMaskToken;        // "[MASK]"

// Re-applies the mask output to the example input; equals the source
// statement text for every well-formed mask example.
std::string mask_reconstruct(const SftExample& example);

// One example per statement, masking the source value, the relation phrase or
// the target value uniformly at random.
std::vector<SftExample> build_mask_corpus(const std::vector<Statement>& statements,
                                          std::uint64_t seed);

// One QA pair per statement; the answer is the target value.
std::vector<SftExample> build_ask_corpus(const std::vector<Statement>& statements,
                                         const TextGen& gen);

void save_sft_corpus(const std::vector<SftExample>& corpus, const std::string& path);
std::vector<SftExample> load_sft_corpus(const std::string& path);

struct ClusterAssignment {
    int n_clusters = 0;
    std::vector<std::vector<double>> centroids;
    std::map<std::string, int> assignment;  // statement id -> cluster id
    double inertia = 0.0;
    std::vector<double> inertia_history;  // one entry per Lloyd iteration

    nlohmann::json to_json() const;
    static ClusterAssignment from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static ClusterAssignment load_file(const std::string& path);
};

// Lloyd's algorithm with k-means++ seeding over statement embeddings.
// Identical embeddings with n_clusters > 1 degrade to round-robin assignment.
ClusterAssignment kmeans_cluster(const std::vector<Statement>& statements, Embedder& embedder,
                                 int n_clusters, std::uint64_t seed, int max_iters = 100);

// One corpus file per cluster under out_dir; returns the manifest json
// (file -> cluster id -> example count, plus SFT hyperparameters).
nlohmann::json export_cluster_corpora(const ClusterAssignment& assignment,
                                      const std::vector<Statement>& statements,
                                      const std::string& scheme, const std::string& out_dir,
                                      std::uint64_t seed = 0);

struct AdapterRegistry {
    std::map<int, std::string> entries;  // cluster id -> adapter name
    std::string base_model;

    nlohmann::json to_json() const;
    static AdapterRegistry from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static AdapterRegistry load_file(const std::string& path);
};

// Majority vote over the retrieved statements' clusters; ties break on summed
// retrieval score, then lower cluster id. Empty retrieval falls back to the
// base model.
std::string select_adapter(const std::vector<ScoredStatement>& retrieved,
                           const ClusterAssignment& assignment, const AdapterRegistry& registry);

}  // namespace mpr
