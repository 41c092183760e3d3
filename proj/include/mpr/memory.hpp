#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mpr/dataset.hpp"
#include "mpr/provider.hpp"

namespace mpr {

inline constexpr int kDefaultRetrievalCount = 20;

struct ScoredStatement {
    std::string statement_id;
    double score = 0.0;
    int rank = 0;
};

// A built retrieval index. Immutable after construction; retrieve() is a pure
// function of (index, query, k) with score-descending, id-tie-broken order.
class MemoryBackend {
public:
    virtual ~MemoryBackend() = default;
    virtual std::string kind() const = 0;
    virtual std::vector<ScoredStatement> retrieve(const std::string& query, int k) const = 0;
    virtual void save(const std::string& dir) const;
    const std::vector<Statement>& corpus() const { return corpus_; }
    const Statement& statement_by_id(const std::string& id) const;

protected:
    explicit MemoryBackend(std::vector<Statement> corpus);
    std::vector<Statement> corpus_;
    std::map<std::string, std::size_t> by_id_;
};

// maps a list of child texts to one summary text
using Summarizer = std::function<std::string(const std::vector<std::string>&)>;
// maps a statement to (entities, relations)
using Extractor =
    std::function<std::pair<std::vector<std::string>, std::vector<std::string>>(const Statement&)>;

std::unique_ptr<MemoryBackend> build_sparse(std::vector<Statement> statements);
std::unique_ptr<MemoryBackend> build_dense(std::vector<Statement> statements, Embedder& embedder);
std::unique_ptr<MemoryBackend> build_tree(std::vector<Statement> statements, Summarizer summarizer,
                                          Embedder& embedder, int fanout = 8);
std::unique_ptr<MemoryBackend> build_graph(std::vector<Statement> statements, Extractor extractor,
                                           Embedder& embedder, double match_threshold = 0.5);

// Upper-bound baseline: exactly the task's reference statements, path order.
std::vector<Statement> oracle_retrieve(const MprTask& task, const std::vector<Statement>& statements);

// Summarizer that concatenates child texts; stands in for an LLM offline.
Summarizer concat_summarizer();
// Summarizer backed by a chat completion.
Summarizer llm_summarizer(Provider& provider, std::string model);

// Extractor reading entities/relations off the generator's own edge metadata.
Extractor metadata_extractor();
// Extractor backed by a chat completion ("Entities: ..." / "Relations: ..." lines).
Extractor llm_extractor(Provider& provider, std::string model);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Persistence: one directory per backend with a manifest (kind, params,
// corpus hash) and a payload file. Loading verifies the corpus hash. Dense,
// tree and graph payloads keep their build-time embeddings but still need an
// embedder for queries.
std::unique_ptr<MemoryBackend> load_backend(const std::string& dir, std::vector<Statement> corpus,
                                            Embedder* embedder = nullptr);

std::uint64_t corpus_hash(const std::vector<Statement>& statements);

// Per-task retrieval facade handed to the reasoning loops. For standard
// indices it forwards to the backend; the oracle returns the gold references
// whatever the query; the ignoramus returns nothing.
struct RetrievedStatement {
    std::string id;
    std::string text;
    double score = 0.0;
};

class MemoryView {
public:
    virtual ~MemoryView() = default;
    virtual std::string kind() const = 0;
    virtual std::vector<RetrievedStatement> retrieve(const std::string& query) const = 0;
};

std::unique_ptr<MemoryView> backend_view(const MemoryBackend& backend, int k);
std::unique_ptr<MemoryView> oracle_view(const MprTask& task, const std::vector<Statement>& statements);
std::unique_ptr<MemoryView> ignoramus_view();

}  // namespace mpr
