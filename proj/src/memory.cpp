#include "mpr/memory.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/text.hpp"

namespace mpr {

namespace fs = std::filesystem;
using nlohmann::json;

MemoryBackend::MemoryBackend(std::vector<Statement> corpus) : corpus_(std::move(corpus)) {
    if (corpus_.empty()) fail("EmptyCorpus", "memory backends need at least one statement");
    for (std::size_t i = 0; i < corpus_.size(); ++i) by_id_[corpus_[i].id] = i;
}

const Statement& MemoryBackend::statement_by_id(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) fail("MissingReference", "no statement with id '" + id + "'");
    return corpus_[it->second];
}

void MemoryBackend::save(const std::string&) const {
    fail("IoFailure", "this backend does not support persistence");
}

std::uint64_t corpus_hash(const std::vector<Statement>& statements) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Statement& s : statements) {
        h = fnv1a64(s.id, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(s.text, h);
        h = fnv1a64("\x1e", h);
    }
    return h;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) fail("DimensionMismatch", "cosine on vectors of different length");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

void l2_normalize(std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
}

// score desc, statement id asc; ranks assigned 1..n
std::vector<ScoredStatement> rank_and_cut(std::vector<ScoredStatement> scored, int k) {
    std::sort(scored.begin(), scored.end(), [](const ScoredStatement& a, const ScoredStatement& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.statement_id < b.statement_id;
    });
    if (k >= 0 && static_cast<int>(scored.size()) > k) {
        scored.resize(static_cast<std::size_t>(k));
    }
    for (std::size_t i = 0; i < scored.size(); ++i) scored[i].rank = static_cast<int>(i) + 1;
    return scored;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail("IoFailure", "cannot write '" + path.string() + "'");
    out << j.dump() << "\n";
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail("IoFailure", "cannot open '" + path.string() + "'");
    json j;
    in >> j;
    return j;
}

// ---------------------------------------------------------------------------
// SparseRAG: BM25 over an inverted index, k1 = 1.5, b = 0.75, lowercase word
// tokens, no stemming, no stopwords. Zero-score documents still rank (by id)
// so k > corpus returns everything.

constexpr double kBm25K1 = 1.5;
constexpr double kBm25B = 0.75;

class SparseBackend : public MemoryBackend {
public:
    explicit SparseBackend(std::vector<Statement> corpus) : MemoryBackend(std::move(corpus)) {
        double total_len = 0.0;
        for (std::size_t d = 0; d < corpus_.size(); ++d) {
            auto tokens = tokenize_words(corpus_[d].text);
            total_len += static_cast<double>(tokens.size());
            doc_len_.push_back(static_cast<double>(tokens.size()));
            std::unordered_map<std::string, int> tf;
            for (const auto& t : tokens) ++tf[t];
            for (const auto& [term, count] : tf) {
                postings_[term].emplace_back(static_cast<int>(d), count);
            }
        }
        avgdl_ = corpus_.empty() ? 0.0 : total_len / static_cast<double>(corpus_.size());
    }

    std::string kind() const override { return "sparse"; }

    std::vector<ScoredStatement> retrieve(const std::string& query, int k) const override {
        std::vector<double> scores(corpus_.size(), 0.0);
        const double n = static_cast<double>(corpus_.size());
        for (const auto& term : tokenize_words(query)) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const double df = static_cast<double>(it->second.size());
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            for (const auto& [doc, tf] : it->second) {
                const double dl = doc_len_[static_cast<std::size_t>(doc)];
                const double denom = tf + kBm25K1 * (1.0 - kBm25B + kBm25B * dl / avgdl_);
                scores[static_cast<std::size_t>(doc)] += idf * (tf * (kBm25K1 + 1.0)) / denom;
            }
        }
        std::vector<ScoredStatement> scored;
        scored.reserve(corpus_.size());
        for (std::size_t d = 0; d < corpus_.size(); ++d) {
            scored.push_back({corpus_[d].id, scores[d], 0});
        }
        return rank_and_cut(std::move(scored), k);
    }

    void save(const std::string& dir) const override {
        fs::create_directories(dir);
        write_json_file(fs::path(dir) / "manifest.json",
                        {{"version", "mpr-index/1"},
                         {"kind", kind()},
                         {"params", {{"k1", kBm25K1}, {"b", kBm25B}}},
                         {"corpus_hash", hash_hex(corpus_hash(corpus_))}});
        write_json_file(fs::path(dir) / "payload.json",
                        {{"doc_count", corpus_.size()}, {"avgdl", avgdl_}});
    }

private:
    std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings_;
    std::vector<double> doc_len_;
    double avgdl_ = 0.0;
};

// ---------------------------------------------------------------------------
// DenseRAG: normalized embeddings, cosine ranking.

class DenseBackend : public MemoryBackend {
public:
    DenseBackend(std::vector<Statement> corpus, Embedder* embedder,
                 std::vector<std::vector<double>> vectors)
        : MemoryBackend(std::move(corpus)), embedder_(embedder), vectors_(std::move(vectors)) {
        if (vectors_.size() != corpus_.size()) {
            fail("EmbedderFailure", "embedding count does not match corpus size");
        }
        for (auto& v : vectors_) {
            if (v.size() != vectors_.front().size()) {
                fail("DimensionMismatch", "corpus embeddings have mixed dimensions");
            }
            l2_normalize(v);
        }
    }

    std::string kind() const override { return "dense"; }

    std::vector<ScoredStatement> retrieve(const std::string& query, int k) const override {
        std::vector<double> qv = embedder_->embed_one(query);
        if (qv.size() != vectors_.front().size()) {
            fail("DimensionMismatch", "query embedding dimension does not match the index");
        }
        l2_normalize(qv);
        std::vector<ScoredStatement> scored;
        scored.reserve(corpus_.size());
        for (std::size_t d = 0; d < corpus_.size(); ++d) {
            double dot = 0.0;
            for (std::size_t i = 0; i < qv.size(); ++i) dot += qv[i] * vectors_[d][i];
            scored.push_back({corpus_[d].id, dot, 0});
        }
        return rank_and_cut(std::move(scored), k);
    }

    void save(const std::string& dir) const override {
        fs::create_directories(dir);
        write_json_file(fs::path(dir) / "manifest.json",
                        {{"version", "mpr-index/1"},
                         {"kind", kind()},
                         {"params", {{"dimension", vectors_.front().size()}}},
                         {"corpus_hash", hash_hex(corpus_hash(corpus_))}});
        write_json_file(fs::path(dir) / "payload.json", {{"vectors", vectors_}});
    }

    static std::unique_ptr<MemoryBackend> load(const std::string& dir, std::vector<Statement> corpus,
                                               Embedder* embedder) {
        json payload = read_json_file(fs::path(dir) / "payload.json");
        return std::make_unique<DenseBackend>(
            std::move(corpus), embedder, payload.at("vectors").get<std::vector<std::vector<double>>>());
    }

private:
    Embedder* embedder_;
    std::vector<std::vector<double>> vectors_;
};

// ---------------------------------------------------------------------------
// TreeRAG: statements are leaves, parents summarize their children. Built in
// batch: leaves ordered by similarity to the corpus centroid and chunked by
// fanout. Retrieval descends by cosine, harvests the deepest subtree first
// and widens to siblings until k leaves are collected; the harvested set is
// reported in score order.

struct TreeNode {
    std::string text;
    std::vector<double> embedding;
    std::vector<int> children;
    int leaf_statement = -1;  // corpus index for leaves
};

class TreeBackend : public MemoryBackend {
public:
    TreeBackend(std::vector<Statement> corpus, Embedder* embedder, std::vector<TreeNode> nodes,
                int root, int fanout)
        : MemoryBackend(std::move(corpus)),
          embedder_(embedder),
          nodes_(std::move(nodes)),
          root_(root),
          fanout_(fanout) {
        leaves_under_.resize(nodes_.size());
        collect_leaves(root_);
    }

    std::string kind() const override { return "tree"; }

    std::vector<ScoredStatement> retrieve(const std::string& query, int k) const override {
        if (k <= 0) return {};
        std::vector<double> qv = embedder_->embed_one(query);
        l2_normalize(qv);
        std::vector<int> descent{root_};
        while (!nodes_[static_cast<std::size_t>(descent.back())].children.empty()) {
            const auto& children = nodes_[static_cast<std::size_t>(descent.back())].children;
            int best = children.front();
            double best_sim = -2.0;
            for (int c : children) {
                double sim = cosine_similarity(qv, nodes_[static_cast<std::size_t>(c)].embedding);
                if (sim > best_sim) {
                    best_sim = sim;
                    best = c;
                }
            }
            descent.push_back(best);
        }
        std::vector<bool> taken(corpus_.size(), false);
        std::vector<ScoredStatement> picked;
        // walk ancestors from the leaf's parent up to the root
        for (auto it = descent.rbegin() + (descent.size() > 1 ? 1 : 0);
             it != descent.rend() && static_cast<int>(picked.size()) < k; ++it) {
            std::vector<ScoredStatement> wave;
            for (int leaf : leaves_under_[static_cast<std::size_t>(*it)]) {
                int idx = nodes_[static_cast<std::size_t>(leaf)].leaf_statement;
                if (taken[static_cast<std::size_t>(idx)]) continue;
                double sim =
                    cosine_similarity(qv, nodes_[static_cast<std::size_t>(leaf)].embedding);
                wave.push_back({corpus_[static_cast<std::size_t>(idx)].id, sim, 0});
            }
            wave = rank_and_cut(std::move(wave), k - static_cast<int>(picked.size()));
            for (auto& s : wave) {
                taken[by_id_.at(s.statement_id)] = true;
                picked.push_back(std::move(s));
            }
        }
        return rank_and_cut(std::move(picked), k);
    }

    void save(const std::string& dir) const override {
        fs::create_directories(dir);
        write_json_file(fs::path(dir) / "manifest.json",
                        {{"version", "mpr-index/1"},
                         {"kind", kind()},
                         {"params", {{"fanout", fanout_}}},
                         {"corpus_hash", hash_hex(corpus_hash(corpus_))}});
        json jnodes = json::array();
        for (const TreeNode& n : nodes_) {
            jnodes.push_back({{"text", n.text},
                              {"embedding", n.embedding},
                              {"children", n.children},
                              {"leaf_statement", n.leaf_statement}});
        }
        write_json_file(fs::path(dir) / "payload.json", {{"nodes", jnodes}, {"root", root_}});
    }

    static std::unique_ptr<MemoryBackend> load(const std::string& dir, std::vector<Statement> corpus,
                                               Embedder* embedder, int fanout) {
        json payload = read_json_file(fs::path(dir) / "payload.json");
        std::vector<TreeNode> nodes;
        for (const auto& jn : payload.at("nodes")) {
            TreeNode n;
            n.text = jn.at("text").get<std::string>();
            n.embedding = jn.at("embedding").get<std::vector<double>>();
            n.children = jn.at("children").get<std::vector<int>>();
            n.leaf_statement = jn.at("leaf_statement").get<int>();
            nodes.push_back(std::move(n));
        }
        return std::make_unique<TreeBackend>(std::move(corpus), embedder, std::move(nodes),
                                             payload.at("root").get<int>(), fanout);
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }

private:
    void collect_leaves(int node) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(node)];
        if (n.children.empty()) {
            leaves_under_[static_cast<std::size_t>(node)].push_back(node);
            return;
        }
        for (int c : n.children) {
            collect_leaves(c);
            const auto& sub = leaves_under_[static_cast<std::size_t>(c)];
            auto& mine = leaves_under_[static_cast<std::size_t>(node)];
            mine.insert(mine.end(), sub.begin(), sub.end());
        }
    }

    Embedder* embedder_;
    std::vector<TreeNode> nodes_;
    int root_;
    int fanout_;
    std::vector<std::vector<int>> leaves_under_;
};

// ---------------------------------------------------------------------------
// GraphRAG: entities/relations extracted per statement, merged on exact
// normalized labels, each keeping links to its source statements. Retrieval
// sums the cosine of every matched node (>= threshold) into its statements.

struct KgNode {
    std::string label;
    std::string kind;  // "entity" | "relation"
    std::vector<double> embedding;
    std::vector<int> statements;  // corpus indices
};

class GraphBackend : public MemoryBackend {
public:
    GraphBackend(std::vector<Statement> corpus, Embedder* embedder, std::vector<KgNode> kg,
                 double threshold)
        : MemoryBackend(std::move(corpus)), embedder_(embedder), kg_(std::move(kg)), threshold_(threshold) {}

    std::string kind() const override { return "graph"; }

    std::vector<ScoredStatement> retrieve(const std::string& query, int k) const override {
        if (k <= 0) return {};
        std::vector<double> qv = embedder_->embed_one(query);
        std::vector<double> scores(corpus_.size(), 0.0);
        for (const KgNode& node : kg_) {
            double sim = cosine_similarity(qv, node.embedding);
            if (sim < threshold_) continue;
            for (int idx : node.statements) scores[static_cast<std::size_t>(idx)] += sim;
        }
        std::vector<ScoredStatement> scored;
        for (std::size_t d = 0; d < corpus_.size(); ++d) {
            if (scores[d] > 0.0) scored.push_back({corpus_[d].id, scores[d], 0});
        }
        return rank_and_cut(std::move(scored), k);
    }

    void save(const std::string& dir) const override {
        fs::create_directories(dir);
        write_json_file(fs::path(dir) / "manifest.json",
                        {{"version", "mpr-index/1"},
                         {"kind", kind()},
                         {"params", {{"match_threshold", threshold_}}},
                         {"corpus_hash", hash_hex(corpus_hash(corpus_))}});
        json jnodes = json::array();
        for (const KgNode& n : kg_) {
            jnodes.push_back({{"label", n.label},
                              {"kind", n.kind},
                              {"embedding", n.embedding},
                              {"statements", n.statements}});
        }
        write_json_file(fs::path(dir) / "payload.json", {{"nodes", jnodes}});
    }

    static std::unique_ptr<MemoryBackend> load(const std::string& dir, std::vector<Statement> corpus,
                                               Embedder* embedder, double threshold) {
        json payload = read_json_file(fs::path(dir) / "payload.json");
        std::vector<KgNode> kg;
        for (const auto& jn : payload.at("nodes")) {
            KgNode n;
            n.label = jn.at("label").get<std::string>();
            n.kind = jn.at("kind").get<std::string>();
            n.embedding = jn.at("embedding").get<std::vector<double>>();
            n.statements = jn.at("statements").get<std::vector<int>>();
            kg.push_back(std::move(n));
        }
        return std::make_unique<GraphBackend>(std::move(corpus), embedder, std::move(kg), threshold);
    }

    const std::vector<KgNode>& kg() const { return kg_; }

private:
    Embedder* embedder_;
    std::vector<KgNode> kg_;
    double threshold_;
};

}  // namespace

std::unique_ptr<MemoryBackend> build_sparse(std::vector<Statement> statements) {
    return std::make_unique<SparseBackend>(std::move(statements));
}

std::unique_ptr<MemoryBackend> build_dense(std::vector<Statement> statements, Embedder& embedder) {
    if (statements.empty()) fail("EmptyCorpus", "memory backends need at least one statement");
    std::vector<std::string> texts;
    texts.reserve(statements.size());
    for (const Statement& s : statements) texts.push_back(s.text);
    auto vectors = embedder.embed(texts);
    return std::make_unique<DenseBackend>(std::move(statements), &embedder, std::move(vectors));
}

std::unique_ptr<MemoryBackend> build_tree(std::vector<Statement> statements, Summarizer summarizer,
                                          Embedder& embedder, int fanout) {
    if (statements.empty()) fail("EmptyCorpus", "memory backends need at least one statement");
    if (fanout < 2) fail("ConfigInvalid", "tree fanout must be at least 2");
    std::vector<std::string> texts;
    for (const Statement& s : statements) texts.push_back(s.text);
    auto vectors = embedder.embed(texts);
    for (auto& v : vectors) l2_normalize(v);

    std::vector<TreeNode> nodes;
    std::vector<int> level;
    // Order leaves along a similarity sweep anchored at the most peripheral
    // statement, so consecutive fanout-sized chunks stay topically coherent.
    std::vector<double> centroid(vectors.front().size(), 0.0);
    for (const auto& v : vectors) {
        for (std::size_t i = 0; i < v.size(); ++i) centroid[i] += v[i];
    }
    std::size_t anchor = 0;
    double anchor_sim = 2.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        double sim = cosine_similarity(vectors[i], centroid);
        if (sim < anchor_sim ||
            (sim == anchor_sim && statements[i].id < statements[anchor].id)) {
            anchor_sim = sim;
            anchor = i;
        }
    }
    std::vector<std::size_t> order(statements.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double sa = cosine_similarity(vectors[a], vectors[anchor]);
        double sb = cosine_similarity(vectors[b], vectors[anchor]);
        if (sa != sb) return sa > sb;
        return statements[a].id < statements[b].id;
    });
    for (std::size_t i : order) {
        TreeNode leaf;
        leaf.text = statements[i].text;
        leaf.embedding = vectors[i];
        leaf.leaf_statement = static_cast<int>(i);
        level.push_back(static_cast<int>(nodes.size()));
        nodes.push_back(std::move(leaf));
    }
    while (level.size() > 1) {
        std::vector<int> parents;
        for (std::size_t begin = 0; begin < level.size(); begin += static_cast<std::size_t>(fanout)) {
            std::size_t end = std::min(level.size(), begin + static_cast<std::size_t>(fanout));
            TreeNode parent;
            std::vector<std::string> child_texts;
            for (std::size_t i = begin; i < end; ++i) {
                parent.children.push_back(level[i]);
                child_texts.push_back(nodes[static_cast<std::size_t>(level[i])].text);
            }
            try {
                parent.text = summarizer(child_texts);
            } catch (const std::exception& e) {
                fail("SummarizerFailure", e.what());
            }
            parent.embedding = embedder.embed_one(parent.text);
            l2_normalize(parent.embedding);
            parents.push_back(static_cast<int>(nodes.size()));
            nodes.push_back(std::move(parent));
        }
        level = std::move(parents);
    }
    return std::make_unique<TreeBackend>(std::move(statements), &embedder, std::move(nodes),
                                         level.front(), fanout);
}

std::unique_ptr<MemoryBackend> build_graph(std::vector<Statement> statements, Extractor extractor,
                                           Embedder& embedder, double match_threshold) {
    if (statements.empty()) fail("EmptyCorpus", "memory backends need at least one statement");
    std::map<std::string, KgNode> merged;  // key: kind + normalized label
    for (std::size_t i = 0; i < statements.size(); ++i) {
        std::pair<std::vector<std::string>, std::vector<std::string>> parts;
        try {
            parts = extractor(statements[i]);
        } catch (const std::exception& e) {
            fail("ExtractorFailure", e.what());
        }
        auto add = [&](const std::string& label, const char* kind) {
            std::string key = std::string(kind) + "|" + canonical_text(label);
            KgNode& node = merged[key];
            if (node.label.empty()) {
                node.label = label;
                node.kind = kind;
            }
            if (node.statements.empty() || node.statements.back() != static_cast<int>(i)) {
                node.statements.push_back(static_cast<int>(i));
            }
        };
        for (const auto& e : parts.first) add(e, "entity");
        for (const auto& r : parts.second) add(r, "relation");
    }
    std::vector<KgNode> kg;
    std::vector<std::string> labels;
    for (auto& [key, node] : merged) {
        labels.push_back(node.label);
        kg.push_back(std::move(node));
    }
    if (!kg.empty()) {
        auto vectors = embedder.embed(labels);
        for (std::size_t i = 0; i < kg.size(); ++i) kg[i].embedding = std::move(vectors[i]);
    }
    return std::make_unique<GraphBackend>(std::move(statements), &embedder, std::move(kg),
                                          match_threshold);
}

std::vector<Statement> oracle_retrieve(const MprTask& task, const std::vector<Statement>& statements) {
    std::map<std::string, const Statement*> by_id;
    for (const Statement& s : statements) by_id[s.id] = &s;
    std::vector<Statement> out;
    for (const std::string& ref : task.references) {
        auto it = by_id.find(ref);
        if (it == by_id.end()) {
            fail("MissingReference", "task " + task.task_id + " references missing statement '" + ref + "'");
        }
        out.push_back(*it->second);
    }
    return out;
}

Summarizer concat_summarizer() {
    return [](const std::vector<std::string>& texts) { return join(texts, "\n"); };
}

Summarizer llm_summarizer(Provider& provider, std::string model) {
    return [&provider, model](const std::vector<std::string>& texts) {
        CompletionRequest req;
        req.model = model;
        req.step_tag = "summarize";
        req.messages = {{"user", "Summarize the following notes in one short paragraph, keeping "
                                 "names and values:\n" +
                                     join(texts, "\n")}};
        return provider.complete(req).text;
    };
}

Extractor metadata_extractor() {
    return [](const Statement& s) {
        if (s.source_value.empty() || s.relation.empty()) {
            throw Error("ExtractorFailure", "statement '" + s.id + "' carries no edge metadata");
        }
        return std::make_pair(std::vector<std::string>{s.source_value, s.target_value},
                              std::vector<std::string>{s.relation});
    };
}

Extractor llm_extractor(Provider& provider, std::string model) {
    return [&provider, model](const Statement& s) {
        CompletionRequest req;
        req.model = model;
        req.step_tag = "extract";
        req.messages = {{"user",
                         "Extract the entities and relations from this sentence.\n"
                         "Sentence: " + s.text + "\n"
                         "Reply with exactly two lines:\n"
                         "Entities: <comma-separated>\n"
                         "Relations: <comma-separated>"}};
        std::string reply = provider.complete(req).text;
        std::vector<std::string> entities;
        std::vector<std::string> relations;
        for (const std::string& line : split_lines(reply)) {
            std::string t = trim(line);
            auto parse_list = [](const std::string& body, std::vector<std::string>& out) {
                std::size_t start = 0;
                while (start <= body.size()) {
                    std::size_t comma = body.find(',', start);
                    std::string item = trim(body.substr(start, comma - start));
                    if (!item.empty()) out.push_back(item);
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
            };
            if (starts_with(t, "Entities:")) parse_list(t.substr(9), entities);
            if (starts_with(t, "Relations:")) parse_list(t.substr(10), relations);
        }
        if (entities.empty() && relations.empty()) {
            throw Error("ExtractorFailure", "no entities or relations in reply");
        }
        return std::make_pair(entities, relations);
    };
}

std::unique_ptr<MemoryBackend> load_backend(const std::string& dir, std::vector<Statement> corpus,
                                            Embedder* embedder) {
    json manifest = read_json_file(fs::path(dir) / "manifest.json");
    if (manifest.value("version", std::string()) != "mpr-index/1") {
        fail("ConfigInvalid", "unsupported index version in '" + dir + "'");
    }
    if (manifest.at("corpus_hash").get<std::string>() != hash_hex(corpus_hash(corpus))) {
        fail("ConfigInvalid", "index in '" + dir + "' was built over a different corpus");
    }
    std::string kind = manifest.at("kind").get<std::string>();
    if (kind == "sparse") {
        return std::make_unique<SparseBackend>(std::move(corpus));
    }
    if (embedder == nullptr) {
        fail("ConfigInvalid", "loading a " + kind + " index requires an embedder for queries");
    }
    if (kind == "dense") return DenseBackend::load(dir, std::move(corpus), embedder);
    if (kind == "tree") {
        return TreeBackend::load(dir, std::move(corpus), embedder,
                                 manifest.at("params").value("fanout", 8));
    }
    if (kind == "graph") {
        return GraphBackend::load(dir, std::move(corpus), embedder,
                                  manifest.at("params").value("match_threshold", 0.5));
    }
    fail("ConfigInvalid", "unknown index kind '" + kind + "'");
}

namespace {

class BackendMemoryView : public MemoryView {
public:
    BackendMemoryView(const MemoryBackend& backend, int k) : backend_(backend), k_(k) {}
    std::string kind() const override { return backend_.kind(); }
    std::vector<RetrievedStatement> retrieve(const std::string& query) const override {
        std::vector<RetrievedStatement> out;
        for (const ScoredStatement& s : backend_.retrieve(query, k_)) {
            out.push_back({s.statement_id, backend_.statement_by_id(s.statement_id).text, s.score});
        }
        return out;
    }

private:
    const MemoryBackend& backend_;
    int k_;
};

class OracleMemoryView : public MemoryView {
public:
    explicit OracleMemoryView(std::vector<Statement> refs) : refs_(std::move(refs)) {}
    std::string kind() const override { return "oracle"; }
    std::vector<RetrievedStatement> retrieve(const std::string&) const override {
        std::vector<RetrievedStatement> out;
        for (const Statement& s : refs_) out.push_back({s.id, s.text, 1.0});
        return out;
    }

private:
    std::vector<Statement> refs_;
};

class IgnoramusMemoryView : public MemoryView {
public:
    std::string kind() const override { return "ignoramus"; }
    std::vector<RetrievedStatement> retrieve(const std::string&) const override { return {}; }
};

}  // namespace

std::unique_ptr<MemoryView> backend_view(const MemoryBackend& backend, int k) {
    return std::make_unique<BackendMemoryView>(backend, k);
}

std::unique_ptr<MemoryView> oracle_view(const MprTask& task, const std::vector<Statement>& statements) {
    return std::make_unique<OracleMemoryView>(oracle_retrieve(task, statements));
}

std::unique_ptr<MemoryView> ignoramus_view() {
    return std::make_unique<IgnoramusMemoryView>();
}

}  // namespace mpr
