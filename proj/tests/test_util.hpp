#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mpr/dataset.hpp"
#include "mpr/graph.hpp"
#include "mpr/memory.hpp"
#include "mpr/provider.hpp"
#include "mpr/text.hpp"

#include <nlohmann/json.hpp>
#include <unistd.h>

namespace mpr_test {

inline std::string source_path(const std::string& rel) {
    return std::string(MPR_SOURCE_DIR) + "/" + rel;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("mpr_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Hand-assembled specific graphs for unit tests. Values are appended to the
// space pools on the fly so the construction invariants hold.
class GraphBuilder {
public:
    int space(const std::string& id, mpr::NodeKind kind, const std::string& label) {
        mpr::NodeSpace s;
        s.id = id;
        s.kind = kind;
        s.label = label;
        index_[id] = static_cast<int>(g_.spaces.size());
        g_.spaces.push_back(std::move(s));
        return index_.at(id);
    }

    int node(const std::string& space_id, const std::string& value) {
        int si = index_.at(space_id);
        auto& pool = g_.spaces[static_cast<std::size_t>(si)].value_pool;
        if (std::find(pool.begin(), pool.end(), value) == pool.end()) pool.push_back(value);
        mpr::Node n;
        n.id = static_cast<int>(g_.nodes.size());
        n.space = si;
        n.value = value;
        n.kind = g_.spaces[static_cast<std::size_t>(si)].kind;
        g_.nodes.push_back(n);
        return n.id;
    }

    int edge(int source, int target, const std::string& relation, mpr::EdgeCategory category) {
        int es = edge_space(category, g_.nodes[static_cast<std::size_t>(source)].space,
                            g_.nodes[static_cast<std::size_t>(target)].space, relation);
        mpr::Edge e;
        e.id = static_cast<int>(g_.edges.size());
        e.space = es;
        e.source = source;
        e.target = target;
        e.relation = relation;
        e.category = category;
        g_.edges.push_back(e);
        return e.id;
    }

    mpr::SpecificGraph build() {
        mpr::SpecificGraph g = g_;
        g.finalize();
        g.check_invariants();
        return g;
    }

private:
    int edge_space(mpr::EdgeCategory category, int src_space, int tgt_space,
                   const std::string& relation) {
        std::string key = mpr::to_string(category) + "|" + std::to_string(src_space) + "|" +
                          std::to_string(tgt_space);
        auto it = espace_index_.find(key);
        if (it == espace_index_.end()) {
            mpr::EdgeSpace es;
            es.id = "es" + std::to_string(g_.edge_spaces.size());
            es.source_space = g_.spaces[static_cast<std::size_t>(src_space)].id;
            es.target_space = g_.spaces[static_cast<std::size_t>(tgt_space)].id;
            es.category = category;
            es.relation_pool = {relation};
            it = espace_index_.emplace(key, static_cast<int>(g_.edge_spaces.size())).first;
            g_.edge_spaces.push_back(std::move(es));
        } else {
            auto& pool = g_.edge_spaces[static_cast<std::size_t>(it->second)].relation_pool;
            if (std::find(pool.begin(), pool.end(), relation) == pool.end()) {
                pool.push_back(relation);
            }
        }
        return it->second;
    }

    mpr::SpecificGraph g_;
    std::map<std::string, int> index_;
    std::map<std::string, int> espace_index_;
};

// Independent evidence matcher: walks the raw edge list with value-level
// matching, no shared code with the library's resolver.
inline std::set<std::string> oracle_resolve(const mpr::SpecificGraph& g,
                                            const mpr::ReasoningPath& path) {
    auto same_identity = [&](int a, int b) {
        const mpr::Node& na = g.node(a);
        const mpr::Node& nb = g.node(b);
        return na.space == nb.space && na.value == nb.value;
    };
    std::set<int> cands;
    for (const mpr::Node& n : g.nodes) {
        if (same_identity(n.id, path.anchor_node)) cands.insert(n.id);
    }
    for (const mpr::PathStep& st : path.steps) {
        const mpr::Edge& ref = g.edge(st.edge_id);
        std::set<int> next;
        if (st.disambiguation) {
            const std::string want = g.node(ref.target).value;
            for (int c : cands) {
                for (const mpr::Edge& e : g.edges) {
                    if (e.category != mpr::EdgeCategory::attribute_oriented) continue;
                    if (e.relation != ref.relation || e.source != c) continue;
                    if (g.node(e.target).value == want) {
                        next.insert(c);
                        break;
                    }
                }
            }
        } else {
            for (int c : cands) {
                for (const mpr::Edge& e : g.edges) {
                    if (e.category != ref.category || e.relation != ref.relation) continue;
                    if (st.forward && same_identity(e.source, c)) next.insert(e.target);
                    if (!st.forward && same_identity(e.target, c)) next.insert(e.source);
                }
            }
        }
        cands = std::move(next);
        if (cands.empty()) return {};
    }
    std::set<std::string> values;
    for (int c : cands) values.insert(g.node(c).value);
    return values;
}

// Independent BM25 scorer: no inverted index, document-at-a-time, same
// parameters the sparse backend documents (k1 = 1.5, b = 0.75).
inline std::vector<std::pair<std::string, double>> brute_bm25(
    const std::vector<mpr::Statement>& corpus, const std::string& query) {
    const double k1 = 1.5;
    const double b = 0.75;
    std::vector<std::vector<std::string>> docs;
    double total_len = 0.0;
    for (const auto& s : corpus) {
        docs.push_back(mpr::tokenize_words(s.text));
        total_len += static_cast<double>(docs.back().size());
    }
    const double avgdl = total_len / static_cast<double>(corpus.size());
    const double n = static_cast<double>(corpus.size());
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        double score = 0.0;
        for (const std::string& term : mpr::tokenize_words(query)) {
            double tf = 0.0;
            for (const auto& tok : docs[d]) {
                if (tok == term) tf += 1.0;
            }
            if (tf == 0.0) continue;
            double df = 0.0;
            for (const auto& doc : docs) {
                for (const auto& tok : doc) {
                    if (tok == term) {
                        df += 1.0;
                        break;
                    }
                }
            }
            double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            double dl = static_cast<double>(docs[d].size());
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        scored.emplace_back(corpus[d].id, score);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b2) {
        if (a.second != b2.second) return a.second > b2.second;
        return a.first < b2.first;
    });
    return scored;
}

// Fixed text -> vector lookup for toy retrieval/clustering tests.
class MapEmbedder : public mpr::Embedder {
public:
    void set(const std::string& text, std::vector<double> v) { vectors_[text] = std::move(v); }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) {
            auto it = vectors_.find(t);
            out.push_back(it != vectors_.end() ? it->second : fallback_);
        }
        return out;
    }
    void set_fallback(std::vector<double> v) { fallback_ = std::move(v); }

private:
    std::map<std::string, std::vector<double>> vectors_;
    std::vector<double> fallback_{0.0, 0.0};
};

inline std::vector<mpr::Statement> toy_statements(const std::vector<std::string>& texts,
                                                  const std::string& prefix = "s") {
    std::vector<mpr::Statement> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        mpr::Statement s;
        char id[64];
        std::snprintf(id, sizeof(id), "%s%03zu", prefix.c_str(), i);
        s.id = id;
        s.text = texts[i];
        s.user_id = "user_00";
        out.push_back(std::move(s));
    }
    return out;
}

inline mpr::DatasetBundle small_bundle(int users = 2, int hop_min = 2, int hop_max = 4,
                                       int per_hop = 2, std::uint64_t seed = 11) {
    mpr::MetaGraph meta = mpr::MetaGraph::load_file(source_path("configs/meta_default.json"));
    mpr::BundleConfig config;
    config.users = users;
    config.hop_min = hop_min;
    config.hop_max = hop_max;
    config.per_hop = per_hop;
    config.seed = seed;
    {
        std::ifstream in(source_path("configs/meta_default.json"));
        nlohmann::json j;
        in >> j;
        config.scale = mpr::GraphScaleConfig::from_json(j.at("scale"));
    }
    return mpr::build_bundle(meta, config, mpr::TextGen::templates());
}

}  // namespace mpr_test

namespace mpr_test {

// Scripted provider that answers every prompt mentioning a task's question
// with that task's gold answer. Longer questions register first so no rule
// shadows another.
inline std::unique_ptr<mpr::ScriptedProvider> gold_echo_provider(const mpr::DatasetBundle& bundle) {
    std::vector<std::pair<std::string, std::string>> qa;
    std::set<std::string> seen;
    for (const auto& sub : bundle.users) {
        for (const auto& task : sub.tasks) {
            if (!seen.insert(task.question).second) {
                throw std::runtime_error("duplicate question text across tasks");
            }
            qa.emplace_back(task.question, task.answer);
        }
    }
    std::sort(qa.begin(), qa.end(), [](const auto& a, const auto& b) {
        if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
        return a.first < b.first;
    });
    std::vector<mpr::ScriptedRule> rules;
    for (auto& [q, a] : qa) rules.push_back({q, {a}});
    return std::make_unique<mpr::ScriptedProvider>(std::move(rules));
}

}  // namespace mpr_test
