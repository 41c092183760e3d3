#include "mpr/implicit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/rng.hpp"
#include "mpr/text.hpp"

namespace mpr {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kMaskInstruction = "Fill in the masked part of the following statement.\nStatement: ";
const char* const kMaskToken = "[MASK]";

json SftHyperparams::to_json() const {
    return {{"lora_rank", lora_rank},
            {"lora_alpha", lora_alpha},
            {"epochs_min", epochs_min},
            {"epochs_max", epochs_max}};
}

json SftExample::to_json() const {
    return {{"input", input}, {"output", output}, {"source_statement", source_statement}, {"scheme", scheme}};
}

SftExample SftExample::from_json(const json& j) {
    SftExample e;
    e.input = j.at("input").get<std::string>();
    e.output = j.at("output").get<std::string>();
    e.source_statement = j.at("source_statement").get<std::string>();
    e.scheme = j.at("scheme").get<std::string>();
    return e;
}

std::string mask_reconstruct(const SftExample& example) {
    std::string body = example.input;
    if (starts_with(body, kMaskInstruction)) {
        body = body.substr(std::string(kMaskInstruction).size());
    }
    std::size_t pos = body.find(kMaskToken);
    if (pos == std::string::npos) {
        fail("SpanNotFound", "mask example input has no mask token");
    }
    return body.substr(0, pos) + example.output + body.substr(pos + std::string(kMaskToken).size());
}

std::vector<SftExample> build_mask_corpus(const std::vector<Statement>& statements,
                                          std::uint64_t seed) {
    Rng root(seed);
    std::vector<SftExample> corpus;
    corpus.reserve(statements.size());
    for (const Statement& s : statements) {
        const std::string* spans[3] = {&s.source_value, &s.relation, &s.target_value};
        std::uint64_t pick = root.fork("mask-span", fnv1a64(s.id)).below(3);
        const std::string& span = *spans[pick];
        std::size_t pos = span.empty() ? std::string::npos : s.text.find(span);
        if (pos == std::string::npos) {
            std::cerr << "[mpr] skipping statement " << s.id << ": span not found in text\n";
            continue;
        }
        SftExample e;
        e.input = std::string(kMaskInstruction) + s.text.substr(0, pos) + kMaskToken +
                  s.text.substr(pos + span.size());
        e.output = span;
        e.source_statement = s.id;
        e.scheme = "mask";
        corpus.push_back(std::move(e));
    }
    return corpus;
}

namespace {

// "is supervised by" -> "Who is Alice supervised by?"
// "works in"         -> "What does Alice work in?"
std::string ask_question(const Statement& s) {
    std::vector<std::string> words = tokenize_words(s.relation);
    std::string relation = trim(s.relation);
    std::string first = words.empty() ? std::string() : words.front();

    bool entity_flavor = ends_with(relation, " by") || ends_with(relation, " to") ||
                         ends_with(relation, " of") || ends_with(relation, " with");
    std::string wh = entity_flavor ? "Who" : "What";

    static const std::set<std::string> auxiliaries = {"is", "was", "are", "were"};
    if (auxiliaries.count(first)) {
        std::string rest = trim(relation.substr(first.size()));
        return wh + " " + first + " " + s.source_value + (rest.empty() ? "" : " " + rest) + "?";
    }

    std::string base = first;
    if (base == "has") {
        base = "have";
    } else if (base == "does") {
        base = "do";
    } else if (base == "goes") {
        base = "go";
    } else if (ends_with(base, "ies")) {
        base = base.substr(0, base.size() - 3) + "y";
    } else if (ends_with(base, "ches") || ends_with(base, "shes") || ends_with(base, "sses") ||
               ends_with(base, "xes") || ends_with(base, "zes")) {
        base = base.substr(0, base.size() - 2);
    } else if (ends_with(base, "s")) {
        base = base.substr(0, base.size() - 1);
    }
    std::string rest = trim(relation.substr(first.size()));
    return wh + " does " + s.source_value + " " + base + (rest.empty() ? "" : " " + rest) + "?";
}

std::string llm_ask_question(const Statement& s, const TextGen& gen) {
    if (gen.provider == nullptr) fail("ConfigInvalid", "llm ask corpus requires a provider");
    std::string prompt =
        "Write one short question about the following fact whose exact answer is \"" +
        s.target_value + "\".\nFact: " + s.text + "\nReply with the question only.";
    for (int attempt = 0; attempt < gen.max_retries; ++attempt) {
        CompletionRequest req;
        req.model = gen.model;
        req.step_tag = "ask-corpus";
        req.messages = {{"user", prompt}};
        std::string q = trim(gen.provider->complete(req).text);
        if (!q.empty() && !contains_canonical(q, s.target_value)) return q;
    }
    fail("GenerationFailed", "could not produce an ask question for " + s.id);
}

}  // namespace

std::vector<SftExample> build_ask_corpus(const std::vector<Statement>& statements,
                                         const TextGen& gen) {
    std::vector<SftExample> corpus;
    corpus.reserve(statements.size());
    for (const Statement& s : statements) {
        if (!contains_canonical(s.text, s.target_value)) {
            std::cerr << "[mpr] skipping statement " << s.id << ": target not found in text\n";
            continue;
        }
        SftExample e;
        e.input = gen.mode == TextGen::Mode::template_text ? ask_question(s)
                                                           : llm_ask_question(s, gen);
        e.output = s.target_value;
        e.source_statement = s.id;
        e.scheme = "ask";
        corpus.push_back(std::move(e));
    }
    return corpus;
}

void save_sft_corpus(const std::vector<SftExample>& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("IoFailure", "cannot write corpus file '" + path + "'");
    for (const SftExample& e : corpus) out << e.to_json().dump() << "\n";
}

std::vector<SftExample> load_sft_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoFailure", "cannot open corpus file '" + path + "'");
    std::vector<SftExample> corpus;
    for (std::string line; std::getline(in, line);) {
        if (trim(line).empty()) continue;
        corpus.push_back(SftExample::from_json(json::parse(line)));
    }
    return corpus;
}

json ClusterAssignment::to_json() const {
    json jassign = json::object();
    for (const auto& [id, cid] : assignment) jassign[id] = cid;
    return {{"n_clusters", n_clusters},
            {"centroids", centroids},
            {"assignment", jassign},
            {"inertia", inertia},
            {"inertia_history", inertia_history}};
}

ClusterAssignment ClusterAssignment::from_json(const json& j) {
    ClusterAssignment a;
    a.n_clusters = j.at("n_clusters").get<int>();
    a.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    for (auto it = j.at("assignment").begin(); it != j.at("assignment").end(); ++it) {
        a.assignment[it.key()] = it.value().get<int>();
    }
    a.inertia = j.at("inertia").get<double>();
    a.inertia_history = j.value("inertia_history", std::vector<double>());
    return a;
}

void ClusterAssignment::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail("IoFailure", "cannot write clusters file '" + path + "'");
    out << to_json().dump(2) << "\n";
}

ClusterAssignment ClusterAssignment::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoFailure", "cannot open clusters file '" + path + "'");
    json j;
    in >> j;
    return from_json(j);
}

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

}  // namespace

ClusterAssignment kmeans_cluster(const std::vector<Statement>& statements, Embedder& embedder,
                                 int n_clusters, std::uint64_t seed, int max_iters) {
    const int n = static_cast<int>(statements.size());
    if (n_clusters < 1 || n_clusters > n) {
        fail("ConfigInvalid", "n_clusters must be in [1, statement count]");
    }
    std::vector<std::string> texts;
    texts.reserve(statements.size());
    for (const Statement& s : statements) texts.push_back(s.text);
    std::vector<std::vector<double>> points = embedder.embed(texts);

    ClusterAssignment result;
    result.n_clusters = n_clusters;

    bool all_identical = true;
    for (int i = 1; i < n && all_identical; ++i) {
        if (points[static_cast<std::size_t>(i)] != points[0]) all_identical = false;
    }
    if (all_identical && n_clusters > 1) {
        std::cerr << "[mpr] degenerate embeddings: assigning statements round-robin over "
                  << n_clusters << " clusters\n";
        result.centroids.assign(static_cast<std::size_t>(n_clusters), points[0]);
        for (int i = 0; i < n; ++i) {
            result.assignment[statements[static_cast<std::size_t>(i)].id] = i % n_clusters;
        }
        result.inertia = 0.0;
        result.inertia_history = {0.0};
        return result;
    }

    Rng rng = Rng(seed).fork("kmeans");
    std::vector<std::vector<double>> centroids;
    centroids.push_back(points[rng.below(static_cast<std::uint64_t>(n))]);
    std::vector<double> d2(static_cast<std::size_t>(n), 0.0);
    while (static_cast<int>(centroids.size()) < n_clusters) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centroids) {
                best = std::min(best, squared_distance(points[static_cast<std::size_t>(i)], c));
            }
            d2[static_cast<std::size_t>(i)] = best;
            total += best;
        }
        int chosen = 0;
        if (total > 0.0) {
            double r = rng.unit() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc >= r) {
                    chosen = i;
                    break;
                }
                chosen = i;
            }
        } else {
            chosen = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centroids.push_back(points[static_cast<std::size_t>(chosen)]);
    }

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::max();
            for (int c = 0; c < n_clusters; ++c) {
                double d = squared_distance(points[static_cast<std::size_t>(i)],
                                            centroids[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            inertia += best_d;
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        result.inertia_history.push_back(inertia);
        result.inertia = inertia;
        if (!changed) break;
        for (int c = 0; c < n_clusters; ++c) {
            std::vector<double> sum(points[0].size(), 0.0);
            int count = 0;
            for (int i = 0; i < n; ++i) {
                if (assign[static_cast<std::size_t>(i)] != c) continue;
                ++count;
                for (std::size_t j = 0; j < sum.size(); ++j) {
                    sum[j] += points[static_cast<std::size_t>(i)][j];
                }
            }
            if (count == 0) continue;  // keep the previous centroid
            for (std::size_t j = 0; j < sum.size(); ++j) sum[j] /= count;
            centroids[static_cast<std::size_t>(c)] = std::move(sum);
        }
    }

    result.centroids = std::move(centroids);
    for (int i = 0; i < n; ++i) {
        result.assignment[statements[static_cast<std::size_t>(i)].id] =
            assign[static_cast<std::size_t>(i)];
    }
    return result;
}

json export_cluster_corpora(const ClusterAssignment& assignment,
                            const std::vector<Statement>& statements, const std::string& scheme,
                            const std::string& out_dir, std::uint64_t seed) {
    if (scheme != "mask" && scheme != "ask") {
        fail("ConfigInvalid", "corpus scheme must be 'mask' or 'ask'");
    }
    std::vector<std::vector<Statement>> groups(static_cast<std::size_t>(assignment.n_clusters));
    for (const Statement& s : statements) {
        auto it = assignment.assignment.find(s.id);
        if (it == assignment.assignment.end()) {
            fail("ConfigInvalid", "statement '" + s.id + "' has no cluster assignment");
        }
        groups.at(static_cast<std::size_t>(it->second)).push_back(s);
    }
    fs::create_directories(out_dir);
    json files = json::array();
    for (int c = 0; c < assignment.n_clusters; ++c) {
        const auto& group = groups[static_cast<std::size_t>(c)];
        std::vector<SftExample> corpus =
            scheme == "mask" ? build_mask_corpus(group, Rng(seed).fork("cluster", c).next())
                             : build_ask_corpus(group, TextGen::templates());
        char name[48];
        std::snprintf(name, sizeof(name), "cluster_%03d.%s.jsonl", c, scheme.c_str());
        save_sft_corpus(corpus, (fs::path(out_dir) / name).string());
        files.push_back({{"file", name},
                         {"cluster_id", c},
                         {"examples", corpus.size()},
                         {"statements", group.size()}});
    }
    json manifest = {{"version", "mpr-clusters/1"},
                     {"scheme", scheme},
                     {"files", files},
                     {"sft", SftHyperparams{}.to_json()}};
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) fail("IoFailure", "cannot write cluster manifest under '" + out_dir + "'");
    out << manifest.dump(2) << "\n";
    return manifest;
}

json AdapterRegistry::to_json() const {
    json entries_json = json::object();
    for (const auto& [cid, name] : entries) entries_json[std::to_string(cid)] = name;
    return {{"base_model", base_model}, {"entries", entries_json}};
}

AdapterRegistry AdapterRegistry::from_json(const json& j) {
    AdapterRegistry r;
    r.base_model = j.at("base_model").get<std::string>();
    std::set<std::string> seen;
    for (auto it = j.at("entries").begin(); it != j.at("entries").end(); ++it) {
        std::string name = it.value().get<std::string>();
        if (!seen.insert(name).second) {
            fail("ConfigInvalid", "duplicate adapter name '" + name + "'");
        }
        r.entries[std::stoi(it.key())] = name;
    }
    return r;
}

void AdapterRegistry::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail("IoFailure", "cannot write adapters file '" + path + "'");
    out << to_json().dump(2) << "\n";
}

AdapterRegistry AdapterRegistry::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoFailure", "cannot open adapters file '" + path + "'");
    json j;
    in >> j;
    return from_json(j);
}

std::string select_adapter(const std::vector<ScoredStatement>& retrieved,
                           const ClusterAssignment& assignment, const AdapterRegistry& registry) {
    if (retrieved.empty()) return registry.base_model;
    std::map<int, std::pair<int, double>> votes;  // cluster -> (count, summed score)
    for (const ScoredStatement& s : retrieved) {
        auto it = assignment.assignment.find(s.statement_id);
        if (it == assignment.assignment.end()) {
            fail("ConfigInvalid", "retrieved statement '" + s.statement_id + "' has no cluster");
        }
        auto& v = votes[it->second];
        v.first += 1;
        v.second += s.score;
    }
    int winner = -1;
    std::pair<int, double> best{-1, 0.0};
    for (const auto& [cid, v] : votes) {  // ascending cluster id, so ties keep the lower id
        if (v.first > best.first || (v.first == best.first && v.second > best.second)) {
            best = v;
            winner = cid;
        }
    }
    auto it = registry.entries.find(winner);
    if (it == registry.entries.end()) {
        fail("UnregisteredCluster", "no adapter registered for cluster " + std::to_string(winner));
    }
    return it->second;
}

}  // namespace mpr
