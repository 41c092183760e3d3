#include "mpr/graph.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/text.hpp"

namespace mpr {

using nlohmann::json;

std::string to_string(NodeKind k) {
    return k == NodeKind::entity ? "entity" : "attribute";
}

std::string to_string(EdgeCategory c) {
    switch (c) {
        case EdgeCategory::entity_oriented: return "entity-oriented";
        case EdgeCategory::attribute_oriented: return "attribute-oriented";
        case EdgeCategory::value_oriented: return "value-oriented";
    }
    return "entity-oriented";
}

NodeKind node_kind_from_string(const std::string& s) {
    if (s == "entity") return NodeKind::entity;
    if (s == "attribute") return NodeKind::attribute;
    fail("ConfigInvalid", "unknown node kind '" + s + "'");
}

EdgeCategory edge_category_from_string(const std::string& s) {
    if (s == "entity" || s == "entity-oriented") return EdgeCategory::entity_oriented;
    if (s == "attribute" || s == "attribute-oriented") return EdgeCategory::attribute_oriented;
    if (s == "value" || s == "value-oriented") return EdgeCategory::value_oriented;
    fail("ConfigInvalid", "unknown edge category '" + s + "'");
}

namespace {

// Civil-date <-> day-number conversion for date pool specs.
long long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, int& y, int& m, int& d) {
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y += m <= 2;
}

bool parse_iso_date(const std::string& s, long long& days) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    int y = std::stoi(s.substr(0, 4));
    int m = std::stoi(s.substr(5, 2));
    int d = std::stoi(s.substr(8, 2));
    if (m < 1 || m > 12 || d < 1 || d > 31) return false;
    days = days_from_civil(y, m, d);
    return true;
}

std::string format_iso_date(long long days) {
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

std::vector<std::string> expand_pool_spec(const json& spec) {
    const std::string type = spec.at("type").get<std::string>();
    std::vector<std::string> pool;
    if (type == "numbers") {
        long long from = spec.at("from").get<long long>();
        long long to = spec.at("to").get<long long>();
        long long step = spec.value("step", 1LL);
        std::string unit = spec.value("unit", std::string());
        if (step <= 0) fail("ConfigInvalid", "number pool step must be positive");
        for (long long v = from; v <= to; v += step) {
            std::string s = std::to_string(v);
            if (!unit.empty()) s += " (" + unit + ")";
            pool.push_back(std::move(s));
        }
    } else if (type == "dates") {
        long long from = 0, to = 0;
        if (!parse_iso_date(spec.at("from").get<std::string>(), from) ||
            !parse_iso_date(spec.at("to").get<std::string>(), to)) {
            fail("ConfigInvalid", "date pool bounds must be YYYY-MM-DD");
        }
        long long step = spec.value("step_days", 1LL);
        if (step <= 0) fail("ConfigInvalid", "date pool step_days must be positive");
        for (long long d = from; d <= to; d += step) pool.push_back(format_iso_date(d));
    } else {
        fail("ConfigInvalid", "unknown pool_spec type '" + type + "'");
    }
    return pool;
}

}  // namespace

void MetaGraph::validate() const {
    for (const auto& space : node_spaces) {
        if (space.id.empty()) fail("ConfigInvalid", "node space with empty id");
        if (space.value_pool.empty()) fail("EmptyPool", "node space '" + space.id + "' has an empty pool");
    }
    for (std::size_t i = 0; i < node_spaces.size(); ++i) {
        for (std::size_t j = i + 1; j < node_spaces.size(); ++j) {
            if (node_spaces[i].id == node_spaces[j].id) {
                fail("ConfigInvalid", "duplicate node space id '" + node_spaces[i].id + "'");
            }
        }
    }
    for (const auto& es : edge_spaces) {
        if (es.relation_pool.empty()) fail("EmptyPool", "edge space '" + es.id + "' has an empty relation pool");
        int si = space_index(es.source_space);
        int ti = space_index(es.target_space);
        if (si < 0 || ti < 0) {
            fail("ConfigInvalid", "edge space '" + es.id + "' references an unknown node space");
        }
        NodeKind sk = node_spaces[static_cast<std::size_t>(si)].kind;
        NodeKind tk = node_spaces[static_cast<std::size_t>(ti)].kind;
        bool ok = false;
        switch (es.category) {
            case EdgeCategory::entity_oriented:
                ok = sk == NodeKind::entity && tk == NodeKind::entity;
                break;
            case EdgeCategory::attribute_oriented:
                ok = sk == NodeKind::entity && tk == NodeKind::attribute;
                break;
            case EdgeCategory::value_oriented:
                ok = sk == NodeKind::attribute && tk == NodeKind::attribute;
                break;
        }
        if (!ok) {
            fail("ConfigInvalid", "edge space '" + es.id + "' endpoints do not fit category " +
                                      to_string(es.category));
        }
    }
}

int MetaGraph::space_index(const std::string& id) const {
    for (std::size_t i = 0; i < node_spaces.size(); ++i) {
        if (node_spaces[i].id == id) return static_cast<int>(i);
    }
    return -1;
}

MetaGraph MetaGraph::from_json(const json& j, const std::string& base_dir) {
    MetaGraph meta;
    for (const auto& js : j.at("node_spaces")) {
        NodeSpace space;
        space.id = js.at("id").get<std::string>();
        space.kind = node_kind_from_string(js.at("kind").get<std::string>());
        space.label = js.value("label", space.id);
        if (js.contains("pool")) {
            space.value_pool = js.at("pool").get<std::vector<std::string>>();
        } else if (js.contains("pool_spec")) {
            space.value_pool = expand_pool_spec(js.at("pool_spec"));
        } else if (js.contains("pool_file")) {
            std::filesystem::path path = js.at("pool_file").get<std::string>();
            if (path.is_relative() && !base_dir.empty()) {
                path = std::filesystem::path(base_dir) / path;
            }
            std::ifstream pool_in(path);
            if (!pool_in) {
                fail("IoFailure", "cannot open pool file '" + path.string() + "' for space '" +
                                      space.id + "'");
            }
            for (std::string line; std::getline(pool_in, line);) {
                std::string value = trim(line);
                if (!value.empty()) space.value_pool.push_back(std::move(value));
            }
        }
        meta.node_spaces.push_back(std::move(space));
    }
    for (const auto& je : j.at("edge_spaces")) {
        EdgeSpace es;
        es.id = je.at("id").get<std::string>();
        es.source_space = je.at("source").get<std::string>();
        es.target_space = je.at("target").get<std::string>();
        es.category = edge_category_from_string(je.at("category").get<std::string>());
        es.relation_pool = je.at("relations").get<std::vector<std::string>>();
        meta.edge_spaces.push_back(std::move(es));
    }
    meta.validate();
    return meta;
}

json MetaGraph::to_json() const {
    json spaces = json::array();
    for (const auto& s : node_spaces) {
        spaces.push_back({{"id", s.id},
                          {"kind", to_string(s.kind)},
                          {"label", s.label},
                          {"pool", s.value_pool}});
    }
    json edges = json::array();
    for (const auto& e : edge_spaces) {
        edges.push_back({{"id", e.id},
                         {"source", e.source_space},
                         {"target", e.target_space},
                         {"category", to_string(e.category)},
                         {"relations", e.relation_pool}});
    }
    return {{"node_spaces", spaces}, {"edge_spaces", edges}};
}

MetaGraph MetaGraph::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoFailure", "cannot open meta graph file '" + path + "'");
    json j;
    in >> j;
    return from_json(j, std::filesystem::path(path).parent_path().string());
}

GraphScaleConfig GraphScaleConfig::from_json(const json& j) {
    GraphScaleConfig scale;
    if (j.contains("nodes_per_space")) {
        for (auto it = j.at("nodes_per_space").begin(); it != j.at("nodes_per_space").end(); ++it) {
            scale.nodes_per_space[it.key()] = it.value().get<int>();
        }
    }
    if (j.contains("edges_per_space")) {
        for (auto it = j.at("edges_per_space").begin(); it != j.at("edges_per_space").end(); ++it) {
            scale.edges_per_space[it.key()] = it.value().get<int>();
        }
    }
    return scale;
}

json GraphScaleConfig::to_json() const {
    json nodes = json::object();
    json edges = json::object();
    std::vector<std::string> keys;
    for (const auto& [k, v] : nodes_per_space) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (const auto& k : keys) nodes[k] = nodes_per_space.at(k);
    keys.clear();
    for (const auto& [k, v] : edges_per_space) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (const auto& k : keys) edges[k] = edges_per_space.at(k);
    return {{"nodes_per_space", nodes}, {"edges_per_space", edges}};
}

void SpecificGraph::finalize() {
    adj_out.assign(nodes.size(), {});
    adj_in.assign(nodes.size(), {});
    peers_.clear();
    holders_.clear();
    for (const Edge& e : edges) {
        adj_out[static_cast<std::size_t>(e.source)].push_back(e.id);
        adj_in[static_cast<std::size_t>(e.target)].push_back(e.id);
    }
    for (const Node& n : nodes) {
        peers_[std::to_string(n.space) + "|" + n.value].push_back(n.id);
    }
    for (const Edge& e : edges) {
        if (e.category != EdgeCategory::attribute_oriented) continue;
        holders_[e.relation + "|" + node(e.target).value].insert(e.source);
    }
}

const std::vector<int>& SpecificGraph::value_peers(int node_id) const {
    const Node& n = node(node_id);
    return peers_.at(std::to_string(n.space) + "|" + n.value);
}

int SpecificGraph::attribute_holder_count(const std::string& relation, const std::string& value) const {
    auto it = holders_.find(relation + "|" + value);
    return it == holders_.end() ? 0 : static_cast<int>(it->second.size());
}

void SpecificGraph::check_invariants() const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (n.id != static_cast<int>(i)) fail("ConfigInvalid", "node ids must be dense");
        const NodeSpace& space = spaces.at(static_cast<std::size_t>(n.space));
        if (n.kind != space.kind) fail("ConfigInvalid", "node kind does not match space kind");
        if (std::find(space.value_pool.begin(), space.value_pool.end(), n.value) ==
            space.value_pool.end()) {
            fail("ConfigInvalid", "node value '" + n.value + "' is not in the pool of '" + space.id + "'");
        }
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.id != static_cast<int>(i)) fail("ConfigInvalid", "edge ids must be dense");
        const EdgeSpace& es = edge_spaces.at(static_cast<std::size_t>(e.space));
        if (e.category != es.category) fail("ConfigInvalid", "edge category does not match space");
        if (e.source < 0 || e.source >= static_cast<int>(nodes.size()) || e.target < 0 ||
            e.target >= static_cast<int>(nodes.size())) {
            fail("ConfigInvalid", "edge endpoint out of range");
        }
    }
}

json SpecificGraph::to_json() const {
    json jnodes = json::array();
    for (const Node& n : nodes) {
        jnodes.push_back({{"id", n.id}, {"space", n.space}, {"value", n.value}, {"kind", to_string(n.kind)}});
    }
    json jedges = json::array();
    for (const Edge& e : edges) {
        jedges.push_back({{"id", e.id},
                          {"space", e.space},
                          {"source", e.source},
                          {"target", e.target},
                          {"relation", e.relation},
                          {"category", to_string(e.category)}});
    }
    json jspaces = json::array();
    for (const auto& s : spaces) {
        jspaces.push_back({{"id", s.id}, {"kind", to_string(s.kind)}, {"label", s.label}, {"pool", s.value_pool}});
    }
    json jespaces = json::array();
    for (const auto& e : edge_spaces) {
        jespaces.push_back({{"id", e.id},
                            {"source", e.source_space},
                            {"target", e.target_space},
                            {"category", to_string(e.category)},
                            {"relations", e.relation_pool}});
    }
    char hash_hex[20];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx", static_cast<unsigned long long>(config_hash));
    return {{"version", "mpr-graph/1"},
            {"manifest", {{"seed", seed}, {"config_hash", hash_hex}}},
            {"spaces", jspaces},
            {"edge_spaces", jespaces},
            {"nodes", jnodes},
            {"edges", jedges}};
}

SpecificGraph SpecificGraph::from_json(const json& j) {
    if (j.value("version", std::string()) != "mpr-graph/1") {
        fail("ConfigInvalid", "unsupported graph document version");
    }
    SpecificGraph g;
    g.seed = j.at("manifest").at("seed").get<std::uint64_t>();
    g.config_hash = std::stoull(j.at("manifest").at("config_hash").get<std::string>(), nullptr, 16);
    for (const auto& js : j.at("spaces")) {
        NodeSpace s;
        s.id = js.at("id").get<std::string>();
        s.kind = node_kind_from_string(js.at("kind").get<std::string>());
        s.label = js.at("label").get<std::string>();
        s.value_pool = js.at("pool").get<std::vector<std::string>>();
        g.spaces.push_back(std::move(s));
    }
    for (const auto& je : j.at("edge_spaces")) {
        EdgeSpace e;
        e.id = je.at("id").get<std::string>();
        e.source_space = je.at("source").get<std::string>();
        e.target_space = je.at("target").get<std::string>();
        e.category = edge_category_from_string(je.at("category").get<std::string>());
        e.relation_pool = je.at("relations").get<std::vector<std::string>>();
        g.edge_spaces.push_back(std::move(e));
    }
    for (const auto& jn : j.at("nodes")) {
        Node n;
        n.id = jn.at("id").get<int>();
        n.space = jn.at("space").get<int>();
        n.value = jn.at("value").get<std::string>();
        n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
        g.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges")) {
        Edge e;
        e.id = je.at("id").get<int>();
        e.space = je.at("space").get<int>();
        e.source = je.at("source").get<int>();
        e.target = je.at("target").get<int>();
        e.relation = je.at("relation").get<std::string>();
        e.category = edge_category_from_string(je.at("category").get<std::string>());
        g.edges.push_back(std::move(e));
    }
    g.finalize();
    g.check_invariants();
    return g;
}

void SpecificGraph::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail("IoFailure", "cannot write graph file '" + path + "'");
    out << to_json().dump(2) << "\n";
}

SpecificGraph SpecificGraph::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoFailure", "cannot open graph file '" + path + "'");
    json j;
    in >> j;
    return from_json(j);
}

std::uint64_t scale_config_hash(const MetaGraph& meta, const GraphScaleConfig& scale) {
    std::uint64_t h = fnv1a64(meta.to_json().dump());
    return fnv1a64(scale.to_json().dump(), h);
}

namespace {

// Relation label for a comparison edge between two attribute values. Numeric
// values compare numerically, ISO dates and everything else lexically.
std::string comparison_relation(const std::string& a, const std::string& b) {
    auto na = leading_number(a);
    auto nb = leading_number(b);
    if (na && nb) {
        if (*na > *nb) return "is greater than";
        if (*na < *nb) return "is less than";
        return "is equal to";
    }
    if (a > b) return "is greater than";
    if (a < b) return "is less than";
    return "is equal to";
}

}  // namespace

SpecificGraph instantiate_graph(const MetaGraph& meta, std::uint64_t seed,
                                const GraphScaleConfig& scale) {
    meta.validate();
    SpecificGraph g;
    g.spaces = meta.node_spaces;
    g.edge_spaces = meta.edge_spaces;
    g.seed = seed;
    g.config_hash = scale_config_hash(meta, scale);

    Rng root(seed);
    std::vector<std::vector<int>> space_nodes(meta.node_spaces.size());
    for (std::size_t si = 0; si < meta.node_spaces.size(); ++si) {
        const NodeSpace& space = meta.node_spaces[si];
        auto it = scale.nodes_per_space.find(space.id);
        int want = it != scale.nodes_per_space.end() ? it->second
                                                     : static_cast<int>(space.value_pool.size());
        if (want < 0) fail("ConfigInvalid", "negative node count for space '" + space.id + "'");
        Rng rng = root.fork("nodes:" + space.id);
        if (space.kind == NodeKind::entity) {
            // Entities draw without replacement so their values stay unique.
            if (want > static_cast<int>(space.value_pool.size())) {
                fail("ScaleInfeasible", "space '" + space.id + "' has " +
                                            std::to_string(space.value_pool.size()) +
                                            " values but " + std::to_string(want) + " were requested");
            }
            std::vector<int> idx(space.value_pool.size());
            std::iota(idx.begin(), idx.end(), 0);
            rng.shuffle(idx);
            for (int i = 0; i < want; ++i) {
                Node n;
                n.id = static_cast<int>(g.nodes.size());
                n.space = static_cast<int>(si);
                n.value = space.value_pool[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
                n.kind = space.kind;
                space_nodes[si].push_back(n.id);
                g.nodes.push_back(std::move(n));
            }
        } else {
            // Attributes draw with replacement; shared values are what makes
            // ambiguity (and thus disambiguation) possible.
            for (int i = 0; i < want; ++i) {
                Node n;
                n.id = static_cast<int>(g.nodes.size());
                n.space = static_cast<int>(si);
                n.value = space.value_pool[rng.below(space.value_pool.size())];
                n.kind = space.kind;
                space_nodes[si].push_back(n.id);
                g.nodes.push_back(std::move(n));
            }
        }
    }

    for (std::size_t ei = 0; ei < meta.edge_spaces.size(); ++ei) {
        const EdgeSpace& es = meta.edge_spaces[ei];
        const auto& src = space_nodes[static_cast<std::size_t>(meta.space_index(es.source_space))];
        const auto& tgt = space_nodes[static_cast<std::size_t>(meta.space_index(es.target_space))];
        auto it = scale.edges_per_space.find(es.id);
        int want = it != scale.edges_per_space.end() ? it->second : static_cast<int>(src.size());
        if (want == 0 || src.empty() || tgt.empty()) continue;
        Rng rng = root.fork("edges:" + es.id);
        int placed = 0;
        if (es.category != EdgeCategory::value_oriented) {
            // One edge per (source, relation) pair keeps forward hops
            // functional: a person works in exactly one city per relation.
            std::vector<std::pair<int, int>> cand;
            cand.reserve(src.size() * es.relation_pool.size());
            for (int s : src) {
                for (std::size_t r = 0; r < es.relation_pool.size(); ++r) {
                    cand.emplace_back(s, static_cast<int>(r));
                }
            }
            rng.shuffle(cand);
            for (const auto& [s, r] : cand) {
                if (placed == want) break;
                std::size_t ti = static_cast<std::size_t>(rng.below(tgt.size()));
                if (tgt[ti] == s) ti = (ti + 1) % tgt.size();
                if (tgt[ti] == s) continue;  // single-node space, no partner
                Edge e;
                e.id = static_cast<int>(g.edges.size());
                e.space = static_cast<int>(ei);
                e.source = s;
                e.target = tgt[ti];
                e.relation = es.relation_pool[static_cast<std::size_t>(r)];
                e.category = es.category;
                g.edges.push_back(std::move(e));
                ++placed;
            }
        } else {
            std::vector<std::pair<int, int>> cand;
            for (int x : src) {
                for (int y : tgt) {
                    if (x != y) cand.emplace_back(x, y);
                }
            }
            rng.shuffle(cand);
            for (const auto& [x, y] : cand) {
                if (placed == want) break;
                std::string rel = comparison_relation(g.nodes[static_cast<std::size_t>(x)].value,
                                                      g.nodes[static_cast<std::size_t>(y)].value);
                if (std::find(es.relation_pool.begin(), es.relation_pool.end(), rel) ==
                    es.relation_pool.end()) {
                    continue;  // pool restricts which comparisons are asserted
                }
                Edge e;
                e.id = static_cast<int>(g.edges.size());
                e.space = static_cast<int>(ei);
                e.source = x;
                e.target = y;
                e.relation = rel;
                e.category = es.category;
                g.edges.push_back(std::move(e));
                ++placed;
            }
        }
        if (placed < want) {
            fail("ScaleInfeasible", "edge space '" + es.id + "' can only fit " +
                                        std::to_string(placed) + " of " + std::to_string(want) +
                                        " requested edges");
        }
    }

    g.finalize();
    g.check_invariants();
    return g;
}

bool is_ambiguous(const SpecificGraph& graph, const Edge& edge) {
    if (edge.id < 0 || edge.id >= static_cast<int>(graph.edges.size()) ||
        graph.edge(edge.id).source != edge.source || graph.edge(edge.id).target != edge.target) {
        fail("UnknownEdge", "edge does not belong to this graph");
    }
    if (edge.category != EdgeCategory::attribute_oriented) return false;
    return graph.attribute_holder_count(edge.relation, graph.node(edge.target).value) >= 2;
}

namespace {

std::set<int> expand_value_peers(const SpecificGraph& g, const std::set<int>& frontier) {
    std::set<int> out;
    for (int x : frontier) {
        for (int p : g.value_peers(x)) out.insert(p);
    }
    return out;
}

// One evidence-matching step: from every value-equivalent of the frontier,
// cross any edge with the same (category, relation) in the step's direction.
std::set<int> chain_step(const SpecificGraph& g, const std::set<int>& frontier, EdgeCategory cat,
                         const std::string& relation, bool forward) {
    std::set<int> out;
    for (int x : expand_value_peers(g, frontier)) {
        const auto& edge_ids = forward ? g.adj_out[static_cast<std::size_t>(x)]
                                       : g.adj_in[static_cast<std::size_t>(x)];
        for (int eid : edge_ids) {
            const Edge& e = g.edge(eid);
            if (e.category != cat || e.relation != relation) continue;
            out.insert(forward ? e.target : e.source);
        }
    }
    return out;
}

// Keep candidates that hold (relation, value) via a forward attribute edge.
std::set<int> filter_step(const SpecificGraph& g, const std::set<int>& frontier,
                          const std::string& relation, const std::string& value) {
    std::set<int> out;
    for (int x : frontier) {
        for (int eid : g.adj_out[static_cast<std::size_t>(x)]) {
            const Edge& e = g.edge(eid);
            if (e.category != EdgeCategory::attribute_oriented || e.relation != relation) continue;
            if (g.node(e.target).value == value) {
                out.insert(x);
                break;
            }
        }
    }
    return out;
}

std::set<std::string> distinct_values(const SpecificGraph& g, const std::set<int>& frontier) {
    std::set<std::string> vals;
    for (int x : frontier) vals.insert(g.node(x).value);
    return vals;
}

struct Walk {
    ReasoningPath path;
    std::set<int> visited;
    std::set<int> frontier;
    int current = -1;     // chain position (trajectory node)
    int value_steps = 0;  // value-oriented chain steps taken
};

// Candidate next chain move out of the current trajectory node.
struct Move {
    int edge_id;
    bool forward;
    int arrival;
};

// After taking a chain step, require the evidence to pin down one value.
// A reverse attribute hop (value -> holder) may be rescued by appending
// disambiguating attribute edges of the arrival entity; anything else that
// matches several values sinks the candidate.
bool settle_step(const SpecificGraph& g, Walk& walk, const Move& move, int hops, Rng& rng,
                 const PathPolicy& policy) {
    const Edge& e = g.edge(move.edge_id);
    std::set<int> next = chain_step(g, walk.frontier, e.category, e.relation, move.forward);
    if (next.empty()) return false;

    ReasoningPath saved_path = walk.path;
    std::set<int> saved_visited = walk.visited;

    walk.path.steps.push_back({move.edge_id, move.forward, false});
    bool is_reverse_attribute = e.category == EdgeCategory::attribute_oriented && !move.forward;

    if (distinct_values(g, next).size() > 1) {
        if (!is_reverse_attribute) {
            walk.path = std::move(saved_path);
            return false;
        }
        std::vector<int> extras;
        for (int eid : g.adj_out[static_cast<std::size_t>(move.arrival)]) {
            const Edge& d = g.edge(eid);
            if (d.category != EdgeCategory::attribute_oriented || eid == move.edge_id) continue;
            if (walk.visited.count(d.target) || d.target == move.arrival) continue;
            extras.push_back(eid);
        }
        rng.shuffle(extras);
        int appended = 0;
        for (int eid : extras) {
            if (distinct_values(g, next).size() == 1) break;
            if (appended == policy.max_disambiguation_per_hop) break;
            if (static_cast<int>(walk.path.steps.size()) >= hops) break;
            const Edge& d = g.edge(eid);
            std::set<int> filtered = filter_step(g, next, d.relation, g.node(d.target).value);
            if (filtered.size() >= next.size() || filtered.empty()) continue;
            next = std::move(filtered);
            walk.path.steps.push_back({eid, true, true});
            walk.visited.insert(d.target);
            ++appended;
        }
        if (distinct_values(g, next).size() != 1) {
            walk.path = std::move(saved_path);
            walk.visited = std::move(saved_visited);
            return false;
        }
    }

    walk.frontier = std::move(next);
    walk.visited.insert(move.arrival);
    walk.current = move.arrival;
    walk.path.answer_node = move.arrival;
    if (e.category == EdgeCategory::value_oriented) ++walk.value_steps;
    return true;
}

std::optional<ReasoningPath> try_sample(const SpecificGraph& g, int hops, Rng rng,
                                        const PathPolicy& policy,
                                        const std::vector<std::pair<int, bool>>& starts) {
    auto [first_edge, first_fwd] = starts[rng.below(starts.size())];
    const Edge& first = g.edge(first_edge);
    int anchor = first_fwd ? first.source : first.target;
    int entry = first_fwd ? first.target : first.source;
    if (g.value_peers(anchor).size() != 1) return std::nullopt;

    Walk walk;
    walk.path.anchor_node = anchor;
    walk.path.answer_node = entry;
    walk.visited = {anchor};
    walk.frontier = {anchor};
    walk.current = anchor;

    if (!settle_step(g, walk, {first_edge, first_fwd, entry}, hops, rng, policy)) {
        return std::nullopt;
    }

    // strict personalized majority: value steps v must keep
    // hops - v > min_personalized_ratio * hops
    int max_value_steps =
        hops - 1 - static_cast<int>(policy.min_personalized_ratio * hops);
    while (static_cast<int>(walk.path.steps.size()) < hops) {
        int remaining = hops - static_cast<int>(walk.path.steps.size());
        std::vector<Move> moves;
        auto consider = [&](int eid, bool forward) {
            const Edge& e = g.edge(eid);
            int arrival = forward ? e.target : e.source;
            if (walk.visited.count(arrival)) return;
            if (e.category == EdgeCategory::value_oriented) {
                if (remaining < 2) return;  // a comparison can never answer
                if (walk.value_steps + 1 > max_value_steps) return;
            }
            moves.push_back({eid, forward, arrival});
        };
        for (int eid : g.adj_out[static_cast<std::size_t>(walk.current)]) consider(eid, true);
        for (int eid : g.adj_in[static_cast<std::size_t>(walk.current)]) consider(eid, false);
        if (moves.empty()) return std::nullopt;
        rng.shuffle(moves);
        bool advanced = false;
        for (const Move& m : moves) {
            if (settle_step(g, walk, m, hops, rng, policy)) {
                advanced = true;
                break;
            }
        }
        if (!advanced) return std::nullopt;
    }

    if (static_cast<int>(walk.path.steps.size()) != hops) return std::nullopt;

    int personalized = 0;
    for (const PathStep& st : walk.path.steps) {
        if (g.edge(st.edge_id).category != EdgeCategory::value_oriented) ++personalized;
    }
    if (static_cast<double>(personalized) <= policy.min_personalized_ratio * hops) {
        return std::nullopt;
    }
    if (g.edge(walk.path.steps.back().edge_id).category == EdgeCategory::value_oriented &&
        !walk.path.steps.back().disambiguation) {
        return std::nullopt;
    }

    // Values the question will expose must never collide with the values it
    // must hide, or the leakage check can never pass.
    std::set<std::string> visible{canonical_text(g.node(anchor).value)};
    std::set<std::string> hidden;
    int chain_pos = 0;
    for (const PathStep& st : walk.path.steps) {
        const Edge& e = g.edge(st.edge_id);
        if (st.disambiguation) {
            visible.insert(canonical_text(g.node(e.target).value));
        } else {
            int arrival = st.forward ? e.target : e.source;
            ++chain_pos;
            hidden.insert(canonical_text(g.node(arrival).value));
        }
    }
    hidden.insert(canonical_text(g.node(walk.path.answer_node).value));
    for (const std::string& h : hidden) {
        for (const std::string& v : visible) {
            if (v.find(h) != std::string::npos) return std::nullopt;
        }
    }

    AnswerSet answers = resolve_answer(g, walk.path);
    if (answers.size() != 1 || *answers.begin() != g.node(walk.path.answer_node).value) {
        return std::nullopt;
    }
    return walk.path;
}

}  // namespace

ReasoningPath sample_path(const SpecificGraph& graph, int hops, std::uint64_t seed,
                          const PathPolicy& policy) {
    if (hops < 2) fail("HopsTooSmall", "hop count must be at least 2");
    std::vector<std::pair<int, bool>> starts;
    for (const Edge& e : graph.edges) {
        switch (e.category) {
            case EdgeCategory::entity_oriented:
                starts.emplace_back(e.id, true);
                starts.emplace_back(e.id, false);
                break;
            case EdgeCategory::attribute_oriented:
                starts.emplace_back(e.id, true);  // anchor on the entity side
                break;
            case EdgeCategory::value_oriented:
                break;
        }
    }
    if (starts.empty()) fail("PathExhausted", "graph has no usable starting edge");
    Rng base(seed);
    for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
        Rng rng = base.fork("path-attempt", static_cast<std::uint64_t>(attempt));
        if (auto path = try_sample(graph, hops, rng, policy, starts)) return *path;
    }
    fail("PathExhausted", "no valid " + std::to_string(hops) + "-hop path within " +
                              std::to_string(policy.max_attempts) + " attempts");
}

AnswerSet resolve_answer(const SpecificGraph& graph, const ReasoningPath& path) {
    if (path.steps.empty()) fail("DanglingPath", "path has no steps");
    if (path.anchor_node < 0 || path.anchor_node >= static_cast<int>(graph.nodes.size())) {
        fail("DanglingPath", "anchor node is not in the graph");
    }
    for (const PathStep& st : path.steps) {
        if (st.edge_id < 0 || st.edge_id >= static_cast<int>(graph.edges.size())) {
            fail("DanglingPath", "path references edge " + std::to_string(st.edge_id));
        }
    }
    std::set<int> frontier;
    for (int id : graph.value_peers(path.anchor_node)) frontier.insert(id);
    for (const PathStep& st : path.steps) {
        const Edge& e = graph.edge(st.edge_id);
        if (st.disambiguation) {
            frontier = filter_step(graph, frontier, e.relation, graph.node(e.target).value);
        } else {
            frontier = chain_step(graph, frontier, e.category, e.relation, st.forward);
        }
        if (frontier.empty()) return {};
    }
    AnswerSet answers;
    for (int id : frontier) answers.insert(graph.node(id).value);
    return answers;
}

}  // namespace mpr
