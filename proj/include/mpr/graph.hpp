#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpr/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mpr {

enum class NodeKind { entity, attribute };
enum class EdgeCategory { entity_oriented, attribute_oriented, value_oriented };

std::string to_string(NodeKind k);
std::string to_string(EdgeCategory c);
NodeKind node_kind_from_string(const std::string& s);
EdgeCategory edge_category_from_string(const std::string& s);

// A conceptual space of entities or attribute values, e.g. "person" with a
// pool of names, or "city" with a pool of city names.
struct NodeSpace {
    std::string id;
    NodeKind kind = NodeKind::entity;
    std::string label;  // noun used when phrasing questions ("person", "city")
    std::vector<std::string> value_pool;
};

struct EdgeSpace {
    std::string id;
    std::string source_space;
    std::string target_space;
    EdgeCategory category = EdgeCategory::entity_oriented;
    std::vector<std::string> relation_pool;
};

// The sampling space from which per-user specific graphs are drawn.
struct MetaGraph {
    std::vector<NodeSpace> node_spaces;
    std::vector<EdgeSpace> edge_spaces;

    // Throws ConfigInvalid / EmptyPool on malformed definitions.
    void validate() const;

    int space_index(const std::string& id) const;  // -1 if absent

    // base_dir resolves relative pool_file references.
    static MetaGraph from_json(const nlohmann::json& j, const std::string& base_dir = "");
    nlohmann::json to_json() const;
    static MetaGraph load_file(const std::string& path);
};

// How many nodes/edges to instantiate per space. Missing node entries default
// to the full pool; missing edge entries default to one edge per source node.
struct GraphScaleConfig {
    std::unordered_map<std::string, int> nodes_per_space;
    std::unordered_map<std::string, int> edges_per_space;

    static GraphScaleConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Node {
    int id = -1;
    int space = -1;
    std::string value;
    NodeKind kind = NodeKind::entity;
};

struct Edge {
    int id = -1;
    int space = -1;
    int source = -1;
    int target = -1;
    std::string relation;
    EdgeCategory category = EdgeCategory::entity_oriented;
};

// One instantiated user world. Immutable after construction; all derived
// lookups are built once in finalize() and only read afterwards.
struct SpecificGraph {
    std::vector<NodeSpace> spaces;      // copies of the meta spaces used
    std::vector<EdgeSpace> edge_spaces; // copies of the meta edge spaces
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;

    std::vector<std::vector<int>> adj_out;  // node id -> edge ids (as source)
    std::vector<std::vector<int>> adj_in;   // node id -> edge ids (as target)

    void finalize();
    void check_invariants() const;

    const Node& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
    const Edge& edge(int id) const { return edges.at(static_cast<std::size_t>(id)); }

    // Nodes in the same space sharing a value (includes the node itself).
    const std::vector<int>& value_peers(int node_id) const;

    // Distinct entity nodes holding (relation, value) via an attribute edge.
    int attribute_holder_count(const std::string& relation, const std::string& value) const;

    nlohmann::json to_json() const;
    static SpecificGraph from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static SpecificGraph load_file(const std::string& path);

private:
    std::unordered_map<std::string, std::vector<int>> peers_;  // "space|value" -> nodes
    std::unordered_map<std::string, std::set<int>> holders_;   // "relation|value" -> entities
};

// One traversal step. Disambiguation steps are always forward attribute edges
// hanging off an entity already on the path; they narrow the entity down
// instead of advancing the walk.
struct PathStep {
    int edge_id = -1;
    bool forward = true;
    bool disambiguation = false;
};

struct ReasoningPath {
    std::vector<PathStep> steps;
    int anchor_node = -1;
    int answer_node = -1;

    int hop_count() const { return static_cast<int>(steps.size()); }
};

struct PathPolicy {
    int max_attempts = 100;
    int max_disambiguation_per_hop = 3;
    // Personalized (entity-/attribute-oriented) edges must be a strict
    // majority of the path.
    double min_personalized_ratio = 0.5;
};

using AnswerSet = std::set<std::string>;

// Draws one specific graph from the meta graph. Deterministic in
// (meta, seed, scale). Entity pools are sampled without replacement,
// attribute pools with replacement so shared values can occur.
SpecificGraph instantiate_graph(const MetaGraph& meta, std::uint64_t seed,
                                const GraphScaleConfig& scale);

// True iff the edge is attribute-oriented and at least two entities hold the
// same (relation, value) pair anywhere in the graph.
bool is_ambiguous(const SpecificGraph& graph, const Edge& edge);

// Samples a hops-long path whose evidence identifies a unique answer,
// appending disambiguating attribute edges where a reverse attribute hop
// would otherwise match several entities. Disambiguation edges count toward
// hops. Throws PathExhausted / HopsTooSmall.
ReasoningPath sample_path(const SpecificGraph& graph, int hops, std::uint64_t seed,
                          const PathPolicy& policy = {});

// Ground-truth oracle: matches the path's relation sequence from the anchor
// value against every edge in the graph and returns the distinct terminal
// values. A well-posed task yields a singleton.
AnswerSet resolve_answer(const SpecificGraph& graph, const ReasoningPath& path);

std::uint64_t scale_config_hash(const MetaGraph& meta, const GraphScaleConfig& scale);

}  // namespace mpr
