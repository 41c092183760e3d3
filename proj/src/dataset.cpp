#include "mpr/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/provider.hpp"
#include "mpr/text.hpp"

namespace mpr {

namespace fs = std::filesystem;
using nlohmann::json;

json Statement::to_json() const {
    return {{"id", id},         {"text", text},
            {"edge", edge_ref}, {"user_id", user_id},
            {"source", source_value}, {"relation", relation},
            {"target", target_value}};
}

Statement Statement::from_json(const json& j) {
    Statement s;
    s.id = j.at("id").get<std::string>();
    s.text = j.at("text").get<std::string>();
    s.edge_ref = j.at("edge").get<int>();
    s.user_id = j.at("user_id").get<std::string>();
    s.source_value = j.value("source", std::string());
    s.relation = j.value("relation", std::string());
    s.target_value = j.value("target", std::string());
    return s;
}

ReasoningPath MprTask::reasoning_path() const {
    ReasoningPath path;
    path.anchor_node = anchor_node;
    path.answer_node = answer_node;
    path.steps = steps;
    return path;
}

json MprTask::to_json() const {
    json jsteps = json::array();
    for (const PathStep& st : steps) {
        jsteps.push_back({{"edge", st.edge_id}, {"forward", st.forward}, {"disambiguation", st.disambiguation}});
    }
    return {{"task_id", task_id}, {"hops", hops},     {"question", question},
            {"answer", answer},   {"path", path},     {"steps", jsteps},
            {"references", references}, {"user_id", user_id},
            {"anchor_node", anchor_node}, {"answer_node", answer_node}};
}

MprTask MprTask::from_json(const json& j) {
    MprTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.hops = j.at("hops").get<int>();
    t.question = j.at("question").get<std::string>();
    t.answer = j.at("answer").get<std::string>();
    t.path = j.at("path").get<std::vector<int>>();
    for (const auto& js : j.at("steps")) {
        PathStep st;
        st.edge_id = js.at("edge").get<int>();
        st.forward = js.at("forward").get<bool>();
        st.disambiguation = js.at("disambiguation").get<bool>();
        t.steps.push_back(st);
    }
    t.references = j.at("references").get<std::vector<std::string>>();
    t.user_id = j.at("user_id").get<std::string>();
    t.anchor_node = j.at("anchor_node").get<int>();
    t.answer_node = j.at("answer_node").get<int>();
    return t;
}

json BundleConfig::to_json() const {
    return {{"users", users},   {"hop_min", hop_min}, {"hop_max", hop_max},
            {"per_hop", per_hop}, {"seed", seed},     {"scale", scale.to_json()},
            {"max_task_attempts", max_task_attempts}};
}

json BundleManifest::to_json() const {
    json hops = json::object();
    for (const auto& [hop, count] : tasks_per_hop) hops[std::to_string(hop)] = count;
    return {{"version", version},
            {"seed", seed},
            {"config_hash", config_hash},
            {"user_ids", user_ids},
            {"hop_min", hop_min},
            {"hop_max", hop_max},
            {"per_hop", per_hop},
            {"tasks_per_hop", hops},
            {"statement_count", statement_count},
            {"reference_count", reference_count},
            {"rejected_paths", rejected_paths},
            {"textgen_mode", textgen_mode}};
}

BundleManifest BundleManifest::from_json(const json& j) {
    BundleManifest m;
    m.version = j.at("version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.user_ids = j.at("user_ids").get<std::vector<std::string>>();
    m.hop_min = j.at("hop_min").get<int>();
    m.hop_max = j.at("hop_max").get<int>();
    m.per_hop = j.at("per_hop").get<int>();
    for (auto it = j.at("tasks_per_hop").begin(); it != j.at("tasks_per_hop").end(); ++it) {
        m.tasks_per_hop.emplace_back(std::stoi(it.key()), it.value().get<int>());
    }
    std::sort(m.tasks_per_hop.begin(), m.tasks_per_hop.end());
    m.statement_count = j.at("statement_count").get<int>();
    m.reference_count = j.at("reference_count").get<int>();
    m.rejected_paths = j.at("rejected_paths").get<int>();
    m.textgen_mode = j.at("textgen_mode").get<std::string>();
    return m;
}

namespace {

std::string llm_complete(const TextGen& gen, const std::string& prompt, const std::string& tag) {
    if (gen.provider == nullptr) fail("ConfigInvalid", "llm text generation requires a provider");
    CompletionRequest req;
    req.model = gen.model;
    req.messages = {{"user", prompt}};
    req.step_tag = tag;
    return gen.provider->complete(req).text;
}

}  // namespace

Statement render_statement(const Edge& edge, const SpecificGraph& graph, const TextGen& gen) {
    if (edge.category == EdgeCategory::value_oriented) {
        fail("ValueOrientedEdge", "value-oriented edges carry no statement");
    }
    Statement s;
    s.edge_ref = edge.id;
    s.source_value = graph.node(edge.source).value;
    s.relation = edge.relation;
    s.target_value = graph.node(edge.target).value;
    if (gen.mode == TextGen::Mode::template_text) {
        s.text = s.source_value + " " + s.relation + " " + s.target_value + ".";
        return s;
    }
    std::string prompt =
        "Rewrite the following fact as one short natural sentence.\n"
        "Fact: " + s.source_value + " | " + s.relation + " | " + s.target_value + "\n"
        "Keep both \"" + s.source_value + "\" and \"" + s.target_value +
        "\" verbatim in the sentence. Reply with the sentence only.";
    for (int attempt = 0; attempt < gen.max_retries; ++attempt) {
        std::string text = trim(llm_complete(gen, prompt, "statement"));
        if (!text.empty() && contains_canonical(text, s.source_value) &&
            contains_canonical(text, s.target_value)) {
            s.text = text;
            return s;
        }
    }
    fail("EndpointMissing", "generated statement kept dropping an endpoint value");
}

namespace {

std::string template_question(const ReasoningPath& path, const SpecificGraph& graph) {
    // Nested noun phrase built inside-out: the anchor value is the innermost
    // term and each later hop wraps the phrase, so the final relation ends up
    // outermost.
    std::string desc = graph.node(path.anchor_node).value;
    for (const PathStep& st : path.steps) {
        const Edge& e = graph.edge(st.edge_id);
        if (st.disambiguation) {
            desc += " and " + e.relation + " " + graph.node(e.target).value;
            continue;
        }
        int arrival = st.forward ? e.target : e.source;
        const NodeSpace& space = graph.spaces.at(static_cast<std::size_t>(graph.node(arrival).space));
        if (st.forward) {
            desc = "the " + space.label + " that " + desc + " " + e.relation;
        } else {
            desc = "the " + space.label + " that " + e.relation + " " + desc;
        }
    }
    return "What is " + desc + "?";
}

}  // namespace

void check_question_leakage(const std::string& question, const SpecificGraph& graph,
                            const ReasoningPath& path) {
    std::string canon = canonical_text(question);
    std::string anchor = canonical_text(graph.node(path.anchor_node).value);
    if (canon.find(anchor) == std::string::npos) {
        fail("LeakageDetected", "question does not mention the anchor value");
    }
    for (const PathStep& st : path.steps) {
        if (st.disambiguation) continue;
        const Edge& e = graph.edge(st.edge_id);
        int arrival = st.forward ? e.target : e.source;
        std::string value = canonical_text(graph.node(arrival).value);
        if (canon.find(value) != std::string::npos) {
            fail("LeakageDetected", "question leaks path value '" + graph.node(arrival).value + "'");
        }
    }
}

std::string derive_question(const ReasoningPath& path, const std::vector<Statement>& refs,
                            const SpecificGraph& graph, const TextGen& gen) {
    if (gen.mode == TextGen::Mode::template_text) {
        std::string q = template_question(path, graph);
        check_question_leakage(q, graph, path);
        return q;
    }
    std::string answer = graph.node(path.answer_node).value;
    std::string facts;
    for (const Statement& s : refs) facts += "- " + s.text + "\n";
    std::string prompt =
        "Combine the following facts into a single question whose answer is \"" + answer +
        "\".\n" + facts +
        "The question must mention \"" + graph.node(path.anchor_node).value +
        "\" and must not mention the answer or any intermediate value. "
        "Reply with the question only.";
    for (int attempt = 0; attempt < gen.max_retries; ++attempt) {
        std::string q = trim(llm_complete(gen, prompt, "question"));
        if (q.empty()) continue;
        try {
            check_question_leakage(q, graph, path);
            return q;
        } catch (const Error&) {
            continue;  // regenerate
        }
    }
    fail("GenerationFailed", "question generation kept leaking path values");
}

namespace {

bool direct_edge_between(const SpecificGraph& graph, int anchor, int answer) {
    const std::string& answer_value = graph.node(answer).value;
    int answer_space = graph.node(answer).space;
    auto touches_answer = [&](int other) {
        const Node& n = graph.node(other);
        return other == answer || (n.space == answer_space && n.value == answer_value);
    };
    for (int a : graph.value_peers(anchor)) {
        for (int eid : graph.adj_out[static_cast<std::size_t>(a)]) {
            if (touches_answer(graph.edge(eid).target)) return true;
        }
        for (int eid : graph.adj_in[static_cast<std::size_t>(a)]) {
            if (touches_answer(graph.edge(eid).source)) return true;
        }
    }
    return false;
}

std::string path_signature(const ReasoningPath& path) {
    std::string sig;
    for (const PathStep& st : path.steps) {
        sig += std::to_string(st.edge_id);
        sig += st.forward ? 'f' : 'r';
        sig += st.disambiguation ? 'd' : 'c';
        sig += ';';
    }
    return sig;
}

}  // namespace

DatasetBundle build_bundle(const MetaGraph& meta, const BundleConfig& config, const TextGen& gen) {
    if (config.hop_min < 2 || config.hop_max < config.hop_min || config.users < 1 ||
        config.per_hop < 1) {
        fail("ConfigInvalid", "bundle config must have users >= 1, per_hop >= 1, 2 <= hop_min <= hop_max");
    }
    DatasetBundle bundle;
    bundle.manifest.seed = config.seed;
    char hash_hex[20];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(scale_config_hash(meta, config.scale)));
    bundle.manifest.config_hash = hash_hex;
    bundle.manifest.hop_min = config.hop_min;
    bundle.manifest.hop_max = config.hop_max;
    bundle.manifest.per_hop = config.per_hop;
    bundle.manifest.textgen_mode = gen.mode == TextGen::Mode::template_text ? "template" : "llm";

    Rng root(config.seed);
    std::map<int, int> hop_counts;
    int rejected = 0;

    for (int u = 0; u < config.users; ++u) {
        SubDataset sub;
        char uid[16];
        std::snprintf(uid, sizeof(uid), "user_%02d", u);
        sub.user_id = uid;
        sub.graph = instantiate_graph(meta, root.fork("graph", static_cast<std::uint64_t>(u)).next(),
                                      config.scale);

        std::vector<int> statement_of_edge(sub.graph.edges.size(), -1);
        for (const Edge& e : sub.graph.edges) {
            if (e.category == EdgeCategory::value_oriented) continue;
            Statement s = render_statement(e, sub.graph, gen);
            char sid[32];
            std::snprintf(sid, sizeof(sid), "%s_s%05d", uid, e.id);
            s.id = sid;
            s.user_id = sub.user_id;
            statement_of_edge[static_cast<std::size_t>(e.id)] = static_cast<int>(sub.statements.size());
            sub.statements.push_back(std::move(s));
        }

        std::set<std::string> seen_paths;
        for (int hop = config.hop_min; hop <= config.hop_max; ++hop) {
            for (int slot = 0; slot < config.per_hop; ++slot) {
                Rng slot_rng = root.fork("task", static_cast<std::uint64_t>(u))
                                   .fork("hop", static_cast<std::uint64_t>(hop))
                                   .fork("slot", static_cast<std::uint64_t>(slot));
                bool placed = false;
                for (int attempt = 0; attempt < config.max_task_attempts && !placed; ++attempt) {
                    ReasoningPath path;
                    try {
                        path = sample_path(sub.graph, hop,
                                           slot_rng.fork("try", static_cast<std::uint64_t>(attempt)).next(),
                                           config.policy);
                    } catch (const Error& e) {
                        if (e.code() == "PathExhausted") {
                            ++rejected;
                            continue;
                        }
                        throw;
                    }
                    std::string sig = path_signature(path);
                    if (seen_paths.count(sig)) {
                        ++rejected;
                        continue;
                    }
                    AnswerSet answers = resolve_answer(sub.graph, path);
                    std::string gold = sub.graph.node(path.answer_node).value;
                    if (answers.size() != 1 || *answers.begin() != gold) {
                        ++rejected;
                        continue;
                    }
                    if (direct_edge_between(sub.graph, path.anchor_node, path.answer_node)) {
                        ++rejected;
                        continue;
                    }
                    std::vector<Statement> refs;
                    std::vector<std::string> ref_ids;
                    bool refs_ok = true;
                    for (const PathStep& st : path.steps) {
                        const Edge& e = sub.graph.edge(st.edge_id);
                        if (e.category == EdgeCategory::value_oriented) continue;
                        int idx = statement_of_edge[static_cast<std::size_t>(st.edge_id)];
                        if (idx < 0) {
                            refs_ok = false;
                            break;
                        }
                        refs.push_back(sub.statements[static_cast<std::size_t>(idx)]);
                        ref_ids.push_back(refs.back().id);
                    }
                    if (!refs_ok) {
                        ++rejected;
                        continue;
                    }
                    std::string question;
                    try {
                        question = derive_question(path, refs, sub.graph, gen);
                    } catch (const Error&) {
                        ++rejected;
                        continue;
                    }

                    MprTask task;
                    char tid[48];
                    std::snprintf(tid, sizeof(tid), "%s_h%02d_t%03d", uid, hop, slot);
                    task.task_id = tid;
                    task.hops = hop;
                    task.question = std::move(question);
                    task.answer = gold;
                    for (const PathStep& st : path.steps) task.path.push_back(st.edge_id);
                    task.steps = path.steps;
                    task.references = std::move(ref_ids);
                    task.user_id = sub.user_id;
                    task.anchor_node = path.anchor_node;
                    task.answer_node = path.answer_node;
                    bundle.manifest.reference_count += static_cast<int>(task.references.size());
                    sub.tasks.push_back(std::move(task));
                    seen_paths.insert(sig);
                    ++hop_counts[hop];
                    placed = true;
                }
                if (!placed) {
                    fail("QuotaUnmeetable", "could not fill " + std::to_string(hop) + "-hop slot " +
                                                std::to_string(slot) + " for " + sub.user_id);
                }
            }
        }
        bundle.manifest.statement_count += static_cast<int>(sub.statements.size());
        bundle.manifest.user_ids.push_back(sub.user_id);
        bundle.users.push_back(std::move(sub));
    }
    for (const auto& [hop, count] : hop_counts) {
        bundle.manifest.tasks_per_hop.emplace_back(hop, count);
    }
    bundle.manifest.rejected_paths = rejected;
    return bundle;
}

void DatasetBundle::save(const std::string& dir) const {
    fs::create_directories(fs::path(dir) / "graphs");
    {
        std::ofstream out(fs::path(dir) / "manifest.json");
        if (!out) fail("IoFailure", "cannot write manifest under '" + dir + "'");
        out << manifest.to_json().dump(2) << "\n";
    }
    std::ofstream stmts(fs::path(dir) / "statements.jsonl");
    std::ofstream tasks(fs::path(dir) / "tasks.jsonl");
    if (!stmts || !tasks) fail("IoFailure", "cannot write bundle files under '" + dir + "'");
    for (const SubDataset& sub : users) {
        for (const Statement& s : sub.statements) stmts << s.to_json().dump() << "\n";
        for (const MprTask& t : sub.tasks) tasks << t.to_json().dump() << "\n";
        sub.graph.save_file((fs::path(dir) / "graphs" / (sub.user_id + ".json")).string());
    }
}

DatasetBundle DatasetBundle::load(const std::string& dir) {
    DatasetBundle bundle;
    {
        std::ifstream in(fs::path(dir) / "manifest.json");
        if (!in) fail("IoFailure", "cannot open manifest under '" + dir + "'");
        json j;
        in >> j;
        bundle.manifest = BundleManifest::from_json(j);
    }
    std::map<std::string, std::size_t> index;
    for (const std::string& uid : bundle.manifest.user_ids) {
        SubDataset sub;
        sub.user_id = uid;
        sub.graph = SpecificGraph::load_file((fs::path(dir) / "graphs" / (uid + ".json")).string());
        index[uid] = bundle.users.size();
        bundle.users.push_back(std::move(sub));
    }
    std::ifstream stmts(fs::path(dir) / "statements.jsonl");
    if (!stmts) fail("IoFailure", "cannot open statements.jsonl under '" + dir + "'");
    for (std::string line; std::getline(stmts, line);) {
        if (trim(line).empty()) continue;
        Statement s = Statement::from_json(json::parse(line));
        auto it = index.find(s.user_id);
        if (it == index.end()) fail("ConfigInvalid", "statement for unknown user '" + s.user_id + "'");
        bundle.users[it->second].statements.push_back(std::move(s));
    }
    std::ifstream tasks(fs::path(dir) / "tasks.jsonl");
    if (!tasks) fail("IoFailure", "cannot open tasks.jsonl under '" + dir + "'");
    for (std::string line; std::getline(tasks, line);) {
        if (trim(line).empty()) continue;
        MprTask t = MprTask::from_json(json::parse(line));
        auto it = index.find(t.user_id);
        if (it == index.end()) fail("ConfigInvalid", "task for unknown user '" + t.user_id + "'");
        bundle.users[it->second].tasks.push_back(std::move(t));
    }
    return bundle;
}

BundleValidation validate_bundle(const DatasetBundle& bundle) {
    BundleValidation v;
    std::map<int, int> hop_counts;
    for (const SubDataset& sub : bundle.users) {
        std::set<std::string> statement_ids;
        for (const Statement& s : sub.statements) {
            statement_ids.insert(s.id);
            if (!contains_canonical(s.text, s.source_value) ||
                !contains_canonical(s.text, s.target_value)) {
                ++v.statement_failures;
            }
        }
        for (const MprTask& t : sub.tasks) {
            ++v.tasks_checked;
            ++hop_counts[t.hops];
            ReasoningPath path = t.reasoning_path();
            AnswerSet answers = resolve_answer(sub.graph, path);
            if (answers.size() != 1 || *answers.begin() != t.answer) ++v.singleton_failures;
            for (const std::string& ref : t.references) {
                if (!statement_ids.count(ref)) {
                    ++v.reference_failures;
                    break;
                }
            }
            try {
                check_question_leakage(t.question, sub.graph, path);
            } catch (const Error&) {
                ++v.leakage_failures;
            }
            if (direct_edge_between(sub.graph, t.anchor_node, t.answer_node)) {
                ++v.direct_edge_failures;
            }
        }
    }
    for (const auto& [hop, count] : bundle.manifest.tasks_per_hop) {
        auto it = hop_counts.find(hop);
        if (it == hop_counts.end() || it->second != count) ++v.manifest_failures;
    }
    return v;
}

}  // namespace mpr
