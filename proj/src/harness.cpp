#include "mpr/harness.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/text.hpp"

namespace mpr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string normalize_once(const std::string& text) {
    std::string s = to_lower(text);

    // thousands separators: a comma flanked by digits disappears
    std::string no_commas;
    no_commas.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ',' && i > 0 && i + 1 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            continue;
        }
        no_commas.push_back(s[i]);
    }

    // "5(usd)" -> "5 (usd)"
    std::string spaced;
    spaced.reserve(no_commas.size() + 4);
    for (std::size_t i = 0; i < no_commas.size(); ++i) {
        if (no_commas[i] == '(' && i > 0 &&
            std::isdigit(static_cast<unsigned char>(no_commas[i - 1]))) {
            spaced.push_back(' ');
        }
        spaced.push_back(no_commas[i]);
    }

    s = collapse_whitespace(spaced);
    while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) ||
                          std::string(".,;:!?").find(s.back()) != std::string::npos)) {
        s.pop_back();
    }
    s = trim(s);

    // "( usd )" -> "(usd)"
    for (std::size_t pos = 0; (pos = s.find("( ", pos)) != std::string::npos;) s.erase(pos + 1, 1);
    for (std::size_t pos = 0; (pos = s.find(" )", pos)) != std::string::npos;) s.erase(pos, 1);

    // standalone articles
    std::vector<std::string> kept;
    std::string token;
    std::istringstream stream(s);
    while (stream >> token) {
        if (token == "a" || token == "an" || token == "the") continue;
        kept.push_back(token);
    }
    return join(kept, " ");
}

}  // namespace

std::string normalize_answer(const std::string& text) {
    // Rules interact (dropping an article can expose trailing punctuation),
    // so run the pass to a fixpoint; it converges because after the first
    // pass every change removes characters.
    std::string current = normalize_once(text);
    for (;;) {
        std::string next = normalize_once(current);
        if (next == current) return current;
        current = std::move(next);
    }
}

int exact_match(const std::string& prediction, const std::string& gold) {
    return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

json RunRecord::to_json() const {
    return {{"task_id", task_id},   {"prediction", prediction}, {"gold", gold},
            {"em", em},             {"hops", hops},             {"latency_ms", latency_ms},
            {"tokens_in", tokens_in}, {"tokens_out", tokens_out}, {"structure", structure},
            {"backend", backend},   {"user_id", user_id},       {"error", error},
            {"trace_ref", trace_ref}};
}

RunRecord RunRecord::from_json(const json& j) {
    RunRecord r;
    r.task_id = j.at("task_id").get<std::string>();
    r.prediction = j.at("prediction").get<std::string>();
    r.gold = j.at("gold").get<std::string>();
    r.em = j.at("em").get<int>();
    r.hops = j.at("hops").get<int>();
    r.latency_ms = j.at("latency_ms").get<double>();
    r.tokens_in = j.at("tokens_in").get<long>();
    r.tokens_out = j.at("tokens_out").get<long>();
    r.structure = j.at("structure").get<std::string>();
    r.backend = j.at("backend").get<std::string>();
    r.user_id = j.at("user_id").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.trace_ref = j.at("trace_ref").get<std::string>();
    return r;
}

json EvalReport::to_json() const {
    json by_hop = json::object();
    for (const auto& [hop, acc] : acc_by_hop) by_hop[std::to_string(hop)] = acc;
    json by_user = json::object();
    for (const auto& [user, acc] : acc_by_user) by_user[user] = acc;
    json lat = json::object();
    for (const auto& [hop, ms] : latency_by_hop) lat[std::to_string(hop)] = ms;
    json counts = json::object();
    for (const auto& [hop, count] : count_by_hop) counts[std::to_string(hop)] = count;
    return {{"acc_overall", acc_overall},
            {"acc_by_hop", by_hop},
            {"acc_by_user", by_user},
            {"latency_by_hop", lat},
            {"count_by_hop", counts},
            {"task_count", task_count},
            {"normalization", kNormalizationVersion},
            {"config", config}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    r.acc_overall = j.at("acc_overall").get<double>();
    for (auto it = j.at("acc_by_hop").begin(); it != j.at("acc_by_hop").end(); ++it) {
        r.acc_by_hop[std::stoi(it.key())] = it.value().get<double>();
    }
    for (auto it = j.at("acc_by_user").begin(); it != j.at("acc_by_user").end(); ++it) {
        r.acc_by_user[it.key()] = it.value().get<double>();
    }
    for (auto it = j.at("latency_by_hop").begin(); it != j.at("latency_by_hop").end(); ++it) {
        r.latency_by_hop[std::stoi(it.key())] = it.value().get<double>();
    }
    for (auto it = j.at("count_by_hop").begin(); it != j.at("count_by_hop").end(); ++it) {
        r.count_by_hop[std::stoi(it.key())] = it.value().get<int>();
    }
    r.task_count = j.at("task_count").get<int>();
    r.config = j.at("config");
    return r;
}

json AgentConfig::snapshot() const {
    return {{"structure", to_string(structure)},
            {"backend", backend},
            {"k", k},
            {"max_steps", max_steps},
            {"branches", branches},
            {"max_subquestions", max_subquestions},
            {"model", model},
            {"hybrid", clusters != nullptr && adapters != nullptr},
            {"normalization", kNormalizationVersion}};
}

EvalReport aggregate_records(const std::vector<RunRecord>& records, json config) {
    EvalReport report;
    report.config = std::move(config);
    report.task_count = static_cast<int>(records.size());

    std::map<std::string, std::pair<int, int>> user_totals;            // user -> (em sum, n)
    std::map<int, std::map<std::string, std::pair<int, int>>> hop_user;  // hop -> user -> (em, n)
    std::map<int, std::pair<double, int>> hop_latency;

    for (const RunRecord& r : records) {
        auto& u = user_totals[r.user_id];
        u.first += r.em;
        u.second += 1;
        auto& h = hop_user[r.hops][r.user_id];
        h.first += r.em;
        h.second += 1;
        auto& lat = hop_latency[r.hops];
        lat.first += r.latency_ms;
        lat.second += 1;
        report.count_by_hop[r.hops] += 1;
    }

    double acc_sum = 0.0;
    for (const auto& [user, em_n] : user_totals) {
        double acc = em_n.second > 0 ? static_cast<double>(em_n.first) / em_n.second : 0.0;
        report.acc_by_user[user] = acc;
        acc_sum += acc;
    }
    report.acc_overall = user_totals.empty() ? 0.0 : acc_sum / static_cast<double>(user_totals.size());

    for (const auto& [hop, users] : hop_user) {
        double sum = 0.0;
        for (const auto& [user, em_n] : users) {
            sum += em_n.second > 0 ? static_cast<double>(em_n.first) / em_n.second : 0.0;
        }
        report.acc_by_hop[hop] = users.empty() ? 0.0 : sum / static_cast<double>(users.size());
    }
    for (const auto& [hop, lat] : hop_latency) {
        report.latency_by_hop[hop] = lat.second > 0 ? lat.first / lat.second : 0.0;
    }
    return report;
}

namespace {

std::unique_ptr<MemoryBackend> build_backend_for(const AgentConfig& config,
                                                 const std::string& user_id,
                                                 const std::vector<Statement>& statements) {
    if (config.backend == "oracle" || config.backend == "ignoramus") return nullptr;
    if (!config.index_dir.empty()) {
        auto backend = load_backend((fs::path(config.index_dir) / user_id).string(), statements,
                                    config.embedder);
        if (backend->kind() != config.backend) {
            fail("ConfigInvalid", "index for " + user_id + " is '" + backend->kind() +
                                      "' but the run asks for '" + config.backend + "'");
        }
        return backend;
    }
    if (config.backend == "sparse") return build_sparse(statements);
    if (config.backend == "dense" || config.backend == "tree" || config.backend == "graph") {
        if (config.embedder == nullptr) {
            fail("ConfigInvalid", "backend '" + config.backend + "' requires an embedder");
        }
        if (config.backend == "dense") return build_dense(statements, *config.embedder);
        if (config.backend == "tree") {
            Summarizer summarizer = config.summarizer ? config.summarizer : concat_summarizer();
            return build_tree(statements, summarizer, *config.embedder);
        }
        Extractor extractor = config.extractor ? config.extractor : metadata_extractor();
        return build_graph(statements, extractor, *config.embedder);
    }
    fail("ConfigInvalid", "unknown memory backend '" + config.backend + "'");
}

std::set<std::string> completed_task_ids(const std::string& out_dir,
                                         std::vector<RunRecord>& existing) {
    std::set<std::string> done;
    if (out_dir.empty()) return done;
    fs::path path = fs::path(out_dir) / "run.jsonl";
    std::ifstream in(path);
    if (!in) return done;
    for (std::string line; std::getline(in, line);) {
        if (trim(line).empty()) continue;
        existing.push_back(RunRecord::from_json(json::parse(line)));
        done.insert(existing.back().task_id);
    }
    return done;
}

}  // namespace

EvalOutcome evaluate(const DatasetBundle& bundle, const AgentConfig& config) {
    if (config.provider == nullptr) fail("ConfigInvalid", "evaluate requires a provider");

    std::vector<RunRecord> existing;
    std::set<std::string> done = completed_task_ids(config.out_dir, existing);

    ReasoningConfig rc;
    rc.structure = config.structure;
    rc.max_steps = config.max_steps;
    rc.branches = config.branches;
    rc.max_subquestions = config.max_subquestions;
    rc.model = config.model;

    AdapterRouter router;
    if (config.clusters != nullptr && config.adapters != nullptr) {
        const ClusterAssignment* clusters = config.clusters;
        const AdapterRegistry* adapters = config.adapters;
        router = [clusters, adapters](const std::vector<RetrievedStatement>& retrieved) {
            std::vector<ScoredStatement> scored;
            for (std::size_t i = 0; i < retrieved.size(); ++i) {
                scored.push_back({retrieved[i].id, retrieved[i].score, static_cast<int>(i) + 1});
            }
            return select_adapter(scored, *clusters, *adapters);
        };
    }

    struct Job {
        const SubDataset* user;
        const MprTask* task;
        const MemoryBackend* backend;
    };
    std::vector<Job> jobs;
    std::vector<std::unique_ptr<MemoryBackend>> backends;
    for (const SubDataset& user : bundle.users) {
        std::unique_ptr<MemoryBackend> backend =
            build_backend_for(config, user.user_id, user.statements);
        const MemoryBackend* raw = backend.get();
        backends.push_back(std::move(backend));
        for (const MprTask& task : user.tasks) {
            if (done.count(task.task_id)) continue;
            jobs.push_back({&user, &task, raw});
        }
    }

    std::vector<RunRecord> fresh(jobs.size());
    std::vector<ReasoningTrace> traces(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];
            RunRecord rec;
            rec.task_id = job.task->task_id;
            rec.gold = job.task->answer;
            rec.hops = job.task->hops;
            rec.structure = to_string(config.structure);
            rec.backend = config.backend;
            rec.user_id = job.user->user_id;
            rec.trace_ref = job.task->task_id;
            auto start = std::chrono::steady_clock::now();
            try {
                std::unique_ptr<MemoryView> view;
                if (job.backend != nullptr) {
                    view = backend_view(*job.backend, config.k);
                } else if (config.backend == "oracle") {
                    view = oracle_view(*job.task, job.user->statements);
                } else {
                    view = ignoramus_view();
                }
                RunResult result = run_structure(job.task->question, *view, *config.provider, rc,
                                                 router, job.task->task_id);
                rec.prediction = result.answer;
                rec.em = exact_match(result.answer, job.task->answer);
                rec.tokens_in = result.trace.total_tokens_in();
                rec.tokens_out = result.trace.total_tokens_out();
                traces[i] = std::move(result.trace);
            } catch (const Error& e) {
                rec.em = 0;
                rec.error = e.code();
            } catch (const std::exception&) {
                rec.em = 0;
                rec.error = "ProviderFailure";
            }
            rec.latency_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
            fresh[i] = std::move(rec);
        }
    };
    int jobs_n = std::max(1, config.jobs);
    if (jobs_n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs_n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    if (!config.out_dir.empty()) {
        fs::create_directories(config.out_dir);
        {
            std::ofstream out(fs::path(config.out_dir) / "config.json");
            out << config.snapshot().dump(2) << "\n";
        }
        std::ofstream run_out(fs::path(config.out_dir) / "run.jsonl", std::ios::app);
        std::ofstream trace_out(fs::path(config.out_dir) / "traces.jsonl", std::ios::app);
        if (!run_out || !trace_out) fail("IoFailure", "cannot append run records under '" + config.out_dir + "'");
        for (std::size_t i = 0; i < fresh.size(); ++i) {
            run_out << fresh[i].to_json().dump() << "\n";
            trace_out << traces[i].to_json().dump() << "\n";
        }
    }

    EvalOutcome outcome;
    outcome.records = std::move(existing);
    for (auto& rec : fresh) outcome.records.push_back(std::move(rec));
    outcome.traces = std::move(traces);
    outcome.report = aggregate_records(outcome.records, config.snapshot());
    return outcome;
}

RunData load_run_dir(const std::string& dir) {
    RunData data;
    std::ifstream cfg(fs::path(dir) / "config.json");
    if (!cfg) fail("IoFailure", "cannot open config.json under '" + dir + "'");
    cfg >> data.config;
    std::ifstream in(fs::path(dir) / "run.jsonl");
    if (!in) fail("IoFailure", "cannot open run.jsonl under '" + dir + "'");
    for (std::string line; std::getline(in, line);) {
        if (trim(line).empty()) continue;
        data.records.push_back(RunRecord::from_json(json::parse(line)));
    }
    return data;
}

namespace {

struct GroupKey {
    std::string structure;
    std::string backend;
    bool operator<(const GroupKey& o) const {
        return std::tie(structure, backend) < std::tie(o.structure, o.backend);
    }
};

// two-level accuracy over an arbitrary subset of records
double subset_acc(const std::vector<const RunRecord*>& records) {
    std::map<std::string, std::pair<int, int>> users;
    for (const RunRecord* r : records) {
        auto& u = users[r->user_id];
        u.first += r->em;
        u.second += 1;
    }
    if (users.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [user, em_n] : users) {
        sum += static_cast<double>(em_n.first) / em_n.second;
    }
    return sum / static_cast<double>(users.size());
}

}  // namespace

void emit_report(const std::vector<RunData>& runs, const std::string& format,
                 const std::string& out_path) {
    std::map<GroupKey, std::map<int, std::vector<const RunRecord*>>> groups;
    std::set<int> hops;
    for (const RunData& run : runs) {
        for (const RunRecord& r : run.records) {
            groups[{r.structure, r.backend}][r.hops].push_back(&r);
            hops.insert(r.hops);
        }
    }

    std::ofstream out(out_path);
    if (!out) fail("IoFailure", "cannot write report file '" + out_path + "'");

    if (format == "json") {
        json jruns = json::array();
        for (const RunData& run : runs) {
            jruns.push_back(aggregate_records(run.records, run.config).to_json());
        }
        out << json{{"runs", jruns}}.dump(2) << "\n";
        return;
    }
    if (format == "csv") {
        out << "structure,backend,hop,acc,tasks,mean_latency_ms\n";
        for (const auto& [key, by_hop] : groups) {
            for (const auto& [hop, records] : by_hop) {
                double acc = subset_acc(records);
                double lat = 0.0;
                for (const RunRecord* r : records) lat += r->latency_ms;
                lat = records.empty() ? 0.0 : lat / static_cast<double>(records.size());
                char line[256];
                std::snprintf(line, sizeof(line), "%s,%s,%d,%.6f,%zu,%.3f\n", key.structure.c_str(),
                              key.backend.c_str(), hop, acc, records.size(), lat);
                out << line;
            }
        }
        return;
    }
    if (format == "md" || format == "markdown") {
        std::set<std::string> structures;
        std::set<std::string> backends;
        for (const auto& [key, by_hop] : groups) {
            structures.insert(key.structure);
            backends.insert(key.backend);
        }
        for (const std::string& structure : structures) {
            out << "## " << structure << "\n\n";
            out << "| Hops |";
            for (const std::string& backend : backends) out << " " << backend << " |";
            out << "\n|---|";
            for (std::size_t i = 0; i < backends.size(); ++i) out << "---|";
            out << "\n";
            for (int hop : hops) {
                out << "| " << hop << " |";
                for (const std::string& backend : backends) {
                    auto git = groups.find({structure, backend});
                    if (git == groups.end() || !git->second.count(hop)) {
                        out << " - |";
                        continue;
                    }
                    char cell[32];
                    std::snprintf(cell, sizeof(cell), " %.3f |", subset_acc(git->second.at(hop)));
                    out << cell;
                }
                out << "\n";
            }
            out << "\n";
        }
        return;
    }
    fail("ConfigInvalid", "unknown report format '" + format + "'");
}

}  // namespace mpr
