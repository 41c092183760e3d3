#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mpr/dataset.hpp"
#include "mpr/errors.hpp"
#include "mpr/harness.hpp"
#include "mpr/implicit.hpp"
#include "mpr/memory.hpp"
#include "mpr/provider.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void parse_hop_range(const std::string& spec, int& lo, int& hi) {
    std::size_t sep = spec.find("..");
    std::size_t len = 2;
    if (sep == std::string::npos) {
        sep = spec.find('-');
        len = 1;
    }
    if (sep == std::string::npos) {
        lo = hi = std::stoi(spec);
        return;
    }
    lo = std::stoi(spec.substr(0, sep));
    hi = std::stoi(spec.substr(sep + len));
}

mpr::GraphScaleConfig load_scale(const std::string& meta_path, const std::string& scale_path) {
    if (!scale_path.empty()) {
        std::ifstream in(scale_path);
        if (!in) mpr::fail("IoFailure", "cannot open scale file '" + scale_path + "'");
        json j;
        in >> j;
        return mpr::GraphScaleConfig::from_json(j);
    }
    std::ifstream in(meta_path);
    json j;
    in >> j;
    if (j.contains("scale")) return mpr::GraphScaleConfig::from_json(j.at("scale"));
    return {};
}

struct ProviderBundle {
    std::unique_ptr<mpr::Provider> owned_provider;
    std::unique_ptr<mpr::Embedder> owned_embedder;
    mpr::Provider* provider = nullptr;
    mpr::Embedder* embedder = nullptr;
};

ProviderBundle make_provider(const std::string& provider_spec, const std::string& embedder_spec) {
    ProviderBundle out;
    if (provider_spec == "none") {
        // embedder-only use
    } else if (provider_spec == "remote") {
        auto remote = std::make_unique<mpr::RemoteProvider>(mpr::RemoteConfig::from_env());
        out.provider = remote.get();
        if (embedder_spec == "remote") out.embedder = remote.get();
        out.owned_provider = std::move(remote);
    } else if (provider_spec.rfind("scripted:", 0) == 0) {
        auto scripted = mpr::ScriptedProvider::from_file(provider_spec.substr(9));
        out.provider = scripted.get();
        out.owned_provider = std::move(scripted);
    } else {
        mpr::fail("ConfigInvalid", "--provider must be 'remote' or 'scripted:<rules.json>'");
    }
    if (out.embedder == nullptr) {
        if (embedder_spec == "remote") {
            auto remote = std::make_unique<mpr::RemoteProvider>(mpr::RemoteConfig::from_env());
            out.embedder = remote.get();
            out.owned_embedder = std::move(remote);
        } else {
            out.owned_embedder = std::make_unique<mpr::HashingEmbedder>();
            out.embedder = out.owned_embedder.get();
        }
    }
    return out;
}

std::vector<mpr::Statement> collect_statements(const mpr::DatasetBundle& bundle,
                                               const std::string& user) {
    std::vector<mpr::Statement> out;
    for (const auto& sub : bundle.users) {
        if (!user.empty() && sub.user_id != user) continue;
        out.insert(out.end(), sub.statements.begin(), sub.statements.end());
    }
    if (out.empty()) mpr::fail("ConfigInvalid", "no statements selected (check --user)");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-hop personalized reasoning workbench"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "Generate a benchmark bundle from a meta graph");
    std::string gen_meta, gen_scale, gen_out, gen_hops = "2..10", gen_textgen = "template";
    std::string gen_model = "default";
    int gen_users = 3, gen_per_hop = 10;
    std::uint64_t gen_seed = 0;
    gen->add_option("--meta", gen_meta, "meta graph config file")->required();
    gen->add_option("--scale", gen_scale, "scale config file (defaults to the meta file's scale key)");
    gen->add_option("--users", gen_users, "number of users (specific graphs)");
    gen->add_option("--hops", gen_hops, "hop range, e.g. 2..10");
    gen->add_option("--per-hop", gen_per_hop, "tasks per hop per user");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--textgen", gen_textgen, "template|llm")->check(CLI::IsMember({"template", "llm"}));
    gen->add_option("--model", gen_model, "model for llm textgen");
    gen->add_option("--out", gen_out, "output bundle directory")->required();

    // ---- validate ----
    auto* validate = app.add_subcommand("validate", "Run the dataset oracle sweep over a bundle");
    std::string val_bundle;
    validate->add_option("--bundle", val_bundle, "bundle directory")->required();

    // ---- index ----
    auto* index = app.add_subcommand("index", "Build and persist a retrieval index");
    std::string idx_bundle, idx_backend = "sparse", idx_out, idx_user, idx_embedder = "hash";
    index->add_option("--bundle", idx_bundle)->required();
    index->add_option("--backend", idx_backend, "sparse|dense|tree|graph")
        ->check(CLI::IsMember({"sparse", "dense", "tree", "graph"}));
    index->add_option("--user", idx_user, "user id (default: every user)");
    index->add_option("--embedder", idx_embedder, "hash|remote");
    index->add_option("--out", idx_out, "output directory")->required();

    // ---- corpus ----
    auto* corpus = app.add_subcommand("corpus", "Export a MaskSFT/AskSFT training corpus");
    std::string cor_bundle, cor_scheme = "mask", cor_out, cor_user;
    std::uint64_t cor_seed = 0;
    corpus->add_option("--bundle", cor_bundle)->required();
    corpus->add_option("--scheme", cor_scheme, "mask|ask")->check(CLI::IsMember({"mask", "ask"}));
    corpus->add_option("--user", cor_user, "user id (default: every user)");
    corpus->add_option("--seed", cor_seed);
    corpus->add_option("--out", cor_out, "output jsonl file")->required();

    // ---- cluster ----
    auto* cluster = app.add_subcommand("cluster", "K-means clustering over statement embeddings");
    std::string clu_bundle, clu_user, clu_out = "clusters.json", clu_embedder = "hash";
    std::string clu_corpora, clu_scheme = "mask";
    int clu_n = 30, clu_iters = 100;
    std::uint64_t clu_seed = 0;
    cluster->add_option("--bundle", clu_bundle)->required();
    cluster->add_option("--user", clu_user, "user id (default: every user)");
    cluster->add_option("--n", clu_n, "number of clusters");
    cluster->add_option("--seed", clu_seed);
    cluster->add_option("--max-iters", clu_iters);
    cluster->add_option("--embedder", clu_embedder, "hash|remote");
    cluster->add_option("--out", clu_out, "clusters json file");
    cluster->add_option("--export-corpora", clu_corpora, "also export per-cluster corpora here");
    cluster->add_option("--scheme", clu_scheme, "mask|ask for --export-corpora");

    // ---- registry ----
    auto* registry = app.add_subcommand("registry", "Write an adapter registry for a clustering");
    std::string reg_clusters, reg_out = "adapters.json", reg_base = "base", reg_prefix = "adapter";
    registry->add_option("--clusters", reg_clusters)->required();
    registry->add_option("--base-model", reg_base);
    registry->add_option("--prefix", reg_prefix, "adapter name prefix");
    registry->add_option("--out", reg_out);

    // ---- route ----
    auto* route = app.add_subcommand("route", "Dry-run adapter selection for a query");
    std::string rt_bundle, rt_user, rt_clusters, rt_adapters, rt_query, rt_embedder = "hash";
    int rt_k = mpr::kDefaultRetrievalCount;
    route->add_option("--bundle", rt_bundle)->required();
    route->add_option("--user", rt_user, "user id (default: every user)");
    route->add_option("--clusters", rt_clusters)->required();
    route->add_option("--adapters", rt_adapters)->required();
    route->add_option("--dry-run", rt_query, "query text")->required();
    route->add_option("--k", rt_k);
    route->add_option("--embedder", rt_embedder, "hash|remote");

    // ---- run ----
    auto* run = app.add_subcommand("run", "Evaluate one configuration over a bundle");
    std::string run_bundle, run_structure = "NR", run_memory = "sparse", run_out;
    std::string run_provider = "remote", run_embedder = "hash", run_model = "default";
    std::string run_hybrid, run_clusters, run_summarizer = "concat", run_extractor = "metadata";
    std::string run_index;
    int run_k = mpr::kDefaultRetrievalCount, run_steps = 5, run_branches = 2, run_max_sub = 5;
    int run_jobs = 1;
    run->add_option("--bundle", run_bundle)->required();
    run->add_option("--structure", run_structure, "NR|SR|MR|DR")
        ->check(CLI::IsMember({"NR", "SR", "MR", "DR"}));
    run->add_option("--memory", run_memory, "sparse|dense|tree|graph|oracle|ignoramus")
        ->check(CLI::IsMember({"sparse", "dense", "tree", "graph", "oracle", "ignoramus"}));
    run->add_option("--k", run_k, "retrieval count");
    run->add_option("--steps", run_steps, "reasoning steps l");
    run->add_option("--branches", run_branches, "MR branches b");
    run->add_option("--max-sub", run_max_sub, "DR sub-question cap");
    run->add_option("--provider", run_provider, "remote or scripted:<rules.json>");
    run->add_option("--embedder", run_embedder, "hash|remote");
    run->add_option("--model", run_model, "base model name");
    run->add_option("--hybrid", run_hybrid, "adapter registry json (HybridMem routing)");
    run->add_option("--clusters", run_clusters, "clusters json (required with --hybrid)");
    run->add_option("--summarizer", run_summarizer, "concat|llm (tree backend)");
    run->add_option("--extractor", run_extractor, "metadata|llm (graph backend)");
    run->add_option("--jobs", run_jobs, "concurrent tasks");
    run->add_option("--index", run_index, "load persisted per-user indices from this directory");
    run->add_option("--out", run_out, "run output directory")->required();

    // ---- report ----
    auto* report = app.add_subcommand("report", "Aggregate run directories into a report");
    std::vector<std::string> rep_runs;
    std::string rep_format = "md", rep_out = "report.md";
    report->add_option("--runs", rep_runs, "run directories")->required()->delimiter(',');
    report->add_option("--format", rep_format, "json|csv|md")
        ->check(CLI::IsMember({"json", "csv", "md", "markdown"}));
    report->add_option("--out", rep_out, "output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            mpr::MetaGraph meta = mpr::MetaGraph::load_file(gen_meta);
            mpr::BundleConfig config;
            config.users = gen_users;
            parse_hop_range(gen_hops, config.hop_min, config.hop_max);
            config.per_hop = gen_per_hop;
            config.seed = gen_seed;
            config.scale = load_scale(gen_meta, gen_scale);
            mpr::TextGen textgen;
            ProviderBundle pb;
            if (gen_textgen == "llm") {
                pb = make_provider("remote", "hash");
                textgen.mode = mpr::TextGen::Mode::llm;
                textgen.provider = pb.provider;
                textgen.model = gen_model;
            }
            mpr::DatasetBundle bundle = mpr::build_bundle(meta, config, textgen);
            bundle.save(gen_out);
            mpr::BundleValidation v = mpr::validate_bundle(bundle);
            std::cout << "bundle: " << gen_out << "\n"
                      << "users: " << bundle.users.size()
                      << "  statements: " << bundle.manifest.statement_count
                      << "  tasks: " << v.tasks_checked
                      << "  rejected_paths: " << bundle.manifest.rejected_paths << "\n"
                      << "validation: " << (v.ok() ? "ok" : "FAILED") << "\n";
            return v.ok() ? 0 : 1;
        }

        if (*validate) {
            mpr::DatasetBundle bundle = mpr::DatasetBundle::load(val_bundle);
            mpr::BundleValidation v = mpr::validate_bundle(bundle);
            std::cout << "tasks: " << v.tasks_checked << "\n"
                      << "singleton_failures: " << v.singleton_failures << "\n"
                      << "reference_failures: " << v.reference_failures << "\n"
                      << "leakage_failures: " << v.leakage_failures << "\n"
                      << "direct_edge_failures: " << v.direct_edge_failures << "\n"
                      << "statement_failures: " << v.statement_failures << "\n"
                      << "manifest_failures: " << v.manifest_failures << "\n"
                      << (v.ok() ? "ok" : "FAILED") << "\n";
            return v.ok() ? 0 : 1;
        }

        if (*index) {
            mpr::DatasetBundle bundle = mpr::DatasetBundle::load(idx_bundle);
            ProviderBundle pb;
            mpr::Embedder* embedder = nullptr;
            if (idx_backend != "sparse") {
                pb = make_provider(idx_embedder == "remote" ? "remote" : "none", idx_embedder);
                embedder = pb.embedder;
            }
            for (const auto& sub : bundle.users) {
                if (!idx_user.empty() && sub.user_id != idx_user) continue;
                std::unique_ptr<mpr::MemoryBackend> backend;
                if (idx_backend == "sparse") {
                    backend = mpr::build_sparse(sub.statements);
                } else if (idx_backend == "dense") {
                    backend = mpr::build_dense(sub.statements, *embedder);
                } else if (idx_backend == "tree") {
                    backend = mpr::build_tree(sub.statements, mpr::concat_summarizer(), *embedder);
                } else {
                    backend = mpr::build_graph(sub.statements, mpr::metadata_extractor(), *embedder);
                }
                std::string dir = (fs::path(idx_out) / sub.user_id).string();
                backend->save(dir);
                std::cout << "saved " << idx_backend << " index for " << sub.user_id << " -> " << dir
                          << "\n";
            }
            return 0;
        }

        if (*corpus) {
            mpr::DatasetBundle bundle = mpr::DatasetBundle::load(cor_bundle);
            std::vector<mpr::Statement> statements = collect_statements(bundle, cor_user);
            std::vector<mpr::SftExample> examples =
                cor_scheme == "mask" ? mpr::build_mask_corpus(statements, cor_seed)
                                     : mpr::build_ask_corpus(statements, mpr::TextGen::templates());
            mpr::save_sft_corpus(examples, cor_out);
            json meta = {{"scheme", cor_scheme},
                         {"examples", examples.size()},
                         {"source_bundle", cor_bundle},
                         {"sft", mpr::SftHyperparams{}.to_json()}};
            {
                std::ofstream out(cor_out + ".manifest.json");
                out << meta.dump(2) << "\n";
            }
            std::cout << meta.dump(2) << "\n";
            return 0;
        }

        if (*cluster) {
            mpr::DatasetBundle bundle = mpr::DatasetBundle::load(clu_bundle);
            std::vector<mpr::Statement> statements = collect_statements(bundle, clu_user);
            ProviderBundle pb =
                make_provider(clu_embedder == "remote" ? "remote" : "none", clu_embedder);
            mpr::ClusterAssignment assignment =
                mpr::kmeans_cluster(statements, *pb.embedder, clu_n, clu_seed, clu_iters);
            assignment.save_file(clu_out);
            std::cout << "clusters: " << assignment.n_clusters << "  inertia: " << assignment.inertia
                      << "  iterations: " << assignment.inertia_history.size() << "\n";
            if (!clu_corpora.empty()) {
                json manifest = mpr::export_cluster_corpora(assignment, statements, clu_scheme,
                                                            clu_corpora, clu_seed);
                std::cout << "exported " << manifest.at("files").size() << " corpora under "
                          << clu_corpora << "\n";
            }
            return 0;
        }

        if (*registry) {
            mpr::ClusterAssignment assignment = mpr::ClusterAssignment::load_file(reg_clusters);
            mpr::AdapterRegistry reg;
            reg.base_model = reg_base;
            for (int c = 0; c < assignment.n_clusters; ++c) {
                char name[64];
                std::snprintf(name, sizeof(name), "%s-c%03d", reg_prefix.c_str(), c);
                reg.entries[c] = name;
            }
            reg.save_file(reg_out);
            std::cout << "wrote " << reg_out << " with " << reg.entries.size() << " adapters\n";
            return 0;
        }

        if (*route) {
            mpr::DatasetBundle bundle = mpr::DatasetBundle::load(rt_bundle);
            std::vector<mpr::Statement> statements = collect_statements(bundle, rt_user);
            mpr::ClusterAssignment assignment = mpr::ClusterAssignment::load_file(rt_clusters);
            mpr::AdapterRegistry reg = mpr::AdapterRegistry::load_file(rt_adapters);
            ProviderBundle pb =
                make_provider(rt_embedder == "remote" ? "remote" : "none", rt_embedder);
            auto backend = mpr::build_dense(statements, *pb.embedder);
            auto retrieved = backend->retrieve(rt_query, rt_k);
            std::string adapter = mpr::select_adapter(retrieved, assignment, reg);
            std::cout << "adapter: " << adapter << "\n";
            for (const auto& r : retrieved) {
                auto it = assignment.assignment.find(r.statement_id);
                std::cout << "  " << r.rank << ". " << r.statement_id << "  cluster "
                          << (it != assignment.assignment.end() ? std::to_string(it->second)
                                                                : std::string("?"))
                          << "  score " << r.score << "\n";
            }
            return 0;
        }

        if (*run) {
            mpr::DatasetBundle bundle = mpr::DatasetBundle::load(run_bundle);
            ProviderBundle pb = make_provider(run_provider, run_embedder);
            mpr::AgentConfig config;
            config.structure = mpr::structure_from_string(run_structure);
            config.backend = run_memory;
            config.k = run_k;
            config.max_steps = run_steps;
            config.branches = run_branches;
            config.max_subquestions = run_max_sub;
            config.model = run_model;
            config.provider = pb.provider;
            config.embedder = pb.embedder;
            if (run_summarizer == "llm") {
                config.summarizer = mpr::llm_summarizer(*pb.provider, run_model);
            }
            if (run_extractor == "llm") {
                config.extractor = mpr::llm_extractor(*pb.provider, run_model);
            }
            mpr::ClusterAssignment clusters;
            mpr::AdapterRegistry adapters;
            if (!run_hybrid.empty()) {
                if (run_clusters.empty()) {
                    mpr::fail("ConfigInvalid", "--hybrid requires --clusters");
                }
                clusters = mpr::ClusterAssignment::load_file(run_clusters);
                adapters = mpr::AdapterRegistry::load_file(run_hybrid);
                config.clusters = &clusters;
                config.adapters = &adapters;
            }
            config.index_dir = run_index;
            config.out_dir = run_out;
            config.jobs = run_jobs;
            mpr::EvalOutcome outcome = mpr::evaluate(bundle, config);
            {
                std::ofstream out(fs::path(run_out) / "report.json");
                out << outcome.report.to_json().dump(2) << "\n";
            }
            std::cout << "tasks: " << outcome.report.task_count
                      << "  ACC: " << outcome.report.acc_overall << "\n";
            for (const auto& [hop, acc] : outcome.report.acc_by_hop) {
                std::cout << "  " << hop << "-hop: " << acc << "\n";
            }
            return 0;
        }

        if (*report) {
            std::vector<mpr::RunData> runs;
            for (const std::string& dir : rep_runs) runs.push_back(mpr::load_run_dir(dir));
            mpr::emit_report(runs, rep_format == "markdown" ? "md" : rep_format, rep_out);
            std::cout << "wrote " << rep_out << "\n";
            return 0;
        }
    } catch (const mpr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
