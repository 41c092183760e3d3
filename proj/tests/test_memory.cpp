#include <doctest.h>

#include "mpr/errors.hpp"
#include "mpr/memory.hpp"
#include "mpr/rng.hpp"
#include "test_util.hpp"

using namespace mpr;
using mpr_test::MapEmbedder;
using mpr_test::toy_statements;

TEST_CASE("sparse: singleton corpus ranks its only statement first") {
    auto backend = build_sparse(toy_statements({"Alice works in Chicago."}));
    auto hits = backend->retrieve("where does Alice work?", 5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].statement_id == "s000");
    CHECK(hits[0].rank == 1);
    CHECK(hits[0].score > 0.0);
}

TEST_CASE("sparse: ranking equals the brute-force BM25 oracle") {
    Rng rng(2024);
    std::vector<std::string> vocab = {"alice",  "bob",    "carol", "works", "lives", "likes",
                                      "chicago", "osaka",  "madrid", "tennis", "chess", "sushi",
                                      "ramen",  "salary", "earns", "mentor", "friend", "city"};
    for (int round = 0; round < 5; ++round) {
        int docs = 10 + static_cast<int>(rng.below(41));  // up to 50
        std::vector<std::string> texts;
        for (int d = 0; d < docs; ++d) {
            std::string text;
            int len = 3 + static_cast<int>(rng.below(10));
            for (int w = 0; w < len; ++w) {
                if (w > 0) text += ' ';
                text += vocab[rng.below(vocab.size())];
            }
            texts.push_back(text + ".");
        }
        auto corpus = toy_statements(texts);
        auto backend = build_sparse(corpus);
        for (int q = 0; q < 4; ++q) {
            std::string query = vocab[rng.below(vocab.size())] + " " + vocab[rng.below(vocab.size())] +
                                " " + vocab[rng.below(vocab.size())];
            auto got = backend->retrieve(query, docs);
            auto want = mpr_test::brute_bm25(corpus, query);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].statement_id == want[i].first);
                CHECK(got[i].score == doctest::Approx(want[i].second).epsilon(1e-12));
                CHECK(std::abs(got[i].score - want[i].second) < 1e-9);
            }
        }
    }
}

TEST_CASE("retrieve: k = 0 and k beyond the corpus") {
    auto corpus = toy_statements({"Alice works in Chicago.", "Bob lives in Osaka.",
                                  "Carol likes sushi."});
    auto backend = build_sparse(corpus);
    CHECK(backend->retrieve("anything", 0).empty());
    auto all = backend->retrieve("alice", 50);
    CHECK(all.size() == 3);  // exhaustion: every document, ranked
    CHECK(all[0].statement_id == "s000");
    // zero-score documents order by id
    CHECK(all[1].statement_id == "s001");
    CHECK(all[2].statement_id == "s002");
}

TEST_CASE("rank stability: repeated retrievals are identical, ties order by id") {
    auto corpus = toy_statements({"same words here.", "same words here.", "same words here."});
    auto backend = build_sparse(corpus);
    auto a = backend->retrieve("same words", 3);
    auto b = backend->retrieve("same words", 3);
    REQUIRE(a.size() == 3);
    CHECK(a[0].statement_id == "s000");
    CHECK(a[1].statement_id == "s001");
    CHECK(a[2].statement_id == "s002");
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].statement_id == b[i].statement_id);
        CHECK(a[i].score == b[i].score);
    }
}

TEST_CASE("dense: self-similarity and brute-force cosine ordering") {
    HashingEmbedder hasher;
    auto corpus = toy_statements({"alice works in chicago", "bob lives in osaka",
                                  "carol likes sushi"});
    auto backend = build_dense(corpus, hasher);
    auto hits = backend->retrieve("alice works in chicago", 3);
    REQUIRE(!hits.empty());
    CHECK(hits[0].statement_id == "s000");
    CHECK(hits[0].score == doctest::Approx(1.0));

    MapEmbedder toy;
    std::vector<std::string> texts = {"d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9"};
    Rng rng(5);
    std::vector<std::vector<double>> vecs;
    for (const auto& t : texts) {
        std::vector<double> v{rng.unit(), rng.unit(), rng.unit()};
        toy.set(t, v);
        vecs.push_back(v);
    }
    std::vector<double> qv{0.7, 0.1, 0.4};
    toy.set("query", qv);
    auto corpus2 = toy_statements(texts, "d");
    auto dense = build_dense(corpus2, toy);
    auto got = dense->retrieve("query", 10);
    std::vector<std::pair<std::string, double>> want;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        want.emplace_back(corpus2[i].id, cosine_similarity(qv, vecs[i]));
    }
    std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].statement_id == want[i].first);
        CHECK(got[i].score == doctest::Approx(want[i].second));
    }
}

TEST_CASE("tree: degenerate single-leaf tree") {
    HashingEmbedder hasher;
    auto backend = build_tree(toy_statements({"only one statement."}), concat_summarizer(), hasher);
    auto hits = backend->retrieve("anything at all", 5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].statement_id == "s000");
}

TEST_CASE("tree: concat summaries, leaf coverage, cluster descent") {
    // two well-separated vocabularies (verified collision-free under the
    // 256-bucket hashing embedder); the smaller topic fits one subtree
    std::vector<std::string> texts;
    for (int i = 0; i < 4; ++i) {
        texts.push_back("astronomy telescope nebula galaxy alpha" + std::to_string(i));
    }
    for (int i = 0; i < 12; ++i) {
        texts.push_back("cooking recipe saucepan flavor crumb" + std::to_string(i));
    }
    auto corpus = toy_statements(texts);
    HashingEmbedder hasher;
    auto backend = build_tree(corpus, concat_summarizer(), hasher, 4);

    // leaf coverage: k >= corpus returns every statement exactly once
    auto all = backend->retrieve("astronomy cooking", 16);
    std::set<std::string> ids;
    for (const auto& h : all) ids.insert(h.statement_id);
    CHECK(ids.size() == 16);

    // in-topic query matches flat cosine retrieval over the leaves
    auto dense = build_dense(corpus, hasher);
    auto tree_hits = backend->retrieve("astronomy telescope nebula galaxy", 4);
    auto flat_hits = dense->retrieve("astronomy telescope nebula galaxy", 4);
    std::set<std::string> tree_ids, flat_ids;
    for (const auto& h : tree_hits) tree_ids.insert(h.statement_id);
    for (const auto& h : flat_hits) flat_ids.insert(h.statement_id);
    CHECK(tree_ids == flat_ids);
    for (const auto& h : tree_hits) {
        CHECK(corpus[std::stoul(h.statement_id.substr(1))].text.find("astronomy") !=
              std::string::npos);
    }
}

TEST_CASE("graph backend: metadata extractor yields the direct mapping") {
    Statement s;
    s.id = "s000";
    s.text = "Alice is supervised by Bob.";
    s.source_value = "Alice";
    s.relation = "is supervised by";
    s.target_value = "Bob";
    HashingEmbedder hasher;
    auto backend = build_graph({s}, metadata_extractor(), hasher);
    auto hits = backend->retrieve("Alice", 5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].statement_id == "s000");
}

TEST_CASE("graph backend: adjacency ordering under a name query") {
    std::vector<Statement> corpus;
    auto add = [&](const std::string& id, const std::string& src, const std::string& rel,
                   const std::string& tgt) {
        Statement s;
        s.id = id;
        s.text = src + " " + rel + " " + tgt + ".";
        s.source_value = src;
        s.relation = rel;
        s.target_value = tgt;
        corpus.push_back(std::move(s));
    };
    add("s000", "Alice", "works in", "Chicago");
    add("s001", "Bob", "works in", "Osaka");
    add("s002", "Alice", "likes eating", "sushi");
    add("s003", "Carol", "likes eating", "ramen");
    add("s004", "Alice", "is married to", "David");
    add("s005", "Bob", "is married to", "Emma");
    add("s006", "Frank", "lives in", "Madrid");
    add("s007", "Alice", "lives in", "Geneva");
    add("s008", "Henry", "enjoys playing", "chess");
    add("s009", "Irene", "enjoys playing", "tennis");

    HashingEmbedder hasher;
    auto backend = build_graph(corpus, metadata_extractor(), hasher);
    auto hits = backend->retrieve("Alice", 10);
    std::set<std::string> touching{"s000", "s002", "s004", "s007"};
    // every Alice-touching statement is returned and ranks ahead of the rest
    std::set<std::string> got;
    for (const auto& h : hits) got.insert(h.statement_id);
    for (const auto& id : touching) REQUIRE(got.count(id));
    std::size_t worst_touching = 0, best_other = hits.size();
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (touching.count(hits[i].statement_id)) {
            worst_touching = std::max(worst_touching, i);
        } else {
            best_other = std::min(best_other, i);
        }
    }
    CHECK(worst_touching < best_other);

    // linkage invariant: every statement reachable via its own labels
    std::set<std::string> linked;
    for (const Statement& s : corpus) {
        for (const std::string& label : {s.source_value, s.relation, s.target_value}) {
            for (const auto& h : backend->retrieve(label, 10)) linked.insert(h.statement_id);
        }
    }
    CHECK(linked.size() == corpus.size());
}

TEST_CASE("oracle_retrieve returns the references in path order") {
    DatasetBundle bundle = mpr_test::small_bundle(1, 2, 3, 2, 17);
    const SubDataset& sub = bundle.users[0];
    for (const MprTask& task : sub.tasks) {
        auto refs = oracle_retrieve(task, sub.statements);
        REQUIRE(refs.size() == task.references.size());
        for (std::size_t i = 0; i < refs.size(); ++i) {
            CHECK(refs[i].id == task.references[i]);
        }
    }
    MprTask broken = sub.tasks[0];
    broken.references.push_back("user_00_s99999");
    CHECK_THROWS_WITH_AS(oracle_retrieve(broken, sub.statements),
                         doctest::Contains("MissingReference"), Error);
}

TEST_CASE("memory views: oracle serves gold references, ignoramus serves nothing") {
    DatasetBundle bundle = mpr_test::small_bundle(1, 2, 2, 1, 23);
    const SubDataset& sub = bundle.users[0];
    const MprTask& task = sub.tasks[0];
    auto oracle = oracle_view(task, sub.statements);
    auto hits = oracle->retrieve("whatever the query says");
    REQUIRE(hits.size() == task.references.size());
    for (std::size_t i = 0; i < hits.size(); ++i) CHECK(hits[i].id == task.references[i]);
    auto nothing = ignoramus_view();
    CHECK(nothing->retrieve(task.question).empty());
    CHECK(nothing->kind() == "ignoramus");
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_WITH_AS(build_sparse({}), doctest::Contains("EmptyCorpus"), Error);
}

TEST_CASE("index persistence round-trips rankings") {
    auto dir = mpr_test::temp_dir("index_rt");
    auto corpus = toy_statements({"alice works in chicago", "bob lives in osaka",
                                  "carol likes sushi", "david earns 5400"});
    HashingEmbedder hasher;

    auto sparse = build_sparse(corpus);
    sparse->save((dir / "sparse").string());
    auto sparse2 = load_backend((dir / "sparse").string(), corpus);
    auto a = sparse->retrieve("alice chicago", 4);
    auto b = sparse2->retrieve("alice chicago", 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].statement_id == b[i].statement_id);
        CHECK(a[i].score == doctest::Approx(b[i].score));
    }

    auto dense = build_dense(corpus, hasher);
    dense->save((dir / "dense").string());
    auto dense2 = load_backend((dir / "dense").string(), corpus, &hasher);
    auto c = dense->retrieve("bob osaka", 4);
    auto d = dense2->retrieve("bob osaka", 4);
    REQUIRE(c.size() == d.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i].statement_id == d[i].statement_id);
        CHECK(c[i].score == doctest::Approx(d[i].score));
    }

    // corpus drift is detected
    auto other = toy_statements({"different corpus entirely"});
    CHECK_THROWS_WITH_AS(load_backend((dir / "sparse").string(), other),
                         doctest::Contains("ConfigInvalid"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("tree and graph indices persist and reload") {
    auto dir = mpr_test::temp_dir("index_rt2");
    std::vector<std::string> texts;
    for (int i = 0; i < 10; ++i) texts.push_back("topic alpha" + std::to_string(i) + " detail");
    auto corpus = toy_statements(texts);
    HashingEmbedder hasher;

    auto tree = build_tree(corpus, concat_summarizer(), hasher, 3);
    tree->save((dir / "tree").string());
    auto tree2 = load_backend((dir / "tree").string(), corpus, &hasher);
    auto a = tree->retrieve("topic alpha3 detail", 5);
    auto b = tree2->retrieve("topic alpha3 detail", 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].statement_id == b[i].statement_id);
        CHECK(a[i].score == doctest::Approx(b[i].score));
    }

    std::vector<Statement> meta_corpus;
    for (int i = 0; i < 6; ++i) {
        Statement s;
        s.id = "m" + std::to_string(i);
        s.source_value = "Person" + std::to_string(i % 3);
        s.relation = "works in";
        s.target_value = "City" + std::to_string(i % 2);
        s.text = s.source_value + " works in " + s.target_value + ".";
        meta_corpus.push_back(std::move(s));
    }
    auto graph = build_graph(meta_corpus, metadata_extractor(), hasher);
    graph->save((dir / "graph").string());
    auto graph2 = load_backend((dir / "graph").string(), meta_corpus, &hasher);
    auto c = graph->retrieve("Person1", 6);
    auto d = graph2->retrieve("Person1", 6);
    REQUIRE(c.size() == d.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i].statement_id == d[i].statement_id);
        CHECK(c[i].score == doctest::Approx(d[i].score));
    }
    std::filesystem::remove_all(dir);
}
