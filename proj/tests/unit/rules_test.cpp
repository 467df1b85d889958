#include <algorithm>
#include <fstream>

#include "doctest.h"
#include "rule_oracle.hpp"
#include "test_util.hpp"
#include "zsrc/rules.hpp"

using namespace zsrc;

TEST_SUITE_BEGIN("rules");

namespace {

// p: a->b, b->c, d->e, a->e;  q: b->c, e->d;  h: a->c, d->b;  s: c->c
KnowledgeGraph metric_fixture() {
    KnowledgeGraph kg;
    kg.add("a", "p", "b");
    kg.add("b", "p", "c");
    kg.add("d", "p", "e");
    kg.add("a", "p", "e");
    kg.add("b", "q", "c");
    kg.add("e", "q", "d");
    kg.add("a", "h", "c");
    kg.add("d", "h", "b");
    kg.add("c", "s", "c");
    kg.finalize();
    return kg;
}

Rule chain_rule(const KnowledgeGraph& kg) {
    const int p = kg.relations().require("p");
    const int q = kg.relations().require("q");
    const int h = kg.relations().require("h");
    return Rule{{Atom{p, "x", "y"}, Atom{q, "y", "z"}}, Atom{h, "x", "z"}};
}

}  // namespace

TEST_CASE("rule validation accepts chain shapes and rejects the rest") {
    CHECK_NOTHROW(validate_rule({{{0, "x", "z"}}, {1, "x", "z"}}));
    CHECK_NOTHROW(validate_rule({{{0, "z", "x"}}, {1, "x", "z"}}));
    CHECK_NOTHROW(validate_rule({{{0, "x", "y"}, {1, "y", "z"}}, {2, "x", "z"}}));
    CHECK_NOTHROW(validate_rule({{{0, "y", "x"}, {1, "z", "y"}}, {2, "x", "z"}}));
    // Atom order does not matter as long as the chain exists.
    CHECK_NOTHROW(validate_rule({{{0, "y", "z"}, {1, "x", "y"}}, {2, "x", "z"}}));

    // Open rule: body variable never reaches the head object.
    CHECK_THROWS_AS(validate_rule({{{0, "x", "w"}}, {1, "x", "z"}}), ValidationError);
    CHECK_THROWS_AS(validate_rule({{{0, "x", "y"}, {1, "y", "w"}}, {2, "x", "z"}}),
                    ValidationError);
    // Both body atoms on the same side.
    CHECK_THROWS_AS(validate_rule({{{0, "x", "y"}, {1, "x", "y"}}, {2, "x", "z"}}),
                    ValidationError);
    // Repeated variable inside an atom.
    CHECK_THROWS_AS(validate_rule({{{0, "x", "x"}}, {1, "x", "z"}}), ValidationError);
    CHECK_THROWS_AS(validate_rule({{{0, "x", "z"}}, {1, "x", "x"}}), ValidationError);
    // Empty and oversized bodies.
    CHECK_THROWS_AS(validate_rule({{}, {1, "x", "z"}}), ValidationError);
    CHECK_THROWS_AS(
        validate_rule({{{0, "x", "y"}, {1, "y", "w"}, {2, "w", "z"}}, {3, "x", "z"}}),
        ValidationError);
}

TEST_CASE("signatures canonicalize variable names") {
    KnowledgeGraph kg = metric_fixture();
    const int p = kg.relations().require("p");
    const int q = kg.relations().require("q");
    const int h = kg.relations().require("h");
    CHECK(rule_signature(chain_rule(kg), kg) == "p(x,y) & q(y,z) => h(x,z)");
    // Same rule written with different variable letters.
    Rule odd{{Atom{p, "s", "m"}, Atom{q, "m", "o"}}, Atom{h, "s", "o"}};
    CHECK(rule_signature(odd, kg) == "p(x,y) & q(y,z) => h(x,z)");
    Rule inv{{Atom{p, "z", "x"}}, Atom{h, "x", "z"}};
    CHECK(rule_signature(inv, kg) == "p(z,x) => h(x,z)");
}

TEST_CASE("body matches on the hand-built fixture") {
    KnowledgeGraph kg = metric_fixture();
    // p(d,e) & q(e,d) collapses x and z onto d and must be excluded.
    auto matches = body_matches(kg, chain_rule(kg));
    CHECK(matches == std::vector<std::pair<int, int>>{
                         {kg.entities().require("a"), kg.entities().require("c")},
                         {kg.entities().require("a"), kg.entities().require("d")}});

    // The reflexive s fact never matches a two-variable body atom.
    const int s = kg.relations().require("s");
    const int h = kg.relations().require("h");
    Rule refl{{Atom{s, "x", "z"}}, Atom{h, "x", "z"}};
    CHECK(body_matches(kg, refl).empty());
}

TEST_CASE("metrics on the hand-built fixture") {
    KnowledgeGraph kg = metric_fixture();
    const Rule rule = chain_rule(kg);
    // matches {(a,c),(a,d)}; h facts {(a,c),(d,b)}; support 1; hc 1/2;
    // pca denominator: both matches start at a, which has an h fact, so 2.
    CHECK(support(kg, rule) == 1);
    CHECK(head_coverage(kg, rule) == doctest::Approx(0.5));
    CHECK(pca_confidence(kg, rule) == doctest::Approx(0.5));
    const RuleMetrics m = rule_metrics(kg, rule);
    CHECK(m.support == 1);
    CHECK(m.head_coverage == doctest::Approx(0.5));
    CHECK(m.pca_confidence == doctest::Approx(0.5));

    // Forward copy rule p(x,z) => h(x,z): no overlap, pca denominator 3.
    const int p = kg.relations().require("p");
    const int h = kg.relations().require("h");
    Rule copy{{Atom{p, "x", "z"}}, Atom{h, "x", "z"}};
    const RuleMetrics mc = rule_metrics(kg, copy);
    CHECK(mc.support == 0);
    CHECK(mc.head_coverage == doctest::Approx(0.0));
    CHECK(mc.pca_confidence == doctest::Approx(0.0));

    // PCA confidence is 0 when no match subject has any head fact.
    const int q = kg.relations().require("q");
    Rule qs{{Atom{q, "x", "z"}}, Atom{h, "x", "z"}};
    // q pairs: (b,c),(e,d); neither b nor e has an h fact.
    const RuleMetrics mq = rule_metrics(kg, qs);
    CHECK(mq.support == 0);
    CHECK(mq.pca_confidence == 0.0);

    // Heads with no facts are rejected.
    KnowledgeGraph kg2 = metric_fixture();
    const int empty_rel = kg2.relations().add_or_get("empty");
    kg2.finalize();
    Rule bad{{Atom{p, "x", "z"}}, Atom{empty_rel, "x", "z"}};
    CHECK_THROWS_AS(rule_metrics(kg2, bad), ValidationError);
}

TEST_CASE("metrics agree with the brute-force oracle on many graphs") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        KnowledgeGraph kg = seed % 2 == 0 ? testutil::random_kg(seed, 20, 6, 120)
                                          : testutil::structured_kg(seed, 24, 4, 100);
        Rng rng = make_rng(derive_seed(seed, "rule-probe"));
        // Probe a sample of candidate rules of every pattern.
        for (int trial = 0; trial < 40; ++trial) {
            const int r1 = static_cast<int>(uniform_int(rng, kg.n_relations()));
            const int r2 = static_cast<int>(uniform_int(rng, kg.n_relations()));
            int r3 = static_cast<int>(uniform_int(rng, kg.n_relations()));
            if (kg.relation_pairs(r3).empty()) continue;
            const Atom head{r3, "x", "z"};
            std::vector<Rule> probes;
            if (r1 != r3) probes.push_back({{Atom{r1, "x", "z"}}, head});
            probes.push_back({{Atom{r1, "z", "x"}}, head});
            probes.push_back({{Atom{r1, "x", "y"}, Atom{r2, "y", "z"}}, head});
            probes.push_back({{Atom{r1, "y", "x"}, Atom{r2, "y", "z"}}, head});
            probes.push_back({{Atom{r1, "x", "y"}, Atom{r2, "z", "y"}}, head});
            probes.push_back({{Atom{r1, "y", "x"}, Atom{r2, "z", "y"}}, head});
            for (const Rule& rule : probes) {
                const RuleMetrics fast = rule_metrics(kg, rule);
                const RuleMetrics slow = oracle::brute_metrics(kg.triples(), rule);
                CHECK(fast.support == slow.support);
                CHECK(fast.head_coverage == doctest::Approx(slow.head_coverage).epsilon(1e-12));
                CHECK(fast.pca_confidence ==
                      doctest::Approx(slow.pca_confidence).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("mined rules match the brute-force miner exactly") {
    MineConfig cfg;
    cfg.min_support = 2;
    cfg.min_head_coverage = 0.01;
    cfg.min_pca = 0.1;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        KnowledgeGraph kg = seed % 2 == 0 ? testutil::random_kg(seed, 18, 5, 100)
                                          : testutil::structured_kg(seed, 20, 4, 90);
        const auto fast = mine_rules(kg, cfg);
        const auto slow =
            oracle::brute_mine(kg.triples(), kg.n_relations(), testutil::relation_names(kg), cfg);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(rule_signature(fast[i], kg) == rule_signature(slow[i], kg));
            CHECK(fast[i].support == slow[i].support);
            CHECK(fast[i].head_coverage ==
                  doctest::Approx(slow[i].head_coverage).epsilon(1e-12));
            CHECK(fast[i].pca_confidence ==
                  doctest::Approx(slow[i].pca_confidence).epsilon(1e-12));
        }
    }
}

TEST_CASE("structured graph yields the planted rules with high confidence") {
    KnowledgeGraph kg = testutil::structured_kg(42);
    MineConfig cfg;
    cfg.min_support = 2;
    cfg.min_pca = 0.2;
    const auto rules = mine_rules(kg, cfg);
    REQUIRE_FALSE(rules.empty());
    std::vector<std::string> sigs;
    for (const Rule& r : rules) sigs.push_back(rule_signature(r, kg));
    // Copy relation r05 mirrors r00, inverse r06 mirrors r01.
    const bool copy_found =
        std::find(sigs.begin(), sigs.end(), "r00(x,z) => r05(x,z)") != sigs.end();
    const bool inv_found =
        std::find(sigs.begin(), sigs.end(), "r01(z,x) => r06(x,z)") != sigs.end();
    CHECK(copy_found);
    CHECK(inv_found);
}

TEST_CASE("mining output is ordered and thread-count independent") {
    MineConfig cfg;
    cfg.min_support = 1;
    cfg.min_head_coverage = 0.0;
    cfg.min_pca = 0.0;
    KnowledgeGraph kg = testutil::structured_kg(11, 22, 4, 90);
    const auto serial = mine_rules(kg, cfg, 1);
    for (std::size_t i = 1; i < serial.size(); ++i) {
        const Rule& a = serial[i - 1];
        const Rule& b = serial[i];
        if (a.pca_confidence != b.pca_confidence) {
            CHECK(a.pca_confidence > b.pca_confidence);
        } else if (a.support != b.support) {
            CHECK(a.support > b.support);
        } else {
            CHECK(rule_signature(a, kg) < rule_signature(b, kg));
        }
    }
    for (int threads : {2, 4}) {
        const auto parallel = mine_rules(kg, cfg, threads);
        REQUIRE(parallel.size() == serial.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CHECK(rule_signature(parallel[i], kg) == rule_signature(serial[i], kg));
            CHECK(parallel[i].support == serial[i].support);
            CHECK(parallel[i].pca_confidence == serial[i].pca_confidence);
        }
    }
}

TEST_CASE("identity rules are never mined") {
    KnowledgeGraph kg = testutil::structured_kg(13);
    MineConfig cfg;
    cfg.min_support = 0;
    cfg.min_head_coverage = 0.0;
    cfg.min_pca = 0.0;
    for (const Rule& r : mine_rules(kg, cfg)) {
        if (r.body.size() != 1) continue;
        const bool same_rel = r.body[0].rel == r.head.rel;
        const bool forward = r.body[0].subject == r.head.subject;
        CHECK_FALSE((same_rel && forward));
    }
}

TEST_CASE("rules_about filters by mention and keeps the strongest k") {
    KnowledgeGraph kg = testutil::structured_kg(17);
    MineConfig cfg;
    cfg.min_support = 1;
    cfg.min_head_coverage = 0.0;
    cfg.min_pca = 0.0;
    const auto rules = mine_rules(kg, cfg);
    const int rel = kg.relations().require("r05");
    const auto about = rules_about(rules, rel, 3, kg);
    CHECK(about.size() <= 3);
    for (const Rule& r : about) {
        bool mentions = r.head.rel == rel;
        for (const Atom& a : r.body) mentions = mentions || a.rel == rel;
        CHECK(mentions);
    }
    for (std::size_t i = 1; i < about.size(); ++i)
        CHECK(about[i - 1].pca_confidence >= about[i].pca_confidence);
    // k bounds the output but never invents rules.
    const auto all_about = rules_about(rules, rel, 1 << 20, kg);
    std::size_t mention_count = 0;
    for (const Rule& r : rules) {
        bool mentions = r.head.rel == rel;
        for (const Atom& a : r.body) mentions = mentions || a.rel == rel;
        mention_count += mentions;
    }
    CHECK(all_about.size() == mention_count);
    CHECK_THROWS_AS(rules_about(rules, rel, 0, kg), ValidationError);
}

TEST_CASE("rule files round trip") {
    testutil::TempDir tmp;
    KnowledgeGraph kg = testutil::structured_kg(19);
    MineConfig cfg;
    cfg.min_support = 2;
    const auto rules = mine_rules(kg, cfg);
    REQUIRE_FALSE(rules.empty());
    save_rules(rules, kg, tmp.file("rules.jsonl"));
    const auto back = load_rules(tmp.file("rules.jsonl"), kg);
    REQUIRE(back.size() == rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        CHECK(back[i].body == rules[i].body);
        CHECK(back[i].head == rules[i].head);
        CHECK(back[i].support == rules[i].support);
        CHECK(back[i].head_coverage == rules[i].head_coverage);
        CHECK(back[i].pca_confidence == rules[i].pca_confidence);
    }
}

TEST_CASE("rule loader rejects junk") {
    testutil::TempDir tmp;
    KnowledgeGraph kg = testutil::structured_kg(23);
    std::ofstream(tmp.file("bad.jsonl")) << "not json\n";
    CHECK_THROWS_AS(load_rules(tmp.file("bad.jsonl"), kg), ValidationError);
    std::ofstream(tmp.file("unknown.jsonl"))
        << R"({"body":[{"rel":"nope","subj":"x","obj":"z"}],)"
        << R"("head":{"rel":"r00","subj":"x","obj":"z"},"support":1,"hc":0.5,"pca":0.5})"
        << "\n";
    CHECK_THROWS_AS(load_rules(tmp.file("unknown.jsonl"), kg), ValidationError);
    CHECK_THROWS_AS(load_rules(tmp.file("missing.jsonl"), kg), ValidationError);
}

TEST_SUITE_END();
