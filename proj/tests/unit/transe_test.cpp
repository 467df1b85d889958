#include <cmath>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "zsrc/transe.hpp"

using namespace zsrc;

TEST_SUITE_BEGIN("transe");

TEST_CASE("score matches hand computation in both norms") {
    EmbeddingTable t(2, 1, 2);
    t.entity(0)[0] = 1.0;
    t.entity(0)[1] = 2.0;
    t.entity(1)[0] = 0.0;
    t.entity(1)[1] = -1.0;
    t.relation(0)[0] = 0.5;
    t.relation(0)[1] = 0.5;
    // h + r - t = (1.5, 3.5)
    CHECK(score_transe(t, 0, 0, 1, 2) == doctest::Approx(std::sqrt(14.5)));
    CHECK(score_transe(t, 0, 0, 1, 1) == doctest::Approx(5.0));
}

TEST_CASE("init is bounded, relation rows unit length, deterministic") {
    KnowledgeGraph kg = testutil::random_kg(1, 20, 5, 80);
    TransEConfig cfg;
    cfg.dim = 25;
    cfg.rng_seed = 123;
    EmbeddingTable t = init_embeddings(kg, cfg);
    const double bound = 6.0 / std::sqrt(25.0) + 1e-12;
    for (int e = 0; e < t.n_entities(); ++e)
        for (int i = 0; i < t.dim(); ++i) CHECK(std::fabs(t.entity(e)[i]) <= bound);
    for (int r = 0; r < t.n_relations(); ++r)
        CHECK(norm2(t.relation_vec(r)) == doctest::Approx(1.0).epsilon(1e-12));
    // Entities keep their raw draw; with dim 25 they land well outside the
    // unit ball almost surely.
    bool some_large = false;
    for (int e = 0; e < t.n_entities(); ++e)
        some_large = some_large || norm2(t.entity_vec(e)) > 1.5;
    CHECK(some_large);

    CHECK(t == init_embeddings(kg, cfg));
    cfg.rng_seed = 124;
    CHECK_FALSE(t == init_embeddings(kg, cfg));
}

TEST_CASE("negative sampling corrupts one side and avoids known facts") {
    KnowledgeGraph kg = testutil::random_kg(2, 15, 3, 60);
    Rng rng = make_rng(99);
    for (const Triple& pos : kg.triples()) {
        const Triple neg = negative_sample(kg, pos, rng);
        CHECK(neg.rel == pos.rel);
        CHECK_FALSE(kg.contains(neg));
        const bool head_changed = neg.head != pos.head;
        const bool tail_changed = neg.tail != pos.tail;
        CHECK(head_changed != tail_changed);
    }
}

TEST_CASE("negative sampling reports saturation") {
    KnowledgeGraph kg;
    for (const char* h : {"a", "b"})
        for (const char* t : {"a", "b"}) kg.add(h, "r", t);
    kg.finalize();
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(negative_sample(kg, kg.triples()[0], rng), ComputeError);
}

namespace {

// Central finite difference of the summed hinge loss at every coordinate.
// margin is chosen large enough that all hinges stay strictly active, so the
// loss is smooth wherever the norm is.
void fd_check(int norm_order, double tol) {
    KnowledgeGraph kg = testutil::random_kg(4, 12, 3, 50);
    TransEConfig cfg;
    cfg.dim = 6;
    cfg.rng_seed = 2024;
    EmbeddingTable table = init_embeddings(kg, cfg);

    Rng rng = make_rng(derive_seed(2024, "fd-pairs"));
    std::vector<std::pair<Triple, Triple>> pairs;
    for (int i = 0; i < 5; ++i) {
        const Triple pos =
            kg.triples()[uniform_int(rng, kg.n_triples())];
        pairs.emplace_back(pos, negative_sample(kg, pos, rng));
    }
    const double margin = 50.0;

    // Keep the L1 check away from its sign kinks.
    if (norm_order == 1) {
        for (const auto& [pos, neg] : pairs)
            for (const Triple& t : {pos, neg})
                for (int i = 0; i < cfg.dim; ++i) {
                    const double d = table.entity(t.head)[i] + table.relation(t.rel)[i] -
                                     table.entity(t.tail)[i];
                    REQUIRE(std::fabs(d) > 1e-3);
                }
    }

    EmbeddingTable grad(kg.n_entities(), kg.n_relations(), cfg.dim);
    (void)transe_loss_grad(table, pairs, margin, norm_order, grad);

    auto loss_at = [&](EmbeddingTable& t) {
        EmbeddingTable scratch(kg.n_entities(), kg.n_relations(), cfg.dim);
        return transe_loss_grad(t, pairs, margin, norm_order, scratch);
    };
    const double eps = 1e-6;
    auto check_coord = [&](double* x, double analytic) {
        const double orig = *x;
        *x = orig + eps;
        const double up = loss_at(table);
        *x = orig - eps;
        const double down = loss_at(table);
        *x = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
        CHECK(std::fabs(analytic - numeric) / denom < tol);
    };
    for (int e = 0; e < kg.n_entities(); ++e)
        for (int i = 0; i < cfg.dim; ++i) check_coord(&table.entity(e)[i], grad.entity(e)[i]);
    for (int r = 0; r < kg.n_relations(); ++r)
        for (int i = 0; i < cfg.dim; ++i)
            check_coord(&table.relation(r)[i], grad.relation(r)[i]);
}

}  // namespace

TEST_CASE("loss gradient agrees with finite differences (L2)") { fd_check(2, 1e-6); }
TEST_CASE("loss gradient agrees with finite differences (L1)") { fd_check(1, 1e-6); }

TEST_CASE("inactive hinges contribute no loss or gradient") {
    KnowledgeGraph kg = testutil::random_kg(6, 10, 2, 30);
    TransEConfig cfg;
    cfg.dim = 4;
    EmbeddingTable table = init_embeddings(kg, cfg);
    Rng rng = make_rng(5);
    const Triple pos = kg.triples()[0];
    // Pairing a triple with itself cancels every gradient term while the
    // margin keeps the hinge active: loss is exactly gamma, gradient zero.
    EmbeddingTable grad(kg.n_entities(), kg.n_relations(), cfg.dim);
    const double loss =
        transe_loss_grad(table, {{pos, pos}}, 0.5, 2, grad);
    CHECK(loss == doctest::Approx(0.5));
    for (int e = 0; e < kg.n_entities(); ++e)
        for (int i = 0; i < cfg.dim; ++i) CHECK(grad.entity(e)[i] == doctest::Approx(0.0));

    // Now a genuinely inactive hinge: margin 0 is invalid for training but
    // the loss helper accepts any margin, so drive it negative.
    const double loss2 = transe_loss_grad(
        table, {{pos, negative_sample(kg, pos, rng)}}, -1e6, 2, grad);
    CHECK(loss2 == 0.0);
}

TEST_CASE("training lowers the loss and keeps entities inside the unit ball") {
    KnowledgeGraph kg = testutil::structured_kg(3);
    TransEConfig cfg;
    cfg.dim = 16;
    cfg.epochs = 25;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 32;
    cfg.rng_seed = 9;
    TransETrainStats stats;
    EmbeddingTable t = train_transe(kg, cfg, &stats);
    REQUIRE(stats.epoch_loss.size() == 25);
    CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
    for (int e = 0; e < t.n_entities(); ++e)
        CHECK(norm2(t.entity_vec(e)) <= 1.0 + 1e-9);

    TransETrainStats stats2;
    EmbeddingTable t2 = train_transe(kg, cfg, &stats2);
    CHECK(t == t2);
    CHECK(stats.epoch_loss == stats2.epoch_loss);

    cfg.rng_seed = 10;
    CHECK_FALSE(t == train_transe(kg, cfg));
}

TEST_CASE("config validation rejects bad fields") {
    TransEConfig cfg;
    cfg.dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.margin = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.norm_order = 3;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("link prediction rank with filtering, hand-built landscape") {
    KnowledgeGraph kg;
    kg.add("a", "r", "b");
    kg.add("a", "r", "c");
    kg.finalize();
    const int a = 0, b = 1, c = 2, r = 0;
    EmbeddingTable t(3, 1, 2);
    // head + rel = origin; candidate scores: a -> 0, b -> 2, c -> 1.
    t.entity(b)[0] = 2.0;
    t.entity(c)[0] = 1.0;

    // Filtered: c is a known positive and is skipped; only a outranks b.
    LinkPredictionMetrics m = link_prediction_eval(t, kg, {{a, r, b}});
    CHECK(m.mean_rank == doctest::Approx(2.0));

    // Unfiltered equivalent: filter graph without (a, r, c).
    KnowledgeGraph plain;
    plain.add("a", "r", "b");
    plain.entities().add_or_get("c");
    plain.finalize();
    m = link_prediction_eval(t, plain, {{a, r, b}});
    CHECK(m.mean_rank == doctest::Approx(3.0));
}

TEST_CASE("equal scores break ties by entity id") {
    KnowledgeGraph kg;
    kg.add("e0", "r", "e1");
    for (const char* e : {"e2", "e3", "e4"}) kg.entities().add_or_get(e);
    kg.finalize();
    EmbeddingTable t(5, 1, 3);  // all zero: every candidate ties at score 0
    // Head e2 has no known facts, so nothing is filtered; ids 0,1,2 tie with
    // the target and precede it by id.
    LinkPredictionMetrics m = link_prediction_eval(t, kg, {{2, 0, 3}});
    CHECK(m.mean_rank == doctest::Approx(4.0));
}

TEST_CASE("random embeddings rank near the middle and hit@10 stays small") {
    KnowledgeGraph kg = testutil::random_kg(7, 60, 4, 400);
    TransEConfig cfg;
    cfg.dim = 12;
    cfg.rng_seed = 31;
    EmbeddingTable t = init_embeddings(kg, cfg);
    std::vector<Triple> held(kg.triples().begin(),
                             kg.triples().begin() + std::min<std::size_t>(200, kg.n_triples()));
    KnowledgeGraph empty_filter;
    testutil::register_names(empty_filter, 60, 4);
    empty_filter.finalize();
    LinkPredictionMetrics m = link_prediction_eval(t, empty_filter, held);
    CHECK(m.mean_rank > 0.3 * 60);
    CHECK(m.mean_rank < 0.7 * 60);
    CHECK(m.hits_at_10 >= 0.0);
    CHECK(m.hits_at_10 <= 1.0);

    // Thread count must not change the result.
    LinkPredictionMetrics m4 = link_prediction_eval(t, empty_filter, held, 2, 4);
    CHECK(m.mean_rank == m4.mean_rank);
    CHECK(m.hits_at_10 == m4.hits_at_10);
}

TEST_CASE("embedding files round trip exactly") {
    testutil::TempDir tmp;
    KnowledgeGraph kg = testutil::random_kg(8, 14, 3, 50);
    TransEConfig cfg;
    cfg.dim = 7;
    cfg.rng_seed = 77;
    EmbeddingTable t = init_embeddings(kg, cfg);
    save_embeddings(t, kg, tmp.file("ent.txt"), tmp.file("rel.txt"));
    EmbeddingTable back = load_embeddings(tmp.file("ent.txt"), tmp.file("rel.txt"), kg);
    CHECK(t == back);
}

TEST_CASE("embedding loader rejects malformed files") {
    testutil::TempDir tmp;
    KnowledgeGraph kg = testutil::random_kg(9, 5, 2, 20);
    TransEConfig cfg;
    cfg.dim = 3;
    EmbeddingTable t = init_embeddings(kg, cfg);
    save_embeddings(t, kg, tmp.file("ent.txt"), tmp.file("rel.txt"));

    std::ofstream(tmp.file("short.txt")) << "5 3\ne000 0.1 0.2 0.3\n";
    CHECK_THROWS_AS(load_embeddings(tmp.file("short.txt"), tmp.file("rel.txt"), kg),
                    ValidationError);
    std::ofstream(tmp.file("dup.txt")) << "2 3\nr00 1 0 0\nr00 0 1 0\n";
    CHECK_THROWS_AS(load_embeddings(tmp.file("ent.txt"), tmp.file("dup.txt"), kg),
                    ValidationError);
    std::ofstream(tmp.file("badcount.txt")) << "1 3\nr00 1 0 0\n";
    CHECK_THROWS_AS(load_embeddings(tmp.file("ent.txt"), tmp.file("badcount.txt"), kg),
                    ValidationError);
    std::ofstream(tmp.file("baddim.txt")) << "2 4\nr00 1 0 0 0\nr01 0 1 0 0\n";
    CHECK_THROWS_AS(load_embeddings(tmp.file("ent.txt"), tmp.file("baddim.txt"), kg),
                    ValidationError);
}

TEST_SUITE_END();
