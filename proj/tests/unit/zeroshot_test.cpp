#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "zsrc/io_util.hpp"
#include "zsrc/zeroshot.hpp"

using namespace zsrc;

TEST_SUITE_BEGIN("zeroshot");

namespace {

KnowledgeGraph named_kg(int n_entities, int n_relations) {
    KnowledgeGraph kg;
    testutil::register_names(kg, n_entities, n_relations);
    kg.add(0, 0, 1);
    kg.finalize();
    return kg;
}

SemanticSpace basis_space(SpaceKind kind, const KnowledgeGraph& kg,
                          const std::vector<int>& rels, int dim) {
    SemanticSpace space(kind);
    for (std::size_t i = 0; i < rels.size(); ++i) {
        Vec v(static_cast<std::size_t>(dim), 0.0);
        v[i % static_cast<std::size_t>(dim)] = 1.0;
        space.set(kg.relations().name_of(rels[i]), std::move(v));
    }
    return space;
}

Instance sentence(std::vector<std::string> tokens, int rel) {
    Instance inst;
    inst.tokens = std::move(tokens);
    inst.head = {0, 0};
    inst.tail = {static_cast<int>(inst.tokens.size()) - 1,
                 static_cast<int>(inst.tokens.size()) - 1};
    inst.relation = rel;
    return inst;
}

}  // namespace

TEST_CASE("similarity names round trip") {
    CHECK(parse_similarity("cosine") == Similarity::cosine);
    CHECK(parse_similarity("euclidean") == Similarity::euclidean);
    CHECK(std::string(to_string(Similarity::cosine)) == "cosine");
    CHECK_THROWS_AS(parse_similarity("manhattan"), ValidationError);
}

TEST_CASE("projection applies W*f + b") {
    DeviseParams p;
    p.W = {{0, 0, 0}, {0, 0, 0}};
    p.b = {0.4, -0.2};
    CHECK(devise_project({1, 2, 3}, p) == Vec{0.4, -0.2});

    DeviseParams id3;
    id3.W = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    id3.b = {0, 0, 0};
    const Vec f = {0.5, -1.5, 2.0};
    CHECK(devise_project(f, id3) == f);

    const DeviseParams r = init_devise(4, 6, 1.0, 31);
    Vec x(6);
    Rng rng = make_rng(8);
    for (double& v : x) v = uniform_real(rng, -2, 2);
    const Vec g = devise_project(x, r);
    for (int i = 0; i < 4; ++i) {
        double acc = r.b[static_cast<std::size_t>(i)];
        for (int j = 0; j < 6; ++j)
            acc += r.W[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                   x[static_cast<std::size_t>(j)];
        CHECK(g[static_cast<std::size_t>(i)] == doctest::Approx(acc).epsilon(1e-15));
    }
    CHECK_THROWS_AS(devise_project({1, 2}, r), ValidationError);
}

TEST_CASE("projection parameter validation and initialization") {
    DeviseParams p;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.W = {{1, 2}, {3}};
    p.b = {0, 0};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.W = {{1, 2}, {3, 4}};
    p.b = {0};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.b = {0, std::nan("")};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.b = {0, 0};
    p.margin = -1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.margin = 1.0;
    CHECK_NOTHROW(p.validate());

    const DeviseParams a = init_devise(3, 9, 0.5, 4);
    CHECK(a.margin == 0.5);
    CHECK(a.b == Vec(3, 0.0));
    const double bound = 1.0 / std::sqrt(9.0);
    for (const Vec& row : a.W)
        for (double x : row) CHECK(std::abs(x) <= bound);
    CHECK(init_devise(3, 9, 0.5, 4) == a);
    CHECK_FALSE(init_devise(3, 9, 0.5, 5) == a);
    CHECK_THROWS_AS(init_devise(0, 9, 0.5, 4), ValidationError);
}

TEST_CASE("projection files round trip exactly") {
    testutil::TempDir tmp;
    const DeviseParams p = init_devise(5, 7, 1.0, 99);
    save_devise(p, tmp.file("proj.json"));
    CHECK(load_devise(tmp.file("proj.json")) == p);

    std::ofstream(tmp.file("bad.json")) << "{\"margin\":1.0,\"b\":[0],\"W\":[[1],[2,3]]}";
    CHECK_THROWS_AS(load_devise(tmp.file("bad.json")), ValidationError);
    std::ofstream(tmp.file("bad2.json")) << "{\"margin\":1.0}";
    CHECK_THROWS_AS(load_devise(tmp.file("bad2.json")), ValidationError);
    CHECK_THROWS_AS(load_devise(tmp.file("absent.json")), ValidationError);
}

TEST_CASE("hinge loss gradients match finite differences") {
    const int sem = 4, feat = 6;
    DeviseParams params = init_devise(sem, feat, 1.0, 17);
    Rng rng = make_rng(5);
    auto rand_vec = [&](int n) {
        Vec v(static_cast<std::size_t>(n));
        for (double& x : v) x = uniform_real(rng, -1, 1);
        return v;
    };
    const Vec f = rand_vec(feat);
    const Vec gold = rand_vec(sem);
    const std::vector<Vec> negs_store = {rand_vec(sem), rand_vec(sem), rand_vec(sem)};
    std::vector<const Vec*> negs;
    for (const Vec& v : negs_store) negs.push_back(&v);

    auto loss_at = [&](const DeviseParams& p, const Vec& fx, const Vec& gx,
                       const std::vector<Vec>& nx) {
        std::vector<const Vec*> nptr;
        for (const Vec& v : nx) nptr.push_back(&v);
        std::vector<Vec> dW;
        Vec db;
        return devise_loss_grad(fx, p, gx, nptr, dW, db);
    };

    // All hinges must sit away from their kinks for the check to be valid.
    {
        const Vec g = devise_project(f, params);
        for (const Vec& v : negs_store) {
            const double h = params.margin - cosine(g, gold) + cosine(g, v);
            REQUIRE(std::abs(h) > 1e-3);
        }
    }

    std::vector<Vec> dW;
    Vec db, dfeature, dgold;
    std::vector<Vec> dnegs;
    devise_loss_grad(f, params, gold, negs, dW, db, &dfeature, &dgold, &dnegs);

    const double eps = 1e-6;
    auto check = [&](double analytic, double numeric) {
        const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
        CHECK(std::abs(analytic - numeric) / denom < 1e-4);
    };
    for (int i = 0; i < sem; ++i)
        for (int j = 0; j < feat; ++j) {
            DeviseParams plus = params, minus = params;
            plus.W[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += eps;
            minus.W[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -= eps;
            check(dW[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                  (loss_at(plus, f, gold, negs_store) - loss_at(minus, f, gold, negs_store)) /
                      (2 * eps));
        }
    for (int i = 0; i < sem; ++i) {
        DeviseParams plus = params, minus = params;
        plus.b[static_cast<std::size_t>(i)] += eps;
        minus.b[static_cast<std::size_t>(i)] -= eps;
        check(db[static_cast<std::size_t>(i)],
              (loss_at(plus, f, gold, negs_store) - loss_at(minus, f, gold, negs_store)) /
                  (2 * eps));
    }
    for (int j = 0; j < feat; ++j) {
        Vec fp = f, fm = f;
        fp[static_cast<std::size_t>(j)] += eps;
        fm[static_cast<std::size_t>(j)] -= eps;
        check(dfeature[static_cast<std::size_t>(j)],
              (loss_at(params, fp, gold, negs_store) - loss_at(params, fm, gold, negs_store)) /
                  (2 * eps));
    }
    for (int i = 0; i < sem; ++i) {
        Vec gp = gold, gm = gold;
        gp[static_cast<std::size_t>(i)] += eps;
        gm[static_cast<std::size_t>(i)] -= eps;
        check(dgold[static_cast<std::size_t>(i)],
              (loss_at(params, f, gp, negs_store) - loss_at(params, f, gm, negs_store)) /
                  (2 * eps));
    }
    for (std::size_t k = 0; k < negs_store.size(); ++k)
        for (int i = 0; i < sem; ++i) {
            std::vector<Vec> np = negs_store, nm = negs_store;
            np[k][static_cast<std::size_t>(i)] += eps;
            nm[k][static_cast<std::size_t>(i)] -= eps;
            check(dnegs[k][static_cast<std::size_t>(i)],
                  (loss_at(params, f, gold, np) - loss_at(params, f, gold, nm)) / (2 * eps));
        }
}

TEST_CASE("inactive hinges contribute neither loss nor gradient") {
    DeviseParams p;
    p.W = {{1, 0}, {0, 1}};
    p.b = {0, 0};
    p.margin = 0.0;
    const Vec f = {1.0, 0.0};  // g aligned with gold
    const Vec gold = {2.0, 0.0};
    const Vec neg = {0.0, 3.0};
    std::vector<Vec> dW;
    Vec db, dfeature;
    const double loss =
        devise_loss_grad(f, p, gold, {&neg}, dW, db, &dfeature);
    CHECK(loss == 0.0);
    CHECK(dW == std::vector<Vec>{{0, 0}, {0, 0}});
    CHECK(db == Vec{0, 0});
    CHECK(dfeature == Vec{0, 0});
}

TEST_CASE("ranking training separates a three-class toy corpus") {
    KnowledgeGraph kg = named_kg(4, 3);
    const std::vector<int> seen = {0, 1, 2};
    const SemanticSpace space = basis_space(SpaceKind::kg, kg, seen, 3);

    WordVectors wv(4);
    wv.insert("alpha", {1, 0, 0, 0});
    wv.insert("beta", {0, 1, 0, 0});
    wv.insert("gamma", {0, 0, 1, 0});
    wv.insert("said", {0, 0, 0, 1});

    std::vector<Instance> train;
    const char* kws[3] = {"alpha", "beta", "gamma"};
    for (int i = 0; i < 18; ++i) {
        const int cls = i % 3;
        train.push_back(sentence(
            {"e" + std::to_string(i), "said", kws[cls], "e" + std::to_string(i + 1)}, cls));
    }

    PcnnConfig enc;
    enc.word_dim = 4;
    enc.pos_dim = 2;
    enc.pos_clip = 4;
    enc.channels = 6;
    enc.dropout = 0.0;
    DeviseConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 40;
    cfg.negatives = 2;
    cfg.rng_seed = 12;

    std::vector<double> losses;
    const DeviseModel model = devise_train(train, wv, enc, cfg, space, kg, &losses);
    REQUIRE(losses.size() == 40);
    CHECK(losses.back() < losses.front());

    int correct = 0;
    for (const Instance& inst : train) {
        const Vec f = pcnn_forward(inst, wv, model.trunk, false);
        const Vec g = devise_project(f, model.proj);
        const Prediction pred = predict(0, inst.relation, g, space, seen, kg,
                                        Similarity::cosine);
        correct += pred.ranking.front().first == inst.relation;
    }
    CHECK(correct >= 17);  // >= 95% of 18

    CHECK(model.trunk.n_classes == 0);
    std::vector<double> again;
    CHECK(devise_train(train, wv, enc, cfg, space, kg, &again).proj == model.proj);
    DeviseConfig other = cfg;
    other.rng_seed = 13;
    CHECK_FALSE(devise_train(train, wv, enc, other, space, kg).proj == model.proj);

    CHECK_THROWS_AS(devise_train({}, wv, enc, cfg, space, kg), ValidationError);
    std::vector<Instance> one_class(train.begin(), train.begin() + 3);
    for (Instance& inst : one_class) inst.relation = 0;
    CHECK_THROWS_AS(devise_train(one_class, wv, enc, cfg, space, kg), ValidationError);
    const SemanticSpace partial = basis_space(SpaceKind::kg, kg, {0, 1}, 3);
    CHECK_THROWS_AS(devise_train(train, wv, enc, cfg, partial, kg), ValidationError);
}

TEST_CASE("joint training updates the space combination") {
    KnowledgeGraph kg = named_kg(4, 3);
    const std::vector<int> seen = {0, 1, 2};
    const SemanticSpace kg_space = basis_space(SpaceKind::kg, kg, seen, 3);
    SemanticSpace wd_space(SpaceKind::wd);
    for (int r : seen) {
        Vec v(2, 0.25);
        v[static_cast<std::size_t>(r % 2)] += 0.5 * r + 0.1;
        wd_space.set(kg.relations().name_of(r), std::move(v));
    }

    WordVectors wv(4);
    wv.insert("alpha", {1, 0, 0, 0});
    wv.insert("beta", {0, 1, 0, 0});
    wv.insert("gamma", {0, 0, 1, 0});
    wv.insert("said", {0, 0, 0, 1});
    std::vector<Instance> train;
    const char* kws[3] = {"alpha", "beta", "gamma"};
    for (int i = 0; i < 18; ++i) {
        const int cls = i % 3;
        train.push_back(sentence({"x", "said", kws[cls], "y"}, cls));
    }

    PcnnConfig enc;
    enc.word_dim = 4;
    enc.pos_dim = 2;
    enc.pos_clip = 4;
    enc.channels = 6;
    enc.dropout = 0.0;
    DeviseConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 30;
    cfg.negatives = 2;
    cfg.rng_seed = 21;

    const CombineParams start = init_combine_params(4, 5, 77);
    const DeviseCombinedModel model = devise_train_combined(
        train, wv, enc, cfg, SpaceKind::kw, kg_space, wd_space, start, kg);

    CHECK_FALSE(model.combine == start);
    CHECK(model.space.kind() == SpaceKind::kw);
    CHECK(model.space == combine_concat_linear(kg_space, wd_space, model.combine));

    int correct = 0;
    for (const Instance& inst : train) {
        const Vec f = pcnn_forward(inst, wv, model.trunk, false);
        const Vec g = devise_project(f, model.proj);
        const Prediction pred =
            predict(0, inst.relation, g, model.space, seen, kg, Similarity::cosine);
        correct += pred.ranking.front().first == inst.relation;
    }
    CHECK(correct >= 17);

    const DeviseCombinedModel rerun = devise_train_combined(
        train, wv, enc, cfg, SpaceKind::kw, kg_space, wd_space, start, kg);
    CHECK(rerun.combine == model.combine);
    CHECK(rerun.proj == model.proj);

    CHECK_THROWS_AS(devise_train_combined(train, wv, enc, cfg, SpaceKind::kr, kg_space,
                                          wd_space, start, kg),
                    ValidationError);
    CHECK_THROWS_AS(devise_train_combined(train, wv, enc, cfg, SpaceKind::rw, kg_space,
                                          wd_space, start, kg),
                    ValidationError);
    const CombineParams wrong = init_combine_params(4, 7, 77);
    CHECK_THROWS_AS(devise_train_combined(train, wv, enc, cfg, SpaceKind::kw, kg_space,
                                          wd_space, wrong, kg),
                    ValidationError);
}

TEST_CASE("probability-weighted projection sums the top vectors") {
    KnowledgeGraph kg = named_kg(4, 4);
    SemanticSpace space(SpaceKind::kg);
    space.set("r00", {1, 2});
    space.set("r01", {1, 0});
    space.set("r02", {0, 1});
    space.set("r03", {1, 1});

    CHECK(conse_project({{0, 0.8}}, space, kg) == Vec{0.8, 1.6});

    const Vec g = conse_project({{1, 0.5}, {2, 0.3}, {3, 0.2}}, space, kg);
    CHECK(g[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-15));

    // Reconstruction from the known weights is exact.
    Vec recon(2, 0.0);
    axpy(0.5, space.require("r01"), recon);
    axpy(0.3, space.require("r02"), recon);
    axpy(0.2, space.require("r03"), recon);
    CHECK(norm2(sub(g, recon)) < 1e-12);

    // Scaling all probabilities scales the projection linearly.
    const Vec g3 = conse_project({{1, 1.5}, {2, 0.9}, {3, 0.6}}, space, kg);
    for (int i = 0; i < 2; ++i)
        CHECK(g3[static_cast<std::size_t>(i)] ==
              doctest::Approx(3.0 * g[static_cast<std::size_t>(i)]).epsilon(1e-12));

    // Renormalized weights sum to one.
    const Vec gn = conse_project({{1, 1.5}, {2, 0.9}, {3, 0.6}}, space, kg, true);
    for (int i = 0; i < 2; ++i)
        CHECK(gn[static_cast<std::size_t>(i)] ==
              doctest::Approx(g[static_cast<std::size_t>(i)]).epsilon(1e-12));

    CHECK_THROWS_AS(conse_project({}, space, kg), ValidationError);
    KnowledgeGraph wide = named_kg(4, 6);
    CHECK_THROWS_AS(conse_project({{5, 1.0}}, space, wide), ValidationError);
    CHECK_THROWS_AS(conse_project({{0, -0.1}}, space, kg), ValidationError);
    CHECK_THROWS_AS(conse_project({{0, 0.0}}, space, kg, true), ComputeError);
}

TEST_CASE("candidate filtering reports uncovered unseen relations") {
    KnowledgeGraph kg = named_kg(4, 5);
    SemanticSpace space(SpaceKind::rl);
    space.set("r01", {1, 0});
    space.set("r03", {0, 1});
    std::vector<int> excluded;
    const std::vector<int> cands = covered_candidates(space, {3, 1, 4, 2}, kg, &excluded);
    CHECK(cands == std::vector<int>{1, 3});
    CHECK(excluded == std::vector<int>{2, 4});
}

TEST_CASE("prediction ranks by similarity with id tie-breaks") {
    KnowledgeGraph kg = named_kg(4, 4);
    SemanticSpace space(SpaceKind::kg);
    space.set("r00", {1, 0});
    space.set("r01", {0, 1});
    space.set("r02", {1, 1});
    const std::vector<int> cands = {0, 1, 2};

    const Prediction self = predict(7, 0, {2, 0}, space, cands, kg, Similarity::cosine);
    CHECK(self.id == 7);
    CHECK(self.gold == 0);
    CHECK(self.ranking.front().first == 0);
    CHECK(self.ranking.front().second == doctest::Approx(1.0).epsilon(1e-12));

    // Equidistant candidates fall back to id order; euclidean scores are
    // negated distances.
    const Prediction tie = predict(0, 0, {0.5, 0.5}, space, {0, 1}, kg,
                                   Similarity::euclidean);
    CHECK(tie.ranking[0].first == 0);
    CHECK(tie.ranking[1].first == 1);
    CHECK(tie.ranking[0].second == tie.ranking[1].second);
    CHECK(tie.ranking[0].second < 0.0);

    CHECK_THROWS_AS(predict(0, 0, {0, 0}, space, cands, kg, Similarity::cosine),
                    ComputeError);
    CHECK_NOTHROW(predict(0, 0, {0, 0}, space, cands, kg, Similarity::euclidean));
    CHECK_THROWS_AS(predict(0, 0, {1, 2, 3}, space, cands, kg, Similarity::cosine),
                    ValidationError);
}

TEST_CASE("prediction agrees with a naive pairwise sort") {
    KnowledgeGraph kg = named_kg(4, 8);
    Rng rng = make_rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        SemanticSpace space(SpaceKind::kg);
        std::vector<int> cands;
        for (int r = 0; r < 8; ++r) {
            Vec v(3);
            for (double& x : v) x = uniform_real(rng, -1, 1);
            space.set(kg.relations().name_of(r), std::move(v));
            cands.push_back(r);
        }
        Vec g(3);
        for (double& x : g) x = uniform_real(rng, -1, 1);
        const Similarity sim = trial % 2 ? Similarity::cosine : Similarity::euclidean;
        const Prediction pred = predict(trial, 0, g, space, cands, kg, sim);

        std::vector<std::pair<int, double>> naive;
        for (int r : cands) {
            const Vec& e = space.require(kg.relations().name_of(r));
            naive.emplace_back(r, sim == Similarity::cosine ? cosine(g, e)
                                                            : -euclidean(g, e));
        }
        std::stable_sort(naive.begin(), naive.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        CHECK(pred.ranking == naive);
    }
}

TEST_CASE("cosine ranking is invariant to positive rescaling") {
    KnowledgeGraph kg = named_kg(4, 6);
    Rng rng = make_rng(3);
    SemanticSpace space(SpaceKind::kg);
    std::vector<int> cands;
    for (int r = 0; r < 6; ++r) {
        Vec v(4);
        for (double& x : v) x = uniform_real(rng, -1, 1);
        space.set(kg.relations().name_of(r), std::move(v));
        cands.push_back(r);
    }
    Vec g(4);
    for (double& x : g) x = uniform_real(rng, -1, 1);
    const Prediction base = predict(0, 0, g, space, cands, kg, Similarity::cosine);
    for (double c : {0.1, 3.7}) {
        Vec gs = g;
        scale(gs, c);
        const Prediction scaled = predict(0, 0, gs, space, cands, kg, Similarity::cosine);
        for (std::size_t i = 0; i < base.ranking.size(); ++i)
            CHECK(scaled.ranking[i].first == base.ranking[i].first);
    }
}

TEST_CASE("evaluation computes hits and rank-1 precision/recall") {
    auto pred = [](int id, int gold, std::vector<std::pair<int, double>> ranking) {
        Prediction p;
        p.id = id;
        p.gold = gold;
        p.ranking = std::move(ranking);
        return p;
    };

    // Perfect predictor.
    std::vector<Prediction> perfect;
    for (int i = 0; i < 4; ++i)
        perfect.push_back(pred(i, i % 2, {{i % 2, 0.9}, {1 - i % 2, 0.1}}));
    EvalReport r = evaluate(perfect);
    CHECK(r.hit1 == 1.0);
    CHECK(r.hit2 == 1.0);
    CHECK(r.hit5 == 1.0);
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.per_relation.at(0).f1 == 1.0);
    CHECK(r.per_relation.at(0).support == 2);

    // Gold always at rank 2.
    std::vector<Prediction> second;
    for (int i = 0; i < 3; ++i) second.push_back(pred(i, 0, {{1, 0.9}, {0, 0.1}}));
    r = evaluate(second);
    CHECK(r.hit1 == 0.0);
    CHECK(r.hit2 == 1.0);
    CHECK(r.hit5 == 1.0);

    // Hand-computed mixed case: gold 0 twice (one right), gold 1 once
    // (assigned 0).
    std::vector<Prediction> mixed = {
        pred(0, 0, {{0, 0.9}, {1, 0.1}}),
        pred(1, 0, {{1, 0.8}, {0, 0.2}}),
        pred(2, 1, {{0, 0.7}, {1, 0.3}}),
    };
    r = evaluate(mixed);
    CHECK(r.hit1 == doctest::Approx(1.0 / 3.0));
    CHECK(r.per_relation.at(0).precision == 0.5);  // assigned twice, right once
    CHECK(r.per_relation.at(0).recall == 0.5);     // two golds, one hit
    CHECK(r.per_relation.at(0).f1 == 0.5);
    CHECK(r.per_relation.at(1).precision == 0.0);
    CHECK(r.per_relation.at(1).recall == 0.0);
    CHECK(r.per_relation.at(1).f1 == 0.0);
    CHECK(r.macro_f1 == doctest::Approx(0.25));

    // An empty ranking counts as a miss everywhere.
    r = evaluate({pred(0, 0, {})});
    CHECK(r.hit1 == 0.0);
    CHECK(r.hit5 == 0.0);
    CHECK(r.per_relation.at(0).recall == 0.0);

    CHECK_THROWS_AS(evaluate({}), ValidationError);
    Prediction nogold;
    CHECK_THROWS_AS(evaluate({nogold}), ValidationError);
}

TEST_CASE("hit rates are monotone and a uniform ranker sits near chance") {
    Rng rng = make_rng(1234);
    std::vector<Prediction> preds;
    for (int i = 0; i < 1000; ++i) {
        Prediction p;
        p.id = i;
        p.gold = static_cast<int>(uniform_int(rng, 5));
        std::vector<int> order = {0, 1, 2, 3, 4};
        for (std::size_t j = order.size(); j > 1; --j)
            std::swap(order[j - 1], order[uniform_int(rng, j)]);
        for (std::size_t j = 0; j < order.size(); ++j)
            p.ranking.emplace_back(order[j], 1.0 - 0.1 * static_cast<double>(j));
        preds.push_back(std::move(p));
    }
    const EvalReport r = evaluate(preds);
    CHECK(r.hit1 <= r.hit2);
    CHECK(r.hit2 <= r.hit5);
    const double sigma = std::sqrt(0.2 * 0.8 / 1000.0);
    CHECK(std::abs(r.hit1 - 0.2) <= 3.0 * sigma);
    CHECK(r.hit5 == 1.0);
}

TEST_CASE("influence matrix averages probability mass per gold column") {
    InfluenceRecord a{3, {{0, 1.0}}};
    InfluenceMatrix m = influence_matrix({a}, {0, 1}, {3, 4});
    CHECK(m.seen == std::vector<int>{0, 1});
    CHECK(m.unseen == std::vector<int>{3, 4});
    CHECK(m.cells[0][0] == 1.0);
    CHECK(m.cells[0][1] == 0.0);
    CHECK(m.cells[1][0] == 0.0);

    // Two instances with the same gold average their masses.
    InfluenceRecord b{3, {{0, 0.4}, {1, 0.6}}};
    m = influence_matrix({a, b}, {0, 1}, {3, 4});
    CHECK(m.cells[0][0] == doctest::Approx(0.7));
    CHECK(m.cells[1][0] == doctest::Approx(0.3));
    // Raw softmax mass keeps every column total at or below one.
    CHECK(m.cells[0][0] + m.cells[1][0] <= 1.0 + 1e-9);

    CHECK_THROWS_AS(influence_matrix({{9, {{0, 1.0}}}}, {0, 1}, {3, 4}),
                    ValidationError);
    CHECK_THROWS_AS(influence_matrix({{3, {{7, 1.0}}}}, {0, 1}, {3, 4}),
                    ValidationError);
    CHECK_THROWS_AS(influence_matrix({}, {0, 0}, {3}), ValidationError);
}

TEST_CASE("prediction files round trip exactly") {
    testutil::TempDir tmp;
    KnowledgeGraph kg = named_kg(4, 6);
    std::vector<Prediction> preds;
    Rng rng = make_rng(6);
    for (int i = 0; i < 5; ++i) {
        Prediction p;
        p.id = i;
        p.gold = static_cast<int>(uniform_int(rng, 6));
        std::vector<std::pair<int, double>> scored;
        for (int r = 0; r < 4; ++r) scored.emplace_back(r, uniform_real(rng, -1, 1));
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.second > b.second; });
        p.ranking = std::move(scored);
        preds.push_back(std::move(p));
    }
    const std::string path = tmp.file("preds.jsonl");
    save_predictions(preds, kg, path);
    CHECK(load_predictions(path, kg) == preds);

    auto reject = [&](const std::string& body) {
        std::ofstream(tmp.file("bad.jsonl")) << body;
        CHECK_THROWS_AS(load_predictions(tmp.file("bad.jsonl"), kg), ValidationError);
    };
    reject(R"({"id":0,"gold":"nope","ranking":[]})" "\n");
    reject(R"({"id":0,"gold":"r00","ranking":[["r01",0.1],["r02",0.5]]})" "\n");
    reject(R"({"id":0,"gold":"r00","ranking":[["r01",0.5],["r01",0.1]]})" "\n");
    reject(R"({"id":0,"gold":"r00","ranking":[["r01"]]})" "\n");
    reject("garbage\n");
}

TEST_CASE("metrics and influence reports serialize with names") {
    testutil::TempDir tmp;
    KnowledgeGraph kg = named_kg(4, 6);
    Prediction p;
    p.id = 0;
    p.gold = 4;
    p.ranking = {{4, 0.9}, {5, 0.1}};
    const EvalReport report = evaluate({p});
    save_metrics(report, kg, tmp.file("metrics.json"));
    const auto j = parse_json_file(tmp.file("metrics.json"));
    CHECK(j.at("hit").at("1").get<double>() == 1.0);
    CHECK(j.at("hit").at("5").get<double>() == 1.0);
    CHECK(j.at("per_relation").at("r04").at("f1").get<double>() == 1.0);
    CHECK(j.at("per_relation").at("r04").at("support").get<int>() == 1);
    CHECK(j.at("macro_f1").get<double>() == 1.0);

    InfluenceMatrix m = influence_matrix({{4, {{0, 0.25}, {1, 0.75}}}}, {0, 1}, {4, 5});
    save_influence_tsv(m, kg, tmp.file("influence.tsv"));
    std::ifstream in(tmp.file("influence.tsv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "relation\tr04\tr05");
    std::getline(in, line);
    CHECK(line == "r00\t0.25\t0");
    std::getline(in, line);
    CHECK(line == "r01\t0.75\t0");
}

TEST_SUITE_END();
