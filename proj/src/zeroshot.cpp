#include "zsrc/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zsrc/errors.hpp"
#include "zsrc/io_util.hpp"

namespace zsrc {

const char* to_string(Similarity sim) {
    return sim == Similarity::cosine ? "cosine" : "euclidean";
}

Similarity parse_similarity(const std::string& s) {
    if (s == "cosine") return Similarity::cosine;
    if (s == "euclidean") return Similarity::euclidean;
    throw ValidationError("unknown similarity: " + s);
}

void DeviseParams::validate() const {
    if (W.empty() || W.front().empty())
        throw ValidationError("projection: empty weight matrix");
    for (const Vec& row : W) {
        if (row.size() != W.front().size())
            throw ValidationError("projection: ragged weight matrix");
        if (!all_finite(row)) throw ValidationError("projection: non-finite weights");
    }
    if (b.size() != W.size())
        throw ValidationError("projection: bias length does not match the output dim");
    if (!all_finite(b)) throw ValidationError("projection: non-finite bias");
    if (!std::isfinite(margin) || margin < 0.0)
        throw ValidationError("projection: margin must be finite and non-negative");
}

DeviseParams init_devise(int sem_dim, int feat_dim, double margin, std::uint64_t seed) {
    if (sem_dim <= 0 || feat_dim <= 0)
        throw ValidationError("projection: dimensions must be positive");
    DeviseParams p;
    p.margin = margin;
    Rng rng = make_rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(feat_dim));
    p.W.assign(static_cast<std::size_t>(sem_dim), Vec(static_cast<std::size_t>(feat_dim)));
    for (Vec& row : p.W)
        for (double& x : row) x = uniform_real(rng, -bound, bound);
    p.b.assign(static_cast<std::size_t>(sem_dim), 0.0);
    p.validate();
    return p;
}

Vec devise_project(const Vec& f, const DeviseParams& params) {
    if (static_cast<int>(f.size()) != params.feat_dim())
        throw ValidationError("projection: feature dimension mismatch");
    Vec g(params.b);
    for (std::size_t i = 0; i < params.W.size(); ++i) g[i] += dot(params.W[i], f);
    return g;
}

void save_devise(const DeviseParams& params, const std::string& path) {
    params.validate();
    nlohmann::json j;
    j["margin"] = params.margin;
    j["b"] = params.b;
    j["W"] = params.W;
    write_file_atomic(path, j.dump(2) + "\n");
}

DeviseParams load_devise(const std::string& path) {
    const nlohmann::json j = parse_json_file(path);
    DeviseParams p;
    try {
        p.margin = j.at("margin").get<double>();
        p.b = j.at("b").get<Vec>();
        p.W = j.at("W").get<std::vector<Vec>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad projection file: " + e.what());
    }
    try {
        p.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return p;
}

void DeviseConfig::validate() const {
    if (!std::isfinite(margin) || margin < 0.0)
        throw ValidationError("devise: margin must be finite and non-negative");
    if (learning_rate <= 0.0) throw ValidationError("devise: learning rate must be positive");
    if (epochs < 0) throw ValidationError("devise: epochs must be >= 0");
    if (negatives <= 0) throw ValidationError("devise: negatives must be positive");
}

namespace {

struct CosParts {
    double ng, nv, c;
};

CosParts cos_parts(const Vec& g, const Vec& v) {
    CosParts p{norm2(g), norm2(v), 0.0};
    if (p.ng == 0.0 || p.nv == 0.0)
        throw ComputeError("cosine undefined for zero vector during projection");
    p.c = dot(g, v) / (p.ng * p.nv);
    return p;
}

// d cos(g, v)/dg scaled by alpha, into dg.
void add_dcos_wrt_g(const Vec& g, const Vec& v, const CosParts& p, double alpha, Vec& dg) {
    const double a1 = alpha / (p.ng * p.nv);
    const double a2 = -alpha * p.c / (p.ng * p.ng);
    for (std::size_t i = 0; i < g.size(); ++i) dg[i] += a1 * v[i] + a2 * g[i];
}

// d cos(g, v)/dv scaled by alpha, into dv.
void add_dcos_wrt_v(const Vec& g, const Vec& v, const CosParts& p, double alpha, Vec& dv) {
    const double a1 = alpha / (p.ng * p.nv);
    const double a2 = -alpha * p.c / (p.nv * p.nv);
    for (std::size_t i = 0; i < v.size(); ++i) dv[i] += a1 * g[i] + a2 * v[i];
}

void ensure_shape(std::vector<Vec>& m, int rows, int cols, const char* what) {
    if (m.empty()) m.assign(static_cast<std::size_t>(rows), Vec(static_cast<std::size_t>(cols), 0.0));
    if (static_cast<int>(m.size()) != rows ||
        static_cast<int>(m.front().size()) != cols)
        throw ValidationError(std::string(what) + ": gradient buffer has the wrong shape");
}

void ensure_len(Vec& v, int len, const char* what) {
    if (v.empty()) v.assign(static_cast<std::size_t>(len), 0.0);
    if (static_cast<int>(v.size()) != len)
        throw ValidationError(std::string(what) + ": gradient buffer has the wrong length");
}

}  // namespace

double devise_loss_grad(const Vec& f, const DeviseParams& params, const Vec& gold_vec,
                        const std::vector<const Vec*>& neg_vecs, std::vector<Vec>& dW,
                        Vec& db, Vec* dfeature, Vec* dgold, std::vector<Vec>* dnegs) {
    const int sem = params.sem_dim();
    const int feat = params.feat_dim();
    if (static_cast<int>(gold_vec.size()) != sem)
        throw ValidationError("devise: gold vector dimension mismatch");
    ensure_shape(dW, sem, feat, "devise");
    ensure_len(db, sem, "devise");
    if (dfeature) ensure_len(*dfeature, feat, "devise");
    if (dgold) ensure_len(*dgold, sem, "devise");
    if (dnegs && dnegs->empty())
        dnegs->assign(neg_vecs.size(), Vec(static_cast<std::size_t>(sem), 0.0));
    if (dnegs && dnegs->size() != neg_vecs.size())
        throw ValidationError("devise: negative gradient buffer count mismatch");

    const Vec g = devise_project(f, params);
    const CosParts pg = cos_parts(g, gold_vec);
    Vec dg(static_cast<std::size_t>(sem), 0.0);
    double loss = 0.0;
    for (std::size_t j = 0; j < neg_vecs.size(); ++j) {
        const Vec& v = *neg_vecs[j];
        if (static_cast<int>(v.size()) != sem)
            throw ValidationError("devise: negative vector dimension mismatch");
        const CosParts pv = cos_parts(g, v);
        const double hinge = params.margin - pg.c + pv.c;
        if (hinge <= 0.0) continue;
        loss += hinge;
        add_dcos_wrt_g(g, gold_vec, pg, -1.0, dg);
        add_dcos_wrt_g(g, v, pv, +1.0, dg);
        if (dgold) add_dcos_wrt_v(g, gold_vec, pg, -1.0, *dgold);
        if (dnegs) add_dcos_wrt_v(g, v, pv, +1.0, (*dnegs)[j]);
    }
    for (int i = 0; i < sem; ++i) {
        const double d = dg[static_cast<std::size_t>(i)];
        if (d == 0.0) continue;
        db[static_cast<std::size_t>(i)] += d;
        axpy(d, f, dW[static_cast<std::size_t>(i)]);
        if (dfeature) axpy(d, params.W[static_cast<std::size_t>(i)], *dfeature);
    }
    return loss;
}

namespace {

struct TrainSetup {
    LabelMap labels;
    std::vector<int> class_of;  // per instance
};

TrainSetup prepare_devise_train(const std::vector<Instance>& train, const WordVectors& wv,
                                const PcnnConfig& enc_cfg, const DeviseConfig& cfg) {
    enc_cfg.validate();
    cfg.validate();
    if (train.empty()) throw ValidationError("devise: empty training set");
    if (wv.dim() != enc_cfg.word_dim)
        throw ValidationError("devise: word vector dim != configured word_dim");
    std::set<int> rels;
    for (const Instance& inst : train) {
        validate_instance(inst);
        rels.insert(inst.relation);
    }
    if (rels.size() < 2)
        throw ValidationError("devise: need at least two seen relations for negatives");
    TrainSetup s;
    s.labels = LabelMap::from_relations({rels.begin(), rels.end()});
    s.class_of.resize(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        s.class_of[i] = s.labels.require_class(train[i].relation);
    return s;
}

int sample_wrong_class(Rng& rng, int n_classes, int gold) {
    int c;
    do {
        c = static_cast<int>(uniform_int(rng, static_cast<std::uint64_t>(n_classes)));
    } while (c == gold);
    return c;
}

}  // namespace

DeviseModel devise_train(const std::vector<Instance>& train, const WordVectors& wv,
                         const PcnnConfig& enc_cfg, const DeviseConfig& cfg,
                         const SemanticSpace& space, const KnowledgeGraph& kg,
                         std::vector<double>* epoch_loss) {
    TrainSetup setup = prepare_devise_train(train, wv, enc_cfg, cfg);
    const int n_classes = setup.labels.n_classes();
    std::vector<Vec> seen_vecs;
    for (int rel : setup.labels.class_to_rel)
        seen_vecs.push_back(space.require(kg.relations().name_of(rel)));

    DeviseModel model;
    model.labels = std::move(setup.labels);
    model.trunk = init_pcnn(enc_cfg, 0, derive_seed(cfg.rng_seed, "devise-trunk"));
    model.proj = init_devise(space.dim(), model.trunk.feat_dim(), cfg.margin,
                             derive_seed(cfg.rng_seed, "devise-proj"));
    Rng run = make_rng(derive_seed(cfg.rng_seed, "devise-train"));

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const int sem = model.proj.sem_dim();
    const int feat = model.proj.feat_dim();
    std::vector<Vec> dW;
    Vec db, dfeature;
    PcnnCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[uniform_int(run, i)]);
        double total = 0.0;
        for (std::size_t idx : order) {
            const Instance& inst = train[idx];
            const Vec f = pcnn_forward(inst, wv, model.trunk, true, &run, &cache);
            std::vector<const Vec*> negs;
            negs.reserve(static_cast<std::size_t>(cfg.negatives));
            for (int j = 0; j < cfg.negatives; ++j)
                negs.push_back(&seen_vecs[static_cast<std::size_t>(
                    sample_wrong_class(run, n_classes, setup.class_of[idx]))]);
            dW.assign(static_cast<std::size_t>(sem), Vec(static_cast<std::size_t>(feat), 0.0));
            db.assign(static_cast<std::size_t>(sem), 0.0);
            dfeature.assign(static_cast<std::size_t>(feat), 0.0);
            const double loss =
                devise_loss_grad(f, model.proj, seen_vecs[static_cast<std::size_t>(
                                     setup.class_of[idx])],
                                 negs, dW, db, &dfeature);
            total += loss;
            if (loss == 0.0) continue;
            PcnnParams tg(enc_cfg, 0);
            pcnn_backward(model.trunk, cache, dfeature, tg);
            axpy_params(-cfg.learning_rate, tg, model.trunk);
            for (int i = 0; i < sem; ++i)
                axpy(-cfg.learning_rate, dW[static_cast<std::size_t>(i)],
                     model.proj.W[static_cast<std::size_t>(i)]);
            axpy(-cfg.learning_rate, db, model.proj.b);
        }
        const double mean = total / static_cast<double>(train.size());
        if (!std::isfinite(mean))
            throw ComputeError("devise training diverged at epoch " + std::to_string(epoch));
        if (epoch_loss) epoch_loss->push_back(mean);
    }
    model.trunk.check_finite();
    model.proj.validate();
    return model;
}

DeviseCombinedModel devise_train_combined(const std::vector<Instance>& train,
                                          const WordVectors& wv, const PcnnConfig& enc_cfg,
                                          const DeviseConfig& cfg, SpaceKind kind,
                                          const SemanticSpace& space_a,
                                          const SemanticSpace& space_b,
                                          const CombineParams& init,
                                          const KnowledgeGraph& kg,
                                          std::vector<double>* epoch_loss) {
    if (kind != SpaceKind::kw && kind != SpaceKind::rw)
        throw ValidationError("joint space training only applies to the kw and rw kinds");
    const SpaceKind want_a = kind == SpaceKind::kw ? SpaceKind::kg : SpaceKind::rl;
    if (space_a.kind() != want_a || space_b.kind() != SpaceKind::wd)
        throw ValidationError(std::string("combined training for ") + to_string(kind) +
                              " needs spaces of kind " + to_string(want_a) + " and wd");
    init.validate();
    if (init.concat_dim() != space_a.dim() + space_b.dim())
        throw ValidationError("combination input dim does not match the two spaces");

    TrainSetup setup = prepare_devise_train(train, wv, enc_cfg, cfg);
    const int n_classes = setup.labels.n_classes();
    const int sem = init.out_dim();
    const int cdim = init.concat_dim();

    // Concats are fixed; the seen vectors are recomputed through the current
    // combination parameters every time they are used.
    std::vector<Vec> concats;
    for (int rel : setup.labels.class_to_rel) {
        const std::string& name = kg.relations().name_of(rel);
        Vec c = space_a.require(name);
        const Vec& tail = space_b.require(name);
        c.insert(c.end(), tail.begin(), tail.end());
        concats.push_back(std::move(c));
    }

    DeviseCombinedModel model;
    model.combine = init;
    model.labels = std::move(setup.labels);
    model.trunk = init_pcnn(enc_cfg, 0, derive_seed(cfg.rng_seed, "devise-trunk"));
    model.proj = init_devise(sem, model.trunk.feat_dim(), cfg.margin,
                             derive_seed(cfg.rng_seed, "devise-proj"));
    Rng run = make_rng(derive_seed(cfg.rng_seed, "devise-train"));

    auto combined = [&](int cls) {
        const Vec& c = concats[static_cast<std::size_t>(cls)];
        Vec out(static_cast<std::size_t>(sem));
        for (int i = 0; i < sem; ++i) {
            double acc = 0.0;
            const Vec& row = model.combine.w2[static_cast<std::size_t>(i)];
            for (int j = 0; j < cdim; ++j)
                acc += row[static_cast<std::size_t>(j)] *
                       (c[static_cast<std::size_t>(j)] + model.combine.b2[static_cast<std::size_t>(j)]);
            out[static_cast<std::size_t>(i)] = acc;
        }
        return out;
    };

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const int feat = model.proj.feat_dim();
    std::vector<Vec> dW, dnegs, gw2;
    Vec db, dfeature, dgold, gb2;
    PcnnCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[uniform_int(run, i)]);
        double total = 0.0;
        for (std::size_t idx : order) {
            const Instance& inst = train[idx];
            const Vec f = pcnn_forward(inst, wv, model.trunk, true, &run, &cache);
            const int gold_cls = setup.class_of[idx];
            std::vector<int> neg_cls(static_cast<std::size_t>(cfg.negatives));
            for (int j = 0; j < cfg.negatives; ++j)
                neg_cls[static_cast<std::size_t>(j)] =
                    sample_wrong_class(run, n_classes, gold_cls);

            const Vec gold_vec = combined(gold_cls);
            std::vector<Vec> neg_store;
            neg_store.reserve(neg_cls.size());
            for (int c : neg_cls) neg_store.push_back(combined(c));
            std::vector<const Vec*> negs;
            for (const Vec& v : neg_store) negs.push_back(&v);

            dW.assign(static_cast<std::size_t>(sem), Vec(static_cast<std::size_t>(feat), 0.0));
            db.assign(static_cast<std::size_t>(sem), 0.0);
            dfeature.assign(static_cast<std::size_t>(feat), 0.0);
            dgold.assign(static_cast<std::size_t>(sem), 0.0);
            dnegs.assign(neg_cls.size(), Vec(static_cast<std::size_t>(sem), 0.0));
            const double loss =
                devise_loss_grad(f, model.proj, gold_vec, negs, dW, db, &dfeature, &dgold,
                                 &dnegs);
            total += loss;
            if (loss == 0.0) continue;

            gw2.assign(static_cast<std::size_t>(sem), Vec(static_cast<std::size_t>(cdim), 0.0));
            gb2.assign(static_cast<std::size_t>(cdim), 0.0);
            auto add_combine_grad = [&](const Vec& du, int cls) {
                const Vec& c = concats[static_cast<std::size_t>(cls)];
                for (int i = 0; i < sem; ++i) {
                    const double d = du[static_cast<std::size_t>(i)];
                    if (d == 0.0) continue;
                    Vec& grow = gw2[static_cast<std::size_t>(i)];
                    for (int j = 0; j < cdim; ++j)
                        grow[static_cast<std::size_t>(j)] +=
                            d * (c[static_cast<std::size_t>(j)] +
                                 model.combine.b2[static_cast<std::size_t>(j)]);
                    axpy(d, model.combine.w2[static_cast<std::size_t>(i)], gb2);
                }
            };
            add_combine_grad(dgold, gold_cls);
            for (std::size_t j = 0; j < neg_cls.size(); ++j)
                add_combine_grad(dnegs[j], neg_cls[j]);

            PcnnParams tg(enc_cfg, 0);
            pcnn_backward(model.trunk, cache, dfeature, tg);
            axpy_params(-cfg.learning_rate, tg, model.trunk);
            for (int i = 0; i < sem; ++i) {
                axpy(-cfg.learning_rate, dW[static_cast<std::size_t>(i)],
                     model.proj.W[static_cast<std::size_t>(i)]);
                axpy(-cfg.learning_rate, gw2[static_cast<std::size_t>(i)],
                     model.combine.w2[static_cast<std::size_t>(i)]);
            }
            axpy(-cfg.learning_rate, db, model.proj.b);
            axpy(-cfg.learning_rate, gb2, model.combine.b2);
        }
        const double mean = total / static_cast<double>(train.size());
        if (!std::isfinite(mean))
            throw ComputeError("devise training diverged at epoch " + std::to_string(epoch));
        if (epoch_loss) epoch_loss->push_back(mean);
    }
    model.trunk.check_finite();
    model.proj.validate();
    model.combine.validate();
    model.space = combine_concat_linear(space_a, space_b, model.combine);
    return model;
}

Vec conse_project(const std::vector<std::pair<int, double>>& topT,
                  const SemanticSpace& space, const KnowledgeGraph& kg,
                  bool renormalize) {
    if (topT.empty())
        throw ValidationError("projection needs at least one seen relation");
    double psum = 0.0;
    for (const auto& [rel, p] : topT) {
        (void)rel;
        if (!std::isfinite(p) || p < 0.0)
            throw ValidationError("projection probabilities must be finite and >= 0");
        psum += p;
    }
    if (renormalize && psum <= 0.0)
        throw ComputeError("cannot renormalize zero probability mass");
    Vec g(static_cast<std::size_t>(space.dim()), 0.0);
    for (const auto& [rel, p] : topT) {
        const Vec& e = space.require(kg.relations().name_of(rel));
        axpy(renormalize ? p / psum : p, e, g);
    }
    return g;
}

std::vector<int> covered_candidates(const SemanticSpace& space,
                                    const std::vector<int>& unseen,
                                    const KnowledgeGraph& kg, std::vector<int>* excluded) {
    std::vector<int> sorted = unseen;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<int> out;
    for (int rel : sorted) {
        if (space.covers(kg.relations().name_of(rel)))
            out.push_back(rel);
        else if (excluded)
            excluded->push_back(rel);
    }
    return out;
}

Prediction predict(int id, int gold, const Vec& g, const SemanticSpace& space,
                   const std::vector<int>& candidates, const KnowledgeGraph& kg,
                   Similarity sim) {
    if (static_cast<int>(g.size()) != space.dim())
        throw ValidationError("projection dimension does not match the space");
    if (sim == Similarity::cosine && is_zero(g))
        throw ComputeError("zero projection vector has no cosine similarity");
    Prediction out;
    out.id = id;
    out.gold = gold;
    out.ranking.reserve(candidates.size());
    for (int rel : candidates) {
        const Vec& e = space.require(kg.relations().name_of(rel));
        const double score =
            sim == Similarity::cosine ? cosine(g, e) : -euclidean(g, e);
        out.ranking.emplace_back(rel, score);
    }
    std::sort(out.ranking.begin(), out.ranking.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

EvalReport evaluate(const std::vector<Prediction>& preds) {
    if (preds.empty()) throw ValidationError("no predictions to evaluate");
    EvalReport report;
    std::map<int, int> gold_count, assigned_count, correct;
    int h1 = 0, h2 = 0, h5 = 0;
    for (const Prediction& p : preds) {
        if (p.gold < 0) throw ValidationError("prediction without a gold label");
        gold_count[p.gold] += 1;
        int rank = -1;
        for (std::size_t i = 0; i < p.ranking.size(); ++i)
            if (p.ranking[i].first == p.gold) {
                rank = static_cast<int>(i);
                break;
            }
        if (rank >= 0 && rank < 1) ++h1;
        if (rank >= 0 && rank < 2) ++h2;
        if (rank >= 0 && rank < 5) ++h5;
        if (!p.ranking.empty()) {
            const int assigned = p.ranking.front().first;
            assigned_count[assigned] += 1;
            if (assigned == p.gold) correct[p.gold] += 1;
        }
    }
    const double n = static_cast<double>(preds.size());
    report.hit1 = h1 / n;
    report.hit2 = h2 / n;
    report.hit5 = h5 / n;
    std::set<int> rels;
    for (const auto& [r, c] : gold_count) {
        (void)c;
        rels.insert(r);
    }
    for (const auto& [r, c] : assigned_count) {
        (void)c;
        rels.insert(r);
    }
    double f1_sum = 0.0;
    for (int r : rels) {
        RelationScore s;
        const int tp = correct.count(r) ? correct.at(r) : 0;
        const int assigned = assigned_count.count(r) ? assigned_count.at(r) : 0;
        const int gold = gold_count.count(r) ? gold_count.at(r) : 0;
        s.precision = assigned > 0 ? static_cast<double>(tp) / assigned : 0.0;
        s.recall = gold > 0 ? static_cast<double>(tp) / gold : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
        s.support = gold;
        f1_sum += s.f1;
        report.per_relation.emplace(r, s);
    }
    report.macro_f1 = f1_sum / static_cast<double>(rels.size());
    return report;
}

InfluenceMatrix influence_matrix(const std::vector<InfluenceRecord>& records,
                                 std::vector<int> seen, std::vector<int> unseen) {
    std::sort(seen.begin(), seen.end());
    std::sort(unseen.begin(), unseen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end() ||
        std::adjacent_find(unseen.begin(), unseen.end()) != unseen.end())
        throw ValidationError("influence: duplicate relation id");
    std::map<int, int> seen_col, unseen_col;
    for (std::size_t i = 0; i < seen.size(); ++i) seen_col[seen[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < unseen.size(); ++i)
        unseen_col[unseen[i]] = static_cast<int>(i);

    InfluenceMatrix m;
    m.seen = std::move(seen);
    m.unseen = std::move(unseen);
    m.cells.assign(m.seen.size(), Vec(m.unseen.size(), 0.0));
    std::vector<int> counts(m.unseen.size(), 0);
    for (const InfluenceRecord& rec : records) {
        auto u = unseen_col.find(rec.gold);
        if (u == unseen_col.end())
            throw ValidationError("influence: gold relation outside the unseen set");
        counts[static_cast<std::size_t>(u->second)] += 1;
        for (const auto& [rel, p] : rec.top) {
            auto s = seen_col.find(rel);
            if (s == seen_col.end())
                throw ValidationError("influence: predicted relation outside the seen set");
            if (!std::isfinite(p) || p < 0.0)
                throw ValidationError("influence: probabilities must be finite and >= 0");
            m.cells[static_cast<std::size_t>(s->second)][static_cast<std::size_t>(u->second)] += p;
        }
    }
    for (std::size_t u = 0; u < m.unseen.size(); ++u) {
        if (counts[u] == 0) continue;
        for (std::size_t s = 0; s < m.seen.size(); ++s)
            m.cells[s][u] /= static_cast<double>(counts[u]);
    }
    return m;
}

void save_predictions(const std::vector<Prediction>& preds, const KnowledgeGraph& kg,
                      const std::string& path) {
    std::ostringstream out;
    for (const Prediction& p : preds) {
        if (p.gold < 0) throw ValidationError("prediction without a gold label");
        nlohmann::json j;
        j["id"] = p.id;
        j["gold"] = kg.relations().name_of(p.gold);
        auto ranking = nlohmann::json::array();
        for (const auto& [rel, score] : p.ranking)
            ranking.push_back({kg.relations().name_of(rel), score});
        j["ranking"] = std::move(ranking);
        out << j.dump() << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<Prediction> load_predictions(const std::string& path,
                                         const KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open predictions file: " + path);
    std::vector<Prediction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno) + ": ";
        try {
            const auto j = nlohmann::json::parse(line);
            Prediction p;
            p.id = j.at("id").get<int>();
            p.gold = kg.relations().require(j.at("gold").get<std::string>());
            std::set<int> dedup;
            double prev = std::numeric_limits<double>::infinity();
            for (const auto& entry : j.at("ranking")) {
                if (!entry.is_array() || entry.size() != 2)
                    throw ValidationError("ranking entries must be [name, score]");
                const int rel = kg.relations().require(entry[0].get<std::string>());
                const double score = entry[1].get<double>();
                if (!std::isfinite(score)) throw ValidationError("non-finite score");
                if (score > prev) throw ValidationError("ranking scores must not increase");
                if (!dedup.insert(rel).second)
                    throw ValidationError("relation repeated in ranking");
                prev = score;
                p.ranking.emplace_back(rel, score);
            }
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
    }
    return out;
}

void save_metrics(const EvalReport& report, const KnowledgeGraph& kg,
                  const std::string& path) {
    nlohmann::json j;
    j["hit"] = {{"1", report.hit1}, {"2", report.hit2}, {"5", report.hit5}};
    auto per = nlohmann::json::object();
    for (const auto& [rel, s] : report.per_relation)
        per[kg.relations().name_of(rel)] = {{"precision", s.precision},
                                            {"recall", s.recall},
                                            {"f1", s.f1},
                                            {"support", s.support}};
    j["per_relation"] = std::move(per);
    j["macro_f1"] = report.macro_f1;
    write_file_atomic(path, j.dump(2) + "\n");
}

void save_influence_tsv(const InfluenceMatrix& m, const KnowledgeGraph& kg,
                        const std::string& path) {
    std::ostringstream out;
    out << "relation";
    for (int rel : m.unseen) out << '\t' << kg.relations().name_of(rel);
    out << '\n';
    for (std::size_t s = 0; s < m.seen.size(); ++s) {
        out << kg.relations().name_of(m.seen[s]);
        for (double v : m.cells[s]) out << '\t' << format_double(v);
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

}  // namespace zsrc
