#include "zsrc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "zsrc/errors.hpp"
#include "zsrc/rng.hpp"
#include "zsrc/semspace.hpp"
#include "zsrc/vec.hpp"

namespace zsrc {

int pattern_body_len(const std::string& pattern) {
    if (pattern == "copy" || pattern == "inverse") return 1;
    if (pattern == "chain" || pattern == "shared_subject" ||
        pattern == "shared_object" || pattern == "reverse_chain")
        return 2;
    throw ValidationError("unknown planted rule pattern: " + pattern);
}

void SynthConfig::validate() const {
    if (n_entities < 3)
        throw ValidationError("synth: need at least 3 entities for chain groundings");
    if (n_base_relations < 1)
        throw ValidationError("synth: need at least one base relation");
    if (facts_per_relation < 1)
        throw ValidationError("synth: facts_per_relation must be positive");
    if (!(train_fraction > 0.0) || train_fraction > 1.0)
        throw ValidationError("synth: train_fraction must lie in (0, 1]");
    if (word_dim < 1) throw ValidationError("synth: word_dim must be positive");
    if (!(word_noise >= 0.0) || word_noise >= 0.5)
        throw ValidationError("synth: word_noise must lie in [0, 0.5)");
    for (const PlantedRuleSpec& spec : derived) {
        const int len = pattern_body_len(spec.pattern);
        if (static_cast<int>(spec.sources.size()) != len)
            throw ValidationError("synth: pattern " + spec.pattern + " needs " +
                                  std::to_string(len) + " source relations");
        for (int s : spec.sources)
            if (s < 0 || s >= n_base_relations)
                throw ValidationError("synth: source relation index out of range");
        if (!(spec.noise_rate >= 0.0) || spec.noise_rate >= 1.0)
            throw ValidationError("synth: noise_rate must lie in [0, 1)");
    }
}

std::string entity_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "e%03d", i);
    return buf;
}

std::string base_relation_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "b%02d", i);
    return buf;
}

std::string derived_relation_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "d%02d", i);
    return buf;
}

Rule planted_rule(const PlantedRuleSpec& spec, int head_rel) {
    Rule r;
    r.head = {head_rel, "x", "z"};
    if (spec.pattern == "copy") {
        r.body = {{spec.sources[0], "x", "z"}};
    } else if (spec.pattern == "inverse") {
        r.body = {{spec.sources[0], "z", "x"}};
    } else if (spec.pattern == "chain") {
        r.body = {{spec.sources[0], "x", "y"}, {spec.sources[1], "y", "z"}};
    } else if (spec.pattern == "shared_subject") {
        r.body = {{spec.sources[0], "y", "x"}, {spec.sources[1], "y", "z"}};
    } else if (spec.pattern == "shared_object") {
        r.body = {{spec.sources[0], "x", "y"}, {spec.sources[1], "z", "y"}};
    } else if (spec.pattern == "reverse_chain") {
        r.body = {{spec.sources[0], "y", "x"}, {spec.sources[1], "z", "y"}};
    } else {
        throw ValidationError("unknown planted rule pattern: " + spec.pattern);
    }
    validate_rule(r);
    return r;
}

namespace {

// Uniform ordered pair with h != t.
std::pair<int, int> random_pair(Rng& rng, int n) {
    const int h = static_cast<int>(uniform_int(rng, static_cast<std::uint64_t>(n)));
    int t = static_cast<int>(uniform_int(rng, static_cast<std::uint64_t>(n - 1)));
    if (t >= h) ++t;
    return {h, t};
}

}  // namespace

std::pair<KnowledgeGraph, std::vector<Rule>> gen_kg(const SynthConfig& cfg) {
    cfg.validate();
    KnowledgeGraph kg;
    for (int e = 0; e < cfg.n_entities; ++e) kg.entities().add_or_get(entity_name(e));
    for (int r = 0; r < cfg.n_base_relations; ++r)
        kg.relations().add_or_get(base_relation_name(r));
    for (std::size_t d = 0; d < cfg.derived.size(); ++d)
        kg.relations().add_or_get(derived_relation_name(static_cast<int>(d)));

    for (int r = 0; r < cfg.n_base_relations; ++r) {
        Rng rng = make_rng(derive_seed(cfg.rng_seed, "synth-base", static_cast<std::uint64_t>(r)));
        for (int i = 0; i < cfg.facts_per_relation; ++i) {
            const auto [h, t] = random_pair(rng, cfg.n_entities);
            kg.add(h, r, t);
        }
    }
    kg.finalize();

    // Groundings are computed against the base-only graph, so one derived
    // relation never feeds another.
    std::vector<Rule> planted;
    std::vector<Triple> extra;
    for (std::size_t d = 0; d < cfg.derived.size(); ++d) {
        const PlantedRuleSpec& spec = cfg.derived[d];
        const int head_rel = cfg.n_base_relations + static_cast<int>(d);
        Rule rule = planted_rule(spec, head_rel);
        const auto matches = body_matches(kg, rule);
        if (matches.empty())
            throw ComputeError("derived relation " +
                               derived_relation_name(static_cast<int>(d)) +
                               " has no derivable facts");
        Rng rng = make_rng(derive_seed(cfg.rng_seed, "synth-noise", d));
        for (const auto& [x, z] : matches)
            if (!bernoulli(rng, spec.noise_rate)) extra.push_back({x, head_rel, z});
        for (std::size_t i = 0; i < matches.size(); ++i)
            if (bernoulli(rng, spec.noise_rate)) {
                const auto [h, t] = random_pair(rng, cfg.n_entities);
                extra.push_back({h, head_rel, t});
            }
        planted.push_back(std::move(rule));
    }
    for (const Triple& t : extra) kg.add(t.head, t.rel, t.tail);
    kg.finalize();
    return {std::move(kg), std::move(planted)};
}

namespace {

std::vector<std::string> split_tokens(const std::string& pattern) {
    std::vector<std::string> out;
    std::istringstream in(pattern);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

void check_pattern(const std::string& pattern, const std::string& rel_name) {
    const auto toks = split_tokens(pattern);
    int heads = 0, tails = 0;
    for (const auto& t : toks) {
        heads += t == "HEAD";
        tails += t == "TAIL";
    }
    if (heads != 1 || tails != 1)
        throw ValidationError("template for " + rel_name +
                              " must contain exactly one HEAD and one TAIL: " + pattern);
}

}  // namespace

std::vector<std::vector<std::string>> resolve_templates(const SynthConfig& cfg,
                                                        const KnowledgeGraph& kg) {
    std::vector<std::vector<std::string>> out(
        static_cast<std::size_t>(kg.n_relations()));
    if (!cfg.templates.empty()) {
        for (int r = 0; r < kg.n_relations(); ++r) {
            const std::string& name = kg.relations().name_of(r);
            auto it = cfg.templates.find(name);
            if (it == cfg.templates.end() || it->second.empty()) {
                if (!kg.relation_pairs(r).empty())
                    throw ValidationError("no sentence template for relation " + name);
                continue;
            }
            for (const std::string& p : it->second) check_pattern(p, name);
            out[static_cast<std::size_t>(r)] = it->second;
        }
        return out;
    }
    // Default templates: every sentence names its own relation; derived
    // sentences also name their source relations, which is the lexical
    // bridge from unseen relations back to seen ones.
    for (int r = 0; r < cfg.n_base_relations && r < kg.n_relations(); ++r) {
        const std::string& name = kg.relations().name_of(r);
        out[static_cast<std::size_t>(r)] = {"HEAD " + name + " TAIL",
                                            "HEAD is " + name + " of TAIL"};
    }
    for (std::size_t d = 0; d < cfg.derived.size(); ++d) {
        const int r = cfg.n_base_relations + static_cast<int>(d);
        if (r >= kg.n_relations()) break;
        const std::string& name = kg.relations().name_of(r);
        std::string srcs;
        for (int s : cfg.derived[d].sources)
            srcs += kg.relations().name_of(s) + " ";
        out[static_cast<std::size_t>(r)] = {"HEAD " + srcs + name + " TAIL",
                                            "HEAD is " + srcs + name + " of TAIL"};
    }
    return out;
}

SynthCorpus gen_instances(const KnowledgeGraph& kg, const SynthConfig& cfg) {
    cfg.validate();
    const auto templates = resolve_templates(cfg, kg);
    SynthCorpus out;
    for (int r = 0; r < cfg.n_base_relations; ++r) out.split.seen.push_back(r);
    for (std::size_t d = 0; d < cfg.derived.size(); ++d)
        out.split.unseen.push_back(cfg.n_base_relations + static_cast<int>(d));

    for (int r = 0; r < kg.n_relations(); ++r) {
        const auto& pairs = kg.relation_pairs(r);
        if (pairs.empty()) continue;
        const auto& pats = templates[static_cast<std::size_t>(r)];
        if (pats.empty())
            throw ValidationError("no sentence template for relation " +
                                  kg.relations().name_of(r));
        Rng rng = make_rng(derive_seed(cfg.rng_seed, "synth-instances",
                                       static_cast<std::uint64_t>(r)));
        const bool base = r < cfg.n_base_relations;
        // Base facts are shuffled before the split so train and test draw
        // from the same distribution.
        std::vector<std::size_t> order(pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (base)
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_int(rng, i)]);
        const std::size_t n_train =
            base ? static_cast<std::size_t>(
                       std::llround(cfg.train_fraction * static_cast<double>(pairs.size())))
                 : 0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto& [h, t] = pairs[order[k]];
            const std::string& pat =
                pats[uniform_int(rng, static_cast<std::uint64_t>(pats.size()))];
            Instance inst;
            inst.relation = r;
            const auto toks = split_tokens(pat);
            for (const std::string& tok : toks) {
                const int pos = static_cast<int>(inst.tokens.size());
                if (tok == "HEAD") {
                    inst.tokens.push_back(kg.entities().name_of(h));
                    inst.head = {pos, pos};
                } else if (tok == "TAIL") {
                    inst.tokens.push_back(kg.entities().name_of(t));
                    inst.tail = {pos, pos};
                } else {
                    inst.tokens.push_back(tok);
                }
            }
            validate_instance(inst);
            if (base && k < n_train)
                out.train.push_back(std::move(inst));
            else
                out.test.push_back(std::move(inst));
        }
    }
    // A test sentence identical to a train sentence would leak the answer.
    std::set<std::vector<std::string>> train_sentences;
    for (const Instance& inst : out.train) train_sentences.insert(inst.tokens);
    std::erase_if(out.test, [&](const Instance& inst) {
        return train_sentences.count(inst.tokens) != 0;
    });
    return out;
}

std::map<int, int> cluster_relation_labels(const KnowledgeGraph& kg,
                                           const WordVectors& wv, int k,
                                           std::uint64_t seed, int max_iters) {
    const int n = kg.n_relations();
    if (k < 1 || k > n)
        throw ValidationError("cluster count must lie in [1, n_relations]");
    if (max_iters < 1) throw ValidationError("max_iters must be positive");
    std::vector<Vec> points;
    points.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r)
        points.push_back(relation_word_embedding(wv, kg.relations().name_of(r)));

    Rng rng = make_rng(derive_seed(seed, "synth-cluster"));
    std::vector<int> pick(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pick[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = pick.size(); i > 1; --i)
        std::swap(pick[i - 1], pick[uniform_int(rng, i)]);
    std::vector<Vec> centers;
    for (int c = 0; c < k; ++c)
        centers.push_back(points[static_cast<std::size_t>(pick[static_cast<std::size_t>(c)])]);

    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int r = 0; r < n; ++r) {
            int best = 0;
            double best_d = euclidean(points[static_cast<std::size_t>(r)], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = euclidean(points[static_cast<std::size_t>(r)], centers[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[static_cast<std::size_t>(r)] != best) {
                assign[static_cast<std::size_t>(r)] = best;
                changed = true;
            }
        }
        for (int c = 0; c < k; ++c) {
            Vec sum(points[0].size(), 0.0);
            int count = 0;
            for (int r = 0; r < n; ++r)
                if (assign[static_cast<std::size_t>(r)] == c) {
                    axpy(1.0, points[static_cast<std::size_t>(r)], sum);
                    ++count;
                }
            if (count > 0) {
                scale(sum, 1.0 / count);
                centers[static_cast<std::size_t>(c)] = std::move(sum);
            } else {
                int far = 0;
                double far_d = -1.0;
                for (int r = 0; r < n; ++r) {
                    const double d = euclidean(
                        points[static_cast<std::size_t>(r)],
                        centers[static_cast<std::size_t>(assign[static_cast<std::size_t>(r)])]);
                    if (d > far_d) {
                        far_d = d;
                        far = r;
                    }
                }
                assign[static_cast<std::size_t>(far)] = c;
                centers[static_cast<std::size_t>(c)] = points[static_cast<std::size_t>(far)];
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
    }
    std::map<int, int> out;
    for (int r = 0; r < n; ++r) out[r] = assign[static_cast<std::size_t>(r)];
    return out;
}

WordVectors gen_word_vectors(const KnowledgeGraph& kg, const SynthConfig& cfg) {
    cfg.validate();
    const auto templates = resolve_templates(cfg, kg);
    std::vector<std::string> vocab;
    std::set<std::string> known;
    auto push = [&](const std::string& tok) {
        if (known.insert(tok).second) vocab.push_back(tok);
    };
    for (const auto& pats : templates)
        for (const std::string& pat : pats)
            for (const std::string& tok : split_tokens(pat))
                if (tok != "HEAD" && tok != "TAIL") push(tok);
    for (int r = 0; r < kg.n_relations(); ++r) push(kg.relations().name_of(r));
    for (int e = 0; e < kg.n_entities(); ++e) push(kg.entities().name_of(e));

    WordVectors wv(cfg.word_dim);
    Rng rng = make_rng(derive_seed(cfg.rng_seed, "synth-wordvec"));
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        Vec v(static_cast<std::size_t>(cfg.word_dim));
        for (double& x : v) x = uniform_real(rng, -cfg.word_noise, cfg.word_noise);
        v[i % static_cast<std::size_t>(cfg.word_dim)] += 1.0;
        wv.insert(vocab[i], std::move(v));
    }
    return wv;
}

}  // namespace zsrc
