#include "zsrc/semspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "zsrc/io_util.hpp"
#include "zsrc/rng.hpp"

namespace zsrc {

const char* to_string(SpaceKind kind) {
    switch (kind) {
        case SpaceKind::wd: return "wd";
        case SpaceKind::kg: return "kg";
        case SpaceKind::rl: return "rl";
        case SpaceKind::kw: return "kw";
        case SpaceKind::rw: return "rw";
        case SpaceKind::kr: return "kr";
    }
    throw ValidationError("unknown space kind");
}

SpaceKind parse_space_kind(const std::string& s) {
    for (SpaceKind k : {SpaceKind::wd, SpaceKind::kg, SpaceKind::rl, SpaceKind::kw,
                        SpaceKind::rw, SpaceKind::kr})
        if (s == to_string(k)) return k;
    throw ValidationError("unknown space kind: " + s);
}

const Vec* SemanticSpace::find(const std::string& rel) const {
    auto it = ids_.find(rel);
    return it == ids_.end() ? nullptr : &vectors_[static_cast<std::size_t>(it->second)];
}

const Vec& SemanticSpace::require(const std::string& rel) const {
    const Vec* v = find(rel);
    if (!v)
        throw ValidationError(std::string(to_string(kind_)) +
                              " space does not cover relation: " + rel);
    return *v;
}

void SemanticSpace::set(const std::string& rel, Vec v) {
    if (v.empty()) throw ValidationError("semantic space: empty vector for " + rel);
    if (dim_ == 0) dim_ = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != dim_)
        throw ValidationError("semantic space: dimension mismatch for " + rel);
    if (!all_finite(v))
        throw ValidationError("semantic space: non-finite vector for " + rel);
    if (is_zero(v))
        throw ValidationError("semantic space: zero vector for " + rel);
    if (!ids_.emplace(rel, size()).second)
        throw ValidationError("semantic space: duplicate relation " + rel);
    names_.push_back(rel);
    vectors_.push_back(std::move(v));
}

Vec relation_word_embedding(const WordVectors& wv, const std::string& label) {
    if (label.empty()) throw ValidationError("relation label is empty");
    const auto tokens = tokenize_label(label);
    Vec sum(static_cast<std::size_t>(wv.dim()), 0.0);
    int hits = 0;
    for (const auto& tok : tokens) {
        if (const Vec* v = wv.find(tok)) {
            axpy(1.0, *v, sum);
            ++hits;
        }
    }
    if (hits == 0)
        throw ValidationError("no word vector for any token of label: " + label);
    scale(sum, 1.0 / hits);
    return sum;
}

SemanticSpace build_space_wd(const WordVectors& wv, const KnowledgeGraph& kg,
                             const std::vector<int>& relations) {
    SemanticSpace space(SpaceKind::wd);
    std::string uncoverable;
    for (int r : relations) {
        const std::string& name = kg.relations().name_of(r);
        try {
            space.set(name, relation_word_embedding(wv, name));
        } catch (const ValidationError&) {
            uncoverable += uncoverable.empty() ? name : ", " + name;
        }
    }
    if (!uncoverable.empty())
        throw ValidationError("word space cannot cover: " + uncoverable);
    return space;
}

SemanticSpace build_space_kg(const EmbeddingTable& table, const KnowledgeGraph& kg,
                             const std::vector<int>& relations) {
    SemanticSpace space(SpaceKind::kg);
    for (int r : relations) {
        if (r < 0 || r >= table.n_relations())
            throw ValidationError("kg space: no trained vector for relation id " +
                                  std::to_string(r));
        space.set(kg.relations().name_of(r), table.relation_vec(r));
    }
    return space;
}

namespace {

int count_mentions(const Rule& rule, int rel) {
    int n = rule.head.rel == rel ? 1 : 0;
    for (const Atom& a : rule.body) n += a.rel == rel ? 1 : 0;
    return n;
}

}  // namespace

Vec compose_rule_embedding(const Rule& rule, int target, const SemanticSpace& kg_space,
                           const KnowledgeGraph& kg) {
    if (count_mentions(rule, target) != 1)
        throw ValidationError("composition target must appear exactly once in the rule");
    const std::vector<int> signs = chain_signs(rule);

    auto vec_of = [&](int rel) -> const Vec& {
        return kg_space.require(kg.relations().name_of(rel));
    };

    if (rule.head.rel == target) {
        Vec v(static_cast<std::size_t>(kg_space.dim()), 0.0);
        for (std::size_t i = 0; i < rule.body.size(); ++i)
            axpy(signs[i], vec_of(rule.body[i].rel), v);
        return v;
    }
    // target sits in body atom j: sign_j * target = head - sum of the others.
    std::size_t j = rule.body.size();
    for (std::size_t i = 0; i < rule.body.size(); ++i)
        if (rule.body[i].rel == target) j = i;
    Vec v = vec_of(rule.head.rel);
    for (std::size_t i = 0; i < rule.body.size(); ++i)
        if (i != j) axpy(-signs[i], vec_of(rule.body[i].rel), v);
    scale(v, signs[j]);
    return v;
}

bool rule_composable(const Rule& rule, int target, const std::vector<int>& excluded,
                     const SemanticSpace& kg_space, const KnowledgeGraph& kg) {
    if (count_mentions(rule, target) != 1) return false;
    auto usable = [&](int rel) {
        if (rel == target) return true;
        if (std::find(excluded.begin(), excluded.end(), rel) != excluded.end()) return false;
        return kg_space.covers(kg.relations().name_of(rel));
    };
    if (!usable(rule.head.rel)) return false;
    for (const Atom& a : rule.body)
        if (!usable(a.rel)) return false;
    return true;
}

SemanticSpace build_space_rl(const std::vector<Rule>& rules, const std::vector<int>& unseen,
                             const SemanticSpace& kg_space, int top_k,
                             const KnowledgeGraph& kg, std::vector<int>* uncovered) {
    if (top_k < 1) throw ValidationError("rule space: top_k must be >= 1");
    std::unordered_set<int> unseen_set(unseen.begin(), unseen.end());
    SemanticSpace space(SpaceKind::rl);
    std::vector<int> missed;

    for (int r = 0; r < kg.n_relations(); ++r) {
        const std::string& name = kg.relations().name_of(r);
        if (!unseen_set.count(r)) {
            if (kg_space.covers(name)) space.set(name, kg_space.require(name));
            continue;
        }
        std::vector<Rule> usable;
        for (const Rule& rule : rules)
            if (count_mentions(rule, r) == 1 && rule_composable(rule, r, unseen, kg_space, kg))
                usable.push_back(rule);
        if (usable.empty()) {
            missed.push_back(r);
            continue;
        }
        const std::vector<Rule> top = rules_about(usable, r, top_k, kg);
        Vec acc(static_cast<std::size_t>(kg_space.dim()), 0.0);
        double total_conf = 0.0;
        for (const Rule& rule : top) {
            axpy(rule.pca_confidence, compose_rule_embedding(rule, r, kg_space, kg), acc);
            total_conf += rule.pca_confidence;
        }
        if (total_conf > 0.0) {
            scale(acc, 1.0 / total_conf);
        } else {
            // All confidences zero: fall back to the unweighted mean.
            acc.assign(static_cast<std::size_t>(kg_space.dim()), 0.0);
            for (const Rule& rule : top)
                axpy(1.0 / static_cast<double>(top.size()),
                     compose_rule_embedding(rule, r, kg_space, kg), acc);
        }
        space.set(name, std::move(acc));
    }

    if (!unseen.empty() && missed.size() == unseen.size())
        throw ComputeError("rule space: no unseen relation has a composable rule");
    std::sort(missed.begin(), missed.end());
    if (uncovered) *uncovered = std::move(missed);
    return space;
}

void CombineParams::validate() const {
    if (w2.empty() || b2.empty())
        throw ValidationError("combine params: empty W2 or b2");
    for (const Vec& row : w2) {
        if (static_cast<int>(row.size()) != concat_dim())
            throw ValidationError("combine params: W2 row length != concat dim");
        if (!all_finite(row)) throw ValidationError("combine params: non-finite W2");
    }
    if (!all_finite(b2)) throw ValidationError("combine params: non-finite b2");
}

CombineParams init_combine_params(int out_dim, int concat_dim, std::uint64_t seed) {
    if (out_dim <= 0 || concat_dim <= 0)
        throw ValidationError("combine params: dims must be positive");
    CombineParams p;
    p.b2.assign(static_cast<std::size_t>(concat_dim), 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(concat_dim));
    Rng rng = make_rng(seed);
    p.w2.assign(static_cast<std::size_t>(out_dim), Vec(static_cast<std::size_t>(concat_dim)));
    for (Vec& row : p.w2)
        for (double& x : row) x = uniform_real(rng, -bound, bound);
    return p;
}

Vec apply_combine(const CombineParams& params, const Vec& a, const Vec& b) {
    if (static_cast<int>(a.size() + b.size()) != params.concat_dim())
        throw ValidationError("combine params: concat dim mismatch");
    Vec t(a);
    t.insert(t.end(), b.begin(), b.end());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += params.b2[i];
    Vec out(params.w2.size());
    for (std::size_t k = 0; k < params.w2.size(); ++k) out[k] = dot(params.w2[k], t);
    return out;
}

SemanticSpace combine_concat_linear(const SemanticSpace& a, const SemanticSpace& b,
                                    const CombineParams& params) {
    params.validate();
    SpaceKind out_kind;
    if (a.kind() == SpaceKind::kg && b.kind() == SpaceKind::wd) {
        out_kind = SpaceKind::kw;
    } else if (a.kind() == SpaceKind::rl && b.kind() == SpaceKind::wd) {
        out_kind = SpaceKind::rw;
    } else {
        throw ValidationError(std::string("cannot concat-combine kinds ") +
                              to_string(a.kind()) + " and " + to_string(b.kind()));
    }
    std::string missing;
    for (const auto& name : a.names())
        if (!b.covers(name)) missing += missing.empty() ? name : ", " + name;
    for (const auto& name : b.names())
        if (!a.covers(name)) missing += missing.empty() ? name : ", " + name;
    if (!missing.empty())
        throw ValidationError("combine coverage mismatch for: " + missing);
    if (params.concat_dim() != a.dim() + b.dim())
        throw ValidationError("combine params: concat dim != dim(A) + dim(B)");

    SemanticSpace out(out_kind);
    for (const auto& name : a.names())
        out.set(name, apply_combine(params, a.require(name), b.require(name)));
    return out;
}

SemanticSpace combine_weighted_sum(const SemanticSpace& a, const SemanticSpace& b,
                                   double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw ValidationError("combination weight must lie in [0,1]");
    if (a.dim() != 0 && b.dim() != 0 && a.dim() != b.dim())
        throw ValidationError("weighted sum: dimension mismatch");
    for (const auto& name : a.names())
        if (!b.covers(name))
            throw ValidationError("weighted sum: " + name + " missing from base space");

    SemanticSpace out(SpaceKind::kr);
    for (const auto& name : b.names()) {
        const Vec& vb = b.require(name);
        if (const Vec* va = a.find(name)) {
            Vec v(vb.size());
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] = lambda * (*va)[i] + (1.0 - lambda) * vb[i];
            out.set(name, std::move(v));
        } else {
            out.set(name, vb);
        }
    }
    return out;
}

void save_space(const SemanticSpace& space, const std::string& path) {
    std::ostringstream out;
    out << "#kind=" << to_string(space.kind()) << '\n';
    out << space.size() << ' ' << space.dim() << '\n';
    for (const auto& name : space.names()) {
        out << name;
        for (double x : space.require(name)) out << ' ' << format_double(x);
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

SemanticSpace load_space(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open space file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#kind=", 0) != 0)
        throw ValidationError(path + ":1: expected `#kind=<kind>` line");
    SemanticSpace space(parse_space_kind(line.substr(6)));

    if (!std::getline(in, line))
        throw ValidationError(path + ":2: missing `<count> <dim>` header");
    long count = 0;
    int dim = 0;
    {
        std::istringstream hdr(line);
        std::string extra;
        if (!(hdr >> count >> dim) || (hdr >> extra) || count < 0 || dim <= 0)
            throw ValidationError(path + ":2: malformed `<count> <dim>` header");
    }
    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string name;
        row >> name;
        Vec v(static_cast<std::size_t>(dim));
        for (double& x : v)
            if (!(row >> x))
                throw ValidationError(path + ":" + std::to_string(lineno) +
                                      ": expected " + std::to_string(dim) + " values");
        double extra;
        if (row >> extra)
            throw ValidationError(path + ":" + std::to_string(lineno) + ": too many values");
        try {
            space.set(name, std::move(v));
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (space.size() != count)
        throw ValidationError(path + ": header promises " + std::to_string(count) +
                              " relations, found " + std::to_string(space.size()));
    return space;
}

}  // namespace zsrc
