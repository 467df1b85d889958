#include "zsrc/rules.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "zsrc/io_util.hpp"

namespace zsrc {

namespace {

// Chain shape of a valid rule: which body atom touches the head subject,
// which touches the head object, and (length 2) the middle variable.
struct ChainShape {
    int subject_atom = 0;  // body index containing head.subject
    int object_atom = 0;   // body index containing head.object
    std::string mid;       // empty for length-1 rules
};

ChainShape analyze(const Rule& rule) {
    if (rule.body.empty() || rule.body.size() > 2)
        throw ValidationError("rule body must have 1 or 2 atoms");
    if (rule.head.subject == rule.head.object)
        throw ValidationError("head atom must use two distinct variables");
    for (const Atom& a : rule.body)
        if (a.subject == a.object)
            throw ValidationError("body atom must use two distinct variables");

    const std::string& s = rule.head.subject;
    const std::string& o = rule.head.object;
    auto has = [](const Atom& a, const std::string& v) {
        return a.subject == v || a.object == v;
    };

    ChainShape shape;
    if (rule.body.size() == 1) {
        const Atom& a = rule.body[0];
        if (!(has(a, s) && has(a, o)))
            throw ValidationError("open rule: body atom must connect both head variables");
        return shape;
    }
    const Atom& a0 = rule.body[0];
    const Atom& a1 = rule.body[1];
    int s_at = has(a0, s) ? 0 : (has(a1, s) ? 1 : -1);
    int o_at = has(a0, o) ? 0 : (has(a1, o) ? 1 : -1);
    if (s_at < 0 || o_at < 0 || s_at == o_at)
        throw ValidationError("open rule: body atoms must chain the head variables");
    shape.subject_atom = s_at;
    shape.object_atom = o_at;
    const Atom& sa = rule.body[static_cast<std::size_t>(s_at)];
    shape.mid = sa.subject == s ? sa.object : sa.subject;
    if (shape.mid == o || shape.mid == s)
        throw ValidationError("open rule: body atoms must chain through a middle variable");
    const Atom& oa = rule.body[static_cast<std::size_t>(o_at)];
    if (!has(oa, shape.mid))
        throw ValidationError("open rule: body atoms do not share the middle variable");
    return shape;
}

}  // namespace

void validate_rule(const Rule& rule) { (void)analyze(rule); }

std::vector<int> chain_signs(const Rule& rule) {
    const ChainShape shape = analyze(rule);
    std::vector<int> signs(rule.body.size(), 1);
    if (rule.body.size() == 1) {
        signs[0] = rule.body[0].subject == rule.head.subject ? 1 : -1;
    } else {
        const auto s_at = static_cast<std::size_t>(shape.subject_atom);
        const auto o_at = static_cast<std::size_t>(shape.object_atom);
        signs[s_at] = rule.body[s_at].subject == rule.head.subject ? 1 : -1;
        signs[o_at] = rule.body[o_at].subject == shape.mid ? 1 : -1;
    }
    return signs;
}

std::string rule_signature(const Rule& rule, const KnowledgeGraph& kg) {
    const ChainShape shape = analyze(rule);
    auto canon = [&](const std::string& v) -> const char* {
        if (v == rule.head.subject) return "x";
        if (v == rule.head.object) return "z";
        return "y";
    };
    (void)shape;
    std::string out;
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
        const Atom& a = rule.body[i];
        if (i) out += " & ";
        out += kg.relations().name_of(a.rel);
        out += '(';
        out += canon(a.subject);
        out += ',';
        out += canon(a.object);
        out += ')';
    }
    out += " => ";
    out += kg.relations().name_of(rule.head.rel);
    out += '(';
    out += canon(rule.head.subject);
    out += ',';
    out += canon(rule.head.object);
    out += ')';
    return out;
}

std::vector<std::pair<int, int>> body_matches(const KnowledgeGraph& kg, const Rule& rule) {
    const ChainShape shape = analyze(rule);
    std::vector<std::pair<int, int>> out;

    if (rule.body.size() == 1) {
        const Atom& a = rule.body[0];
        const bool forward = a.subject == rule.head.subject;
        for (auto [h, t] : kg.relation_pairs(a.rel)) {
            if (h == t) continue;
            out.emplace_back(forward ? h : t, forward ? t : h);
        }
    } else {
        const Atom& sa = rule.body[static_cast<std::size_t>(shape.subject_atom)];
        const Atom& oa = rule.body[static_cast<std::size_t>(shape.object_atom)];
        const bool sa_forward = sa.subject == rule.head.subject;  // else mid first
        const bool oa_forward = oa.subject == shape.mid;          // mid -> object
        for (auto [h, t] : kg.relation_pairs(sa.rel)) {
            if (h == t) continue;
            const int x = sa_forward ? h : t;
            const int m = sa_forward ? t : h;
            const auto& ends = oa_forward ? kg.objects(m, oa.rel) : kg.subjects(m, oa.rel);
            for (int z : ends) {
                if (z == x || z == m) continue;
                out.emplace_back(x, z);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

RuleMetrics rule_metrics(const KnowledgeGraph& kg, const Rule& rule) {
    const auto matches = body_matches(kg, rule);
    const auto& head_facts = kg.relation_pairs(rule.head.rel);
    if (head_facts.empty())
        throw ValidationError("head relation has no facts: " +
                              kg.relations().name_of(rule.head.rel));
    const auto& subj_sup = kg.subject_support(rule.head.rel);
    RuleMetrics m;
    long pca_den = 0;
    for (auto [x, z] : matches) {
        if (kg.contains(x, rule.head.rel, z)) ++m.support;
        if (std::binary_search(subj_sup.begin(), subj_sup.end(), x)) ++pca_den;
    }
    m.head_coverage = static_cast<double>(m.support) / static_cast<double>(head_facts.size());
    m.pca_confidence =
        pca_den == 0 ? 0.0 : static_cast<double>(m.support) / static_cast<double>(pca_den);
    return m;
}

long support(const KnowledgeGraph& kg, const Rule& rule) {
    const auto matches = body_matches(kg, rule);
    long s = 0;
    for (auto [x, z] : matches)
        if (kg.contains(x, rule.head.rel, z)) ++s;
    return s;
}

double pca_confidence(const KnowledgeGraph& kg, const Rule& rule) {
    const auto matches = body_matches(kg, rule);
    const auto& subj_sup = kg.subject_support(rule.head.rel);
    long s = 0, den = 0;
    for (auto [x, z] : matches) {
        if (kg.contains(x, rule.head.rel, z)) ++s;
        if (std::binary_search(subj_sup.begin(), subj_sup.end(), x)) ++den;
    }
    return den == 0 ? 0.0 : static_cast<double>(s) / static_cast<double>(den);
}

double head_coverage(const KnowledgeGraph& kg, const Rule& rule) {
    const auto& head_facts = kg.relation_pairs(rule.head.rel);
    if (head_facts.empty())
        throw ValidationError("head relation has no facts: " +
                              kg.relations().name_of(rule.head.rel));
    return static_cast<double>(support(kg, rule)) / static_cast<double>(head_facts.size());
}

void MineConfig::validate() const {
    if (max_len < 1 || max_len > 2)
        throw ValidationError("mine: max rule length must be 1 or 2");
    if (min_support < 0) throw ValidationError("mine: min support must be >= 0");
    if (min_head_coverage < 0.0 || min_head_coverage > 1.0)
        throw ValidationError("mine: min head coverage must be in [0,1]");
    if (min_pca < 0.0 || min_pca > 1.0)
        throw ValidationError("mine: min pca confidence must be in [0,1]");
}

namespace {

std::vector<Rule> mine_for_head(const KnowledgeGraph& kg, const MineConfig& cfg, int r3) {
    std::vector<Rule> out;
    auto consider = [&](Rule&& rule) {
        const RuleMetrics m = rule_metrics(kg, rule);
        if (m.support < cfg.min_support) return;
        if (m.head_coverage < cfg.min_head_coverage) return;
        if (m.pca_confidence < cfg.min_pca) return;
        rule.support = m.support;
        rule.head_coverage = m.head_coverage;
        rule.pca_confidence = m.pca_confidence;
        out.push_back(std::move(rule));
    };

    const Atom head{r3, "x", "z"};
    for (int r1 = 0; r1 < kg.n_relations(); ++r1) {
        if (r1 != r3) consider(Rule{{Atom{r1, "x", "z"}}, head});
        consider(Rule{{Atom{r1, "z", "x"}}, head});
    }
    if (cfg.max_len >= 2) {
        for (int r1 = 0; r1 < kg.n_relations(); ++r1) {
            for (int r2 = 0; r2 < kg.n_relations(); ++r2) {
                consider(Rule{{Atom{r1, "x", "y"}, Atom{r2, "y", "z"}}, head});
                consider(Rule{{Atom{r1, "y", "x"}, Atom{r2, "y", "z"}}, head});
                consider(Rule{{Atom{r1, "x", "y"}, Atom{r2, "z", "y"}}, head});
                consider(Rule{{Atom{r1, "y", "x"}, Atom{r2, "z", "y"}}, head});
            }
        }
    }
    return out;
}

}  // namespace

std::vector<Rule> mine_rules(const KnowledgeGraph& kg, const MineConfig& cfg, int threads) {
    cfg.validate();
    std::vector<int> heads;
    for (int r = 0; r < kg.n_relations(); ++r)
        if (!kg.relation_pairs(r).empty()) heads.push_back(r);

    std::vector<std::vector<Rule>> per_head(heads.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < heads.size(); ++i)
            per_head[i] = mine_for_head(kg, cfg, heads[i]);
    } else {
        #pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (std::size_t i = 0; i < heads.size(); ++i)
            per_head[i] = mine_for_head(kg, cfg, heads[i]);
    }

    std::vector<Rule> rules;
    for (auto& chunk : per_head)
        for (auto& r : chunk) rules.push_back(std::move(r));

    std::vector<std::string> sig(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) sig[i] = rule_signature(rules[i], kg);
    std::vector<std::size_t> idx(rules.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (rules[a].pca_confidence != rules[b].pca_confidence)
            return rules[a].pca_confidence > rules[b].pca_confidence;
        if (rules[a].support != rules[b].support) return rules[a].support > rules[b].support;
        return sig[a] < sig[b];
    });
    std::vector<Rule> sorted;
    sorted.reserve(rules.size());
    for (std::size_t i : idx) sorted.push_back(std::move(rules[i]));
    return sorted;
}

std::vector<Rule> rules_about(const std::vector<Rule>& rules, int rel, int k,
                              const KnowledgeGraph& kg) {
    if (k < 1) throw ValidationError("rules_about: k must be >= 1");
    std::vector<Rule> about;
    for (const Rule& r : rules) {
        bool mentions = r.head.rel == rel;
        for (const Atom& a : r.body) mentions = mentions || a.rel == rel;
        if (mentions) about.push_back(r);
    }
    std::vector<std::string> sig(about.size());
    for (std::size_t i = 0; i < about.size(); ++i) sig[i] = rule_signature(about[i], kg);
    std::vector<std::size_t> idx(about.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (about[a].pca_confidence != about[b].pca_confidence)
            return about[a].pca_confidence > about[b].pca_confidence;
        return sig[a] < sig[b];
    });
    if (idx.size() > static_cast<std::size_t>(k)) idx.resize(static_cast<std::size_t>(k));
    std::vector<Rule> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(about[i]);
    return out;
}

namespace {

nlohmann::json atom_to_json(const Atom& a, const KnowledgeGraph& kg) {
    return {{"rel", kg.relations().name_of(a.rel)},
            {"subj", a.subject},
            {"obj", a.object}};
}

Atom atom_from_json(const nlohmann::json& j, const KnowledgeGraph& kg) {
    Atom a;
    a.rel = kg.relations().require(j.at("rel").get<std::string>());
    a.subject = j.at("subj").get<std::string>();
    a.object = j.at("obj").get<std::string>();
    return a;
}

}  // namespace

void save_rules(const std::vector<Rule>& rules, const KnowledgeGraph& kg,
                const std::string& path) {
    std::ostringstream out;
    for (const Rule& r : rules) {
        nlohmann::json j;
        j["body"] = nlohmann::json::array();
        for (const Atom& a : r.body) j["body"].push_back(atom_to_json(a, kg));
        j["head"] = atom_to_json(r.head, kg);
        j["support"] = r.support;
        j["hc"] = r.head_coverage;
        j["pca"] = r.pca_confidence;
        out << j.dump() << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<Rule> load_rules(const std::string& path, const KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open rule file: " + path);
    std::vector<Rule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        Rule r;
        for (const auto& a : j.at("body")) r.body.push_back(atom_from_json(a, kg));
        r.head = atom_from_json(j.at("head"), kg);
        r.support = j.at("support").get<long>();
        r.head_coverage = j.at("hc").get<double>();
        r.pca_confidence = j.at("pca").get<double>();
        validate_rule(r);
        rules.push_back(std::move(r));
    }
    return rules;
}

}  // namespace zsrc
