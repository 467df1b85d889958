#pragma once

#include <string>
#include <vector>

#include "zsrc/kg.hpp"

namespace zsrc {

// One binary atom rel(subject, object) with variable arguments.
struct Atom {
    int rel = 0;
    std::string subject;
    std::string object;
    friend bool operator==(const Atom&, const Atom&) = default;
};

// Closed connected Horn rule `body => head` with body length 1 or 2, scored
// with AMIE-style metrics. Groundings bind distinct variables to distinct
// entities (reflexive groundings are excluded).
struct Rule {
    std::vector<Atom> body;
    Atom head;
    long support = 0;
    double head_coverage = 0.0;
    double pca_confidence = 0.0;
};

// Canonical text form with relation names and variables renamed so the head
// reads rel(x,z) and the middle variable is y. Used as the deterministic
// tie-break everywhere rules are ordered.
std::string rule_signature(const Rule& rule, const KnowledgeGraph& kg);

// Per body atom, +1 when walking the chain from head subject to head object
// traverses the atom subject-to-object, -1 when it runs against it. Validates
// the rule shape.
std::vector<int> chain_signs(const Rule& rule);

// Throws ValidationError unless the rule is closed (every variable occurs at
// least twice) and the body chains the head variables.
void validate_rule(const Rule& rule);

// Distinct bindings of the head (subject, object) pair for which some
// injective grounding satisfies the whole body. Sorted.
std::vector<std::pair<int, int>> body_matches(const KnowledgeGraph& kg, const Rule& rule);

// Number of body matches whose head triple is in the graph.
long support(const KnowledgeGraph& kg, const Rule& rule);

// support / |{(x,z) matching the body : x has some fact of the head relation}|,
// 0 when the denominator is 0.
double pca_confidence(const KnowledgeGraph& kg, const Rule& rule);

// support / |facts of the head relation|. Head relation must have facts.
double head_coverage(const KnowledgeGraph& kg, const Rule& rule);

struct RuleMetrics {
    long support = 0;
    double head_coverage = 0.0;
    double pca_confidence = 0.0;
};

// All three metrics in one pass over the body matches.
RuleMetrics rule_metrics(const KnowledgeGraph& kg, const Rule& rule);

struct MineConfig {
    int max_len = 2;
    long min_support = 2;
    double min_head_coverage = 0.01;
    double min_pca = 0.1;

    void validate() const;
};

// Exhaustive search over the closed chain patterns:
//   length 1:  r1(x,z) => r3(x,z)   and   r1(z,x) => r3(x,z)
//   length 2:  r1(x,y) ^ r2(y,z),  r1(y,x) ^ r2(y,z),
//              r1(x,y) ^ r2(z,y),  r1(y,x) ^ r2(z,y),  each => r3(x,z)
// The trivial identity r(x,z) => r(x,z) is not generated. Head relations
// without facts are skipped. Results are ordered by (pca desc, support desc,
// signature asc); identical for any thread count.
std::vector<Rule> mine_rules(const KnowledgeGraph& kg, const MineConfig& cfg,
                             int threads = 1);

// Rules whose head is `rel` or whose body mentions `rel`, by pca descending
// (ties by signature), truncated to at most k.
std::vector<Rule> rules_about(const std::vector<Rule>& rules, int rel, int k,
                              const KnowledgeGraph& kg);

// JSON lines, one rule per line:
// {"body":[{"rel":..,"subj":..,"obj":..},..],"head":{..},"support":n,"hc":x,"pca":y}
void save_rules(const std::vector<Rule>& rules, const KnowledgeGraph& kg,
                const std::string& path);
std::vector<Rule> load_rules(const std::string& path, const KnowledgeGraph& kg);

}  // namespace zsrc
