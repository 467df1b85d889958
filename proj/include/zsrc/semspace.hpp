#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "zsrc/kg.hpp"
#include "zsrc/rules.hpp"
#include "zsrc/transe.hpp"
#include "zsrc/vec.hpp"
#include "zsrc/wordvec.hpp"

namespace zsrc {

enum class SpaceKind { wd, kg, rl, kw, rw, kr };

const char* to_string(SpaceKind kind);
SpaceKind parse_space_kind(const std::string& s);

// Relation-name -> vector map with a recorded kind. Vectors must be finite,
// non-zero, and share one dimension; names keep insertion order.
class SemanticSpace {
public:
    SemanticSpace() = default;
    explicit SemanticSpace(SpaceKind kind) : kind_(kind) {}

    SpaceKind kind() const { return kind_; }
    int dim() const { return dim_; }
    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

    bool covers(const std::string& rel) const { return ids_.count(rel) != 0; }
    const Vec* find(const std::string& rel) const;
    const Vec& require(const std::string& rel) const;

    void set(const std::string& rel, Vec v);

    friend bool operator==(const SemanticSpace&, const SemanticSpace&) = default;

private:
    SpaceKind kind_ = SpaceKind::wd;
    int dim_ = 0;
    std::vector<std::string> names_;
    std::vector<Vec> vectors_;
    std::unordered_map<std::string, int> ids_;
};

// Mean of in-vocabulary label token vectors; tokens outside the vocabulary
// are skipped. Throws when every token is out of vocabulary.
Vec relation_word_embedding(const WordVectors& wv, const std::string& label);

// Word space over the given relations.
SemanticSpace build_space_wd(const WordVectors& wv, const KnowledgeGraph& kg,
                             const std::vector<int>& relations);

// Trained KG vectors copied verbatim.
SemanticSpace build_space_kg(const EmbeddingTable& table, const KnowledgeGraph& kg,
                             const std::vector<int>& relations);

// Solves the translation identity of a chain rule for the one atom holding
// `target`: orient the body as a variable chain from the head subject to the
// head object; an atom traversed as stated contributes +E(rel), reversed
// -E(rel). Every relation in the rule other than target must be covered.
Vec compose_rule_embedding(const Rule& rule, int target, const SemanticSpace& kg_space,
                           const KnowledgeGraph& kg);

// True when the rule mentions target exactly once, no other relation of
// `excluded` appears, and every other relation is covered by kg_space.
bool rule_composable(const Rule& rule, int target, const std::vector<int>& excluded,
                     const SemanticSpace& kg_space, const KnowledgeGraph& kg);

// Rule space: each unseen relation gets the confidence-weighted mean of the
// vectors composed from its top-K composable rules (by PCA confidence); all
// other relations keep their kg_space vector. Unseen relations with no
// composable rule are reported through `uncovered`; only a fully uncovered
// unseen set is an error.
SemanticSpace build_space_rl(const std::vector<Rule>& rules, const std::vector<int>& unseen,
                             const SemanticSpace& kg_space, int top_k,
                             const KnowledgeGraph& kg,
                             std::vector<int>* uncovered = nullptr);

// out = W2 * (concat + b2); W2 rows are out_dim vectors of length concat_dim.
struct CombineParams {
    std::vector<Vec> w2;
    Vec b2;

    int out_dim() const { return static_cast<int>(w2.size()); }
    int concat_dim() const { return static_cast<int>(b2.size()); }
    void validate() const;
    friend bool operator==(const CombineParams&, const CombineParams&) = default;
};

// W2 entries uniform in +-1/sqrt(concat_dim), b2 zero.
CombineParams init_combine_params(int out_dim, int concat_dim, std::uint64_t seed);

Vec apply_combine(const CombineParams& params, const Vec& a, const Vec& b);

// Concat-linear combination per relation; kinds (kg,wd) -> kw and (rl,wd) ->
// rw. Both spaces must cover exactly the same relations.
SemanticSpace combine_concat_linear(const SemanticSpace& a, const SemanticSpace& b,
                                    const CombineParams& params);

// lambda * a + (1 - lambda) * b per relation, kind kr. Relations covered only
// by b fall back to their b vector unchanged; a must not cover anything b
// misses.
SemanticSpace combine_weighted_sum(const SemanticSpace& a, const SemanticSpace& b,
                                   double lambda);

// Embedding text format preceded by a `#kind=<kind>` line.
void save_space(const SemanticSpace& space, const std::string& path);
SemanticSpace load_space(const std::string& path);

}  // namespace zsrc
