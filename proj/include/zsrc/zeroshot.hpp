#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "zsrc/kg.hpp"
#include "zsrc/pcnn.hpp"
#include "zsrc/rng.hpp"
#include "zsrc/semspace.hpp"
#include "zsrc/vec.hpp"

namespace zsrc {

enum class Similarity { cosine, euclidean };

const char* to_string(Similarity sim);
Similarity parse_similarity(const std::string& s);

// Linear projection g = W*f + b from encoder features into a semantic space.
struct DeviseParams {
    std::vector<Vec> W;  // sem_dim rows of length feat_dim
    Vec b;               // sem_dim
    double margin = 1.0;

    int sem_dim() const { return static_cast<int>(W.size()); }
    int feat_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().size()); }
    void validate() const;
    friend bool operator==(const DeviseParams&, const DeviseParams&) = default;
};

// W uniform within +-1/sqrt(feat_dim), b zero.
DeviseParams init_devise(int sem_dim, int feat_dim, double margin, std::uint64_t seed);

Vec devise_project(const Vec& f, const DeviseParams& params);

void save_devise(const DeviseParams& params, const std::string& path);
DeviseParams load_devise(const std::string& path);

struct DeviseConfig {
    double margin = 1.0;
    double learning_rate = 0.01;
    int epochs = 50;
    int negatives = 5;
    std::uint64_t rng_seed = 42;

    void validate() const;
};

// Hinge ranking loss for one instance: sum over negatives of
// max(0, margin - cos(g, gold) + cos(g, neg)) with g = W*f + b. Gradients are
// accumulated into caller-zeroed buffers; the optional outputs receive the
// gradients with respect to the feature and the space vectors themselves.
double devise_loss_grad(const Vec& f, const DeviseParams& params, const Vec& gold_vec,
                        const std::vector<const Vec*>& neg_vecs, std::vector<Vec>& dW,
                        Vec& db, Vec* dfeature = nullptr, Vec* dgold = nullptr,
                        std::vector<Vec>* dnegs = nullptr);

// Encoder trunk trained by the ranking loss; the trunk carries no softmax
// head (zero classes).
struct DeviseModel {
    PcnnParams trunk;
    DeviseParams proj;
    LabelMap labels;  // seen relations used for negatives
};

// Per-instance SGD against fixed space vectors. Deterministic for a fixed
// seed.
DeviseModel devise_train(const std::vector<Instance>& train, const WordVectors& wv,
                         const PcnnConfig& enc_cfg, const DeviseConfig& cfg,
                         const SemanticSpace& space, const KnowledgeGraph& kg,
                         std::vector<double>* epoch_loss = nullptr);

struct DeviseCombinedModel {
    PcnnParams trunk;
    DeviseParams proj;
    CombineParams combine;
    SemanticSpace space;  // rebuilt from the final combination parameters
    LabelMap labels;
};

// Joint training for the concat-linear space kinds: the seen relation vectors
// are recomputed from (space_a, space_b) through the combination parameters,
// which receive gradients alongside the trunk and projection. kind selects
// kw (a = kg) or rw (a = rl); b is always the word space.
DeviseCombinedModel devise_train_combined(const std::vector<Instance>& train,
                                          const WordVectors& wv, const PcnnConfig& enc_cfg,
                                          const DeviseConfig& cfg, SpaceKind kind,
                                          const SemanticSpace& space_a,
                                          const SemanticSpace& space_b,
                                          const CombineParams& init,
                                          const KnowledgeGraph& kg,
                                          std::vector<double>* epoch_loss = nullptr);

// Probability-weighted sum of the top-T seen relation vectors. Probabilities
// are used raw; `renormalize` divides them by their sum first, which leaves
// cosine rankings unchanged.
Vec conse_project(const std::vector<std::pair<int, double>>& topT,
                  const SemanticSpace& space, const KnowledgeGraph& kg,
                  bool renormalize = false);

// Unseen relations the space covers, ascending id; the rest go to `excluded`.
std::vector<int> covered_candidates(const SemanticSpace& space,
                                    const std::vector<int>& unseen,
                                    const KnowledgeGraph& kg,
                                    std::vector<int>* excluded = nullptr);

struct Prediction {
    int id = 0;
    int gold = -1;
    // (relation id, score), best first. Scores are cosine similarities or
    // negated euclidean distances, so larger is always better.
    std::vector<std::pair<int, double>> ranking;
    friend bool operator==(const Prediction&, const Prediction&) = default;
};

Prediction predict(int id, int gold, const Vec& g, const SemanticSpace& space,
                   const std::vector<int>& candidates, const KnowledgeGraph& kg,
                   Similarity sim);

struct RelationScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int support = 0;  // instances with this gold label
    friend bool operator==(const RelationScore&, const RelationScore&) = default;
};

struct EvalReport {
    double hit1 = 0.0, hit2 = 0.0, hit5 = 0.0;
    // Keyed by relation id, over every relation appearing as gold or as a
    // rank-1 assignment.
    std::map<int, RelationScore> per_relation;
    double macro_f1 = 0.0;
};

// Hit@K plus per-relation precision/recall/F1 where the rank-1 candidate is
// the assigned label.
EvalReport evaluate(const std::vector<Prediction>& preds);

// One classifier run over a test instance: gold unseen relation plus the
// top-T (seen relation, probability) list.
struct InfluenceRecord {
    int gold = -1;
    std::vector<std::pair<int, double>> top;
};

// rows = seen relations, columns = unseen relations, both ascending id.
// cell(s, u) = mean probability mass on s over instances with gold u.
struct InfluenceMatrix {
    std::vector<int> seen;
    std::vector<int> unseen;
    std::vector<Vec> cells;  // seen x unseen
};

InfluenceMatrix influence_matrix(const std::vector<InfluenceRecord>& records,
                                 std::vector<int> seen, std::vector<int> unseen);

// JSON lines {"id":n, "gold":"name", "ranking":[["name",score],...]}.
void save_predictions(const std::vector<Prediction>& preds, const KnowledgeGraph& kg,
                      const std::string& path);
std::vector<Prediction> load_predictions(const std::string& path,
                                         const KnowledgeGraph& kg);

// JSON {"hit":{"1":..,"2":..,"5":..}, "per_relation":{name:{...}}, "macro_f1":..}.
void save_metrics(const EvalReport& report, const KnowledgeGraph& kg,
                  const std::string& path);

// TSV; header row lists unseen relation names, each data row starts with a
// seen relation name.
void save_influence_tsv(const InfluenceMatrix& m, const KnowledgeGraph& kg,
                        const std::string& path);

}  // namespace zsrc
