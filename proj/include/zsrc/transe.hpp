#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zsrc/kg.hpp"
#include "zsrc/rng.hpp"
#include "zsrc/vec.hpp"

namespace zsrc {

// Dense entity/relation vectors, stored row-major.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(int n_entities, int n_relations, int dim)
        : dim_(dim),
          entity_(static_cast<std::size_t>(n_entities) * dim, 0.0),
          relation_(static_cast<std::size_t>(n_relations) * dim, 0.0) {}

    int dim() const { return dim_; }
    int n_entities() const { return dim_ ? static_cast<int>(entity_.size()) / dim_ : 0; }
    int n_relations() const { return dim_ ? static_cast<int>(relation_.size()) / dim_ : 0; }

    double* entity(int id) { return entity_.data() + static_cast<std::size_t>(id) * dim_; }
    const double* entity(int id) const {
        return entity_.data() + static_cast<std::size_t>(id) * dim_;
    }
    double* relation(int id) { return relation_.data() + static_cast<std::size_t>(id) * dim_; }
    const double* relation(int id) const {
        return relation_.data() + static_cast<std::size_t>(id) * dim_;
    }

    Vec entity_vec(int id) const { return Vec(entity(id), entity(id) + dim_); }
    Vec relation_vec(int id) const { return Vec(relation(id), relation(id) + dim_); }

    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

private:
    int dim_ = 0;
    std::vector<double> entity_;
    std::vector<double> relation_;
};

struct TransEConfig {
    int dim = 100;
    double margin = 1.0;
    double learning_rate = 0.01;
    int epochs = 100;
    int batch_size = 32;
    int norm_order = 2;  // 1 or 2
    std::uint64_t rng_seed = 42;

    void validate() const;
};

// Coordinates drawn uniformly from [-6/sqrt(dim), +6/sqrt(dim)]; relation rows
// L2-normalized once. Bit-identical for a fixed seed.
EmbeddingTable init_embeddings(const KnowledgeGraph& kg, const TransEConfig& cfg);

// ||E(h) + E(r) - E(t)||_p; lower scores are more plausible.
double score_transe(const EmbeddingTable& table, int head, int rel, int tail,
                    int norm_order = 2);

// Corrupts head or tail (coin flip) with a uniform random entity, resampling
// until the corrupted triple is absent from the graph. Throws ComputeError
// when the relation leaves no negative to find.
Triple negative_sample(const KnowledgeGraph& kg, const Triple& pos, Rng& rng);

// Margin ranking loss summed over the given (positive, negative) pairs, plus
// its gradient in a table with the same shape. Exposed separately from the
// trainer so the finite-difference check can target exactly what the trainer
// applies.
double transe_loss_grad(const EmbeddingTable& table,
                        const std::vector<std::pair<Triple, Triple>>& pairs,
                        double margin, int norm_order, EmbeddingTable& grad);

struct TransETrainStats {
    std::vector<double> epoch_loss;  // mean hinge loss per epoch
};

// Mini-batch SGD on the margin ranking loss; entity rows are projected back
// onto the unit ball after every batch. threads == 1 is the deterministic
// reference path; threads > 1 runs lock-free parallel batches and forfeits
// determinism (opt-in).
EmbeddingTable train_transe(const KnowledgeGraph& kg, const TransEConfig& cfg,
                            TransETrainStats* stats = nullptr, int threads = 1);

struct LinkPredictionMetrics {
    double mean_rank = 0.0;
    double hits_at_10 = 0.0;
};

// For each held-out triple, ranks the true tail among all entities by score,
// filtering out known positives of filter_kg other than the target. Identical
// results for any thread count.
LinkPredictionMetrics link_prediction_eval(const EmbeddingTable& table,
                                           const KnowledgeGraph& filter_kg,
                                           const std::vector<Triple>& held_out,
                                           int norm_order = 2, int threads = 1);

// Text format: `<count> <dim>` header line, then `<name> v1 ... v_dim` rows.
// Round-trips exactly.
void save_embeddings(const EmbeddingTable& table, const KnowledgeGraph& kg,
                     const std::string& entity_path, const std::string& relation_path);
EmbeddingTable load_embeddings(const std::string& entity_path,
                               const std::string& relation_path,
                               const KnowledgeGraph& kg);

}  // namespace zsrc
