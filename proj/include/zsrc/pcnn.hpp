#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "zsrc/kg.hpp"
#include "zsrc/rng.hpp"
#include "zsrc/vec.hpp"
#include "zsrc/wordvec.hpp"

namespace zsrc {

// Inclusive token index range.
struct Span {
    int start = 0;
    int end = 0;
    friend bool operator==(const Span&, const Span&) = default;
};

struct Instance {
    std::vector<std::string> tokens;
    Span head;
    Span tail;
    int relation = -1;
    friend bool operator==(const Instance&, const Instance&) = default;
};

// Spans must lie inside the sentence and not overlap.
void validate_instance(const Instance& inst);

// True when the tail mention precedes the head mention in the sentence; the
// pooling segments always follow sentence order.
bool spans_swapped(const Instance& inst);

// JSON lines {"tokens":[...], "head":[s,e], "tail":[s,e], "relation":"name"}.
std::vector<Instance> load_instances(const std::string& path, const KnowledgeGraph& kg);
void save_instances(const std::vector<Instance>& insts, const KnowledgeGraph& kg,
                    const std::string& path);

// Maps between global relation ids and dense classifier class indices. Class
// order is ascending relation id, so class-index ties resolve like id ties.
struct LabelMap {
    std::vector<int> class_to_rel;
    std::unordered_map<int, int> rel_to_class;

    static LabelMap from_relations(std::vector<int> rel_ids);
    int n_classes() const { return static_cast<int>(class_to_rel.size()); }
    int require_class(int rel) const;
    friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct PcnnConfig {
    int word_dim = 50;
    int pos_dim = 5;
    int pos_clip = 30;
    int channels = 250;
    int kernel = 3;  // fixed by the architecture; validated
    double dropout = 0.5;
    double learning_rate = 0.01;
    int epochs = 50;
    int batch_size = 50;
    std::uint64_t rng_seed = 42;

    void validate() const;
};

// All trainable state. Word vectors stay outside (frozen) except for the
// shared trainable unknown vector.
class PcnnParams {
public:
    PcnnParams() = default;
    PcnnParams(const PcnnConfig& cfg, int n_classes);  // zero-filled

    int word_dim = 0;
    int pos_dim = 0;
    int pos_clip = 0;
    int channels = 0;
    int kernel = 0;
    int n_classes = 0;
    double dropout = 0.0;  // used only by train-mode forward passes

    Vec unk;                      // word_dim
    std::vector<Vec> pos_head;    // (2*pos_clip+1) x pos_dim
    std::vector<Vec> pos_tail;    // (2*pos_clip+1) x pos_dim
    std::vector<Vec> conv_w;      // channels x (kernel * in_dim)
    Vec conv_b;                   // channels
    std::vector<Vec> head_w;      // n_classes x feat_dim
    Vec head_b;                   // n_classes

    int in_dim() const { return word_dim + 2 * pos_dim; }
    int feat_dim() const { return 3 * channels; }
    void check_finite() const;

    friend bool operator==(const PcnnParams&, const PcnnParams&) = default;
};

// Embedding-style tables start small uniform, weight matrices uniform within
// +-1/sqrt(fan-in), biases zero.
PcnnParams init_pcnn(const PcnnConfig& cfg, int n_classes, std::uint64_t seed);

// Intermediate state kept for backpropagation.
struct PcnnCache {
    int n = 0;
    std::vector<Vec> input;                    // n x in_dim
    std::vector<char> used_unk;                // per token
    std::vector<int> pos_head_idx, pos_tail_idx;
    std::vector<Vec> conv_out;                 // n x channels
    std::array<std::vector<int>, 3> seg_argmax;  // per segment: channel -> pos or -1
    Vec pooled;    // 3*channels, before tanh
    Vec feature;   // final output (after tanh and, in train mode, dropout)
    Vec dropout_mask;  // empty in eval mode
};

// Returns the 3*channels feature vector. train_mode applies inverted dropout
// and requires an rng.
Vec pcnn_forward(const Instance& inst, const WordVectors& wv, const PcnnParams& params,
                 bool train_mode, Rng* rng = nullptr, PcnnCache* cache = nullptr);

// Accumulates d(loss)/d(params) into grad given d(loss)/d(feature). Word
// vectors are frozen; the unknown vector and position tables receive
// gradients.
void pcnn_backward(const PcnnParams& params, const PcnnCache& cache, const Vec& dfeature,
                   PcnnParams& grad);

// params += scale * grad over every trainable table; shapes must match.
void axpy_params(double scale, const PcnnParams& grad, PcnnParams& params);

// Softmax head. Probabilities over classifier classes.
Vec class_logits(const PcnnParams& params, const Vec& feature);
Vec softmax(const Vec& logits);

// Top T (relation-id, probability) pairs, probability descending, ties by
// relation id. Probabilities are raw softmax outputs; no renormalization.
std::vector<std::pair<int, double>> classify_topT(const Vec& feature,
                                                  const PcnnParams& params,
                                                  const LabelMap& labels, int T);

// Cross-entropy loss for one instance plus gradients into grad and dfeature.
double ce_loss_grad(const PcnnParams& params, const Vec& feature, int class_idx,
                    Vec& dfeature, PcnnParams& grad);

// Mini-batch SGD over shuffled instances; mean-gradient updates. Instance
// labels are global relation ids and must all appear in `labels`.
PcnnParams train_classifier(const std::vector<Instance>& train_set, const WordVectors& wv,
                            const PcnnConfig& cfg, const LabelMap& labels,
                            std::vector<double>* epoch_loss = nullptr);

// Checkpoint: text header (magic, version, hyperparameters, label names) then
// raw little-endian doubles in declaration order.
void save_pcnn(const PcnnParams& params, const LabelMap& labels, const KnowledgeGraph& kg,
               const std::string& path);
std::pair<PcnnParams, LabelMap> load_pcnn(const std::string& path,
                                          const KnowledgeGraph& kg);

}  // namespace zsrc
