#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "zsrc/kg.hpp"
#include "zsrc/pcnn.hpp"
#include "zsrc/rules.hpp"
#include "zsrc/wordvec.hpp"

namespace zsrc {

// One derived relation defined by a chain pattern over base relations. Facts
// of the derived relation are exactly the pattern's groundings, corrupted by
// noise_rate (independent drops plus an equal expected number of spurious
// random facts).
struct PlantedRuleSpec {
    // copy, inverse, chain, shared_subject, shared_object, reverse_chain
    std::string pattern;
    std::vector<int> sources;  // base relation indices; 1 or 2 per pattern
    double noise_rate = 0.0;
};

// Body length the pattern requires; throws on unknown patterns.
int pattern_body_len(const std::string& pattern);

struct SynthConfig {
    int n_entities = 50;
    int n_base_relations = 8;
    std::vector<PlantedRuleSpec> derived;
    int facts_per_relation = 100;  // base relations only
    double train_fraction = 0.8;   // base facts; derived facts are test-only
    int word_dim = 48;
    double word_noise = 0.05;
    // Relation name -> sentence patterns, each containing exactly one HEAD
    // and one TAIL token. Empty means keyword templates are generated from
    // the relation structure.
    std::map<std::string, std::vector<std::string>> templates;
    std::uint64_t rng_seed = 42;

    void validate() const;
};

std::string entity_name(int i);
std::string base_relation_name(int i);
std::string derived_relation_name(int i);

// The rule a PlantedRuleSpec plants for the derived relation with id head_rel.
Rule planted_rule(const PlantedRuleSpec& spec, int head_rel);

// Base facts are uniform (no reflexive triples); each derived relation gets
// its pattern groundings under noise. Throws when a pattern has no
// groundings. Returns the graph and the planted rules.
std::pair<KnowledgeGraph, std::vector<Rule>> gen_kg(const SynthConfig& cfg);

// Sentence patterns per relation id, defaulted when cfg.templates is empty.
// Every relation with facts must end up with at least one pattern.
std::vector<std::vector<std::string>> resolve_templates(const SynthConfig& cfg,
                                                        const KnowledgeGraph& kg);

struct SynthCorpus {
    std::vector<Instance> train;
    std::vector<Instance> test;
    RelationSplit split;  // seen = base, unseen = derived
};

// One instance per fact through a uniformly chosen template. Derived
// relations are test-only; base facts split by train_fraction. Test
// sentences that collide with a train sentence are dropped.
SynthCorpus gen_instances(const KnowledgeGraph& kg, const SynthConfig& cfg);

// One-hot-plus-noise vectors for every corpus token: template words first
// (distinct basis directions while they last), then relation labels, then
// entity names.
WordVectors gen_word_vectors(const KnowledgeGraph& kg, const SynthConfig& cfg);

// Seeded k-means (Lloyd's) over relation label embeddings; the result feeds
// split_relations as a precomputed cluster assignment. Ties go to the lowest
// cluster index; empty clusters grab the point farthest from its center.
std::map<int, int> cluster_relation_labels(const KnowledgeGraph& kg,
                                           const WordVectors& wv, int k,
                                           std::uint64_t seed,
                                           int max_iters = 50);

}  // namespace zsrc
