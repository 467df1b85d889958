#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "zsrc/errors.hpp"

namespace zsrc {

// Dense string<->id mapping. Ids are assigned in first-appearance order and
// are contiguous in [0, size()).
class Vocabulary {
public:
    int add_or_get(const std::string& name);
    std::optional<int> id_of(const std::string& name) const;
    // Throws ValidationError on unknown name.
    int require(const std::string& name) const;
    const std::string& name_of(int id) const;
    int size() const { return static_cast<int>(names_.size()); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> ids_;
};

struct Triple {
    int head = 0;
    int rel = 0;
    int tail = 0;
    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        std::uint64_t h = static_cast<std::uint64_t>(t.head);
        h = h * 0x100000001b3ull ^ static_cast<std::uint64_t>(t.rel);
        h = h * 0x100000001b3ull ^ static_cast<std::uint64_t>(t.tail);
        return static_cast<std::size_t>(h);
    }
};

// Immutable after finalize(); all queries are safe for concurrent reads.
class KnowledgeGraph {
public:
    // Duplicate triples are silently collapsed (set semantics).
    void add(const std::string& head, const std::string& rel, const std::string& tail);
    void add(int head, int rel, int tail);
    void finalize();

    const Vocabulary& entities() const { return entities_; }
    const Vocabulary& relations() const { return relations_; }
    Vocabulary& entities() { return entities_; }
    Vocabulary& relations() { return relations_; }

    int n_entities() const { return entities_.size(); }
    int n_relations() const { return relations_.size(); }
    std::size_t n_triples() const { return triples_.size(); }
    const std::vector<Triple>& triples() const { return triples_; }

    bool contains(int head, int rel, int tail) const;
    bool contains(const Triple& t) const { return contains(t.head, t.rel, t.tail); }

    // All (head, tail) pairs of one relation, in insertion order.
    const std::vector<std::pair<int, int>>& relation_pairs(int rel) const;

    // {t : (h, r, t) in triples}, sorted ascending. Invalid ids throw.
    const std::vector<int>& objects(int head, int rel) const;
    // {h : (h, r, t) in triples}, sorted ascending.
    const std::vector<int>& subjects(int tail, int rel) const;

    // Entities that appear as subject of at least one fact of rel, sorted.
    const std::vector<int>& subject_support(int rel) const;

    // Rebuilds the triple set from the indexes and compares; used by tests to
    // assert index/set consistency.
    bool indexes_consistent() const;

private:
    void check_entity(int id) const;
    void check_relation(int id) const;
    static std::uint64_t pack(int a, int b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }

    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
    std::unordered_set<Triple, TripleHash> member_;
    std::vector<std::vector<std::pair<int, int>>> by_rel_;
    std::unordered_map<std::uint64_t, std::vector<int>> tails_;  // (h,r) -> t's
    std::unordered_map<std::uint64_t, std::vector<int>> heads_;  // (t,r) -> h's
    std::vector<std::vector<int>> subj_support_;
    bool finalized_ = false;
};

// Tab-separated `head<TAB>relation<TAB>tail`, UTF-8, one triple per line.
KnowledgeGraph load_triples(const std::string& path);
void save_triples(const KnowledgeGraph& kg, const std::string& path);

struct RelationSplit {
    std::vector<int> seen;    // sorted relation ids
    std::vector<int> unseen;  // sorted relation ids
};

// Within each cluster, relations with count >= seen_threshold become seen and
// the rest unseen; clusters whose counts all fall below drop_threshold are
// dropped entirely. Relations considered are exactly the keys of
// instance_counts. Deterministic in the ids, independent of map ordering.
RelationSplit split_relations(const KnowledgeGraph& kg,
                              const std::map<int, long>& instance_counts,
                              const std::map<int, int>& cluster_assign,
                              long seen_threshold, long drop_threshold);

// JSON object {"seen": [names], "unseen": [names]}.
void save_split(const RelationSplit& split, const KnowledgeGraph& kg,
                const std::string& path);
RelationSplit load_split(const std::string& path, const KnowledgeGraph& kg);

}  // namespace zsrc
