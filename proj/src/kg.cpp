#include "zsrc/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zsrc/io_util.hpp"

namespace zsrc {

int Vocabulary::add_or_get(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

std::optional<int> Vocabulary::id_of(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

int Vocabulary::require(const std::string& name) const {
    auto id = id_of(name);
    if (!id) throw ValidationError("unknown vocabulary entry: " + name);
    return *id;
}

const std::string& Vocabulary::name_of(int id) const {
    if (id < 0 || id >= size())
        throw ValidationError("vocabulary id out of range: " + std::to_string(id));
    return names_[static_cast<std::size_t>(id)];
}

void KnowledgeGraph::add(const std::string& head, const std::string& rel,
                         const std::string& tail) {
    // Sequenced explicitly: argument evaluation order would otherwise decide
    // id assignment, and it differs between compilers.
    const int h = entities_.add_or_get(head);
    const int r = relations_.add_or_get(rel);
    const int t = entities_.add_or_get(tail);
    add(h, r, t);
}

void KnowledgeGraph::add(int head, int rel, int tail) {
    check_entity(head);
    check_relation(rel);
    check_entity(tail);
    Triple t{head, rel, tail};
    if (member_.insert(t).second) triples_.push_back(t);
    finalized_ = false;
}

void KnowledgeGraph::finalize() {
    by_rel_.assign(static_cast<std::size_t>(relations_.size()), {});
    tails_.clear();
    heads_.clear();
    subj_support_.assign(static_cast<std::size_t>(relations_.size()), {});
    for (const Triple& t : triples_) {
        by_rel_[static_cast<std::size_t>(t.rel)].emplace_back(t.head, t.tail);
        tails_[pack(t.head, t.rel)].push_back(t.tail);
        heads_[pack(t.tail, t.rel)].push_back(t.head);
        subj_support_[static_cast<std::size_t>(t.rel)].push_back(t.head);
    }
    for (auto& [k, v] : tails_) std::sort(v.begin(), v.end());
    for (auto& [k, v] : heads_) std::sort(v.begin(), v.end());
    for (auto& v : subj_support_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    finalized_ = true;
}

bool KnowledgeGraph::contains(int head, int rel, int tail) const {
    return member_.count(Triple{head, rel, tail}) != 0;
}

namespace {
const std::vector<std::pair<int, int>> kNoPairs;
const std::vector<int> kNoIds;
}  // namespace

const std::vector<std::pair<int, int>>& KnowledgeGraph::relation_pairs(int rel) const {
    check_relation(rel);
    return by_rel_[static_cast<std::size_t>(rel)];
}

const std::vector<int>& KnowledgeGraph::objects(int head, int rel) const {
    check_entity(head);
    check_relation(rel);
    auto it = tails_.find(pack(head, rel));
    return it == tails_.end() ? kNoIds : it->second;
}

const std::vector<int>& KnowledgeGraph::subjects(int tail, int rel) const {
    check_entity(tail);
    check_relation(rel);
    auto it = heads_.find(pack(tail, rel));
    return it == heads_.end() ? kNoIds : it->second;
}

const std::vector<int>& KnowledgeGraph::subject_support(int rel) const {
    check_relation(rel);
    return subj_support_[static_cast<std::size_t>(rel)];
}

bool KnowledgeGraph::indexes_consistent() const {
    if (!finalized_) return false;
    std::set<Triple> from_set(triples_.begin(), triples_.end());
    if (from_set.size() != triples_.size()) return false;

    std::set<Triple> from_rel;
    std::size_t by_rel_total = 0;
    for (int r = 0; r < n_relations(); ++r) {
        for (auto [h, t] : by_rel_[static_cast<std::size_t>(r)]) {
            from_rel.insert(Triple{h, r, t});
            ++by_rel_total;
        }
    }
    if (by_rel_total != triples_.size() || from_rel != from_set) return false;

    std::set<Triple> from_tails;
    for (const auto& [key, ts] : tails_) {
        const int h = static_cast<int>(key >> 32);
        const int r = static_cast<int>(key & 0xffffffffu);
        for (int t : ts) from_tails.insert(Triple{h, r, t});
    }
    if (from_tails != from_set) return false;

    std::set<Triple> from_heads;
    for (const auto& [key, hs] : heads_) {
        const int t = static_cast<int>(key >> 32);
        const int r = static_cast<int>(key & 0xffffffffu);
        for (int h : hs) from_heads.insert(Triple{h, r, t});
    }
    return from_heads == from_set;
}

void KnowledgeGraph::check_entity(int id) const {
    if (id < 0 || id >= entities_.size())
        throw ValidationError("entity id out of range: " + std::to_string(id));
}

void KnowledgeGraph::check_relation(int id) const {
    if (id < 0 || id >= relations_.size())
        throw ValidationError("relation id out of range: " + std::to_string(id));
}

KnowledgeGraph load_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open triple file: " + path);
    KnowledgeGraph kg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos
                                                    : line.find('\t', tab1 + 1);
        const bool extra = tab2 != std::string::npos && line.find('\t', tab2 + 1) != std::string::npos;
        if (tab1 == std::string::npos || tab2 == std::string::npos || extra ||
            tab1 == 0 || tab2 == tab1 + 1 || tab2 + 1 == line.size()) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected head<TAB>relation<TAB>tail");
        }
        kg.add(line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
               line.substr(tab2 + 1));
    }
    if (kg.n_triples() == 0)
        throw ValidationError("empty knowledge graph: " + path);
    kg.finalize();
    return kg;
}

void save_triples(const KnowledgeGraph& kg, const std::string& path) {
    std::ostringstream out;
    for (const Triple& t : kg.triples()) {
        out << kg.entities().name_of(t.head) << '\t' << kg.relations().name_of(t.rel)
            << '\t' << kg.entities().name_of(t.tail) << '\n';
    }
    write_file_atomic(path, out.str());
}

RelationSplit split_relations(const KnowledgeGraph& kg,
                              const std::map<int, long>& instance_counts,
                              const std::map<int, int>& cluster_assign,
                              long seen_threshold, long drop_threshold) {
    if (!(seen_threshold > drop_threshold && drop_threshold > 0))
        throw ValidationError("split thresholds must satisfy seen > drop > 0");
    for (const auto& [rel, count] : instance_counts) {
        if (rel < 0 || rel >= kg.n_relations())
            throw ValidationError("split: relation id out of range: " + std::to_string(rel));
        if (!cluster_assign.count(rel))
            throw ValidationError("split: relation has no cluster assignment: " +
                                  kg.relations().name_of(rel));
        (void)count;
    }

    // cluster id -> member relations, ids ascending (std::map keeps both
    // iterations ordered, so the result is independent of caller map types).
    std::map<int, std::vector<int>> clusters;
    for (const auto& [rel, count] : instance_counts) {
        (void)count;
        clusters[cluster_assign.at(rel)].push_back(rel);
    }

    RelationSplit split;
    for (auto& [cluster, members] : clusters) {
        (void)cluster;
        std::sort(members.begin(), members.end());
        bool any_kept = false;
        for (int rel : members)
            if (instance_counts.at(rel) >= drop_threshold) any_kept = true;
        if (!any_kept) continue;
        for (int rel : members) {
            if (instance_counts.at(rel) >= seen_threshold)
                split.seen.push_back(rel);
            else
                split.unseen.push_back(rel);
        }
    }
    std::sort(split.seen.begin(), split.seen.end());
    std::sort(split.unseen.begin(), split.unseen.end());
    if (split.seen.empty() || split.unseen.empty())
        throw ComputeError("degenerate split: seen=" + std::to_string(split.seen.size()) +
                           " unseen=" + std::to_string(split.unseen.size()));
    return split;
}

void save_split(const RelationSplit& split, const KnowledgeGraph& kg,
                const std::string& path) {
    nlohmann::json j;
    j["seen"] = nlohmann::json::array();
    j["unseen"] = nlohmann::json::array();
    for (int r : split.seen) j["seen"].push_back(kg.relations().name_of(r));
    for (int r : split.unseen) j["unseen"].push_back(kg.relations().name_of(r));
    write_file_atomic(path, j.dump(2) + "\n");
}

RelationSplit load_split(const std::string& path, const KnowledgeGraph& kg) {
    const nlohmann::json j = parse_json_file(path);
    if (!j.contains("seen") || !j.contains("unseen"))
        throw ValidationError(path + ": split file needs \"seen\" and \"unseen\" arrays");
    RelationSplit split;
    for (const auto& name : j.at("seen"))
        split.seen.push_back(kg.relations().require(name.get<std::string>()));
    for (const auto& name : j.at("unseen"))
        split.unseen.push_back(kg.relations().require(name.get<std::string>()));
    std::sort(split.seen.begin(), split.seen.end());
    std::sort(split.unseen.begin(), split.unseen.end());
    for (int r : split.seen)
        if (std::binary_search(split.unseen.begin(), split.unseen.end(), r))
            throw ValidationError(path + ": relation appears in both seen and unseen: " +
                                  kg.relations().name_of(r));
    return split;
}

}  // namespace zsrc
