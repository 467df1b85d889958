// Command-line front end: every pipeline stage as a subcommand, each run
// recorded in a manifest next to its primary artifact.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zsrc/errors.hpp"
#include "zsrc/io_util.hpp"
#include "zsrc/kg.hpp"
#include "zsrc/manifest.hpp"
#include "zsrc/pcnn.hpp"
#include "zsrc/rng.hpp"
#include "zsrc/rules.hpp"
#include "zsrc/semspace.hpp"
#include "zsrc/synth.hpp"
#include "zsrc/transe.hpp"
#include "zsrc/vec.hpp"
#include "zsrc/wordvec.hpp"
#include "zsrc/zeroshot.hpp"

#ifndef ZSRC_VERSION
#define ZSRC_VERSION "unknown"
#endif

using nlohmann::json;
using namespace zsrc;

namespace {

// ---------------------------------------------------------------------------
// Logging: one line per event on stderr, `level key=value ...`.

std::string log_value(const std::string& v) {
    const bool plain = !v.empty() && v.find_first_of(" \t\"=") == std::string::npos;
    return plain ? v : json(v).dump();
}

void log_line(const char* level,
              std::initializer_list<std::pair<const char*, std::string>> kv) {
    std::string line = level;
    for (const auto& [k, v] : kv) {
        line += ' ';
        line += k;
        line += '=';
        line += log_value(v);
    }
    std::cerr << line << '\n';
}

std::string num(double x) { return format_double(x); }
std::string num(std::size_t x) { return std::to_string(x); }
std::string num(int x) { return std::to_string(x); }

// ---------------------------------------------------------------------------
// Config tree: JSON file, then --set overrides, then explicit flags, each
// layer overwriting the previous one key by key.

class Cfg {
public:
    Cfg() : root_(json::object()) {}

    void load_file(const std::string& path) {
        root_ = parse_json_file(path);
        if (!root_.is_object())
            throw ValidationError(path + ": config root must be a JSON object");
    }

    // "a.b.c=value"; the value parses as JSON when it can, else as a string.
    void apply_set(const std::string& expr) {
        const auto eq = expr.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError("--set expects key=value, got: " + expr);
        const std::string raw = expr.substr(eq + 1);
        json val = json::parse(raw, nullptr, false);
        if (val.is_discarded()) val = raw;
        set_path(expr.substr(0, eq), std::move(val));
    }

    void set_path(const std::string& dotted, json val) {
        json* node = &root_;
        std::size_t start = 0;
        for (;;) {
            const auto dot = dotted.find('.', start);
            const std::string key = dotted.substr(start, dot - start);
            if (key.empty()) throw ValidationError("bad config key: " + dotted);
            if (dot == std::string::npos) {
                (*node)[key] = std::move(val);
                return;
            }
            json& next = (*node)[key];
            if (next.is_null()) next = json::object();
            if (!next.is_object())
                throw ValidationError("config key " + dotted + " crosses a non-object");
            node = &next;
            start = dot + 1;
        }
    }

    const json* find(const std::string& dotted) const {
        const json* node = &root_;
        std::size_t start = 0;
        for (;;) {
            const auto dot = dotted.find('.', start);
            const std::string key = dotted.substr(start, dot - start);
            if (!node->is_object() || !node->contains(key)) return nullptr;
            node = &(*node)[key];
            if (dot == std::string::npos) return node;
            start = dot + 1;
        }
    }

    bool has(const std::string& dotted) const { return find(dotted) != nullptr; }

    template <class T>
    T get(const std::string& dotted, T fallback) const {
        const json* p = find(dotted);
        if (!p) return fallback;
        try {
            return p->get<T>();
        } catch (const json::exception&) {
            throw ValidationError("config key " + dotted + " has the wrong type");
        }
    }

    const json& root() const { return root_; }

private:
    json root_;
};

// Flag values feed the same tree as --set, so precedence is positional: file,
// then --set in order, then flags.
struct FlagBinds {
    std::vector<std::function<void(Cfg&)>> applied;

    template <class T>
    void bind(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& help) {
        auto holder = std::make_shared<T>();
        CLI::Option* opt = cmd->add_option(flag, *holder, help);
        applied.push_back([opt, holder, key](Cfg& cfg) {
            if (opt->count() > 0) cfg.set_path(key, *holder);
        });
    }

    void bind_flag(CLI::App* cmd, const std::string& flag, const std::string& key,
                   const std::string& help) {
        auto holder = std::make_shared<bool>(false);
        CLI::Option* opt = cmd->add_flag(flag, *holder, help);
        applied.push_back([opt, holder, key](Cfg& cfg) {
            if (opt->count() > 0) cfg.set_path(key, *holder);
        });
    }

    void apply(Cfg& cfg) const {
        for (const auto& f : applied) f(cfg);
    }
};

// Options shared by every subcommand.
struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    FlagBinds binds;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--set", sets,
                        "dotted config override key=value (repeatable)");
        binds.bind<std::uint64_t>(cmd, "--seed", "seed", "master random seed");
        binds.bind<int>(cmd, "--jobs", "jobs", "worker threads where supported");
    }

    Cfg resolve() const {
        Cfg cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& s : sets) cfg.apply_set(s);
        binds.apply(cfg);
        return cfg;
    }
};

std::uint64_t master_seed(const Cfg& cfg) {
    return cfg.get<std::uint64_t>("seed", 42);
}

int job_count(const Cfg& cfg) {
    const int jobs = cfg.get<int>("jobs", 1);
    if (jobs < 1) throw ValidationError("jobs must be at least 1");
    return jobs;
}

// ---------------------------------------------------------------------------
// Manifest plumbing.

struct RunRecorder {
    RunManifest m;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    explicit RunRecorder(std::string subcommand) {
        m.subcommand = std::move(subcommand);
        m.version = ZSRC_VERSION;
    }

    void input(const std::string& path) { m.inputs[path] = ""; }
    void output(const std::string& path) { m.outputs[path] = ""; }

    void finish(const std::string& primary_artifact) {
        for (auto& [path, hash] : m.inputs) hash = sha256_file(path);
        for (auto& [path, hash] : m.outputs) hash = sha256_file(path);
        m.duration_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        const std::string path = manifest_path(primary_artifact);
        save_manifest(m, path);
        log_line("info", {{"cmd", m.subcommand},
                          {"manifest", path},
                          {"duration_seconds", num(m.duration_seconds)}});
    }
};

// ---------------------------------------------------------------------------
// Module config builders: struct defaults, overridden by the tree.

SynthConfig synth_config(const Cfg& cfg) {
    SynthConfig s;
    s.n_entities = cfg.get("synth.n_entities", s.n_entities);
    s.n_base_relations = cfg.get("synth.n_base_relations", s.n_base_relations);
    s.facts_per_relation = cfg.get("synth.facts_per_relation", s.facts_per_relation);
    s.train_fraction = cfg.get("synth.train_fraction", s.train_fraction);
    s.word_dim = cfg.get("synth.word_dim", s.word_dim);
    s.word_noise = cfg.get("synth.word_noise", s.word_noise);
    if (const json* d = cfg.find("synth.derived")) {
        if (!d->is_array())
            throw ValidationError("config key synth.derived must be an array");
        for (const json& item : *d) {
            try {
                PlantedRuleSpec spec;
                spec.pattern = item.at("pattern").get<std::string>();
                spec.sources = item.at("sources").get<std::vector<int>>();
                spec.noise_rate = item.value("noise_rate", 0.0);
                s.derived.push_back(std::move(spec));
            } catch (const json::exception& e) {
                throw ValidationError(std::string("bad synth.derived entry: ") +
                                      e.what());
            }
        }
    } else {
        // No synth.derived key at all: plant a small default so a bare
        // gen-synth yields unseen relations. An explicit empty array still
        // means none.
        s.derived.push_back({"copy", {0}, 0.05});
        if (s.n_base_relations >= 3) s.derived.push_back({"chain", {1, 2}, 0.05});
    }
    if (const json* t = cfg.find("synth.templates")) {
        try {
            s.templates =
                t->get<std::map<std::string, std::vector<std::string>>>();
        } catch (const json::exception&) {
            throw ValidationError(
                "config key synth.templates must map relation names to pattern "
                "lists");
        }
    }
    s.rng_seed = master_seed(cfg);
    return s;
}

json synth_snapshot(const SynthConfig& s) {
    json derived = json::array();
    for (const auto& spec : s.derived)
        derived.push_back({{"pattern", spec.pattern},
                           {"sources", spec.sources},
                           {"noise_rate", spec.noise_rate}});
    return {{"n_entities", s.n_entities},
            {"n_base_relations", s.n_base_relations},
            {"facts_per_relation", s.facts_per_relation},
            {"train_fraction", s.train_fraction},
            {"word_dim", s.word_dim},
            {"word_noise", s.word_noise},
            {"derived", derived},
            {"templates", s.templates}};
}

TransEConfig kge_config(const Cfg& cfg) {
    TransEConfig c;
    c.dim = cfg.get("kge.dim", c.dim);
    c.margin = cfg.get("kge.margin", c.margin);
    c.learning_rate = cfg.get("kge.learning_rate", c.learning_rate);
    c.epochs = cfg.get("kge.epochs", c.epochs);
    c.batch_size = cfg.get("kge.batch_size", c.batch_size);
    c.norm_order = cfg.get("kge.norm_order", c.norm_order);
    c.rng_seed = master_seed(cfg);
    return c;
}

json kge_snapshot(const TransEConfig& c) {
    return {{"dim", c.dim},           {"margin", c.margin},
            {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
            {"batch_size", c.batch_size},       {"norm_order", c.norm_order}};
}

MineConfig mine_config(const Cfg& cfg) {
    MineConfig c;
    c.max_len = cfg.get("mine.max_len", c.max_len);
    c.min_support = cfg.get("mine.min_support", c.min_support);
    c.min_head_coverage = cfg.get("mine.min_head_coverage", c.min_head_coverage);
    c.min_pca = cfg.get("mine.min_pca", c.min_pca);
    return c;
}

json mine_snapshot(const MineConfig& c) {
    return {{"max_len", c.max_len},
            {"min_support", c.min_support},
            {"min_head_coverage", c.min_head_coverage},
            {"min_pca", c.min_pca}};
}

PcnnConfig encoder_config(const Cfg& cfg, int word_dim) {
    PcnnConfig c;
    c.word_dim = word_dim;
    c.pos_dim = cfg.get("encoder.pos_dim", c.pos_dim);
    c.pos_clip = cfg.get("encoder.pos_clip", c.pos_clip);
    c.channels = cfg.get("encoder.channels", c.channels);
    c.dropout = cfg.get("encoder.dropout", c.dropout);
    c.learning_rate = cfg.get("encoder.learning_rate", c.learning_rate);
    c.epochs = cfg.get("encoder.epochs", c.epochs);
    c.batch_size = cfg.get("encoder.batch_size", c.batch_size);
    c.rng_seed = master_seed(cfg);
    if (cfg.has("encoder.margin"))
        log_line("warn",
                 {{"msg", "encoder.margin is ignored: the classifier head trains "
                          "with cross-entropy"}});
    return c;
}

json encoder_snapshot(const PcnnConfig& c) {
    return {{"word_dim", c.word_dim},   {"pos_dim", c.pos_dim},
            {"pos_clip", c.pos_clip},   {"channels", c.channels},
            {"dropout", c.dropout},     {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},       {"batch_size", c.batch_size}};
}

DeviseConfig devise_config(const Cfg& cfg) {
    DeviseConfig c;
    c.margin = cfg.get("devise.margin", c.margin);
    c.learning_rate = cfg.get("devise.learning_rate", c.learning_rate);
    c.epochs = cfg.get("devise.epochs", c.epochs);
    c.negatives = cfg.get("devise.negatives", c.negatives);
    c.rng_seed = master_seed(cfg);
    return c;
}

json devise_snapshot(const DeviseConfig& c) {
    return {{"margin", c.margin},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"negatives", c.negatives}};
}

// ---------------------------------------------------------------------------
// Shared loaders.

KnowledgeGraph load_kg(const std::string& path, RunRecorder& rec) {
    KnowledgeGraph kg = load_triples(path);
    rec.input(path);
    log_line("info", {{"loaded", path},
                      {"entities", num(kg.n_entities())},
                      {"relations", num(kg.n_relations())},
                      {"triples", num(kg.n_triples())}});
    return kg;
}

WordVectors load_words(const std::string& path, RunRecorder& rec) {
    WordVectors wv = load_word_vectors(path);
    rec.input(path);
    log_line("info",
             {{"loaded", path}, {"words", num(wv.size())}, {"dim", num(wv.dim())}});
    return wv;
}

RelationSplit load_split_file(const std::string& path, const KnowledgeGraph& kg,
                              RunRecorder& rec) {
    RelationSplit split = load_split(path, kg);
    rec.input(path);
    log_line("info", {{"loaded", path},
                      {"seen", num(split.seen.size())},
                      {"unseen", num(split.unseen.size())}});
    return split;
}

SemanticSpace load_space_file(const std::string& path, RunRecorder& rec) {
    SemanticSpace space = load_space(path);
    rec.input(path);
    log_line("info", {{"loaded", path},
                      {"kind", to_string(space.kind())},
                      {"relations", num(space.size())},
                      {"dim", num(space.dim())}});
    return space;
}

std::vector<int> split_relation_union(const RelationSplit& split) {
    std::vector<int> rels = split.seen;
    rels.insert(rels.end(), split.unseen.begin(), split.unseen.end());
    std::sort(rels.begin(), rels.end());
    return rels;
}

KnowledgeGraph with_same_vocab(const KnowledgeGraph& kg) {
    KnowledgeGraph out;
    for (int e = 0; e < kg.n_entities(); ++e)
        out.entities().add_or_get(kg.entities().name_of(e));
    for (int r = 0; r < kg.n_relations(); ++r)
        out.relations().add_or_get(kg.relations().name_of(r));
    return out;
}

void log_epochs(const std::vector<double>& losses) {
    for (std::size_t i = 0; i < losses.size(); ++i)
        log_line("info", {{"epoch", num(i + 1)}, {"loss", num(losses[i])}});
}

// ---------------------------------------------------------------------------
// Subcommands.

struct GenSynthCmd {
    Common common;
    std::string out_dir;

    void run() {
        const Cfg cfg = common.resolve();
        SynthConfig s = synth_config(cfg);
        RunRecorder rec("gen-synth");
        rec.m.seed = s.rng_seed;
        rec.m.config = {{"synth", synth_snapshot(s)}};

        auto [kg, rules] = gen_kg(s);
        const SynthCorpus corpus = gen_instances(kg, s);
        const WordVectors wv = gen_word_vectors(kg, s);

        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        const auto at = [&](const char* name) {
            return (fs::path(out_dir) / name).string();
        };
        save_triples(kg, at("kg.tsv"));
        save_rules(rules, kg, at("planted_rules.jsonl"));
        save_instances(corpus.train, kg, at("train.jsonl"));
        save_instances(corpus.test, kg, at("test.jsonl"));
        save_split(corpus.split, kg, at("split.json"));
        save_word_vectors(wv, at("words.txt"));
        for (const char* name : {"kg.tsv", "planted_rules.jsonl", "train.jsonl",
                                 "test.jsonl", "split.json", "words.txt"})
            rec.output(at(name));

        log_line("info", {{"cmd", "gen-synth"},
                          {"triples", num(kg.n_triples())},
                          {"train_instances", num(corpus.train.size())},
                          {"test_instances", num(corpus.test.size())},
                          {"words", num(wv.size())}});
        rec.finish(at("kg.tsv"));
    }
};

struct TrainKgeCmd {
    Common common;
    std::string kg_path, out_entities, out_relations, out_holdout;

    void run() {
        const Cfg cfg = common.resolve();
        const TransEConfig tc = kge_config(cfg);
        const long holdout = cfg.get<long>("kge.holdout", 0);
        const int jobs = job_count(cfg);
        RunRecorder rec("train-kge");
        rec.m.seed = tc.rng_seed;
        rec.m.config = {{"kge", kge_snapshot(tc)}, {"jobs", jobs}};
        rec.m.config["kge"]["holdout"] = holdout;

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        if (holdout < 0) throw ValidationError("kge.holdout must be nonnegative");
        if (holdout >= static_cast<long>(kg.n_triples()))
            throw ValidationError("kge.holdout must leave at least one training triple");
        if (holdout > 0 && out_holdout.empty())
            throw ValidationError("--out-holdout is required when kge.holdout > 0");

        TransETrainStats stats;
        EmbeddingTable table;
        if (holdout > 0) {
            std::vector<std::size_t> idx(kg.n_triples());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            Rng rng = make_rng(derive_seed(tc.rng_seed, "kge-holdout"));
            for (long i = 0; i < holdout; ++i)
                std::swap(idx[static_cast<std::size_t>(i)],
                          idx[static_cast<std::size_t>(i) +
                              uniform_int(rng, idx.size() - static_cast<std::size_t>(i))]);
            std::vector<std::size_t> held(idx.begin(), idx.begin() + holdout);
            std::sort(held.begin(), held.end());

            KnowledgeGraph train_kg = with_same_vocab(kg);
            KnowledgeGraph holdout_kg = with_same_vocab(kg);
            std::size_t next = 0;
            for (std::size_t i = 0; i < kg.triples().size(); ++i) {
                const Triple& t = kg.triples()[i];
                if (next < held.size() && held[next] == i) {
                    holdout_kg.add(t.head, t.rel, t.tail);
                    ++next;
                } else {
                    train_kg.add(t.head, t.rel, t.tail);
                }
            }
            train_kg.finalize();
            holdout_kg.finalize();
            save_triples(holdout_kg, out_holdout);
            rec.output(out_holdout);
            log_line("info", {{"holdout_triples", num(holdout_kg.n_triples())},
                              {"train_triples", num(train_kg.n_triples())}});
            table = train_transe(train_kg, tc, &stats, jobs);
        } else {
            table = train_transe(kg, tc, &stats, jobs);
        }
        log_epochs(stats.epoch_loss);

        save_embeddings(table, kg, out_entities, out_relations);
        rec.output(out_entities);
        rec.output(out_relations);
        rec.finish(out_entities);
    }
};

struct EvalKgeCmd {
    Common common;
    std::string kg_path, entities_path, relations_path, triples_path, out_path;

    void run() {
        const Cfg cfg = common.resolve();
        const int norm_order = cfg.get("kge.norm_order", TransEConfig{}.norm_order);
        const int jobs = job_count(cfg);
        RunRecorder rec("eval-kge");
        rec.m.seed = master_seed(cfg);
        rec.m.config = {{"kge", {{"norm_order", norm_order}}}, {"jobs", jobs}};

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const EmbeddingTable table =
            load_embeddings(entities_path, relations_path, kg);
        rec.input(entities_path);
        rec.input(relations_path);

        const KnowledgeGraph held_kg = load_triples(triples_path);
        rec.input(triples_path);
        std::vector<Triple> held;
        held.reserve(held_kg.n_triples());
        for (const Triple& t : held_kg.triples())
            held.push_back({kg.entities().require(held_kg.entities().name_of(t.head)),
                            kg.relations().require(held_kg.relations().name_of(t.rel)),
                            kg.entities().require(held_kg.entities().name_of(t.tail))});

        const LinkPredictionMetrics m =
            link_prediction_eval(table, kg, held, norm_order, jobs);
        const json out = {{"mean_rank", m.mean_rank}, {"hits_at_10", m.hits_at_10}};
        write_file_atomic(out_path, out.dump(2) + "\n");
        rec.output(out_path);
        log_line("info", {{"cmd", "eval-kge"},
                          {"held_out", num(held.size())},
                          {"mean_rank", num(m.mean_rank)},
                          {"hits_at_10", num(m.hits_at_10)}});
        rec.finish(out_path);
    }
};

struct MineRulesCmd {
    Common common;
    std::string kg_path, out_path;

    void run() {
        const Cfg cfg = common.resolve();
        const MineConfig mc = mine_config(cfg);
        const int jobs = job_count(cfg);
        RunRecorder rec("mine-rules");
        rec.m.seed = master_seed(cfg);
        rec.m.config = {{"mine", mine_snapshot(mc)}, {"jobs", jobs}};

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const std::vector<Rule> rules = mine_rules(kg, mc, jobs);
        save_rules(rules, kg, out_path);
        rec.output(out_path);
        log_line("info", {{"cmd", "mine-rules"}, {"rules", num(rules.size())}});
        rec.finish(out_path);
    }
};

struct BuildSpaceCmd {
    Common common;
    std::string kind_str, kg_path, split_path, out_path;
    std::string words_path, entities_path, relations_path, rules_path;
    std::string base_space_path, space_a_path, space_b_path;

    void run() {
        const Cfg cfg = common.resolve();
        const SpaceKind kind = parse_space_kind(kind_str);
        RunRecorder rec("build-space");
        rec.m.seed = master_seed(cfg);
        json space_cfg = {{"kind", to_string(kind)}};

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const RelationSplit split = load_split_file(split_path, kg, rec);
        const std::vector<int> rels = split_relation_union(split);

        SemanticSpace space;
        switch (kind) {
            case SpaceKind::wd: {
                require_path(words_path, "--words");
                const WordVectors wv = load_words(words_path, rec);
                space = build_space_wd(wv, kg, rels);
                break;
            }
            case SpaceKind::kg: {
                require_path(entities_path, "--entities");
                require_path(relations_path, "--relations");
                const EmbeddingTable table =
                    load_embeddings(entities_path, relations_path, kg);
                rec.input(entities_path);
                rec.input(relations_path);
                space = build_space_kg(table, kg, rels);
                break;
            }
            case SpaceKind::rl: {
                require_path(rules_path, "--rules");
                require_path(base_space_path, "--base-space");
                const int top_k = cfg.get("space.top_k", 5);
                space_cfg["top_k"] = top_k;
                const std::vector<Rule> rules = load_rules(rules_path, kg);
                rec.input(rules_path);
                const SemanticSpace base = load_space_file(base_space_path, rec);
                if (base.kind() != SpaceKind::kg)
                    throw ValidationError(
                        "--base-space must hold knowledge-graph vectors");
                std::vector<int> uncovered;
                space = build_space_rl(rules, split.unseen, base, top_k, kg,
                                       &uncovered);
                for (int r : uncovered)
                    log_line("warn", {{"uncovered_relation", kg.relations().name_of(r)}});
                break;
            }
            case SpaceKind::kw:
            case SpaceKind::rw: {
                require_path(space_a_path, "--space-a");
                require_path(space_b_path, "--space-b");
                const SemanticSpace a = load_space_file(space_a_path, rec);
                const SemanticSpace b = load_space_file(space_b_path, rec);
                const int out_dim = cfg.get("space.out_dim", a.dim());
                space_cfg["out_dim"] = out_dim;
                const CombineParams params = init_combine_params(
                    out_dim, a.dim() + b.dim(),
                    derive_seed(master_seed(cfg), "combine-init"));
                space = combine_concat_linear(a, b, params);
                if (space.kind() != kind)
                    throw ValidationError(
                        std::string("space kinds produce ") + to_string(space.kind()) +
                        ", not the requested " + to_string(kind));
                break;
            }
            case SpaceKind::kr: {
                require_path(space_a_path, "--space-a");
                require_path(space_b_path, "--space-b");
                const double lambda = cfg.get("space.lambda", 0.5);
                space_cfg["lambda"] = lambda;
                const SemanticSpace a = load_space_file(space_a_path, rec);
                const SemanticSpace b = load_space_file(space_b_path, rec);
                space = combine_weighted_sum(a, b, lambda);
                break;
            }
        }

        rec.m.config = {{"space", space_cfg}};
        save_space(space, out_path);
        rec.output(out_path);
        log_line("info", {{"cmd", "build-space"},
                          {"kind", to_string(space.kind())},
                          {"relations", num(space.size())},
                          {"dim", num(space.dim())}});
        rec.finish(out_path);
    }

    static void require_path(const std::string& path, const char* flag) {
        if (path.empty())
            throw ValidationError(std::string(flag) + " is required for this kind");
    }
};

struct TrainEncoderCmd {
    Common common;
    std::string train_path, words_path, kg_path, out_path;

    void run() {
        const Cfg cfg = common.resolve();
        RunRecorder rec("train-encoder");
        rec.m.seed = master_seed(cfg);

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const WordVectors wv = load_words(words_path, rec);
        const PcnnConfig pc = encoder_config(cfg, wv.dim());
        rec.m.config = {{"encoder", encoder_snapshot(pc)}};

        const std::vector<Instance> train = load_instances(train_path, kg);
        rec.input(train_path);
        std::vector<int> rels;
        for (const Instance& inst : train) rels.push_back(inst.relation);
        std::sort(rels.begin(), rels.end());
        rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
        const LabelMap labels = LabelMap::from_relations(rels);
        log_line("info", {{"train_instances", num(train.size())},
                          {"classes", num(labels.n_classes())}});

        std::vector<double> losses;
        const PcnnParams params = train_classifier(train, wv, pc, labels, &losses);
        log_epochs(losses);
        save_pcnn(params, labels, kg, out_path);
        rec.output(out_path);
        rec.finish(out_path);
    }
};

struct TrainDeviseCmd {
    Common common;
    std::string train_path, words_path, kg_path;
    std::string space_path, kind_str, space_a_path, space_b_path;
    std::string out_trunk, out_proj, out_space;

    void run() {
        const Cfg cfg = common.resolve();
        RunRecorder rec("train-devise");
        rec.m.seed = master_seed(cfg);

        const bool combined = !kind_str.empty();
        if (combined == !space_path.empty())
            throw ValidationError(
                "pass either --space or --kind with --space-a/--space-b");

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const WordVectors wv = load_words(words_path, rec);
        const PcnnConfig pc = encoder_config(cfg, wv.dim());
        const DeviseConfig dc = devise_config(cfg);
        rec.m.config = {{"encoder", encoder_snapshot(pc)},
                        {"devise", devise_snapshot(dc)}};
        const std::vector<Instance> train = load_instances(train_path, kg);
        rec.input(train_path);

        std::vector<double> losses;
        if (!combined) {
            const SemanticSpace space = load_space_file(space_path, rec);
            DeviseModel model = devise_train(train, wv, pc, dc, space, kg, &losses);
            log_epochs(losses);
            save_pcnn(model.trunk, LabelMap{}, kg, out_trunk);
            save_devise(model.proj, out_proj);
        } else {
            const SpaceKind kind = parse_space_kind(kind_str);
            if (kind != SpaceKind::kw && kind != SpaceKind::rw)
                throw ValidationError("--kind must be kw or rw for joint training");
            if (space_a_path.empty() || space_b_path.empty())
                throw ValidationError("--space-a and --space-b are required with --kind");
            if (out_space.empty())
                throw ValidationError("--out-space is required with --kind");
            const SemanticSpace a = load_space_file(space_a_path, rec);
            const SemanticSpace b = load_space_file(space_b_path, rec);
            const int out_dim = cfg.get("space.out_dim", a.dim());
            rec.m.config["space"] = {{"kind", to_string(kind)}, {"out_dim", out_dim}};
            const CombineParams init = init_combine_params(
                out_dim, a.dim() + b.dim(), derive_seed(master_seed(cfg), "combine-init"));
            DeviseCombinedModel model = devise_train_combined(
                train, wv, pc, dc, kind, a, b, init, kg, &losses);
            log_epochs(losses);
            save_pcnn(model.trunk, LabelMap{}, kg, out_trunk);
            save_devise(model.proj, out_proj);
            save_space(model.space, out_space);
            rec.output(out_space);
        }
        rec.output(out_trunk);
        rec.output(out_proj);
        rec.finish(out_proj);
    }
};

struct PredictCmd {
    Common common;
    std::string test_path, words_path, kg_path, split_path, space_path;
    std::string projector = "conse";
    std::string sim_str = "cosine";
    std::string encoder_path, trunk_path, proj_path, out_path;

    void run() {
        const Cfg cfg = common.resolve();
        RunRecorder rec("predict");
        rec.m.seed = master_seed(cfg);
        const Similarity sim = parse_similarity(sim_str);
        const int top_t = cfg.get("predict.top_t", 3);
        const bool renormalize = cfg.get("predict.renormalize", false);
        rec.m.config = {{"predict",
                         {{"projector", projector},
                          {"sim", to_string(sim)},
                          {"top_t", top_t},
                          {"renormalize", renormalize}}}};

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const WordVectors wv = load_words(words_path, rec);
        const RelationSplit split = load_split_file(split_path, kg, rec);
        const SemanticSpace space = load_space_file(space_path, rec);
        const std::vector<Instance> insts = load_instances(test_path, kg);
        rec.input(test_path);

        std::vector<int> excluded;
        const std::vector<int> candidates =
            covered_candidates(space, split.unseen, kg, &excluded);
        for (int r : excluded)
            log_line("warn", {{"uncovered_candidate", kg.relations().name_of(r)}});
        if (candidates.empty())
            throw ComputeError("no unseen relation is covered by the space");

        std::vector<Prediction> preds;
        if (projector == "conse") {
            if (encoder_path.empty())
                throw ValidationError("--encoder is required with --projector conse");
            auto [params, labels] = load_pcnn(encoder_path, kg);
            rec.input(encoder_path);
            if (labels.n_classes() == 0)
                throw ValidationError("encoder checkpoint has no classifier head");
            int t = top_t;
            if (t > labels.n_classes()) {
                t = labels.n_classes();
                log_line("warn", {{"msg", "top_t exceeds the seen class count"},
                                  {"top_t", num(t)}});
            }
            for (std::size_t i = 0; i < insts.size(); ++i) {
                const Instance& inst = insts[i];
                if (!std::binary_search(split.unseen.begin(), split.unseen.end(),
                                        inst.relation))
                    continue;
                const Vec feature = pcnn_forward(inst, wv, params, false);
                const auto topT = classify_topT(feature, params, labels, t);
                const Vec g = conse_project(topT, space, kg, renormalize);
                preds.push_back(predict(static_cast<int>(i), inst.relation, g, space,
                                        candidates, kg, sim));
            }
        } else if (projector == "devise") {
            if (trunk_path.empty() || proj_path.empty())
                throw ValidationError(
                    "--trunk and --proj are required with --projector devise");
            auto [trunk, trunk_labels] = load_pcnn(trunk_path, kg);
            (void)trunk_labels;
            const DeviseParams proj = load_devise(proj_path);
            rec.input(trunk_path);
            rec.input(proj_path);
            for (std::size_t i = 0; i < insts.size(); ++i) {
                const Instance& inst = insts[i];
                if (!std::binary_search(split.unseen.begin(), split.unseen.end(),
                                        inst.relation))
                    continue;
                const Vec g = devise_project(pcnn_forward(inst, wv, trunk, false), proj);
                preds.push_back(predict(static_cast<int>(i), inst.relation, g, space,
                                        candidates, kg, sim));
            }
        } else {
            throw ValidationError("unknown projector: " + projector);
        }

        if (preds.empty())
            throw ValidationError("no test instance carries an unseen gold label");
        save_predictions(preds, kg, out_path);
        rec.output(out_path);
        log_line("info", {{"cmd", "predict"},
                          {"instances", num(preds.size())},
                          {"candidates", num(candidates.size())}});
        rec.finish(out_path);
    }
};

struct EvaluateCmd {
    Common common;
    std::string predictions_path, kg_path, out_path;

    void run() {
        const Cfg cfg = common.resolve();
        RunRecorder rec("evaluate");
        rec.m.seed = master_seed(cfg);
        rec.m.config = json::object();

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const std::vector<Prediction> preds = load_predictions(predictions_path, kg);
        rec.input(predictions_path);
        const EvalReport report = evaluate(preds);
        save_metrics(report, kg, out_path);
        rec.output(out_path);
        log_line("info", {{"cmd", "evaluate"},
                          {"instances", num(preds.size())},
                          {"hit1", num(report.hit1)},
                          {"hit2", num(report.hit2)},
                          {"hit5", num(report.hit5)},
                          {"macro_f1", num(report.macro_f1)}});
        rec.finish(out_path);
    }
};

struct InfluenceCmd {
    Common common;
    std::string test_path, words_path, kg_path, split_path, encoder_path, out_path;

    void run() {
        const Cfg cfg = common.resolve();
        RunRecorder rec("influence");
        rec.m.seed = master_seed(cfg);
        const int top_t = cfg.get("influence.top_t", 0);  // 0 = every seen class
        rec.m.config = {{"influence", {{"top_t", top_t}}}};

        const KnowledgeGraph kg = load_kg(kg_path, rec);
        const WordVectors wv = load_words(words_path, rec);
        const RelationSplit split = load_split_file(split_path, kg, rec);
        const std::vector<Instance> insts = load_instances(test_path, kg);
        rec.input(test_path);
        auto [params, labels] = load_pcnn(encoder_path, kg);
        rec.input(encoder_path);
        if (labels.n_classes() == 0)
            throw ValidationError("encoder checkpoint has no classifier head");
        const int t = top_t > 0 ? std::min(top_t, labels.n_classes())
                                : labels.n_classes();

        std::vector<InfluenceRecord> records;
        for (const Instance& inst : insts) {
            if (!std::binary_search(split.unseen.begin(), split.unseen.end(),
                                    inst.relation))
                continue;
            const Vec feature = pcnn_forward(inst, wv, params, false);
            records.push_back({inst.relation, classify_topT(feature, params, labels, t)});
        }
        if (records.empty())
            throw ValidationError("no test instance carries an unseen gold label");

        const InfluenceMatrix m = influence_matrix(records, split.seen, split.unseen);
        save_influence_tsv(m, kg, out_path);
        rec.output(out_path);
        log_line("info", {{"cmd", "influence"}, {"instances", num(records.size())}});
        rec.finish(out_path);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot relation classification toolkit"};
    app.set_version_flag("--version", std::string("zsrc ") + ZSRC_VERSION);
    app.require_subcommand(1);

    GenSynthCmd gen_synth;
    {
        CLI::App* c = app.add_subcommand(
            "gen-synth", "generate a synthetic corpus with planted rules");
        gen_synth.common.attach(c);
        c->add_option("--out-dir", gen_synth.out_dir,
                      "directory for kg.tsv, instances, split, word vectors")
            ->required();
        c->callback([&] { gen_synth.run(); });
    }

    TrainKgeCmd train_kge;
    {
        CLI::App* c = app.add_subcommand("train-kge",
                                         "train translation embeddings on a KG");
        train_kge.common.attach(c);
        c->add_option("--kg", train_kge.kg_path, "triples TSV")->required();
        c->add_option("--out-entities", train_kge.out_entities, "entity vectors out")
            ->required();
        c->add_option("--out-relations", train_kge.out_relations,
                      "relation vectors out")
            ->required();
        c->add_option("--out-holdout", train_kge.out_holdout,
                      "held-out triples TSV (with kge.holdout > 0)");
        train_kge.common.binds.bind<int>(c, "--dim", "kge.dim", "embedding dimension");
        train_kge.common.binds.bind<double>(c, "--margin", "kge.margin",
                                            "ranking margin");
        train_kge.common.binds.bind<double>(c, "--lr", "kge.learning_rate",
                                            "learning rate");
        train_kge.common.binds.bind<int>(c, "--epochs", "kge.epochs", "epochs");
        train_kge.common.binds.bind<int>(c, "--batch", "kge.batch_size", "batch size");
        train_kge.common.binds.bind<int>(c, "--norm", "kge.norm_order",
                                         "score norm order (1 or 2)");
        train_kge.common.binds.bind<long>(c, "--holdout", "kge.holdout",
                                          "triples to hold out for evaluation");
        c->callback([&] { train_kge.run(); });
    }

    EvalKgeCmd eval_kge;
    {
        CLI::App* c = app.add_subcommand(
            "eval-kge", "filtered link-prediction metrics on held-out triples");
        eval_kge.common.attach(c);
        c->add_option("--kg", eval_kge.kg_path, "filter triples TSV")->required();
        c->add_option("--entities", eval_kge.entities_path, "entity vectors")
            ->required();
        c->add_option("--relations", eval_kge.relations_path, "relation vectors")
            ->required();
        c->add_option("--triples", eval_kge.triples_path, "held-out triples TSV")
            ->required();
        c->add_option("--out", eval_kge.out_path, "metrics JSON out")->required();
        eval_kge.common.binds.bind<int>(c, "--norm", "kge.norm_order",
                                        "score norm order (1 or 2)");
        c->callback([&] { eval_kge.run(); });
    }

    MineRulesCmd mine_rules_cmd;
    {
        CLI::App* c = app.add_subcommand("mine-rules",
                                         "mine closed chain rules with PCA confidence");
        mine_rules_cmd.common.attach(c);
        c->add_option("--kg", mine_rules_cmd.kg_path, "triples TSV")->required();
        c->add_option("--out", mine_rules_cmd.out_path, "rules JSONL out")->required();
        mine_rules_cmd.common.binds.bind<int>(c, "--max-len", "mine.max_len",
                                              "max body atoms (1 or 2)");
        mine_rules_cmd.common.binds.bind<long>(c, "--min-support", "mine.min_support",
                                               "min rule support");
        mine_rules_cmd.common.binds.bind<double>(c, "--min-hc", "mine.min_head_coverage",
                                                 "min head coverage");
        mine_rules_cmd.common.binds.bind<double>(c, "--min-pca", "mine.min_pca",
                                                 "min PCA confidence");
        c->callback([&] { mine_rules_cmd.run(); });
    }

    BuildSpaceCmd build_space;
    {
        CLI::App* c = app.add_subcommand("build-space",
                                         "build a relation semantic space");
        build_space.common.attach(c);
        c->add_option("--kind", build_space.kind_str, "wd|kg|rl|kw|rw|kr")->required();
        c->add_option("--kg", build_space.kg_path, "triples TSV")->required();
        c->add_option("--split", build_space.split_path, "seen/unseen split JSON")
            ->required();
        c->add_option("--out", build_space.out_path, "space file out")->required();
        c->add_option("--words", build_space.words_path, "word vectors (kind wd)");
        c->add_option("--entities", build_space.entities_path,
                      "entity vectors (kind kg)");
        c->add_option("--relations", build_space.relations_path,
                      "relation vectors (kind kg)");
        c->add_option("--rules", build_space.rules_path, "mined rules (kind rl)");
        c->add_option("--base-space", build_space.base_space_path,
                      "kg space used to compose rules (kind rl)");
        c->add_option("--space-a", build_space.space_a_path,
                      "first space (kinds kw/rw/kr)");
        c->add_option("--space-b", build_space.space_b_path,
                      "second space (kinds kw/rw/kr)");
        build_space.common.binds.bind<int>(c, "--top-k", "space.top_k",
                                           "rules per unseen relation (kind rl)");
        build_space.common.binds.bind<double>(c, "--lambda", "space.lambda",
                                              "weight on space-a (kind kr)");
        build_space.common.binds.bind<int>(c, "--out-dim", "space.out_dim",
                                           "combined dimension (kinds kw/rw)");
        c->callback([&] { build_space.run(); });
    }

    TrainEncoderCmd train_encoder;
    {
        CLI::App* c = app.add_subcommand(
            "train-encoder", "train the piecewise-pooled sentence classifier");
        train_encoder.common.attach(c);
        c->add_option("--train", train_encoder.train_path, "train instances JSONL")
            ->required();
        c->add_option("--words", train_encoder.words_path, "word vectors")->required();
        c->add_option("--kg", train_encoder.kg_path, "triples TSV")->required();
        c->add_option("--out", train_encoder.out_path, "checkpoint out")->required();
        auto& b = train_encoder.common.binds;
        b.bind<int>(c, "--pos-dim", "encoder.pos_dim", "position embedding dim");
        b.bind<int>(c, "--pos-clip", "encoder.pos_clip", "position distance clip");
        b.bind<int>(c, "--channels", "encoder.channels", "convolution channels");
        b.bind<double>(c, "--dropout", "encoder.dropout", "dropout rate");
        b.bind<double>(c, "--lr", "encoder.learning_rate", "learning rate");
        b.bind<int>(c, "--epochs", "encoder.epochs", "epochs");
        b.bind<int>(c, "--batch", "encoder.batch_size", "batch size");
        c->callback([&] { train_encoder.run(); });
    }

    TrainDeviseCmd train_devise_cmd;
    {
        CLI::App* c = app.add_subcommand(
            "train-devise", "train the ranking projector (optionally jointly "
                            "with a combined space)");
        train_devise_cmd.common.attach(c);
        c->add_option("--train", train_devise_cmd.train_path, "train instances JSONL")
            ->required();
        c->add_option("--words", train_devise_cmd.words_path, "word vectors")
            ->required();
        c->add_option("--kg", train_devise_cmd.kg_path, "triples TSV")->required();
        c->add_option("--space", train_devise_cmd.space_path,
                      "fixed target space (simple kinds)");
        c->add_option("--kind", train_devise_cmd.kind_str,
                      "kw|rw for joint combination training");
        c->add_option("--space-a", train_devise_cmd.space_a_path,
                      "first space (with --kind)");
        c->add_option("--space-b", train_devise_cmd.space_b_path,
                      "word space (with --kind)");
        c->add_option("--out-trunk", train_devise_cmd.out_trunk, "encoder trunk out")
            ->required();
        c->add_option("--out-proj", train_devise_cmd.out_proj, "projection out")
            ->required();
        c->add_option("--out-space", train_devise_cmd.out_space,
                      "combined space out (with --kind)");
        auto& b = train_devise_cmd.common.binds;
        b.bind<double>(c, "--margin", "devise.margin", "hinge margin");
        b.bind<double>(c, "--lr", "devise.learning_rate", "learning rate");
        b.bind<int>(c, "--epochs", "devise.epochs", "epochs");
        b.bind<int>(c, "--negatives", "devise.negatives", "negatives per instance");
        b.bind<int>(c, "--out-dim", "space.out_dim", "combined dimension (with --kind)");
        b.bind<int>(c, "--pos-dim", "encoder.pos_dim", "trunk position embedding dim");
        b.bind<int>(c, "--pos-clip", "encoder.pos_clip", "trunk position distance clip");
        b.bind<int>(c, "--channels", "encoder.channels", "trunk convolution channels");
        b.bind<double>(c, "--dropout", "encoder.dropout", "trunk dropout rate");
        c->callback([&] { train_devise_cmd.run(); });
    }

    PredictCmd predict_cmd;
    {
        CLI::App* c = app.add_subcommand("predict",
                                         "rank unseen relations for test instances");
        predict_cmd.common.attach(c);
        c->add_option("--test", predict_cmd.test_path, "test instances JSONL")
            ->required();
        c->add_option("--words", predict_cmd.words_path, "word vectors")->required();
        c->add_option("--kg", predict_cmd.kg_path, "triples TSV")->required();
        c->add_option("--split", predict_cmd.split_path, "seen/unseen split JSON")
            ->required();
        c->add_option("--space", predict_cmd.space_path, "semantic space")->required();
        c->add_option("--projector", predict_cmd.projector, "conse|devise")
            ->default_str("conse");
        c->add_option("--sim", predict_cmd.sim_str, "cosine|euclidean")
            ->default_str("cosine");
        c->add_option("--encoder", predict_cmd.encoder_path,
                      "classifier checkpoint (conse)");
        c->add_option("--trunk", predict_cmd.trunk_path, "trunk checkpoint (devise)");
        c->add_option("--proj", predict_cmd.proj_path, "projection file (devise)");
        c->add_option("--out", predict_cmd.out_path, "predictions JSONL out")
            ->required();
        predict_cmd.common.binds.bind<int>(c, "--top-t", "predict.top_t",
                                           "seen classes combined per instance");
        predict_cmd.common.binds.bind_flag(c, "--renormalize", "predict.renormalize",
                                           "renormalize the top-T probabilities");
        c->callback([&] { predict_cmd.run(); });
    }

    EvaluateCmd evaluate_cmd;
    {
        CLI::App* c = app.add_subcommand("evaluate",
                                         "hit rates and per-relation F1 from predictions");
        evaluate_cmd.common.attach(c);
        c->add_option("--predictions", evaluate_cmd.predictions_path,
                      "predictions JSONL")
            ->required();
        c->add_option("--kg", evaluate_cmd.kg_path, "triples TSV")->required();
        c->add_option("--out", evaluate_cmd.out_path, "metrics JSON out")->required();
        c->callback([&] { evaluate_cmd.run(); });
    }

    InfluenceCmd influence_cmd;
    {
        CLI::App* c = app.add_subcommand(
            "influence", "seen-class probability mass per unseen gold relation");
        influence_cmd.common.attach(c);
        c->add_option("--test", influence_cmd.test_path, "test instances JSONL")
            ->required();
        c->add_option("--words", influence_cmd.words_path, "word vectors")->required();
        c->add_option("--kg", influence_cmd.kg_path, "triples TSV")->required();
        c->add_option("--split", influence_cmd.split_path, "seen/unseen split JSON")
            ->required();
        c->add_option("--encoder", influence_cmd.encoder_path,
                      "classifier checkpoint")
            ->required();
        c->add_option("--out", influence_cmd.out_path, "influence TSV out")->required();
        influence_cmd.common.binds.bind<int>(c, "--top-t", "influence.top_t",
                                             "seen classes kept per instance (0 = all)");
        c->callback([&] { influence_cmd.run(); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        log_line("error", {{"msg", e.what()}});
        return 1;
    } catch (const ValidationError& e) {
        log_line("error", {{"msg", e.what()}});
        return 1;
    } catch (const ComputeError& e) {
        log_line("error", {{"msg", e.what()}});
        return 2;
    } catch (const std::exception& e) {
        log_line("error", {{"msg", e.what()}});
        return 2;
    }
    return 0;
}
