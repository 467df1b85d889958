#include "zsrc/transe.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "zsrc/io_util.hpp"

namespace zsrc {

void TransEConfig::validate() const {
    if (dim <= 0) throw ValidationError("transe: dim must be positive");
    if (margin <= 0) throw ValidationError("transe: margin must be positive");
    if (learning_rate <= 0) throw ValidationError("transe: learning rate must be positive");
    if (epochs < 0) throw ValidationError("transe: epochs must be >= 0");
    if (batch_size <= 0) throw ValidationError("transe: batch size must be positive");
    if (norm_order != 1 && norm_order != 2)
        throw ValidationError("transe: norm order must be 1 or 2");
}

EmbeddingTable init_embeddings(const KnowledgeGraph& kg, const TransEConfig& cfg) {
    cfg.validate();
    EmbeddingTable table(kg.n_entities(), kg.n_relations(), cfg.dim);
    Rng rng = make_rng(derive_seed(cfg.rng_seed, "transe-init"));
    const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
    for (int e = 0; e < kg.n_entities(); ++e) {
        double* row = table.entity(e);
        for (int d = 0; d < cfg.dim; ++d) row[d] = uniform_real(rng, -bound, bound);
    }
    for (int r = 0; r < kg.n_relations(); ++r) {
        double* row = table.relation(r);
        double sq = 0.0;
        for (int d = 0; d < cfg.dim; ++d) {
            row[d] = uniform_real(rng, -bound, bound);
            sq += row[d] * row[d];
        }
        const double n = std::sqrt(sq);
        if (n > 0)
            for (int d = 0; d < cfg.dim; ++d) row[d] /= n;
    }
    return table;
}

double score_transe(const EmbeddingTable& table, int head, int rel, int tail,
                    int norm_order) {
    if (head < 0 || head >= table.n_entities() || tail < 0 || tail >= table.n_entities())
        throw ValidationError("score: entity id out of range");
    if (rel < 0 || rel >= table.n_relations())
        throw ValidationError("score: relation id out of range");
    const double* h = table.entity(head);
    const double* r = table.relation(rel);
    const double* t = table.entity(tail);
    double acc = 0.0;
    if (norm_order == 2) {
        for (int d = 0; d < table.dim(); ++d) {
            const double x = h[d] + r[d] - t[d];
            acc += x * x;
        }
        return std::sqrt(acc);
    }
    if (norm_order == 1) {
        for (int d = 0; d < table.dim(); ++d) acc += std::fabs(h[d] + r[d] - t[d]);
        return acc;
    }
    throw ValidationError("score: norm order must be 1 or 2");
}

Triple negative_sample(const KnowledgeGraph& kg, const Triple& pos, Rng& rng) {
    const int n = kg.n_entities();
    if (n < 2) throw ValidationError("negative_sample: need at least 2 entities");
    // No negative exists only when every entity works as head AND as tail.
    if (static_cast<int>(kg.subjects(pos.tail, pos.rel).size()) == n &&
        static_cast<int>(kg.objects(pos.head, pos.rel).size()) == n)
        throw ComputeError("negative_sample: relation " +
                           kg.relations().name_of(pos.rel) +
                           " connects all entity pairs through this triple");
    for (;;) {
        const bool corrupt_head = bernoulli(rng, 0.5);
        const int e = static_cast<int>(uniform_int(rng, static_cast<std::uint64_t>(n)));
        Triple neg = pos;
        (corrupt_head ? neg.head : neg.tail) = e;
        if (!kg.contains(neg)) return neg;
    }
}

namespace {

// d = E(h) + E(r) - E(t); returns ||d||_p and writes the gradient of the norm
// w.r.t. d. At the L2 kink (d = 0) the gradient is defined as zero; L1 uses
// sign with sign(0) = 0.
double norm_and_grad(const double* h, const double* r, const double* t, int dim,
                     int p, std::vector<double>& grad_d) {
    grad_d.assign(static_cast<std::size_t>(dim), 0.0);
    double acc = 0.0;
    if (p == 2) {
        for (int d = 0; d < dim; ++d) {
            const double x = h[d] + r[d] - t[d];
            grad_d[static_cast<std::size_t>(d)] = x;
            acc += x * x;
        }
        const double n = std::sqrt(acc);
        if (n > 0)
            for (int d = 0; d < dim; ++d) grad_d[static_cast<std::size_t>(d)] /= n;
        else
            std::fill(grad_d.begin(), grad_d.end(), 0.0);
        return n;
    }
    for (int d = 0; d < dim; ++d) {
        const double x = h[d] + r[d] - t[d];
        acc += std::fabs(x);
        grad_d[static_cast<std::size_t>(d)] = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
    }
    return acc;
}

}  // namespace

double transe_loss_grad(const EmbeddingTable& table,
                        const std::vector<std::pair<Triple, Triple>>& pairs,
                        double margin, int norm_order, EmbeddingTable& grad) {
    const int dim = table.dim();
    std::vector<double> gp(static_cast<std::size_t>(dim));
    std::vector<double> gn(static_cast<std::size_t>(dim));
    double loss = 0.0;
    for (const auto& [pos, neg] : pairs) {
        const double fp = norm_and_grad(table.entity(pos.head), table.relation(pos.rel),
                                        table.entity(pos.tail), dim, norm_order, gp);
        const double fn = norm_and_grad(table.entity(neg.head), table.relation(neg.rel),
                                        table.entity(neg.tail), dim, norm_order, gn);
        const double hinge = margin + fp - fn;
        if (hinge <= 0) continue;
        loss += hinge;
        double* gph = grad.entity(pos.head);
        double* gpr = grad.relation(pos.rel);
        double* gpt = grad.entity(pos.tail);
        double* gnh = grad.entity(neg.head);
        double* gnr = grad.relation(neg.rel);
        double* gnt = grad.entity(neg.tail);
        for (int d = 0; d < dim; ++d) {
            gph[d] += gp[static_cast<std::size_t>(d)];
            gpr[d] += gp[static_cast<std::size_t>(d)];
            gpt[d] -= gp[static_cast<std::size_t>(d)];
            gnh[d] -= gn[static_cast<std::size_t>(d)];
            gnr[d] -= gn[static_cast<std::size_t>(d)];
            gnt[d] += gn[static_cast<std::size_t>(d)];
        }
    }
    return loss;
}

namespace {

void project_entities_to_ball(EmbeddingTable& table) {
    const int dim = table.dim();
    for (int e = 0; e < table.n_entities(); ++e) {
        double* row = table.entity(e);
        double sq = 0.0;
        for (int d = 0; d < dim; ++d) sq += row[d] * row[d];
        if (sq > 1.0) {
            const double inv = 1.0 / std::sqrt(sq);
            for (int d = 0; d < dim; ++d) row[d] *= inv;
        }
    }
}

}  // namespace

EmbeddingTable train_transe(const KnowledgeGraph& kg, const TransEConfig& cfg,
                            TransETrainStats* stats, int threads) {
    cfg.validate();
    if (kg.n_triples() == 0) throw ValidationError("train_transe: empty graph");
    EmbeddingTable table = init_embeddings(kg, cfg);
    if (stats) stats->epoch_loss.clear();
    if (cfg.epochs == 0) return table;

    const auto& triples = kg.triples();
    const std::size_t n = triples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(derive_seed(cfg.rng_seed, "transe-train"));
    const int dim = cfg.dim;
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    EmbeddingTable grad(kg.n_entities(), kg.n_relations(), dim);
    std::vector<std::pair<Triple, Triple>> pairs;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the run rng; the shuffle and the negative samples
        // share one stream so the whole epoch is a function of the seed.
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = uniform_int(rng, i + 1);
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            pairs.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const Triple& pos = triples[order[i]];
                pairs.emplace_back(pos, negative_sample(kg, pos, rng));
            }
            grad = EmbeddingTable(kg.n_entities(), kg.n_relations(), dim);
            double batch_loss = 0.0;
            if (threads <= 1) {
                batch_loss = transe_loss_grad(table, pairs, cfg.margin, cfg.norm_order, grad);
            } else {
                // Lock-free: each thread scores its slice against the current
                // table and accumulates into the shared gradient unsynchronized.
                #pragma omp parallel num_threads(threads) reduction(+ : batch_loss)
                {
                    std::vector<std::pair<Triple, Triple>> slice;
                    #pragma omp for schedule(static)
                    for (std::size_t i = 0; i < pairs.size(); ++i)
                        slice.push_back(pairs[i]);
                    batch_loss += transe_loss_grad(table, slice, cfg.margin,
                                                   cfg.norm_order, grad);
                }
            }
            const double scale = cfg.learning_rate / static_cast<double>(stop - start);
            const std::size_t ne = static_cast<std::size_t>(kg.n_entities()) * dim;
            for (std::size_t i = 0; i < ne; ++i)
                table.entity(0)[i] -= scale * grad.entity(0)[i];
            const std::size_t nr = static_cast<std::size_t>(kg.n_relations()) * dim;
            for (std::size_t i = 0; i < nr; ++i)
                table.relation(0)[i] -= scale * grad.relation(0)[i];
            project_entities_to_ball(table);
            epoch_loss += batch_loss;
            if (!std::isfinite(batch_loss))
                throw ComputeError("train_transe: non-finite loss at epoch " +
                                   std::to_string(epoch) + " batch " +
                                   std::to_string(start / batch));
        }
        if (stats) stats->epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    return table;
}

LinkPredictionMetrics link_prediction_eval(const EmbeddingTable& table,
                                           const KnowledgeGraph& filter_kg,
                                           const std::vector<Triple>& held_out,
                                           int norm_order, int threads) {
    if (held_out.empty())
        throw ValidationError("link_prediction_eval: empty held-out set");
    const int n_ent = table.n_entities();
    std::vector<long> ranks(held_out.size(), 0);

    auto rank_query = [&](std::size_t q) {
        const Triple& t = held_out[q];
        const double target = score_transe(table, t.head, t.rel, t.tail, norm_order);
        const auto& known = filter_kg.objects(t.head, t.rel);
        long rank = 1;
        for (int e = 0; e < n_ent; ++e) {
            if (e == t.tail) continue;
            if (std::binary_search(known.begin(), known.end(), e)) continue;
            const double s = score_transe(table, t.head, t.rel, e, norm_order);
            if (s < target || (s == target && e < t.tail)) ++rank;
        }
        ranks[q] = rank;
    };

    if (threads <= 1) {
        for (std::size_t q = 0; q < held_out.size(); ++q) rank_query(q);
    } else {
        #pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (std::size_t q = 0; q < held_out.size(); ++q) rank_query(q);
    }

    LinkPredictionMetrics m;
    long sum = 0, hits = 0;
    for (long r : ranks) {
        sum += r;
        if (r <= 10) ++hits;
    }
    m.mean_rank = static_cast<double>(sum) / static_cast<double>(ranks.size());
    m.hits_at_10 = static_cast<double>(hits) / static_cast<double>(ranks.size());
    return m;
}

namespace {

void save_vector_file(const std::string& path, int count, int dim,
                      const std::function<const std::string&(int)>& name,
                      const std::function<const double*(int)>& row) {
    std::ostringstream out;
    out << count << ' ' << dim << '\n';
    for (int i = 0; i < count; ++i) {
        out << name(i);
        for (int d = 0; d < dim; ++d) out << ' ' << format_double(row(i)[d]);
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

}  // namespace

void save_embeddings(const EmbeddingTable& table, const KnowledgeGraph& kg,
                     const std::string& entity_path, const std::string& relation_path) {
    if (table.n_entities() != kg.n_entities() || table.n_relations() != kg.n_relations())
        throw ValidationError("save_embeddings: table does not match graph vocabularies");
    save_vector_file(
        entity_path, table.n_entities(), table.dim(),
        [&](int i) -> const std::string& { return kg.entities().name_of(i); },
        [&](int i) { return table.entity(i); });
    save_vector_file(
        relation_path, table.n_relations(), table.dim(),
        [&](int i) -> const std::string& { return kg.relations().name_of(i); },
        [&](int i) { return table.relation(i); });
}

namespace {

void load_vector_file(const std::string& path, int expected_count,
                      const std::function<int(const std::string&)>& id_of,
                      const std::function<double*(int)>& row, int& dim_io) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open embedding file: " + path);
    int count = 0, dim = 0;
    if (!(in >> count >> dim) || count <= 0 || dim <= 0)
        throw ValidationError(path + ": expected `<count> <dim>` header");
    if (count != expected_count)
        throw ValidationError(path + ": row count " + std::to_string(count) +
                              " does not match vocabulary size " +
                              std::to_string(expected_count));
    if (dim_io == 0) dim_io = dim;
    if (dim != dim_io)
        throw ValidationError(path + ": dimension mismatch with paired file");
    std::string name;
    std::vector<char> seen(static_cast<std::size_t>(count), 0);
    for (int i = 0; i < count; ++i) {
        if (!(in >> name))
            throw ValidationError(path + ": truncated at row " + std::to_string(i));
        const int id = id_of(name);
        if (seen[static_cast<std::size_t>(id)])
            throw ValidationError(path + ": duplicate row for " + name);
        seen[static_cast<std::size_t>(id)] = 1;
        double* r = row(id);
        for (int d = 0; d < dim; ++d)
            if (!(in >> r[d]))
                throw ValidationError(path + ": truncated vector for " + name);
    }
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& entity_path,
                               const std::string& relation_path,
                               const KnowledgeGraph& kg) {
    int dim = 0;
    {
        std::ifstream in(entity_path);
        if (!in) throw ValidationError("cannot open embedding file: " + entity_path);
        int count = 0;
        in >> count >> dim;
        if (dim <= 0) throw ValidationError(entity_path + ": bad header");
    }
    EmbeddingTable table(kg.n_entities(), kg.n_relations(), dim);
    int dim_io = 0;
    load_vector_file(
        entity_path, kg.n_entities(),
        [&](const std::string& n) { return kg.entities().require(n); },
        [&](int id) { return table.entity(id); }, dim_io);
    load_vector_file(
        relation_path, kg.n_relations(),
        [&](const std::string& n) { return kg.relations().require(n); },
        [&](int id) { return table.relation(id); }, dim_io);
    return table;
}

}  // namespace zsrc
