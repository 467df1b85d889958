#include "zsrc/pcnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "zsrc/errors.hpp"
#include "zsrc/io_util.hpp"

namespace zsrc {

void validate_instance(const Instance& inst) {
    const int n = static_cast<int>(inst.tokens.size());
    if (n == 0) throw ValidationError("instance has no tokens");
    for (const auto& tok : inst.tokens)
        if (tok.empty()) throw ValidationError("instance has an empty token");
    auto check_span = [&](const Span& s, const char* which) {
        if (s.start < 0 || s.end < s.start || s.end >= n)
            throw ValidationError(std::string(which) + " span out of range");
    };
    check_span(inst.head, "head");
    check_span(inst.tail, "tail");
    const bool disjoint =
        inst.head.end < inst.tail.start || inst.tail.end < inst.head.start;
    if (!disjoint) throw ValidationError("head and tail spans overlap");
}

bool spans_swapped(const Instance& inst) { return inst.tail.start < inst.head.start; }

std::vector<Instance> load_instances(const std::string& path, const KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open instance file: " + path);
    std::vector<Instance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Instance inst;
            inst.tokens = j.at("tokens").get<std::vector<std::string>>();
            const auto h = j.at("head").get<std::vector<int>>();
            const auto t = j.at("tail").get<std::vector<int>>();
            if (h.size() != 2 || t.size() != 2)
                throw ValidationError("head/tail must be [start, end]");
            inst.head = {h[0], h[1]};
            inst.tail = {t[0], t[1]};
            inst.relation = kg.relations().require(j.at("relation").get<std::string>());
            validate_instance(inst);
            out.push_back(std::move(inst));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_instances(const std::vector<Instance>& insts, const KnowledgeGraph& kg,
                    const std::string& path) {
    std::ostringstream out;
    for (const Instance& inst : insts) {
        nlohmann::json j;
        j["tokens"] = inst.tokens;
        j["head"] = {inst.head.start, inst.head.end};
        j["tail"] = {inst.tail.start, inst.tail.end};
        j["relation"] = kg.relations().name_of(inst.relation);
        out << j.dump() << '\n';
    }
    write_file_atomic(path, out.str());
}

LabelMap LabelMap::from_relations(std::vector<int> rel_ids) {
    std::sort(rel_ids.begin(), rel_ids.end());
    if (std::adjacent_find(rel_ids.begin(), rel_ids.end()) != rel_ids.end())
        throw ValidationError("label map: duplicate relation id");
    LabelMap m;
    m.class_to_rel = std::move(rel_ids);
    for (std::size_t c = 0; c < m.class_to_rel.size(); ++c)
        m.rel_to_class.emplace(m.class_to_rel[c], static_cast<int>(c));
    return m;
}

int LabelMap::require_class(int rel) const {
    auto it = rel_to_class.find(rel);
    if (it == rel_to_class.end())
        throw ValidationError("relation id " + std::to_string(rel) +
                              " is not a classifier label");
    return it->second;
}

void PcnnConfig::validate() const {
    if (word_dim <= 0) throw ValidationError("encoder: word_dim must be positive");
    if (pos_dim <= 0) throw ValidationError("encoder: pos_dim must be positive");
    if (pos_clip <= 0) throw ValidationError("encoder: pos_clip must be positive");
    if (channels <= 0) throw ValidationError("encoder: channels must be positive");
    if (kernel != 3) throw ValidationError("encoder: kernel width must be 3");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ValidationError("encoder: dropout must be in [0,1)");
    if (learning_rate <= 0) throw ValidationError("encoder: learning rate must be positive");
    if (epochs < 0) throw ValidationError("encoder: epochs must be >= 0");
    if (batch_size <= 0) throw ValidationError("encoder: batch size must be positive");
}

PcnnParams::PcnnParams(const PcnnConfig& cfg, int classes)
    : word_dim(cfg.word_dim),
      pos_dim(cfg.pos_dim),
      pos_clip(cfg.pos_clip),
      channels(cfg.channels),
      kernel(cfg.kernel),
      n_classes(classes),
      dropout(cfg.dropout) {
    const std::size_t rows = static_cast<std::size_t>(2 * pos_clip + 1);
    unk.assign(static_cast<std::size_t>(word_dim), 0.0);
    pos_head.assign(rows, Vec(static_cast<std::size_t>(pos_dim), 0.0));
    pos_tail.assign(rows, Vec(static_cast<std::size_t>(pos_dim), 0.0));
    conv_w.assign(static_cast<std::size_t>(channels),
                  Vec(static_cast<std::size_t>(kernel * in_dim()), 0.0));
    conv_b.assign(static_cast<std::size_t>(channels), 0.0);
    head_w.assign(static_cast<std::size_t>(n_classes),
                  Vec(static_cast<std::size_t>(feat_dim()), 0.0));
    head_b.assign(static_cast<std::size_t>(n_classes), 0.0);
}

namespace {

// Visits every trainable vector in a fixed order shared by updates,
// serialization, and finiteness checks.
template <typename P, typename Fn>
void for_each_table(P& p, Fn&& fn) {
    fn(p.unk);
    for (auto& row : p.pos_head) fn(row);
    for (auto& row : p.pos_tail) fn(row);
    for (auto& row : p.conv_w) fn(row);
    fn(p.conv_b);
    for (auto& row : p.head_w) fn(row);
    fn(p.head_b);
}

}  // namespace

void PcnnParams::check_finite() const {
    bool ok = true;
    for_each_table(*this, [&](const Vec& v) { ok = ok && all_finite(v); });
    if (!ok) throw ComputeError("encoder parameters are not finite");
}

void axpy_params(double scale, const PcnnParams& grad, PcnnParams& params) {
    std::vector<Vec*> dst;
    std::vector<const Vec*> src;
    for_each_table(params, [&](Vec& v) { dst.push_back(&v); });
    for_each_table(grad, [&](const Vec& v) { src.push_back(&v); });
    if (dst.size() != src.size()) throw ValidationError("parameter shapes disagree");
    for (std::size_t k = 0; k < dst.size(); ++k) {
        if (src[k]->size() != dst[k]->size())
            throw ValidationError("parameter shapes disagree");
        axpy(scale, *src[k], *dst[k]);
    }
}

PcnnParams init_pcnn(const PcnnConfig& cfg, int n_classes, std::uint64_t seed) {
    cfg.validate();
    if (n_classes < 0) throw ValidationError("encoder: negative class count");
    PcnnParams p(cfg, n_classes);
    Rng rng = make_rng(seed);
    auto fill = [&](Vec& v, double bound) {
        for (double& x : v) x = uniform_real(rng, -bound, bound);
    };
    fill(p.unk, 0.1);
    for (auto& row : p.pos_head) fill(row, 0.1);
    for (auto& row : p.pos_tail) fill(row, 0.1);
    const double conv_bound = 1.0 / std::sqrt(static_cast<double>(cfg.kernel * p.in_dim()));
    for (auto& row : p.conv_w) fill(row, conv_bound);
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(p.feat_dim()));
    for (auto& row : p.head_w) fill(row, head_bound);
    return p;
}

Vec pcnn_forward(const Instance& inst, const WordVectors& wv, const PcnnParams& params,
                 bool train_mode, Rng* rng, PcnnCache* cache) {
    validate_instance(inst);
    if (train_mode && !rng)
        throw ValidationError("train-mode forward requires an rng");
    const int n = static_cast<int>(inst.tokens.size());
    const int in = params.in_dim();
    const int wd = params.word_dim;
    const int pd = params.pos_dim;
    const int F = params.channels;
    const int clip = params.pos_clip;

    PcnnCache local;
    PcnnCache& c = cache ? *cache : local;
    c = PcnnCache{};
    c.n = n;
    c.input.assign(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(in), 0.0));
    c.used_unk.assign(static_cast<std::size_t>(n), 0);
    c.pos_head_idx.resize(static_cast<std::size_t>(n));
    c.pos_tail_idx.resize(static_cast<std::size_t>(n));

    for (int t = 0; t < n; ++t) {
        const Vec* word = wv.find(inst.tokens[static_cast<std::size_t>(t)]);
        if (!word) {
            word = &params.unk;
            c.used_unk[static_cast<std::size_t>(t)] = 1;
        }
        if (static_cast<int>(word->size()) != wd)
            throw ValidationError("word vector dimension does not match the encoder");
        Vec& x = c.input[static_cast<std::size_t>(t)];
        std::copy(word->begin(), word->end(), x.begin());
        const int dh = std::clamp(t - inst.head.start, -clip, clip) + clip;
        const int dt = std::clamp(t - inst.tail.start, -clip, clip) + clip;
        c.pos_head_idx[static_cast<std::size_t>(t)] = dh;
        c.pos_tail_idx[static_cast<std::size_t>(t)] = dt;
        const Vec& ph = params.pos_head[static_cast<std::size_t>(dh)];
        const Vec& pt = params.pos_tail[static_cast<std::size_t>(dt)];
        std::copy(ph.begin(), ph.end(), x.begin() + wd);
        std::copy(pt.begin(), pt.end(), x.begin() + wd + pd);
    }

    // Width-3 convolution with zero padding 1.
    c.conv_out.assign(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(F), 0.0));
    for (int t = 0; t < n; ++t) {
        Vec& out = c.conv_out[static_cast<std::size_t>(t)];
        for (int f = 0; f < F; ++f) {
            const Vec& w = params.conv_w[static_cast<std::size_t>(f)];
            double acc = params.conv_b[static_cast<std::size_t>(f)];
            for (int k = 0; k < params.kernel; ++k) {
                const int ti = t + k - 1;
                if (ti < 0 || ti >= n) continue;
                const Vec& x = c.input[static_cast<std::size_t>(ti)];
                const double* wk = w.data() + static_cast<std::size_t>(k) * in;
                for (int d = 0; d < in; ++d) acc += wk[d] * x[static_cast<std::size_t>(d)];
            }
            out[static_cast<std::size_t>(f)] = acc;
        }
    }

    // Piecewise max pooling over the three sentence segments.
    const Span& first = spans_swapped(inst) ? inst.tail : inst.head;
    const Span& second = spans_swapped(inst) ? inst.head : inst.tail;
    auto segment_of = [&](int t) { return t <= first.end ? 0 : (t < second.start ? 1 : 2); };
    for (auto& seg : c.seg_argmax) seg.assign(static_cast<std::size_t>(F), -1);
    for (int t = 0; t < n; ++t) {
        auto& arg = c.seg_argmax[static_cast<std::size_t>(segment_of(t))];
        const Vec& out = c.conv_out[static_cast<std::size_t>(t)];
        for (int f = 0; f < F; ++f) {
            const int best = arg[static_cast<std::size_t>(f)];
            if (best < 0 ||
                out[static_cast<std::size_t>(f)] >
                    c.conv_out[static_cast<std::size_t>(best)][static_cast<std::size_t>(f)])
                arg[static_cast<std::size_t>(f)] = t;
        }
    }
    c.pooled.assign(static_cast<std::size_t>(3 * F), 0.0);
    for (int s = 0; s < 3; ++s)
        for (int f = 0; f < F; ++f) {
            const int t = c.seg_argmax[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)];
            // An empty segment pools to zero.
            c.pooled[static_cast<std::size_t>(s * F + f)] =
                t < 0 ? 0.0
                      : c.conv_out[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)];
        }

    c.feature.resize(c.pooled.size());
    for (std::size_t i = 0; i < c.pooled.size(); ++i) c.feature[i] = std::tanh(c.pooled[i]);
    if (train_mode) {
        // Inverted dropout: surviving units are scaled up so eval needs no
        // rescaling.
        const double keep = 1.0 - params.dropout;
        c.dropout_mask.resize(c.feature.size());
        for (std::size_t i = 0; i < c.feature.size(); ++i) {
            c.dropout_mask[i] = bernoulli(*rng, keep) ? 1.0 / keep : 0.0;
            c.feature[i] *= c.dropout_mask[i];
        }
    }
    return c.feature;
}

void pcnn_backward(const PcnnParams& params, const PcnnCache& cache, const Vec& dfeature,
                   PcnnParams& grad) {
    const int F = params.channels;
    const int in = params.in_dim();
    const int wd = params.word_dim;
    const int pd = params.pos_dim;
    const int n = cache.n;
    if (static_cast<int>(dfeature.size()) != params.feat_dim())
        throw ValidationError("feature gradient has the wrong dimension");

    Vec dpool(dfeature.size());
    for (std::size_t i = 0; i < dfeature.size(); ++i) {
        double df = dfeature[i];
        if (!cache.dropout_mask.empty()) df *= cache.dropout_mask[i];
        const double th = std::tanh(cache.pooled[i]);
        dpool[i] = df * (1.0 - th * th);
    }

    // Route pooled gradients to their argmax conv positions, then through the
    // convolution into inputs and tables. Only 3*channels conv cells can
    // carry gradient, so iterate those.
    std::vector<Vec> dx(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(in), 0.0));
    for (int s = 0; s < 3; ++s)
        for (int f = 0; f < F; ++f) {
            const int t = cache.seg_argmax[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)];
            const double g = dpool[static_cast<std::size_t>(s * F + f)];
            if (t < 0 || g == 0.0) continue;
            grad.conv_b[static_cast<std::size_t>(f)] += g;
            const Vec& w = params.conv_w[static_cast<std::size_t>(f)];
            Vec& gw = grad.conv_w[static_cast<std::size_t>(f)];
            for (int k = 0; k < params.kernel; ++k) {
                const int ti = t + k - 1;
                if (ti < 0 || ti >= n) continue;
                const Vec& x = cache.input[static_cast<std::size_t>(ti)];
                Vec& dxi = dx[static_cast<std::size_t>(ti)];
                const std::size_t base = static_cast<std::size_t>(k) * in;
                for (int d = 0; d < in; ++d) {
                    gw[base + static_cast<std::size_t>(d)] += g * x[static_cast<std::size_t>(d)];
                    dxi[static_cast<std::size_t>(d)] += w[base + static_cast<std::size_t>(d)] * g;
                }
            }
        }

    for (int t = 0; t < n; ++t) {
        const Vec& dxi = dx[static_cast<std::size_t>(t)];
        if (cache.used_unk[static_cast<std::size_t>(t)])
            for (int d = 0; d < wd; ++d) grad.unk[static_cast<std::size_t>(d)] += dxi[static_cast<std::size_t>(d)];
        Vec& gph = grad.pos_head[static_cast<std::size_t>(cache.pos_head_idx[static_cast<std::size_t>(t)])];
        Vec& gpt = grad.pos_tail[static_cast<std::size_t>(cache.pos_tail_idx[static_cast<std::size_t>(t)])];
        for (int d = 0; d < pd; ++d) {
            gph[static_cast<std::size_t>(d)] += dxi[static_cast<std::size_t>(wd + d)];
            gpt[static_cast<std::size_t>(d)] += dxi[static_cast<std::size_t>(wd + pd + d)];
        }
    }
}

Vec class_logits(const PcnnParams& params, const Vec& feature) {
    if (static_cast<int>(feature.size()) != params.feat_dim())
        throw ValidationError("feature dimension does not match the classifier head");
    Vec z(static_cast<std::size_t>(params.n_classes));
    for (int c = 0; c < params.n_classes; ++c)
        z[static_cast<std::size_t>(c)] =
            params.head_b[static_cast<std::size_t>(c)] +
            dot(params.head_w[static_cast<std::size_t>(c)], feature);
    return z;
}

Vec softmax(const Vec& logits) {
    if (logits.empty()) throw ValidationError("softmax over zero classes");
    const double m = *std::max_element(logits.begin(), logits.end());
    Vec p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

std::vector<std::pair<int, double>> classify_topT(const Vec& feature,
                                                  const PcnnParams& params,
                                                  const LabelMap& labels, int T) {
    if (labels.n_classes() != params.n_classes)
        throw ValidationError("label map size does not match the classifier head");
    if (T < 1 || T > params.n_classes)
        throw ValidationError("top-T must lie in [1, number of seen relations]");
    const Vec p = softmax(class_logits(params, feature));
    std::vector<int> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (p[static_cast<std::size_t>(a)] != p[static_cast<std::size_t>(b)])
            return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
        return labels.class_to_rel[static_cast<std::size_t>(a)] <
               labels.class_to_rel[static_cast<std::size_t>(b)];
    });
    std::vector<std::pair<int, double>> out;
    out.reserve(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i)
        out.emplace_back(labels.class_to_rel[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])],
                         p[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    return out;
}

double ce_loss_grad(const PcnnParams& params, const Vec& feature, int class_idx,
                    Vec& dfeature, PcnnParams& grad) {
    if (class_idx < 0 || class_idx >= params.n_classes)
        throw ValidationError("class index out of range");
    const Vec p = softmax(class_logits(params, feature));
    const double loss = -std::log(std::max(p[static_cast<std::size_t>(class_idx)], 1e-300));
    dfeature.assign(feature.size(), 0.0);
    for (int c = 0; c < params.n_classes; ++c) {
        double dz = p[static_cast<std::size_t>(c)];
        if (c == class_idx) dz -= 1.0;
        grad.head_b[static_cast<std::size_t>(c)] += dz;
        Vec& gw = grad.head_w[static_cast<std::size_t>(c)];
        const Vec& w = params.head_w[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < feature.size(); ++i) {
            gw[i] += dz * feature[i];
            dfeature[i] += dz * w[i];
        }
    }
    return loss;
}

PcnnParams train_classifier(const std::vector<Instance>& train_set, const WordVectors& wv,
                            const PcnnConfig& cfg, const LabelMap& labels,
                            std::vector<double>* epoch_loss) {
    cfg.validate();
    if (train_set.empty()) throw ValidationError("classifier: empty training set");
    if (wv.dim() != cfg.word_dim)
        throw ValidationError("classifier: word vector dim != configured word_dim");
    std::vector<int> class_of(train_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        validate_instance(train_set[i]);
        class_of[i] = labels.require_class(train_set[i].relation);
    }

    PcnnParams params = init_pcnn(cfg, labels.n_classes(), derive_seed(cfg.rng_seed, "pcnn-init"));
    Rng run = make_rng(derive_seed(cfg.rng_seed, "pcnn-train"));

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[uniform_int(run, i)]);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            PcnnParams grad(cfg, labels.n_classes());
            PcnnCache cache;
            Vec dfeature;
            for (std::size_t i = start; i < stop; ++i) {
                const Instance& inst = train_set[order[i]];
                pcnn_forward(inst, wv, params, true, &run, &cache);
                total += ce_loss_grad(params, cache.feature, class_of[order[i]], dfeature, grad);
                pcnn_backward(params, cache, dfeature, grad);
            }
            const double scale = cfg.learning_rate / static_cast<double>(stop - start);
            axpy_params(-scale, grad, params);
        }
        const double mean = total / static_cast<double>(train_set.size());
        if (!std::isfinite(mean))
            throw ComputeError("classifier training diverged at epoch " +
                               std::to_string(epoch));
        if (epoch_loss) epoch_loss->push_back(mean);
    }
    params.check_finite();
    return params;
}

void save_pcnn(const PcnnParams& params, const LabelMap& labels, const KnowledgeGraph& kg,
               const std::string& path) {
    if (labels.n_classes() != params.n_classes)
        throw ValidationError("checkpoint: label map size != classifier head size");
    nlohmann::json meta;
    meta["word_dim"] = params.word_dim;
    meta["pos_dim"] = params.pos_dim;
    meta["pos_clip"] = params.pos_clip;
    meta["channels"] = params.channels;
    meta["kernel"] = params.kernel;
    meta["n_classes"] = params.n_classes;
    meta["dropout"] = params.dropout;
    std::vector<std::string> names;
    for (int rel : labels.class_to_rel) names.push_back(kg.relations().name_of(rel));
    meta["labels"] = names;

    std::string blob = "pcnn-checkpoint 1\n" + meta.dump() + "\n";
    for_each_table(params, [&](const Vec& v) {
        blob.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    });
    write_file_atomic(path, blob);
}

std::pair<PcnnParams, LabelMap> load_pcnn(const std::string& path,
                                          const KnowledgeGraph& kg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    std::string magic, meta_line;
    if (!std::getline(in, magic) || magic != "pcnn-checkpoint 1")
        throw ValidationError(path + ": not a version-1 encoder checkpoint");
    if (!std::getline(in, meta_line))
        throw ValidationError(path + ": missing checkpoint metadata");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": bad checkpoint metadata: " + e.what());
    }
    PcnnConfig cfg;
    LabelMap labels;
    int n_classes = 0;
    try {
        cfg.word_dim = meta.at("word_dim").get<int>();
        cfg.pos_dim = meta.at("pos_dim").get<int>();
        cfg.pos_clip = meta.at("pos_clip").get<int>();
        cfg.channels = meta.at("channels").get<int>();
        cfg.kernel = meta.at("kernel").get<int>();
        n_classes = meta.at("n_classes").get<int>();
        cfg.dropout = meta.at("dropout").get<double>();
        std::vector<int> rel_ids;
        for (const auto& name : meta.at("labels"))
            rel_ids.push_back(kg.relations().require(name.get<std::string>()));
        labels = LabelMap::from_relations(std::move(rel_ids));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad checkpoint metadata: " + e.what());
    }
    cfg.validate();
    if (labels.n_classes() != n_classes)
        throw ValidationError(path + ": label list does not match n_classes");

    PcnnParams params(cfg, n_classes);
    bool short_read = false;
    for_each_table(params, [&](Vec& v) {
        if (short_read) return;
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != v.size() * sizeof(double))
            short_read = true;
    });
    if (short_read) throw ValidationError(path + ": checkpoint truncated");
    char extra;
    if (in.read(&extra, 1))
        throw ValidationError(path + ": trailing bytes after checkpoint payload");
    try {
        params.check_finite();
    } catch (const ComputeError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return {std::move(params), std::move(labels)};
}

}  // namespace zsrc
