#include "cagp/embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "cagp/rng.hpp"
#include "json.hpp"

namespace cagp {

namespace {

constexpr double kLogVarClamp = 10.0;
// Initial log-variance. Matches the N(0, I) prior so the KL term exerts no
// pull at initialization; variance then only shrinks where the data pushes
// it, which is what ties variance to entity frequency.
constexpr double kLogVarInit = 0.0;

inline double clamp_ell(double x) { return std::clamp(x, -kLogVarClamp, kLogVarClamp); }

inline double sigmoid(double x) {
    if (x >= 0) {
        double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    double z = std::exp(x);
    return z / (1.0 + z);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

ScorerKind scorer_from_string(const std::string& s) {
    if (s == "distmult") return ScorerKind::DistMult;
    if (s == "transe") return ScorerKind::TransE;
    if (s == "complex") return ScorerKind::ComplEx;
    throw InvalidInput("unknown scorer: " + s);
}

std::string to_string(ScorerKind k) {
    switch (k) {
        case ScorerKind::DistMult: return "distmult";
        case ScorerKind::TransE: return "transe";
        case ScorerKind::ComplEx: return "complex";
    }
    return "distmult";
}

double GaussianEmbeddingModel::mean_variance(EntityId e) const {
    const double* l = ell_row(e);
    double sum = 0.0;
    for (int j = 0; j < dim; ++j) sum += std::exp(clamp_ell(l[j]));
    return sum / static_cast<double>(dim);
}

double GaussianEmbeddingModel::kl_term(EntityId e) const {
    const double* l = ell_row(e);
    const double* m = mu_row(e);
    double sum = 0.0;
    for (int j = 0; j < dim; ++j) {
        sum += std::exp(clamp_ell(l[j])) + m[j] * m[j] - 1.0 - l[j];
    }
    return 0.5 * sum;
}

void sample_entity(const GaussianEmbeddingModel& m, EntityId e, std::span<const double> noise,
                   std::span<double> out) {
    if (noise.size() != static_cast<std::size_t>(m.dim) || out.size() != noise.size()) {
        throw InvalidInput("sample_entity: noise length must equal dim");
    }
    const double* mu = m.mu_row(e);
    const double* l = m.ell_row(e);
    for (int j = 0; j < m.dim; ++j) {
        out[j] = mu[j] + std::exp(0.5 * clamp_ell(l[j])) * noise[j];
    }
}

double score_vectors(const GaussianEmbeddingModel& m, RelationId r, std::span<const double> head_vec,
                     std::span<const double> tail_vec) {
    if (head_vec.size() != static_cast<std::size_t>(m.dim) || tail_vec.size() != head_vec.size()) {
        throw InvalidInput("score_vectors: dimension mismatch");
    }
    const double* w = m.rel_row(r);
    switch (m.scorer) {
        case ScorerKind::DistMult:
        case ScorerKind::ComplEx: {
            // ComplEx with real entity vectors reduces to the real relation
            // half; the imaginary half is inert.
            double s = 0.0;
            for (int j = 0; j < m.dim; ++j) s += head_vec[j] * w[j] * tail_vec[j];
            return s;
        }
        case ScorerKind::TransE: {
            double sq = 0.0;
            for (int j = 0; j < m.dim; ++j) {
                double dlt = head_vec[j] + w[j] - tail_vec[j];
                sq += dlt * dlt;
            }
            return -std::sqrt(sq);
        }
    }
    return 0.0;
}

double score_at_means(const GaussianEmbeddingModel& m, const Triple& q) {
    std::span<const double> h(m.mu_row(q.head), static_cast<std::size_t>(m.dim));
    std::span<const double> t(m.mu_row(q.tail), static_cast<std::size_t>(m.dim));
    return score_vectors(m, q.relation, h, t);
}

void GradientBuffer::resize_like(const GaussianEmbeddingModel& m) {
    mu.assign(m.mu.size(), 0.0);
    ell.assign(m.ell.size(), 0.0);
    rel.assign(m.rel.size(), 0.0);
    entity_seen_.assign(m.entity_count, 0);
    relation_seen_.assign(m.relation_count, 0);
    touched_entities.clear();
    touched_relations.clear();
}

void GradientBuffer::clear_touched(const GaussianEmbeddingModel& m) {
    const int d = m.dim;
    const int rd = m.relation_dim();
    for (EntityId e : touched_entities) {
        std::fill_n(mu.begin() + static_cast<std::size_t>(e) * d, d, 0.0);
        std::fill_n(ell.begin() + static_cast<std::size_t>(e) * d, d, 0.0);
        entity_seen_[e] = 0;
    }
    for (RelationId r : touched_relations) {
        std::fill_n(rel.begin() + static_cast<std::size_t>(r) * rd, rd, 0.0);
        relation_seen_[r] = 0;
    }
    touched_entities.clear();
    touched_relations.clear();
}

void GradientBuffer::touch_entity(EntityId e) {
    if (!entity_seen_[e]) {
        entity_seen_[e] = 1;
        touched_entities.push_back(e);
    }
}

void GradientBuffer::touch_relation(RelationId r) {
    if (!relation_seen_[r]) {
        relation_seen_[r] = 1;
        touched_relations.push_back(r);
    }
}

namespace {

// Accumulate d(loss)/d(slot vector) into mu/ell gradients of entity e.
inline void backprop_slot(const GaussianEmbeddingModel& m, GradientBuffer& grad, EntityId e,
                          const double* z, const double* dvec) {
    grad.touch_entity(e);
    const int d = m.dim;
    double* gmu = grad.mu.data() + static_cast<std::size_t>(e) * d;
    double* gell = grad.ell.data() + static_cast<std::size_t>(e) * d;
    const double* l = m.ell_row(e);
    for (int j = 0; j < d; ++j) {
        gmu[j] += dvec[j];
        double lc = l[j];
        if (lc > -kLogVarClamp && lc < kLogVarClamp) {
            gell[j] += dvec[j] * z[j] * 0.5 * std::exp(0.5 * lc);
        }
    }
}

inline void add_kl_grad(const GaussianEmbeddingModel& m, GradientBuffer& grad, EntityId e,
                        double beta, double& loss) {
    grad.touch_entity(e);
    const int d = m.dim;
    const double* mu = m.mu_row(e);
    const double* l = m.ell_row(e);
    double* gmu = grad.mu.data() + static_cast<std::size_t>(e) * d;
    double* gell = grad.ell.data() + static_cast<std::size_t>(e) * d;
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
        double lc = clamp_ell(l[j]);
        double ex = std::exp(lc);
        sum += ex + mu[j] * mu[j] - 1.0 - l[j];
        gmu[j] += beta * mu[j];
        double dex = (l[j] > -kLogVarClamp && l[j] < kLogVarClamp) ? ex : 0.0;
        gell[j] += beta * 0.5 * (dex - 1.0);
    }
    loss += beta * 0.5 * sum;
}

// Score one (possibly corrupted) triple from drawn vectors and backprop the
// BCE(label) gradient. Returns the loss contribution.
inline double scored_triple_backward(const GaussianEmbeddingModel& m, GradientBuffer& grad,
                                     EntityId h, EntityId t, RelationId r, const double* eh,
                                     const double* et, const double* zh, const double* zt,
                                     double label, std::vector<double>& scratch) {
    const int d = m.dim;
    const double* w = m.rel_row(r);
    grad.touch_relation(r);
    double* gw = grad.rel.data() + static_cast<std::size_t>(r) * m.relation_dim();
    scratch.resize(2 * static_cast<std::size_t>(d));
    double* dh = scratch.data();
    double* dt = scratch.data() + d;

    double s = 0.0;
    switch (m.scorer) {
        case ScorerKind::DistMult:
        case ScorerKind::ComplEx: {
            for (int j = 0; j < d; ++j) s += eh[j] * w[j] * et[j];
            double gs = sigmoid(s) - label;
            for (int j = 0; j < d; ++j) {
                dh[j] = gs * w[j] * et[j];
                dt[j] = gs * w[j] * eh[j];
                gw[j] += gs * eh[j] * et[j];
            }
            break;
        }
        case ScorerKind::TransE: {
            double sq = 0.0;
            for (int j = 0; j < d; ++j) {
                double dlt = eh[j] + w[j] - et[j];
                dh[j] = dlt;  // reuse as diff storage
                sq += dlt * dlt;
            }
            double nrm = std::sqrt(sq);
            s = -nrm;
            double gs = sigmoid(s) - label;
            double inv = nrm > 1e-12 ? 1.0 / nrm : 0.0;
            for (int j = 0; j < d; ++j) {
                double dd = -gs * dh[j] * inv;  // d(loss)/d(eh_j)
                dt[j] = -dd;
                gw[j] += dd;
                dh[j] = dd;
            }
            break;
        }
    }
    backprop_slot(m, grad, h, zh, dh);
    backprop_slot(m, grad, t, zt, dt);
    // BCE with logits: softplus(s) - label*s.
    return softplus(s) - label * s;
}

}  // namespace

double batch_loss_and_grad(const GaussianEmbeddingModel& m, const TrainingBatch& batch,
                           double kl_weight, GradientBuffer& grad) {
    const int d = m.dim;
    const int k = batch.negatives_per_positive;
    if (batch.noise_head.size() != batch.positives.size() * static_cast<std::size_t>(d) ||
        batch.noise_tail.size() != batch.noise_head.size()) {
        throw InvalidInput("batch noise buffers have wrong size");
    }
    if (batch.corruption_entities.size() != batch.positives.size() * static_cast<std::size_t>(k)) {
        throw InvalidInput("corruption list has wrong size");
    }

    double loss = 0.0;
    std::vector<double> eh(d), et(d), ec(d), scratch;
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        const Triple& pos = batch.positives[i];
        const double* zh = batch.noise_head.data() + i * d;
        const double* zt = batch.noise_tail.data() + i * d;
        sample_entity(m, pos.head, {zh, static_cast<std::size_t>(d)}, eh);
        sample_entity(m, pos.tail, {zt, static_cast<std::size_t>(d)}, et);

        loss += scored_triple_backward(m, grad, pos.head, pos.tail, pos.relation, eh.data(),
                                       et.data(), zh, zt, 1.0, scratch);
        add_kl_grad(m, grad, pos.head, kl_weight, loss);
        add_kl_grad(m, grad, pos.tail, kl_weight, loss);

        for (int c = 0; c < k; ++c) {
            EntityId repl = batch.corruption_entities[i * k + c];
            bool corrupt_tail = (c % 2 == 0);
            if (corrupt_tail) {
                sample_entity(m, repl, {zt, static_cast<std::size_t>(d)}, ec);
                loss += scored_triple_backward(m, grad, pos.head, repl, pos.relation, eh.data(),
                                               ec.data(), zh, zt, 0.0, scratch);
            } else {
                sample_entity(m, repl, {zh, static_cast<std::size_t>(d)}, ec);
                loss += scored_triple_backward(m, grad, repl, pos.tail, pos.relation, ec.data(),
                                               et.data(), zh, zt, 0.0, scratch);
            }
            add_kl_grad(m, grad, repl, kl_weight, loss);
        }
    }
    return loss;
}

GaussianEmbeddingModel init_model(std::size_t entity_count, std::size_t relation_count,
                                  const TrainConfig& cfg) {
    if (cfg.dim <= 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0.0 || cfg.kl_weight < 0.0 ||
        cfg.epochs < 0 || cfg.negatives_per_positive <= 0) {
        throw InvalidInput("train config fields must be positive");
    }
    GaussianEmbeddingModel m;
    m.scorer = cfg.scorer;
    m.dim = cfg.dim;
    m.entity_count = entity_count;
    m.relation_count = relation_count;
    m.mu.resize(entity_count * static_cast<std::size_t>(cfg.dim));
    m.ell.assign(entity_count * static_cast<std::size_t>(cfg.dim), kLogVarInit);
    m.rel.resize(relation_count * static_cast<std::size_t>(m.relation_dim()));
    DetRng rng(mix_u64(cfg.seed, 0xC0FFEE));
    const double bound = 0.5 / std::sqrt(static_cast<double>(cfg.dim));
    for (double& x : m.mu) x = rng.uniform(-bound, bound);
    for (double& x : m.rel) x = rng.uniform(-bound, bound);
    return m;
}

GaussianEmbeddingModel train(const KnowledgeGraph& kg, const TrainConfig& cfg, TrainLog* log) {
    const std::vector<Triple>& train_triples = kg.split("train");
    if (train_triples.empty()) throw InvalidInput("train split is empty");
    GaussianEmbeddingModel model = init_model(kg.entity_count(), kg.relation_count(), cfg);
    if (cfg.epochs == 0) return model;

    const int d = cfg.dim;
    const int k = cfg.negatives_per_positive;
    const std::size_t n = train_triples.size();
    DetRng rng(mix_u64(cfg.seed, 0x7EA1));

    GradientBuffer grad;
    grad.resize_like(model);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainingBatch batch;
    batch.negatives_per_positive = k;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            std::size_t bsz = stop - start;
            batch.positives.clear();
            batch.corruption_entities.clear();
            batch.noise_head.resize(bsz * d);
            batch.noise_tail.resize(bsz * d);
            for (std::size_t i = 0; i < bsz; ++i) {
                batch.positives.push_back(train_triples[order[start + i]]);
                for (int j = 0; j < d; ++j) batch.noise_head[i * d + j] = rng.gaussian();
                for (int j = 0; j < d; ++j) batch.noise_tail[i * d + j] = rng.gaussian();
                for (int c = 0; c < k; ++c) {
                    batch.corruption_entities.push_back(
                        static_cast<EntityId>(rng.below(kg.entity_count())));
                }
            }
            grad.clear_touched(model);
            double loss = batch_loss_and_grad(model, batch, cfg.kl_weight, grad);
            if (!std::isfinite(loss)) {
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index));
            }
            epoch_loss += loss;
            // Apply the summed minibatch gradient, then project ell back into
            // the clamp range.
            const double lr = cfg.learning_rate;
            for (EntityId e : grad.touched_entities) {
                double* mu = model.mu.data() + static_cast<std::size_t>(e) * d;
                double* ell = model.ell.data() + static_cast<std::size_t>(e) * d;
                const double* gmu = grad.mu.data() + static_cast<std::size_t>(e) * d;
                const double* gell = grad.ell.data() + static_cast<std::size_t>(e) * d;
                for (int j = 0; j < d; ++j) {
                    mu[j] -= lr * gmu[j];
                    ell[j] = clamp_ell(ell[j] - lr * gell[j]);
                }
            }
            const int rd = model.relation_dim();
            for (RelationId r : grad.touched_relations) {
                double* w = model.rel.data() + static_cast<std::size_t>(r) * rd;
                const double* gw = grad.rel.data() + static_cast<std::size_t>(r) * rd;
                for (int j = 0; j < rd; ++j) w[j] -= lr * gw[j];
            }
        }
        if (log) log->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    return model;
}

std::uint64_t vocab_hash(const std::vector<std::string>& names) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& s : names) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

constexpr char kMagic[5] = {'C', 'A', 'G', 'P', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

}  // namespace

void save_checkpoint(const GaussianEmbeddingModel& m, const TrainConfig& cfg,
                     const KnowledgeGraph& kg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    unsigned char scorer = static_cast<unsigned char>(m.scorer);
    out.write(reinterpret_cast<const char*>(&scorer), 1);
    write_u64(out, m.entity_count);
    write_u64(out, m.relation_count);
    write_u64(out, static_cast<std::uint64_t>(m.dim));
    auto write_mat = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    write_mat(m.mu);
    write_mat(m.ell);
    write_mat(m.rel);
    if (!out) throw InvalidInput("short write to " + path);

    nlohmann::ordered_json j;
    j["format"] = "CAGP1";
    j["scorer"] = to_string(m.scorer);
    j["entity_count"] = m.entity_count;
    j["relation_count"] = m.relation_count;
    j["dim"] = m.dim;
    j["config"] = {{"dim", cfg.dim},
                   {"batch_size", cfg.batch_size},
                   {"learning_rate", cfg.learning_rate},
                   {"kl_weight", cfg.kl_weight},
                   {"epochs", cfg.epochs},
                   {"negatives_per_positive", cfg.negatives_per_positive},
                   {"seed", cfg.seed},
                   {"scorer", to_string(cfg.scorer)}};
    j["entity_vocab_hash"] = vocab_hash(kg.entity_names);
    j["relation_vocab_hash"] = vocab_hash(kg.relation_names);
    std::ofstream side(path + ".json", std::ios::binary);
    if (!side) throw InvalidInput("cannot write " + path + ".json");
    side << j.dump(2) << '\n';
}

GaussianEmbeddingModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kMagic, 5) != 0) {
        throw ParseError(path + ": not a CAGP1 checkpoint");
    }
    unsigned char scorer = 0;
    in.read(reinterpret_cast<char*>(&scorer), 1);
    if (scorer > 2) throw ParseError(path + ": bad scorer kind");
    GaussianEmbeddingModel m;
    m.scorer = static_cast<ScorerKind>(scorer);
    m.entity_count = read_u64(in);
    m.relation_count = read_u64(in);
    m.dim = static_cast<int>(read_u64(in));
    if (!in || m.dim <= 0) throw ParseError(path + ": bad header");
    auto read_mat = [&](std::vector<double>& v, std::size_t count) {
        v.resize(count);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
    };
    read_mat(m.mu, m.entity_count * static_cast<std::size_t>(m.dim));
    read_mat(m.ell, m.entity_count * static_cast<std::size_t>(m.dim));
    read_mat(m.rel, m.relation_count * static_cast<std::size_t>(m.relation_dim()));
    if (!in) throw ParseError(path + ": truncated checkpoint");
    return m;
}

}  // namespace cagp
