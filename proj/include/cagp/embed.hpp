#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cagp/graph.hpp"
#include "cagp/types.hpp"

namespace cagp {

enum class ScorerKind { DistMult, TransE, ComplEx };

ScorerKind scorer_from_string(const std::string& s);
std::string to_string(ScorerKind k);

struct TrainConfig {
    int dim = 100;
    int batch_size = 2048;
    double learning_rate = 1e-3;
    double kl_weight = 0.01;  // beta
    int epochs = 50;
    int negatives_per_positive = 32;
    std::uint64_t seed = 1;
    ScorerKind scorer = ScorerKind::DistMult;
};

// Gaussian entity embeddings: entity i is N(mu_i, diag(exp(ell_i))).
// Relation parameters are point estimates (d for DistMult/TransE, 2d for
// ComplEx real/imaginary parts; entities enter ComplEx as real vectors, so
// only the real relation half receives gradient).
struct GaussianEmbeddingModel {
    ScorerKind scorer = ScorerKind::DistMult;
    int dim = 0;
    std::size_t entity_count = 0;
    std::size_t relation_count = 0;
    std::vector<double> mu;   // entity_count x dim, row-major
    std::vector<double> ell;  // entity_count x dim, log-variance
    std::vector<double> rel;  // relation_count x relation_dim

    int relation_dim() const { return scorer == ScorerKind::ComplEx ? 2 * dim : dim; }

    const double* mu_row(EntityId e) const { return mu.data() + static_cast<std::size_t>(e) * dim; }
    const double* ell_row(EntityId e) const { return ell.data() + static_cast<std::size_t>(e) * dim; }
    const double* rel_row(RelationId r) const {
        return rel.data() + static_cast<std::size_t>(r) * relation_dim();
    }

    // (1/d) * sum_j exp(ell_ej), with ell clamped to [-10,10] before exp.
    double mean_variance(EntityId e) const;

    // 0.5 * sum_j (exp(ell_j) + mu_j^2 - 1 - ell_j), the KL to N(0, I).
    double kl_term(EntityId e) const;
};

// mu_e + exp(ell_e/2) (.) noise; noise.size() must equal dim.
void sample_entity(const GaussianEmbeddingModel& m, EntityId e, std::span<const double> noise,
                   std::span<double> out);

// Scorer applied to already-drawn head/tail vectors.
//   DistMult: sum_j eh_j * w_j * et_j
//   TransE:   -||eh + w - et||_2
//   ComplEx:  Re<eh, w, conj(et)> with real entity vectors
double score_vectors(const GaussianEmbeddingModel& m, RelationId r, std::span<const double> head_vec,
                     std::span<const double> tail_vec);

// Score at the distribution means (zero-noise draw).
double score_at_means(const GaussianEmbeddingModel& m, const Triple& q);

// One optimization step's worth of work, laid out explicitly so gradients
// can be checked against finite differences. Corruption c of positive i
// replaces the tail when c is even and the head when c is odd, reusing the
// positive's noise draw for the replaced slot.
struct TrainingBatch {
    std::vector<Triple> positives;
    int negatives_per_positive = 0;
    std::vector<EntityId> corruption_entities;  // positives.size() * negatives
    std::vector<double> noise_head;             // positives.size() * dim
    std::vector<double> noise_tail;
};

struct GradientBuffer {
    std::vector<double> mu, ell, rel;
    std::vector<EntityId> touched_entities;
    std::vector<RelationId> touched_relations;

    void resize_like(const GaussianEmbeddingModel& m);
    void clear_touched(const GaussianEmbeddingModel& m);
    void touch_entity(EntityId e);
    void touch_relation(RelationId r);

private:
    std::vector<std::uint8_t> entity_seen_, relation_seen_;
};

// Batch loss: sum over positives of BCE(score, 1) plus BCE over the
// corruption list (label 0), one reparameterized draw per triple, plus
// kl_weight * KL summed over every entity slot instantiated by the batch
// (both positive endpoints and each corruption replacement). Gradients are
// accumulated into `grad` (call clear_touched first). Pure and
// deterministic given the batch.
double batch_loss_and_grad(const GaussianEmbeddingModel& m, const TrainingBatch& batch,
                           double kl_weight, GradientBuffer& grad);

GaussianEmbeddingModel init_model(std::size_t entity_count, std::size_t relation_count,
                                  const TrainConfig& cfg);

struct TrainLog {
    std::vector<double> epoch_mean_loss;  // per positive triple
};

// Minibatch SGD over shuffled epochs; deterministic given cfg.seed (single
// parameter owner, fixed visitation order). Throws TrainingDiverged naming
// the epoch/batch when the loss turns non-finite.
GaussianEmbeddingModel train(const KnowledgeGraph& kg, const TrainConfig& cfg,
                             TrainLog* log = nullptr);

// Checkpoint container: magic "CAGP1", scorer byte, entity/relation/dim
// counts, then little-endian float64 mu, ell, rel row-major. A JSON sidecar
// at path + ".json" records the config and vocabulary hashes.
void save_checkpoint(const GaussianEmbeddingModel& m, const TrainConfig& cfg,
                     const KnowledgeGraph& kg, const std::string& path);
GaussianEmbeddingModel load_checkpoint(const std::string& path);

// FNV-1a over vocabulary names, used to tie checkpoints to their graph.
std::uint64_t vocab_hash(const std::vector<std::string>& names);

}  // namespace cagp
