#include "cagp/oodgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cagp/rng.hpp"

namespace cagp {

std::string to_string(OodClass c) {
    switch (c) {
        case OodClass::InDistribution: return "id";
        case OodClass::Emerging: return "emerging";
        case OodClass::NovelContext: return "novel_context";
    }
    return "id";
}

OodClass classify_triple(const KnowledgeGraph& kg, const CoverageMatrix& c, const Triple& q,
                         std::uint64_t tau) {
    std::uint64_t min_freq = std::min(kg.freq[q.head], kg.freq[q.tail]);
    if (min_freq < tau) return OodClass::Emerging;
    if (!c.observed(q.head, q.relation) || !c.observed(q.tail, q.relation)) {
        return OodClass::NovelContext;
    }
    return OodClass::InDistribution;
}

OodPartition partition(const KnowledgeGraph& kg, const CoverageMatrix& c, const std::string& split,
                       std::uint64_t tau) {
    OodPartition p;
    p.tau = tau;
    for (const Triple& q : kg.split(split)) {
        switch (classify_triple(kg, c, q, tau)) {
            case OodClass::Emerging: p.emerging.push_back(q); break;
            case OodClass::NovelContext: p.novel_context.push_back(q); break;
            case OodClass::InDistribution: p.in_distribution.push_back(q); break;
        }
    }
    return p;
}

void write_partition_csv(const KnowledgeGraph& kg, const CoverageMatrix& c,
                         const std::string& split, std::uint64_t tau, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << "head,relation,tail,label,min_freq,cov_head,cov_tail\n";
    for (const Triple& q : kg.split(split)) {
        OodClass cls = classify_triple(kg, c, q, tau);
        out << q.head << ',' << q.relation << ',' << q.tail << ',' << to_string(cls) << ','
            << std::min(kg.freq[q.head], kg.freq[q.tail]) << ','
            << (c.observed(q.head, q.relation) ? 1 : 0) << ','
            << (c.observed(q.tail, q.relation) ? 1 : 0) << '\n';
    }
}

std::vector<LabeledTriple> random_corruptions(const KnowledgeGraph& kg, const std::string& split,
                                              std::uint64_t seed) {
    const std::vector<Triple>& source = kg.split(split);
    if (source.empty()) throw InvalidInput("cannot corrupt an empty split");
    if (kg.entity_count() < 2) throw InvalidInput("cannot corrupt: need at least 2 entities");
    DetRng rng(seed);
    std::vector<LabeledTriple> out;
    out.reserve(source.size() * 2);
    for (const Triple& t : source) {
        out.push_back({t, false});
        // Uniform over entities excluding the original tail.
        EntityId draw = static_cast<EntityId>(rng.below(kg.entity_count() - 1));
        if (draw >= t.tail) draw += 1;
        out.push_back({Triple{t.head, t.relation, draw}, true});
    }
    return out;
}

namespace {

// Sorted unique (min,max) training frequency pairs with CSR-style runs over
// the first coordinate; unordered matching reduces to matching pairs in
// sorted order.
struct FreqPairIndex {
    std::vector<std::uint64_t> firsts;           // distinct first values, ascending
    std::vector<std::size_t> run_start;          // firsts.size()+1 offsets into seconds
    std::vector<std::uint64_t> seconds;          // ascending within each run

    bool match(std::uint64_t qa, std::uint64_t qb, std::uint64_t eps) const;
};

bool FreqPairIndex::match(std::uint64_t qa, std::uint64_t qb, std::uint64_t eps) const {
    std::uint64_t alo = qa > eps ? qa - eps : 0;
    std::uint64_t ahi = qa + eps;
    auto lo_it = std::lower_bound(firsts.begin(), firsts.end(), alo);
    for (auto it = lo_it; it != firsts.end() && *it <= ahi; ++it) {
        std::size_t run = static_cast<std::size_t>(it - firsts.begin());
        auto beg = seconds.begin() + run_start[run];
        auto end = seconds.begin() + run_start[run + 1];
        std::uint64_t blo = qb > eps ? qb - eps : 0;
        auto hit = std::lower_bound(beg, end, blo);
        if (hit != end && *hit <= qb + eps) return true;
    }
    return false;
}

FreqPairIndex build_freq_pair_index(const KnowledgeGraph& kg) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    pairs.reserve(kg.split("train").size());
    for (const Triple& t : kg.split("train")) {
        std::uint64_t a = kg.freq[t.head], b = kg.freq[t.tail];
        if (a > b) std::swap(a, b);
        pairs.emplace_back(a, b);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    FreqPairIndex idx;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (idx.firsts.empty() || idx.firsts.back() != pairs[i].first) {
            idx.firsts.push_back(pairs[i].first);
            idx.run_start.push_back(idx.seconds.size());
        }
        idx.seconds.push_back(pairs[i].second);
    }
    idx.run_start.push_back(idx.seconds.size());
    return idx;
}

}  // namespace

std::vector<double> verify_a3(const KnowledgeGraph& kg, const std::vector<Triple>& novel,
                              const std::vector<std::uint64_t>& epsilons) {
    FreqPairIndex idx = build_freq_pair_index(kg);
    std::vector<double> fractions;
    fractions.reserve(epsilons.size());
    for (std::uint64_t eps : epsilons) {
        if (novel.empty()) {
            fractions.push_back(1.0);  // vacuously matched
            continue;
        }
        std::size_t matched = 0;
        for (const Triple& q : novel) {
            std::uint64_t a = kg.freq[q.head], b = kg.freq[q.tail];
            if (a > b) std::swap(a, b);
            if (idx.match(a, b, eps)) ++matched;
        }
        fractions.push_back(static_cast<double>(matched) / static_cast<double>(novel.size()));
    }
    return fractions;
}

namespace {

// Cumulative-weight sampler over core entities, weight (i+1)^(-skew).
struct PowerLawSampler {
    std::vector<double> cdf;

    PowerLawSampler(std::size_t n, double skew) {
        cdf.resize(n);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += std::pow(static_cast<double>(i + 1), -skew);
            cdf[i] = acc;
        }
    }

    EntityId draw(DetRng& rng) const {
        double u = rng.uniform() * cdf.back();
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        return static_cast<EntityId>(it - cdf.begin());
    }
};

}  // namespace

SyntheticKg synth_theorem_kg(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.entities == 0 || spec.relations == 0) {
        throw InvalidInput("synthetic graph needs entities and relations");
    }
    if (spec.emerging_entities >= spec.entities) {
        throw InvalidInput("emerging entities must leave at least one core entity");
    }
    const std::size_t core = spec.entities - spec.emerging_entities;
    if (!(spec.heldout_fraction >= 0.0 && spec.heldout_fraction <= 1.0)) {
        throw InvalidInput("heldout_fraction must lie in [0,1]");
    }
    std::size_t heldout_target = static_cast<std::size_t>(
        spec.heldout_fraction * static_cast<double>(core) * static_cast<double>(spec.relations));
    if (heldout_target > core * (spec.relations - 1)) {
        throw InvalidInput("more held-out pairs than exist");
    }
    if (spec.eval_novel > 0 && heldout_target == 0) {
        throw InvalidInput("novel evaluation triples need held-out pairs");
    }
    if (spec.eval_emerging > 0 && spec.emerging_entities == 0) {
        throw InvalidInput("emerging evaluation triples need emerging entities");
    }
    if (spec.eval_emerging > 0 && spec.relations < 3) {
        throw InvalidInput("emerging evaluation triples need at least 3 relations");
    }
    if (!(spec.tau > 2 && spec.tau <= spec.core_rounds)) {
        throw InvalidInput("tau must separate emerging (<=2) from core (>= core_rounds)");
    }

    DetRng rng(mix_u64(seed, 0x5EED));

    // Held-out (core entity, relation) pairs, capped so every entity keeps a
    // usable relation.
    std::vector<std::uint8_t> held(core * spec.relations, 0);
    std::vector<std::size_t> held_per_entity(core, 0);
    std::vector<std::uint32_t> all_pairs(core * spec.relations);
    for (std::size_t i = 0; i < all_pairs.size(); ++i) all_pairs[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(all_pairs);
    std::size_t held_count = 0;
    for (std::uint32_t code : all_pairs) {
        if (held_count >= heldout_target) break;
        std::size_t e = code / spec.relations;
        if (held_per_entity[e] + 1 >= spec.relations) continue;  // keep one relation usable
        held[code] = 1;
        held_per_entity[e] += 1;
        ++held_count;
    }
    auto is_held = [&](EntityId e, RelationId r) {
        return e < core && held[static_cast<std::size_t>(e) * spec.relations + r] != 0;
    };

    PowerLawSampler sampler(core, spec.skew);
    auto draw_partner = [&](EntityId avoid) {
        for (int tries = 0; tries < 100; ++tries) {
            EntityId t = sampler.draw(rng);
            if (t != avoid || core == 1) return t;
        }
        return sampler.draw(rng);
    };
    auto draw_relation = [&](EntityId h, EntityId t) -> RelationId {
        for (int tries = 0; tries < 200; ++tries) {
            RelationId r = static_cast<RelationId>(rng.below(spec.relations));
            if (!is_held(h, r) && !is_held(t, r)) return r;
        }
        // Fall back to scanning; some pair is always allowed for h, but the
        // joint constraint can require a different partner.
        for (RelationId r = 0; r < spec.relations; ++r) {
            if (!is_held(h, r) && !is_held(t, r)) return r;
        }
        throw InvalidInput("held-out pattern leaves no usable relation for a sampled pair");
    };

    std::vector<Triple> train;
    // Minimum-frequency rounds: every core entity appears as head once per
    // round, so freq >= core_rounds.
    for (std::size_t round = 0; round < spec.core_rounds; ++round) {
        for (EntityId h = 0; h < core; ++h) {
            for (int tries = 0;; ++tries) {
                EntityId t = draw_partner(h);
                bool ok = false;
                RelationId r = 0;
                for (int rt = 0; rt < 50; ++rt) {
                    RelationId cand = static_cast<RelationId>(rng.below(spec.relations));
                    if (!is_held(h, cand) && !is_held(t, cand)) {
                        r = cand;
                        ok = true;
                        break;
                    }
                }
                if (ok) {
                    train.push_back({h, r, t});
                    break;
                }
                if (tries > 100) {
                    train.push_back({h, draw_relation(h, t), t});
                    break;
                }
            }
        }
    }
    for (std::size_t i = 0; i < spec.extra_train; ++i) {
        EntityId h = sampler.draw(rng);
        EntityId t = draw_partner(h);
        train.push_back({h, draw_relation(h, t), t});
    }
    std::size_t core_pool = train.size();

    // Emerging entities: one or two training triples each, never sampled as
    // partners, so their frequency stays at 1-2.
    std::vector<std::vector<std::size_t>> emerging_train_idx(spec.emerging_entities);
    for (std::size_t i = 0; i < spec.emerging_entities; ++i) {
        EntityId e = static_cast<EntityId>(core + i);
        std::size_t n_triples = 1 + (i % 2);
        for (std::size_t j = 0; j < n_triples; ++j) {
            EntityId t = sampler.draw(rng);
            RelationId r;
            for (int tries = 0;; ++tries) {
                r = static_cast<RelationId>(rng.below(spec.relations));
                if (!is_held(t, r)) break;
                if (tries > 200) throw InvalidInput("cannot place emerging triple");
            }
            emerging_train_idx[i].push_back(train.size());
            train.push_back({e, r, t});
        }
    }

    // Evaluation triples.
    std::vector<Triple> eval_id, eval_novel, eval_emerging;
    for (std::size_t i = 0; i < spec.eval_id; ++i) {
        eval_id.push_back(train[rng.below(core_pool)]);
    }
    for (std::size_t i = 0; i < spec.eval_novel; ++i) {
        bool placed = false;
        for (int tries = 0; tries < 1000 && !placed; ++tries) {
            const Triple& src = train[rng.below(core_pool)];
            std::vector<RelationId> candidates;
            for (RelationId r = 0; r < spec.relations; ++r) {
                if (r != src.relation && (is_held(src.head, r) || is_held(src.tail, r))) {
                    candidates.push_back(r);
                }
            }
            if (candidates.empty()) continue;
            RelationId r = candidates[rng.below(candidates.size())];
            eval_novel.push_back({src.head, r, src.tail});
            placed = true;
        }
        if (!placed) throw InvalidInput("could not construct a novel-context evaluation triple");
    }
    for (std::size_t i = 0; i < spec.eval_emerging; ++i) {
        std::size_t which = i % spec.emerging_entities;
        EntityId e = static_cast<EntityId>(core + which);
        // Period-4 alternation so covered/uncovered cases decouple from the
        // entities' own 1-or-2-triple frequency alternation.
        if (i % 4 < 2) {
            // Covered case: reuse one of the entity's own training triples,
            // so structural uncertainty is 0 (feeds assumption A5's rho).
            const Triple& own = train[emerging_train_idx[which][0]];
            eval_emerging.push_back(own);
        } else {
            // Uncovered case: a relation this entity never trained with.
            std::vector<std::uint8_t> used(spec.relations, 0);
            for (std::size_t idx : emerging_train_idx[which]) used[train[idx].relation] = 1;
            RelationId r;
            for (int tries = 0;; ++tries) {
                r = static_cast<RelationId>(rng.below(spec.relations));
                if (!used[r]) break;
                if (tries > 200) throw InvalidInput("cannot pick uncovered relation");
            }
            eval_emerging.push_back({e, r, sampler.draw(rng)});
        }
    }

    // Assemble the graph with readable surface names.
    SyntheticKg out;
    KnowledgeGraph& kg = out.kg;
    kg.entity_names.reserve(spec.entities);
    for (std::size_t i = 0; i < spec.entities; ++i) {
        kg.entity_names.push_back("e" + std::to_string(i));
        kg.entity_index.emplace(kg.entity_names.back(), static_cast<EntityId>(i));
    }
    for (std::size_t i = 0; i < spec.relations; ++i) {
        kg.relation_names.push_back("r" + std::to_string(i));
        kg.relation_index.emplace(kg.relation_names.back(), static_cast<RelationId>(i));
    }
    kg.splits["train"] = std::move(train);
    std::vector<Triple> eval;
    eval.insert(eval.end(), eval_id.begin(), eval_id.end());
    eval.insert(eval.end(), eval_novel.begin(), eval_novel.end());
    eval.insert(eval.end(), eval_emerging.begin(), eval_emerging.end());
    kg.splits[SyntheticKg::kEvalSplit] = std::move(eval);
    recompute_frequencies(kg);

    out.ground_truth.tau = spec.tau;
    out.ground_truth.in_distribution = std::move(eval_id);
    out.ground_truth.novel_context = std::move(eval_novel);
    out.ground_truth.emerging = std::move(eval_emerging);
    return out;
}

}  // namespace cagp
