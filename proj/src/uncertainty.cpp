#include "cagp/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cagp/eval.hpp"
#include "cagp/rng.hpp"

namespace cagp {

double SemanticNormalizer::normalize(double u) const {
    if (!(hi > lo)) return 1.0;  // degenerate range
    double v = (u - lo) / (hi - lo) * 2.0;
    return std::clamp(v, 0.0, 2.0);
}

double MixingWeight::alpha() const { return 1.0 / (1.0 + std::exp(-lambda)); }

MixingWeight MixingWeight::from_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0,1)");
    return MixingWeight{std::log(alpha / (1.0 - alpha))};
}

double semantic_uncertainty(const GaussianEmbeddingModel& m, const Triple& q) {
    return 0.5 * (m.mean_variance(q.head) + m.mean_variance(q.tail));
}

SemanticNormalizer fit_normalizer(const GaussianEmbeddingModel& m, const KnowledgeGraph& kg) {
    SemanticNormalizer n;
    bool first = true;
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        if (kg.freq[e] == 0) continue;  // normalizer sees training entities only
        double v = m.mean_variance(e);
        if (first) {
            n.lo = n.hi = v;
            first = false;
        } else {
            n.lo = std::min(n.lo, v);
            n.hi = std::max(n.hi, v);
        }
    }
    if (first) throw InvalidInput("no training entities to fit normalizer");
    return n;
}

double combine_cagp(const MixingWeight& w, double u_sem_norm, double u_str) {
    double a = w.alpha();
    return a * u_sem_norm + (1.0 - a) * u_str;
}

MixingWeight fit_alpha(const std::vector<ValidationPoint>& validation) {
    bool any_ood = false, any_id = false;
    for (const auto& p : validation) (p.is_ood ? any_ood : any_id) = true;
    if (!any_ood || !any_id) {
        throw InvalidInput("fit_alpha needs both ID and OOD validation points");
    }
    double best_alpha = 0.5;
    double best_auroc = -1.0;
    std::vector<ScoredSample> scored(validation.size());
    for (int step = 0; step <= 100; ++step) {
        double alpha = step / 100.0;
        if (step == 0) alpha = 0.005;
        if (step == 100) alpha = 0.995;
        for (std::size_t i = 0; i < validation.size(); ++i) {
            scored[i].uncertainty =
                alpha * validation[i].u_sem_norm + (1.0 - alpha) * validation[i].u_str;
            scored[i].is_ood = validation[i].is_ood;
        }
        double a = auroc(scored);
        bool better = a > best_auroc;
        if (!better && a == best_auroc) {
            double cur = std::abs(alpha - 0.5), best = std::abs(best_alpha - 0.5);
            better = cur < best || (cur == best && alpha < best_alpha);
        }
        if (better) {
            best_auroc = a;
            best_alpha = alpha;
        }
    }
    return MixingWeight::from_alpha(best_alpha);
}

MixingWeight fit_alpha(const std::vector<UncertaintyAssessment>& val_id,
                       const std::vector<UncertaintyAssessment>& val_ood) {
    if (val_id.empty() || val_ood.empty()) {
        throw InvalidInput("fit_alpha needs both ID and OOD validation points");
    }
    std::vector<ValidationPoint> v;
    v.reserve(val_id.size() + val_ood.size());
    for (const auto& a : val_id) v.push_back({a.u_sem_norm, a.u_str, false});
    for (const auto& a : val_ood) v.push_back({a.u_sem_norm, a.u_str, true});
    return fit_alpha(v);
}

double baseline_score_uncertainty(const GaussianEmbeddingModel& m, const Triple& q,
                                  const BaselineOptions& opts) {
    if (opts.draws < 1) throw InvalidInput("baseline needs at least one draw");
    const int d = m.dim;
    std::vector<double> zh(d), zt(d), eh(d), et(d);
    double sum = 0.0;
    std::uint64_t key = mix_u64(opts.seed, (static_cast<std::uint64_t>(q.head) << 40) ^
                                               (static_cast<std::uint64_t>(q.relation) << 20) ^
                                               q.tail);
    for (int i = 0; i < opts.draws; ++i) {
        DetRng rng(mix_u64(key, static_cast<std::uint64_t>(i)));
        for (int j = 0; j < d; ++j) zh[j] = opts.noise_scale * rng.gaussian();
        for (int j = 0; j < d; ++j) zt[j] = opts.noise_scale * rng.gaussian();
        sample_entity(m, q.head, zh, eh);
        sample_entity(m, q.tail, zt, et);
        sum += score_vectors(m, q.relation, eh, et);
    }
    return -sum / static_cast<double>(opts.draws);
}

UncertaintyAssessment assess(const GaussianEmbeddingModel& m, const SemanticNormalizer& n,
                             const CoverageMatrix& c, const MixingWeight& w, const Triple& q) {
    UncertaintyAssessment a;
    a.triple = q;
    a.u_sem_raw = semantic_uncertainty(m, q);
    a.u_sem_norm = n.normalize(a.u_sem_raw);
    a.u_str = static_cast<double>(structural_uncertainty(c, q));
    a.alpha_used = w.alpha();
    a.u_cagp = combine_cagp(w, a.u_sem_norm, a.u_str);
    return a;
}

void write_assessments_csv(const std::vector<UncertaintyAssessment>& rows,
                           const std::vector<std::string>& labels, const std::string& path) {
    if (!labels.empty() && labels.size() != rows.size()) {
        throw InvalidInput("assessment labels misaligned");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << "head,relation,tail,u_sem_raw,u_sem_norm,u_str,u_cagp,label\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& a = rows[i];
        out << a.triple.head << ',' << a.triple.relation << ',' << a.triple.tail << ','
            << fmt(a.u_sem_raw) << ',' << fmt(a.u_sem_norm) << ',' << fmt(a.u_str) << ','
            << fmt(a.u_cagp) << ',' << (labels.empty() ? "" : labels[i]) << '\n';
    }
}

}  // namespace cagp
