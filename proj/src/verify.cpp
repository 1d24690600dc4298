#include "cagp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cagp/eval.hpp"
#include "json.hpp"

namespace cagp {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidInput("spearman: length mismatch");
    if (x.size() < 2) throw InvalidInput("spearman: need at least 2 points");
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedMetric("spearman undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<ScoredSample> ood_vs_id(const std::vector<double>& ood, const std::vector<double>& id) {
    std::vector<ScoredSample> s;
    s.reserve(ood.size() + id.size());
    for (double u : id) s.push_back({u, false, std::nullopt});
    for (double u : ood) s.push_back({u, true, std::nullopt});
    return s;
}

std::vector<double> map_triples(const std::vector<Triple>& ts, auto&& f) {
    std::vector<double> out;
    out.reserve(ts.size());
    for (const Triple& t : ts) out.push_back(f(t));
    return out;
}

}  // namespace

AssumptionReport assumption_report(const KnowledgeGraph& kg, const CoverageMatrix& c,
                                   const GaussianEmbeddingModel& m, const SemanticNormalizer& n,
                                   const OodPartition& p,
                                   const std::vector<std::uint64_t>& epsilons) {
    AssumptionReport r;

    // A1: variance-frequency monotonicity over train entities.
    {
        std::vector<double> freqs, vars;
        for (EntityId e = 0; e < kg.entity_count(); ++e) {
            if (kg.freq[e] == 0) continue;
            freqs.push_back(static_cast<double>(kg.freq[e]));
            vars.push_back(m.mean_variance(e));
        }
        if (freqs.size() >= 2) {
            try {
                r.a1_spearman = spearman(freqs, vars);
            } catch (const UndefinedMetric&) {
                // constant variances: leave unset
            }
        }
    }

    auto u_str = [&](const Triple& t) { return static_cast<double>(structural_uncertainty(c, t)); };
    auto u_sem = [&](const Triple& t) { return semantic_uncertainty(m, t); };
    auto u_sem_norm = [&](const Triple& t) { return n.normalize(semantic_uncertainty(m, t)); };

    // A2: ID coverage rate.
    if (!p.in_distribution.empty()) {
        std::size_t zero = 0;
        for (const Triple& t : p.in_distribution) zero += structural_uncertainty(c, t) == 0 ? 1 : 0;
        r.a2_coverage_rate = static_cast<double>(zero) / static_cast<double>(p.in_distribution.size());
    }

    // A3: frequency overlap.
    r.a3_epsilons = epsilons;
    if (!p.novel_context.empty()) {
        r.a3_matched_fraction = verify_a3(kg, p.novel_context, epsilons);
    }

    // A4: bounded semantic gap, on normalized and raw scales.
    if (!p.novel_context.empty() && !p.in_distribution.empty()) {
        auto novel_norm = map_triples(p.novel_context, u_sem_norm);
        auto id_norm = map_triples(p.in_distribution, u_sem_norm);
        r.a4_delta = *std::max_element(id_norm.begin(), id_norm.end()) -
                     *std::min_element(novel_norm.begin(), novel_norm.end());
        auto novel_raw = map_triples(p.novel_context, u_sem);
        auto id_raw = map_triples(p.in_distribution, u_sem);
        r.a4_delta_raw = *std::max_element(id_raw.begin(), id_raw.end()) -
                         *std::min_element(novel_raw.begin(), novel_raw.end());
    }

    // A5: non-degenerate coverage on emerging entities.
    if (!p.emerging.empty()) {
        std::size_t zero = 0;
        for (const Triple& t : p.emerging) zero += structural_uncertainty(c, t) == 0 ? 1 : 0;
        r.a5_rho = static_cast<double>(zero) / static_cast<double>(p.emerging.size());
    }

    // A6 + theorem predictions.
    if (!p.in_distribution.empty()) {
        auto id_sem = map_triples(p.in_distribution, u_sem);
        if (!p.emerging.empty()) {
            auto em_sem = map_triples(p.emerging, u_sem);
            auto s = ood_vs_id(em_sem, id_sem);
            r.a6_auroc_emerging = auroc(s);
        }
        if (!p.novel_context.empty()) {
            auto nv_sem = map_triples(p.novel_context, u_sem);
            auto s = ood_vs_id(nv_sem, id_sem);
            r.semantic_on_novel = auroc(s);
            auto nv_str = map_triples(p.novel_context, u_str);
            auto id_str = map_triples(p.in_distribution, u_str);
            auto s2 = ood_vs_id(nv_str, id_str);
            r.structural_on_novel = auroc(s2);
        }
    }
    return r;
}

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    if (v.has_value()) return *v;
    return nullptr;
}

std::string opt_text(const std::optional<double>& v) {
    if (!v.has_value()) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

}  // namespace

std::string AssumptionReport::to_json() const {
    nlohmann::ordered_json j;
    j["a1_spearman_freq_variance"] = opt_json(a1_spearman);
    j["a2_id_coverage_rate"] = opt_json(a2_coverage_rate);
    j["a3_epsilons"] = a3_epsilons;
    j["a3_matched_fraction"] = a3_matched_fraction;
    j["a4_delta_normalized"] = opt_json(a4_delta);
    j["a4_delta_raw"] = opt_json(a4_delta_raw);
    j["a5_rho_emerging_covered"] = opt_json(a5_rho);
    j["a6_semantic_auroc_emerging"] = opt_json(a6_auroc_emerging);
    j["semantic_auroc_novel"] = opt_json(semantic_on_novel);
    j["structural_auroc_novel"] = opt_json(structural_on_novel);
    return j.dump(2);
}

std::string AssumptionReport::to_text() const {
    std::ostringstream out;
    out << "Assumption verification\n";
    out << "  (A1) Spearman rho(freq, variance) : " << opt_text(a1_spearman) << "  (req: < 0)\n";
    out << "  (A2) ID coverage rate             : " << opt_text(a2_coverage_rate) << "  (req: 1.0)\n";
    out << "  (A3) matched fraction per epsilon :";
    if (a3_matched_fraction.empty()) {
        out << " n/a";
    } else {
        for (std::size_t i = 0; i < a3_matched_fraction.size(); ++i) {
            out << " eps=" << a3_epsilons[i] << ":" << a3_matched_fraction[i] * 100.0 << "%";
        }
    }
    out << "\n";
    out << "  (A4) bounded semantic gap Delta   : " << opt_text(a4_delta)
        << "  (raw: " << opt_text(a4_delta_raw) << ", req: < 1)\n";
    out << "  (A5) rho = P(U_str=0 | emerging)  : " << opt_text(a5_rho) << "  (req: in (0,1))\n";
    out << "  (A6) semantic AUROC on emerging   : " << opt_text(a6_auroc_emerging) << "\n";
    out << "  semantic AUROC on novel (pred .5) : " << opt_text(semantic_on_novel) << "\n";
    out << "  structural AUROC on novel (pred 1): " << opt_text(structural_on_novel) << "\n";
    return out.str();
}

ComplementarityTable complementarity_table(const GaussianEmbeddingModel& m,
                                           const SemanticNormalizer& n, const CoverageMatrix& c,
                                           const MixingWeight& w, const OodPartition& p) {
    auto sem = [&](const Triple& t) { return semantic_uncertainty(m, t); };
    auto str = [&](const Triple& t) { return static_cast<double>(structural_uncertainty(c, t)); };
    MixingWeight half = MixingWeight::from_alpha(0.5);
    auto fixed = [&](const Triple& t) {
        return combine_cagp(half, n.normalize(semantic_uncertainty(m, t)), str(t));
    };
    auto cagp = [&](const Triple& t) {
        return combine_cagp(w, n.normalize(semantic_uncertainty(m, t)), str(t));
    };

    ComplementarityTable table;
    auto add_row = [&](const std::string& name, auto&& f) {
        ComplementarityTable::Row row;
        row.signal = name;
        if (!p.in_distribution.empty()) {
            auto id_u = map_triples(p.in_distribution, f);
            auto stratum = [&](const std::vector<Triple>& ts) -> std::optional<double> {
                if (ts.empty()) return std::nullopt;
                auto u = map_triples(ts, f);
                auto s = ood_vs_id(u, id_u);
                return auroc(s);
            };
            row.emerging = stratum(p.emerging);
            row.novel = stratum(p.novel_context);
            std::vector<Triple> all_ood;
            all_ood.insert(all_ood.end(), p.emerging.begin(), p.emerging.end());
            all_ood.insert(all_ood.end(), p.novel_context.begin(), p.novel_context.end());
            row.overall = stratum(all_ood);
        }
        table.rows.push_back(std::move(row));
    };
    add_row("semantic", sem);
    add_row("structural", str);
    add_row("fixed_0.5", fixed);
    add_row("cagp", cagp);
    return table;
}

std::string ComplementarityTable::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const Row& r : rows) {
        j.push_back({{"signal", r.signal},
                     {"emerging", opt_json(r.emerging)},
                     {"novel", opt_json(r.novel)},
                     {"overall", opt_json(r.overall)}});
    }
    return j.dump(2);
}

std::string ComplementarityTable::to_text() const {
    std::ostringstream out;
    out << "Stratified AUROC (vs ID)\n";
    out << "  signal       emerging   novel    overall\n";
    for (const Row& r : rows) {
        out << "  " << r.signal;
        for (std::size_t i = r.signal.size(); i < 13; ++i) out << ' ';
        out << opt_text(r.emerging) << "     " << opt_text(r.novel) << "   " << opt_text(r.overall)
            << "\n";
    }
    return out.str();
}

void ComplementarityTable::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << "signal,emerging,novel,overall\n";
    char buf[64];
    auto fmt = [&](const std::optional<double>& v) -> std::string {
        if (!v.has_value()) return "";
        std::snprintf(buf, sizeof(buf), "%.17g", *v);
        return buf;
    };
    for (const Row& r : rows) {
        out << r.signal << ',' << fmt(r.emerging) << ',' << fmt(r.novel) << ',' << fmt(r.overall)
            << '\n';
    }
}

}  // namespace cagp
