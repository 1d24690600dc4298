#include "cagp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace cagp {

namespace {

// Shared rank-sum core over (uncertainty, is_ood) pairs.
double auroc_impl(std::vector<std::pair<double, bool>>& v) {
    std::size_t n_ood = 0;
    for (const auto& [u, ood] : v) {
        if (!std::isfinite(u)) throw InvalidInput("non-finite uncertainty");
        if (ood) ++n_ood;
    }
    std::size_t n_id = v.size() - n_ood;
    if (n_ood == 0 || n_id == 0) {
        throw UndefinedMetric("auroc needs at least one sample of each class");
    }
    std::sort(v.begin(), v.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // Average ranks over tie groups; accumulate the OOD rank-sum.
    double rank_sum_ood = 0.0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j].first == v[i].first) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (v[k].second) rank_sum_ood += avg_rank;
        }
        i = j;
    }
    double u_stat = rank_sum_ood - 0.5 * static_cast<double>(n_ood) * static_cast<double>(n_ood + 1);
    return u_stat / (static_cast<double>(n_ood) * static_cast<double>(n_id));
}

}  // namespace

double auroc(const std::vector<ScoredSample>& samples) {
    std::vector<std::pair<double, bool>> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.emplace_back(s.uncertainty, s.is_ood);
    return auroc_impl(v);
}

double aupr(const std::vector<ScoredSample>& samples) {
    std::size_t n_ood = 0;
    for (const auto& s : samples) n_ood += s.is_ood ? 1 : 0;
    if (n_ood == 0 || n_ood == samples.size()) {
        throw UndefinedMetric("aupr needs at least one sample of each class");
    }
    std::vector<std::pair<double, bool>> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.emplace_back(s.uncertainty, s.is_ood);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    double area = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j].first == v[i].first) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (v[k].second) ++tp; else ++fp;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(n_ood);
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

namespace {

std::vector<double> minmax01(const std::vector<double>& u) {
    if (u.empty()) return {};
    auto [lo_it, hi_it] = std::minmax_element(u.begin(), u.end());
    double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(u.size());
    if (hi <= lo) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = (u[i] - lo) / (hi - lo);
    return out;
}

}  // namespace

double f1_at(const std::vector<ScoredSample>& samples, double threshold) {
    if (samples.empty()) throw UndefinedMetric("f1 on empty input");
    std::vector<double> u(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) u[i] = samples[i].uncertainty;
    std::vector<double> norm = minmax01(u);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        bool flagged = norm[i] >= threshold;
        if (flagged && samples[i].is_ood) ++tp;
        else if (flagged && !samples[i].is_ood) ++fp;
        else if (!flagged && samples[i].is_ood) ++fn;
    }
    if (tp == 0) return 0.0;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<double> probs_from_combined(const std::vector<double>& uncertainties) {
    std::vector<double> p(uncertainties.size());
    for (std::size_t i = 0; i < uncertainties.size(); ++i) {
        p[i] = std::clamp(uncertainties[i] / 2.0, 0.0, 1.0);
    }
    return p;
}

std::vector<double> probs_minmax(const std::vector<double>& uncertainties) {
    return minmax01(uncertainties);
}

double ece(const std::vector<double>& probabilities, const std::vector<bool>& is_ood, int bins) {
    if (probabilities.empty()) throw UndefinedMetric("ece on empty input");
    if (probabilities.size() != is_ood.size()) throw InvalidInput("ece: misaligned inputs");
    if (bins < 1) throw InvalidInput("ece: bins must be positive");
    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        double p = probabilities[i];
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("ece: probability outside [0,1]");
        int b = std::min(static_cast<int>(p * bins), bins - 1);  // last bin closed at 1
        conf_sum[b] += p;
        acc_sum[b] += is_ood[i] ? 1.0 : 0.0;
        count[b] += 1;
    }
    double total = static_cast<double>(probabilities.size());
    double e = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        double conf = conf_sum[b] / static_cast<double>(count[b]);
        double acc = acc_sum[b] / static_cast<double>(count[b]);
        e += (static_cast<double>(count[b]) / total) * std::abs(acc - conf);
    }
    return e;
}

double brier(const std::vector<double>& probabilities, const std::vector<bool>& is_ood) {
    if (probabilities.empty()) throw UndefinedMetric("brier on empty input");
    if (probabilities.size() != is_ood.size()) throw InvalidInput("brier: misaligned inputs");
    double sum = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        double y = is_ood[i] ? 1.0 : 0.0;
        double d = probabilities[i] - y;
        sum += d * d;
    }
    return sum / static_cast<double>(probabilities.size());
}

double selective_prediction(const std::vector<ScoredSample>& samples, double answer_rate) {
    if (!(answer_rate > 0.0 && answer_rate <= 1.0)) {
        throw UndefinedMetric("answer_rate must lie in (0,1]");
    }
    if (samples.empty()) throw UndefinedMetric("selective_prediction on empty input");
    for (const auto& s : samples) {
        if (!s.correct.has_value()) throw InvalidInput("selective_prediction needs correctness");
    }
    std::size_t n = samples.size();
    std::size_t abstain =
        static_cast<std::size_t>(std::ceil((1.0 - answer_rate) * static_cast<double>(n)));
    if (abstain >= n) abstain = n - 1;  // always answer at least one query
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Highest uncertainty first; stable keeps input order among ties.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return samples[a].uncertainty > samples[b].uncertainty;
    });
    std::size_t answered = 0, correct = 0;
    for (std::size_t k = abstain; k < n; ++k) {
        ++answered;
        if (*samples[order[k]].correct) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(answered);
}

double paired_bootstrap(const std::vector<double>& unc_a, const std::vector<double>& unc_b,
                        const std::vector<bool>& is_ood, int iterations, std::uint64_t seed) {
    if (unc_a.size() != unc_b.size() || unc_a.size() != is_ood.size()) {
        throw InvalidInput("paired_bootstrap: misaligned inputs");
    }
    if (unc_a.empty()) throw InvalidInput("paired_bootstrap: empty input");
    if (iterations < 1) throw InvalidInput("paired_bootstrap: iterations must be positive");
    std::size_t n = unc_a.size();
    std::mt19937_64 rng(seed);
    double hits = 0.0;
    std::vector<std::pair<double, bool>> ra, rb;
    ra.reserve(n);
    rb.reserve(n);
    for (int it = 0; it < iterations; ++it) {
        ra.clear();
        rb.clear();
        bool any_ood = false, any_id = false;
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t idx = static_cast<std::size_t>(rng() % n);
            ra.emplace_back(unc_a[idx], is_ood[idx]);
            rb.emplace_back(unc_b[idx], is_ood[idx]);
            (is_ood[idx] ? any_ood : any_id) = true;
        }
        if (!any_ood || !any_id) {
            hits += 0.5;  // degenerate resample: treat as a tie
            continue;
        }
        double a = auroc_impl(ra);
        double b = auroc_impl(rb);
        if (a < b) hits += 1.0;
        else if (a == b) hits += 0.5;
    }
    return hits / static_cast<double>(iterations);
}

namespace {

void accumulate(ErrorClassStats& s, const Triple& t, const KnowledgeGraph& kg,
                const std::vector<std::uint64_t>& relation_freq) {
    // Running sums; finalized in error_analysis.
    s.count += 1;
    s.mean_tail_degree += static_cast<double>(kg.freq[t.tail]);
    s.mean_relation_freq += static_cast<double>(relation_freq[t.relation]);
}

void finalize(ErrorClassStats& s, std::size_t class_total) {
    if (s.count > 0) {
        s.mean_tail_degree /= static_cast<double>(s.count);
        s.mean_relation_freq /= static_cast<double>(s.count);
    }
    s.rate = class_total == 0 ? 0.0
                              : static_cast<double>(s.count) / static_cast<double>(class_total);
}

}  // namespace

ErrorAnalysis error_analysis(const std::vector<ScoredSample>& samples,
                             const std::vector<Triple>& triples, const KnowledgeGraph& kg,
                             double threshold) {
    if (samples.size() != triples.size()) throw InvalidInput("error_analysis: misaligned inputs");
    if (samples.empty()) throw UndefinedMetric("error_analysis on empty input");
    std::vector<std::uint64_t> relation_freq(kg.relation_count(), 0);
    for (const Triple& t : kg.split("train")) relation_freq[t.relation] += 1;

    std::vector<double> u(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) u[i] = samples[i].uncertainty;
    std::vector<double> norm = minmax01(u);

    ErrorAnalysis report;
    std::size_t n_id = 0, n_ood = 0, n_correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        bool flagged = norm[i] >= threshold;
        bool ood = samples[i].is_ood;
        (ood ? n_ood : n_id) += 1;
        if (flagged == ood) ++n_correct;
        ErrorClassStats& bucket = ood ? (flagged ? report.true_positives : report.false_negatives)
                                      : (flagged ? report.false_positives : report.true_negatives);
        accumulate(bucket, triples[i], kg, relation_freq);
    }
    finalize(report.false_positives, n_id);
    finalize(report.true_negatives, n_id);
    finalize(report.false_negatives, n_ood);
    finalize(report.true_positives, n_ood);
    report.accuracy = static_cast<double>(n_correct) / static_cast<double>(samples.size());
    return report;
}

std::string ErrorAnalysis::to_json() const {
    auto cls = [](const ErrorClassStats& s) {
        return nlohmann::ordered_json{{"count", s.count},
                                      {"rate", s.rate},
                                      {"mean_tail_degree", s.mean_tail_degree},
                                      {"mean_relation_freq", s.mean_relation_freq}};
    };
    nlohmann::ordered_json j;
    j["accuracy"] = accuracy;
    j["false_positives"] = cls(false_positives);
    j["false_negatives"] = cls(false_negatives);
    j["true_positives"] = cls(true_positives);
    j["true_negatives"] = cls(true_negatives);
    return j.dump(2);
}

}  // namespace cagp
