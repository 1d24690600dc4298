#include "cagp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace cagp {

const std::vector<Triple>& KnowledgeGraph::split(const std::string& name) const {
    auto it = splits.find(name);
    if (it == splits.end()) {
        throw InvalidInput("unknown split: " + name);
    }
    return it->second;
}

namespace {

EntityId intern_entity(KnowledgeGraph& kg, const std::string& name) {
    auto [it, inserted] = kg.entity_index.try_emplace(name, static_cast<EntityId>(kg.entity_names.size()));
    if (inserted) kg.entity_names.push_back(name);
    return it->second;
}

RelationId intern_relation(KnowledgeGraph& kg, const std::string& name) {
    auto [it, inserted] =
        kg.relation_index.try_emplace(name, static_cast<RelationId>(kg.relation_names.size()));
    if (inserted) kg.relation_names.push_back(name);
    return it->second;
}

constexpr const char* kSplitOrder[] = {"train", "valid", "test"};

}  // namespace

KnowledgeGraph build_graph(const std::map<std::string, std::vector<SurfaceTriple>>& split_triples) {
    KnowledgeGraph kg;
    // Fixed split order so vocabulary ids are deterministic.
    for (const char* name : kSplitOrder) {
        auto it = split_triples.find(name);
        if (it == split_triples.end()) continue;
        auto& out = kg.splits[name];
        out.reserve(it->second.size());
        for (const auto& t : it->second) {
            Triple triple;
            triple.head = intern_entity(kg, t[0]);
            triple.relation = intern_relation(kg, t[1]);
            triple.tail = intern_entity(kg, t[2]);
            out.push_back(triple);
        }
    }
    for (const auto& [name, _] : split_triples) {
        if (std::string(name) != "train" && std::string(name) != "valid" && std::string(name) != "test") {
            throw InvalidInput("unknown split name in input: " + name);
        }
    }
    if (!kg.splits.count("train") || kg.splits.at("train").empty()) {
        throw InvalidInput("train split is empty");
    }
    recompute_frequencies(kg);
    return kg;
}

namespace {

void read_split_file(const std::string& path, std::vector<SurfaceTriple>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t tab1 = line.find('\t');
        std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        std::size_t tab3 = tab2 == std::string::npos ? std::string::npos : line.find('\t', tab2 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
        }
        out.push_back({line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1), line.substr(tab2 + 1)});
    }
}

}  // namespace

KnowledgeGraph load_tsv(const SplitPaths& paths) {
    std::map<std::string, std::vector<SurfaceTriple>> split_triples;
    if (paths.train.empty()) throw InvalidInput("train path is required");
    read_split_file(paths.train, split_triples["train"]);
    if (!paths.valid.empty()) read_split_file(paths.valid, split_triples["valid"]);
    if (!paths.test.empty()) read_split_file(paths.test, split_triples["test"]);
    return build_graph(split_triples);
}

void write_tsv(const KnowledgeGraph& kg, const SplitPaths& paths) {
    auto write_split = [&](const std::string& name, const std::string& path) {
        if (path.empty()) return;
        if (!kg.has_split(name)) return;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InvalidInput("cannot write " + path);
        for (const Triple& t : kg.split(name)) {
            out << kg.entity_names[t.head] << '\t' << kg.relation_names[t.relation] << '\t'
                << kg.entity_names[t.tail] << '\n';
        }
    };
    write_split("train", paths.train);
    write_split("valid", paths.valid);
    write_split("test", paths.test);
}

void recompute_frequencies(KnowledgeGraph& kg) {
    kg.freq.assign(kg.entity_count(), 0);
    for (const Triple& t : kg.split("train")) {
        kg.freq[t.head] += 1;
        kg.freq[t.tail] += 1;  // self-loops contribute 2 to one entity
    }
}

std::uint64_t frequency_threshold(const KnowledgeGraph& kg, double percentile) {
    if (!(percentile >= 0.0 && percentile <= 1.0)) {
        throw InvalidInput("percentile must lie in [0,1]");
    }
    std::vector<std::uint64_t> freqs;
    freqs.reserve(kg.entity_count());
    for (std::uint64_t f : kg.freq) {
        if (f > 0) freqs.push_back(f);
    }
    if (freqs.empty()) throw InvalidInput("train split is empty");
    std::sort(freqs.begin(), freqs.end());
    // Nearest-rank: 1-based rank ceil(p*n), clamped to [1, n].
    std::size_t n = freqs.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return freqs[rank - 1];
}

namespace {

std::uint64_t quantile_nearest_rank(const std::vector<std::uint64_t>& sorted, double p) {
    std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

}  // namespace

GraphStats graph_stats(const KnowledgeGraph& kg) {
    GraphStats s;
    s.entity_count = kg.entity_count();
    s.relation_count = kg.relation_count();
    for (const auto& [name, triples] : kg.splits) {
        s.split_sizes[name] = triples.size();
    }
    std::vector<std::uint64_t> freqs;
    for (std::uint64_t f : kg.freq) {
        if (f > 0) freqs.push_back(f);
    }
    s.train_entities = freqs.size();
    if (!freqs.empty()) {
        std::sort(freqs.begin(), freqs.end());
        s.freq_quantiles.min = freqs.front();
        s.freq_quantiles.p10 = quantile_nearest_rank(freqs, 0.10);
        s.freq_quantiles.p25 = quantile_nearest_rank(freqs, 0.25);
        s.freq_quantiles.median = quantile_nearest_rank(freqs, 0.50);
        s.freq_quantiles.p75 = quantile_nearest_rank(freqs, 0.75);
        s.freq_quantiles.p90 = quantile_nearest_rank(freqs, 0.90);
        s.freq_quantiles.max = freqs.back();
        s.freq_quantiles.mean =
            std::accumulate(freqs.begin(), freqs.end(), 0.0) / static_cast<double>(freqs.size());
    }
    return s;
}

std::string GraphStats::to_json() const {
    nlohmann::ordered_json j;
    j["entity_count"] = entity_count;
    j["relation_count"] = relation_count;
    for (const auto& [name, size] : split_sizes) {
        j["split_sizes"][name] = size;
    }
    j["train_entities"] = train_entities;
    j["freq"] = {{"min", freq_quantiles.min},   {"p10", freq_quantiles.p10},
                 {"p25", freq_quantiles.p25},   {"median", freq_quantiles.median},
                 {"p75", freq_quantiles.p75},   {"p90", freq_quantiles.p90},
                 {"max", freq_quantiles.max},   {"mean", freq_quantiles.mean}};
    return j.dump(2);
}

}  // namespace cagp
