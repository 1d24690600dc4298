#include "cagp/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cagp {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        return std::stoull(v);
    } catch (...) {
        throw InvalidInput("config: " + key + " expects an unsigned integer, got '" + v + "'");
    }
}

std::int64_t parse_i64(const std::string& key, const std::string& v) {
    try {
        return std::stoll(v);
    } catch (...) {
        throw InvalidInput("config: " + key + " expects an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (...) {
        throw InvalidInput("config: " + key + " expects a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidInput("config: " + key + " expects a boolean, got '" + v + "'");
}

std::vector<std::uint64_t> parse_u64_list(const std::string& key, const std::string& v) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_u64(key, item));
    }
    if (out.empty()) throw InvalidInput("config: " + key + " expects a comma-separated list");
    return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "dataset.train") dataset_train = value;
    else if (key == "dataset.valid") dataset_valid = value;
    else if (key == "dataset.test") dataset_test = value;
    else if (key == "dataset.synthetic") synthetic = parse_bool(key, value);
    else if (key == "synth.entities") synth.entities = parse_u64(key, value);
    else if (key == "synth.relations") synth.relations = parse_u64(key, value);
    else if (key == "synth.skew") synth.skew = parse_double(key, value);
    else if (key == "synth.heldout_fraction") synth.heldout_fraction = parse_double(key, value);
    else if (key == "synth.emerging_entities") synth.emerging_entities = parse_u64(key, value);
    else if (key == "synth.core_rounds") synth.core_rounds = parse_u64(key, value);
    else if (key == "synth.extra_train") synth.extra_train = parse_u64(key, value);
    else if (key == "synth.eval_id") synth.eval_id = parse_u64(key, value);
    else if (key == "synth.eval_novel") synth.eval_novel = parse_u64(key, value);
    else if (key == "synth.eval_emerging") synth.eval_emerging = parse_u64(key, value);
    else if (key == "synth.tau") synth.tau = parse_u64(key, value);
    else if (key == "synth.seed") synth_seed = parse_u64(key, value);
    else if (key == "output.dir") out_dir = value;
    else if (key == "scorer") train.scorer = scorer_from_string(value);
    else if (key == "train.dim") train.dim = static_cast<int>(parse_i64(key, value));
    else if (key == "train.batch_size") train.batch_size = static_cast<int>(parse_i64(key, value));
    else if (key == "train.learning_rate") train.learning_rate = parse_double(key, value);
    else if (key == "train.kl_weight") train.kl_weight = parse_double(key, value);
    else if (key == "train.epochs") train.epochs = static_cast<int>(parse_i64(key, value));
    else if (key == "train.negatives") train.negatives_per_positive = static_cast<int>(parse_i64(key, value));
    else if (key == "tau.percentile") tau_percentile = parse_double(key, value);
    else if (key == "a3.epsilons") epsilons = parse_u64_list(key, value);
    else if (key == "alpha.mode") {
        if (value == "learned") alpha_mode = AlphaMode::Learned;
        else if (value == "fixed") alpha_mode = AlphaMode::Fixed;
        else throw InvalidInput("config: alpha.mode expects learned|fixed, got '" + value + "'");
    }
    else if (key == "alpha.fixed_value") fixed_alpha = parse_double(key, value);
    else if (key == "coverage.mode") coverage_mode = coverage_mode_from_string(value);
    else if (key == "seeds.train") train.seed = parse_u64(key, value);
    else if (key == "seeds.corruption") corruption_seed = parse_u64(key, value);
    else if (key == "seeds.bootstrap") bootstrap_seed = parse_u64(key, value);
    else if (key == "bootstrap.iterations") bootstrap_iterations = static_cast<int>(parse_i64(key, value));
    else if (key == "baseline.draws") baseline_draws = static_cast<int>(parse_i64(key, value));
    else throw InvalidInput("config: unknown key '" + key + "'");
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open config " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const InvalidInput& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [key, value] : kv) cfg.set(key, value);
}

std::string RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = {{"train", dataset_train},
                    {"valid", dataset_valid},
                    {"test", dataset_test},
                    {"synthetic", synthetic}};
    if (synthetic) {
        j["synth"] = {{"entities", synth.entities},
                      {"relations", synth.relations},
                      {"skew", synth.skew},
                      {"heldout_fraction", synth.heldout_fraction},
                      {"emerging_entities", synth.emerging_entities},
                      {"core_rounds", synth.core_rounds},
                      {"extra_train", synth.extra_train},
                      {"eval_id", synth.eval_id},
                      {"eval_novel", synth.eval_novel},
                      {"eval_emerging", synth.eval_emerging},
                      {"tau", synth.tau},
                      {"seed", synth_seed}};
    }
    j["output_dir"] = out_dir;
    j["scorer"] = to_string(train.scorer);
    j["train"] = {{"dim", train.dim},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"kl_weight", train.kl_weight},
                  {"epochs", train.epochs},
                  {"negatives", train.negatives_per_positive},
                  {"seed", train.seed}};
    j["tau_percentile"] = tau_percentile;
    j["epsilons"] = epsilons;
    j["alpha_mode"] = alpha_mode == AlphaMode::Learned ? "learned" : "fixed";
    j["fixed_alpha"] = fixed_alpha;
    j["coverage_mode"] = to_string(coverage_mode);
    j["seeds"] = {{"train", train.seed}, {"corruption", corruption_seed}, {"bootstrap", bootstrap_seed}};
    j["bootstrap_iterations"] = bootstrap_iterations;
    j["baseline_draws"] = baseline_draws;
    return j.dump(2);
}

}  // namespace cagp
