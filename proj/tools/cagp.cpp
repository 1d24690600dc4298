#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cagp/config.hpp"
#include "cagp/run.hpp"
#include "cagp/types.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> set_kv;
    std::int64_t seed = -1;
    bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--set", opts.set_kv, "extra key=value overrides (repeatable)");
    cmd->add_option("--seed", opts.seed, "base seed: train=N, corruption=N+1, bootstrap=N+2")
        ->check(CLI::NonNegativeNumber);
}

cagp::RunConfig resolve(const CommonOpts& opts) {
    cagp::RunConfig cfg = cagp::parse_config_file(opts.config_path);
    if (!opts.out_dir.empty()) cfg.set("output.dir", opts.out_dir);
    if (opts.seed >= 0) {
        std::uint64_t s = static_cast<std::uint64_t>(opts.seed);
        cfg.set("seeds.train", std::to_string(s));
        cfg.set("seeds.corruption", std::to_string(s + 1));
        cfg.set("seeds.bootstrap", std::to_string(s + 2));
    }
    for (const std::string& kv : opts.set_kv) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw cagp::InvalidInput("--set expects key=value: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coverage-augmented uncertainty for knowledge-graph embeddings"};
    app.require_subcommand(1);

    CommonOpts prepare_opts, train_opts, eval_opts, verify_opts, ablate_opts, report_opts;
    std::string eval_mode = "temporal_like";

    CLI::App* prepare = app.add_subcommand("prepare", "load data, build coverage and partitions");
    add_common(prepare, prepare_opts);
    CLI::App* train = app.add_subcommand("train", "train Gaussian embeddings, write checkpoint");
    add_common(train, train_opts);
    CLI::App* eval = app.add_subcommand("eval", "OOD detection metrics per signal");
    add_common(eval, eval_opts);
    eval->add_option("--mode", eval_mode, "temporal_like | random_corruption")
        ->check(CLI::IsMember({"temporal_like", "random_corruption"}));
    CLI::App* verify = app.add_subcommand("verify", "assumption checks and stratified AUROC");
    add_common(verify, verify_opts);
    CLI::App* ablate = app.add_subcommand("ablate", "coverage-mode, alpha-mode and tau sweeps");
    add_common(ablate, ablate_opts);
    CLI::App* report = app.add_subcommand("report", "print previously generated artifacts");
    add_common(report, report_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) cagp::cmd_prepare(resolve(prepare_opts), std::cout);
        else if (train->parsed()) cagp::cmd_train(resolve(train_opts), std::cout);
        else if (eval->parsed()) cagp::cmd_eval(resolve(eval_opts), eval_mode, std::cout);
        else if (verify->parsed()) cagp::cmd_verify(resolve(verify_opts), std::cout);
        else if (ablate->parsed()) cagp::cmd_ablate(resolve(ablate_opts), std::cout);
        else if (report->parsed()) cagp::cmd_report(resolve(report_opts), std::cout);
    } catch (const cagp::TrainingDiverged& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const cagp::InvalidInput& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const cagp::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
