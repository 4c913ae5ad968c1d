// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "twl/harness.hpp"

namespace {

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw twl::ConfigError("out: cannot open '" + path + "' for writing");
    out << content;
}

struct CommonOpts {
    std::string config_path;
    std::string out_path;
    std::string format = "csv";
    int threads = 0;
    uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "experiment config (JSON)");
    if (config_required) c->required();
    cmd->add_option("--out", opts.out_path, "output path ('-' = stdout)");
    cmd->add_option("--format", opts.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--threads", opts.threads, "worker threads (default: TWL_THREADS or hardware)");
    cmd->add_option("--seed", opts.seed, "override master seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
}

twl::ExperimentConfig load_config(const CommonOpts& opts, const std::string& kind) {
    twl::ExperimentConfig cfg = twl::ExperimentConfig::from_file(opts.config_path);
    cfg.kind = kind;
    if (opts.seed_set) cfg.master_seed = opts.seed;
    if (opts.threads > 0) cfg.threads = opts.threads;
    return cfg;
}

template <typename Report>
void emit(const Report& rep, const CommonOpts& opts) {
    write_output(opts.out_path, opts.format == "json" ? rep.to_json() : rep.to_csv());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tournament watermark lab"};
    app.require_subcommand(1);

    CommonOpts sweep_o, clt_o, attack_o, validate_o, optp_o;
    auto* sweep = app.add_subcommand("sweep", "TPR over a range of layer counts");
    add_common(sweep, sweep_o);
    auto* clt = app.add_subcommand("clt", "Anderson-Darling normality check of mean scores");
    add_common(clt, clt_o);
    auto* attack = app.add_subcommand("attack", "layer-inflation attack evaluation");
    add_common(attack, attack_o);
    auto* validate = app.add_subcommand("validate", "theory-vs-empirical assertions");
    add_common(validate, validate_o);
    std::string scores_path;
    validate->add_option("--scores", scores_path, "also write per-text score rows (CSV)");
    auto* optp = app.add_subcommand("optimal-p", "Bernoulli parameter scan");
    add_common(optp, optp_o);
    auto* vectors = app.add_subcommand("vectors", "print PRF test vectors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (sweep->parsed()) {
            emit(twl::run_sweep(load_config(sweep_o, "sweep")), sweep_o);
        } else if (clt->parsed()) {
            emit(twl::run_clt_check(load_config(clt_o, "clt")), clt_o);
        } else if (attack->parsed()) {
            emit(twl::run_attack_eval(load_config(attack_o, "attack")), attack_o);
        } else if (validate->parsed()) {
            const twl::ValidateReport rep = twl::run_validate(load_config(validate_o, "validate"));
            emit(rep, validate_o);
            if (!scores_path.empty()) write_output(scores_path, rep.scores_csv());
            if (!rep.all_pass()) return 2;
        } else if (optp->parsed()) {
            emit(twl::run_optimal_p(load_config(optp_o, "optimal_p")), optp_o);
        } else if (vectors->parsed()) {
            for (const auto& line : twl::prf_test_vectors()) std::cout << line << "\n";
        }
    } catch (const twl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
