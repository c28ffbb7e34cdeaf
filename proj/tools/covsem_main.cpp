#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covsem/commands.hpp"
#include "covsem/version.hpp"

namespace {

using covsem::Index;
using covsem::Method;

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream file(path);
    if (!file) throw CLI::ValidationError("--config", "cannot open " + path);
    nlohmann::json j;
    file >> j;
    return j;
}

// Config-file values fill in flags the user did not pass on the command line.
template <typename T>
void merge(CLI::App* sub, const std::string& flag, const nlohmann::json& cfg,
           const std::string& key, T& var) {
    if (sub->count(flag) == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
}

struct DataFlags {
    std::string path;
    std::vector<std::string> x_cols;
    std::vector<std::string> y_cols;
    std::string filter;
    bool standardize = false;
    std::string delim;

    void attach(CLI::App* sub, bool required) {
        auto* d = sub->add_option("--data", path, "input CSV/TSV file with a header row");
        auto* x = sub->add_option("--x-cols", x_cols, "x-block column names")->delimiter(',');
        auto* y = sub->add_option("--y-cols", y_cols, "y-block column names")->delimiter(',');
        if (required) {
            d->required();
            x->required();
            y->required();
        }
        sub->add_option("--filter", filter, "keep rows where column=value");
        sub->add_flag("--standardize", standardize, "standardize each column (mean 0, sd 1)");
        sub->add_option("--delim", delim, "field delimiter (default: auto-detect tab/comma)");
    }

    covsem::IngestOptions to_options() const {
        covsem::IngestOptions opts;
        opts.path = path;
        opts.x_columns = x_cols;
        opts.y_columns = y_cols;
        if (!filter.empty()) opts.filter = filter;
        opts.standardize = standardize;
        opts.delimiter = delim.empty() ? '\0' : delim[0];
        return opts;
    }

    void merge_config(CLI::App* sub, const nlohmann::json& cfg) {
        if (!cfg.contains("data")) return;
        const auto& d = cfg["data"];
        merge(sub, "--data", d, "path", path);
        merge(sub, "--x-cols", d, "x_cols", x_cols);
        merge(sub, "--y-cols", d, "y_cols", y_cols);
        if (sub->count("--filter") == 0 && d.contains("filter") && !d["filter"].is_null()) {
            filter = d["filter"].get<std::string>();
        }
        merge(sub, "--standardize", d, "standardize", standardize);
        merge(sub, "--delim", d, "delimiter", delim);
    }
};

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> methods;
    for (const auto& name : names) {
        const auto m = covsem::method_from_name(name);
        if (!m) throw CLI::ValidationError("--methods", "unknown method '" + name + "'");
        methods.push_back(*m);
    }
    return methods;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covsem: covariance-based SEM estimation for small samples with p > n"};
    app.set_version_flag("--version", covsem::kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string out_dir = ".";
    std::uint64_t seed = 1;
    std::string config_path;
    int threads = 0;
    app.add_option("--out", out_dir, "output directory")->envname("COVSEM_OUT");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--threads", threads, "worker threads (default: hardware)");

    int exit_code = 0;
    auto common = [&](CLI::App*) {
        if (threads > 0) setenv("COVSEM_THREADS", std::to_string(threads).c_str(), 1);
        const nlohmann::json cfg = load_config(config_path);
        if (app.count("--out") == 0 && cfg.contains("out")) {
            out_dir = cfg["out"].get<std::string>();
        }
        if (app.count("--seed") == 0 && cfg.contains("seed")) {
            seed = cfg["seed"].get<std::uint64_t>();
        }
        covsem::CommonOptions c;
        c.out_dir = out_dir;
        c.seed = seed;
        return c;
    };

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "estimate (theta, beta) from a dataset");
    DataFlags fit_data;
    fit_data.attach(fit_cmd, false);
    int fit_n_init = 10, fit_b_self = 10, fit_b_cross = 10;
    double fit_alpha = 0.05, fit_c_max = 10.0;
    fit_cmd->add_option("--n-init", fit_n_init, "random initializations");
    fit_cmd->add_option("--b-self", fit_b_self, "bootstrap size for eps_n");
    fit_cmd->add_option("--b-cross", fit_b_cross, "bootstrap size for xi_n");
    fit_cmd->add_option("--alpha", fit_alpha, "quantile level for both tolerances");
    fit_cmd->add_option("--c-max", fit_c_max, "truncation bound C_max");
    auto fill_fit = [&](covsem::FitOptions& opts) {
        const nlohmann::json cfg = load_config(config_path);
        fit_data.merge_config(fit_cmd, cfg);
        merge(fit_cmd, "--n-init", cfg, "n_init", fit_n_init);
        merge(fit_cmd, "--b-self", cfg, "b_self", fit_b_self);
        merge(fit_cmd, "--b-cross", cfg, "b_cross", fit_b_cross);
        merge(fit_cmd, "--alpha", cfg, "alpha", fit_alpha);
        merge(fit_cmd, "--c-max", cfg, "c_max", fit_c_max);
        opts.common = common(fit_cmd);
        opts.input = fit_data.to_options();
        opts.n_init = fit_n_init;
        opts.b_self = fit_b_self;
        opts.b_cross = fit_b_cross;
        opts.alpha = fit_alpha;
        opts.c_max = fit_c_max;
    };
    fit_cmd->callback([&] {
        covsem::FitOptions opts;
        fill_fit(opts);
        exit_code = covsem::cmd_fit(opts, std::cout);
    });

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "bootstrap inference for beta");
    DataFlags infer_data;
    infer_data.attach(infer_cmd, false);
    int infer_n_init = 10, infer_b_self = 10, infer_b_cross = 10, infer_b = 100;
    double infer_alpha = 0.05, infer_c_max = 10.0, infer_level = 0.95;
    infer_cmd->add_option("--n-init", infer_n_init, "random initializations");
    infer_cmd->add_option("--b-self", infer_b_self, "bootstrap size for eps_n");
    infer_cmd->add_option("--b-cross", infer_b_cross, "bootstrap size for xi_n");
    infer_cmd->add_option("--alpha", infer_alpha, "quantile level for both tolerances");
    infer_cmd->add_option("--c-max", infer_c_max, "truncation bound C_max");
    infer_cmd->add_option("--b-infer", infer_b, "bootstrap replicates for the CI");
    infer_cmd->add_option("--level", infer_level, "confidence level");
    infer_cmd->callback([&] {
        const nlohmann::json cfg = load_config(config_path);
        infer_data.merge_config(infer_cmd, cfg);
        merge(infer_cmd, "--n-init", cfg, "n_init", infer_n_init);
        merge(infer_cmd, "--b-self", cfg, "b_self", infer_b_self);
        merge(infer_cmd, "--b-cross", cfg, "b_cross", infer_b_cross);
        merge(infer_cmd, "--alpha", cfg, "alpha", infer_alpha);
        merge(infer_cmd, "--c-max", cfg, "c_max", infer_c_max);
        merge(infer_cmd, "--b-infer", cfg, "b_infer", infer_b);
        merge(infer_cmd, "--level", cfg, "level", infer_level);
        covsem::InferOptions opts;
        opts.fit.common = common(infer_cmd);
        opts.fit.input = infer_data.to_options();
        opts.fit.n_init = infer_n_init;
        opts.fit.b_self = infer_b_self;
        opts.fit.b_cross = infer_b_cross;
        opts.fit.alpha = infer_alpha;
        opts.fit.c_max = infer_c_max;
        opts.b_infer = infer_b;
        opts.level = infer_level;
        exit_code = covsem::cmd_infer(opts, std::cout);
    });

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo experiment");
    int sim_case = 1;
    covsem::SimConfig sim_base;
    std::vector<std::string> sim_methods = {"proposed", "sem", "l1", "l2"};
    long long sim_n = -1, sim_p1 = -1, sim_p2 = -1;
    double sim_a = -1.0, sim_b = -1.0;
    sim_cmd->add_option("--case", sim_case, "generator case (1 or 2)")
        ->check(CLI::IsMember({1, 2}));
    sim_cmd->add_option("--n", sim_n, "sample size");
    sim_cmd->add_option("--p1", sim_p1, "x-block dimension");
    sim_cmd->add_option("--p2", sim_p2, "y-block dimension");
    sim_cmd->add_option("--beta0", sim_base.beta0, "true structural coefficient");
    sim_cmd->add_option("--psi", sim_base.psi, "disturbance variance");
    sim_cmd->add_option("--theta-scale", sim_base.theta_scale, "error variance level");
    sim_cmd->add_option("--a", sim_a, "x tail coefficient");
    sim_cmd->add_option("--b", sim_b, "y tail coefficient");
    sim_cmd->add_option("--alpha-decay", sim_base.alpha_decay, "tail decay exponent");
    sim_cmd->add_option("--m", sim_base.m, "Monte Carlo repetitions");
    sim_cmd->add_option("--n-init", sim_base.n_init, "random initializations");
    sim_cmd->add_option("--b-self", sim_base.b_self, "bootstrap size for eps_n");
    sim_cmd->add_option("--b-cross", sim_base.b_cross, "bootstrap size for xi_n");
    sim_cmd->add_option("--b-infer", sim_base.b_infer, "bootstrap replicates for inference");
    sim_cmd->add_option("--methods", sim_methods, "comma list of methods")->delimiter(',');
    sim_cmd->callback([&] {
        covsem::SimulateOptions opts;
        opts.common = common(sim_cmd);
        covsem::SimConfig config =
            sim_case == 2 ? covsem::SimConfig::case2_defaults() : covsem::SimConfig();
        config.beta0 = sim_base.beta0;
        config.psi = sim_base.psi;
        config.theta_scale = sim_base.theta_scale;
        config.alpha_decay = sim_base.alpha_decay;
        config.m = sim_base.m;
        config.n_init = sim_base.n_init;
        config.b_self = sim_base.b_self;
        config.b_cross = sim_base.b_cross;
        config.b_infer = sim_base.b_infer;
        if (sim_n > 0) config.n = static_cast<Index>(sim_n);
        if (sim_p1 > 0) config.p1 = static_cast<Index>(sim_p1);
        if (sim_p2 > 0) config.p2 = static_cast<Index>(sim_p2);
        if (sim_a > 0.0) config.a = sim_a;
        if (sim_b > 0.0) config.b = sim_b;
        opts.config = config;
        opts.methods = parse_methods(sim_methods);
        exit_code = covsem::cmd_simulate(opts, std::cout);
    });

    // replicate
    auto* rep_cmd = app.add_subcommand("replicate", "reproduce a results table (3|4|5|6|7)");
    DataFlags rep_data;
    covsem::ReplicateOptions rep;
    rep_cmd->add_option("--table", rep.table, "table number")->required()
        ->check(CLI::IsMember({3, 4, 5, 6, 7}));
    rep_cmd->add_option("--m", rep.m, "Monte Carlo repetitions");
    rep_cmd->add_option("--n-init", rep.n_init, "random initializations");
    rep_cmd->add_option("--b-self", rep.b_self, "bootstrap size for eps_n");
    rep_cmd->add_option("--b-cross", rep.b_cross, "bootstrap size for xi_n");
    rep_cmd->add_option("--b-infer", rep.b_infer, "bootstrap replicates (table 7)");
    rep_cmd->add_option("--alpha", rep.alpha, "quantile level");
    rep_cmd->add_option("--c-max", rep.c_max, "truncation bound C_max");
    rep_data.attach(rep_cmd, false);
    rep_cmd->callback([&] {
        rep.common = common(rep_cmd);
        if (!rep_data.path.empty()) rep.input = rep_data.to_options();
        exit_code = covsem::cmd_replicate(rep, std::cout);
    });

    // appendix
    auto* app_cmd = app.add_subcommand("appendix", "numerical sparsity-condition check");
    covsem::AppendixOptions appendix;
    std::vector<long long> p_list;
    app_cmd->add_option("--a", appendix.a, "x tail coefficient");
    app_cmd->add_option("--b", appendix.b, "y tail coefficient");
    app_cmd->add_option("--alpha-decay", appendix.alpha_decay, "tail decay exponent");
    app_cmd->add_option("--p-list", p_list, "comma list of dimensions")->delimiter(',');
    app_cmd->callback([&] {
        appendix.common = common(app_cmd);
        if (!p_list.empty()) {
            appendix.p_list.clear();
            for (long long p : p_list) appendix.p_list.push_back(static_cast<Index>(p));
        }
        exit_code = covsem::cmd_appendix(appendix, std::cout);
    });

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "re-execute a result file's manifest");
    std::string replay_manifest;
    replay_cmd->add_option("--manifest", replay_manifest, "result .jsonl file")->required();
    replay_cmd->callback([&] {
        exit_code = covsem::cmd_replay(replay_manifest, common(replay_cmd).out_dir, std::cout);
    });

    CLI11_PARSE(app, argc, argv);
    return exit_code;
}
