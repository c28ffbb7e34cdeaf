#include "covsem/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "covsem/baselines.hpp"
#include "covsem/inference.hpp"
#include "covsem/rng.hpp"
#include "covsem/selector.hpp"
#include "covsem/version.hpp"

namespace covsem {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* format, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, value);
    return buf;
}

std::string ci_text(const MetricCI& ci, const char* format = "%.3f") {
    return "(" + fmt(format, ci.low) + ", " + fmt(format, ci.high) + ")";
}

nlohmann::json to_json(const IngestOptions& opts) {
    return {{"path", opts.path},
            {"x_cols", opts.x_columns},
            {"y_cols", opts.y_columns},
            {"filter", opts.filter ? nlohmann::json(*opts.filter) : nlohmann::json()},
            {"standardize", opts.standardize},
            {"delimiter", std::string(opts.delimiter == '\0' ? "" : std::string(1, opts.delimiter))}};
}

IngestOptions ingest_from_json(const nlohmann::json& j) {
    IngestOptions opts;
    opts.path = j.at("path").get<std::string>();
    opts.x_columns = j.at("x_cols").get<std::vector<std::string>>();
    opts.y_columns = j.at("y_cols").get<std::vector<std::string>>();
    if (j.contains("filter") && !j["filter"].is_null()) {
        opts.filter = j["filter"].get<std::string>();
    }
    opts.standardize = j.value("standardize", false);
    const std::string delim = j.value("delimiter", std::string());
    opts.delimiter = delim.empty() ? '\0' : delim[0];
    return opts;
}

nlohmann::json to_json(const SimConfig& config) {
    return {{"n", config.n},
            {"p1", config.p1},
            {"p2", config.p2},
            {"beta0", config.beta0},
            {"psi", config.psi},
            {"theta_scale", config.theta_scale},
            {"case", config.kind == SimCase::case1 ? 1 : 2},
            {"a", config.a},
            {"b", config.b},
            {"alpha_decay", config.alpha_decay},
            {"m", config.m},
            {"n_init", config.n_init},
            {"b_self", config.b_self},
            {"b_cross", config.b_cross},
            {"b_infer", config.b_infer},
            {"seed", config.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
    SimConfig config;
    config.n = j.at("n").get<Index>();
    config.p1 = j.at("p1").get<Index>();
    config.p2 = j.at("p2").get<Index>();
    config.beta0 = j.at("beta0").get<double>();
    config.psi = j.at("psi").get<double>();
    config.theta_scale = j.at("theta_scale").get<double>();
    config.kind = j.at("case").get<int>() == 2 ? SimCase::case2 : SimCase::case1;
    config.a = j.at("a").get<double>();
    config.b = j.at("b").get<double>();
    config.alpha_decay = j.at("alpha_decay").get<double>();
    config.m = j.at("m").get<int>();
    config.n_init = j.at("n_init").get<int>();
    config.b_self = j.at("b_self").get<int>();
    config.b_cross = j.at("b_cross").get<int>();
    config.b_infer = j.at("b_infer").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();
    return config;
}

FitConfig fit_config_from(const FitOptions& opts) {
    FitConfig config;
    config.n_init = opts.n_init;
    config.b_self = opts.b_self;
    config.b_cross = opts.b_cross;
    config.alpha = opts.alpha;
    config.c_max = opts.c_max;
    config.seed = opts.common.seed;
    return config;
}

RunManifest make_manifest(const std::string& command, nlohmann::json config,
                          std::uint64_t seed, const std::string& input_path) {
    RunManifest manifest;
    manifest.command = command;
    manifest.config = std::move(config);
    manifest.seed = seed;
    manifest.tool_version = kVersion;
    manifest.input_digest = input_path.empty() ? "none" : file_digest(input_path);
    manifest.created_at = utc_timestamp();
    return manifest;
}

void write_sidecar(const std::string& out_dir, const RunManifest& manifest) {
    std::ofstream file(fs::path(out_dir) / "manifest.json");
    file << manifest.sidecar().dump(2) << "\n";
}

int fail(const std::string& out_dir, const std::string& command, const std::string& message,
         std::ostream& out) {
    out << "error: " << message << "\n";
    try {
        fs::create_directories(out_dir);
        std::ofstream file(fs::path(out_dir) / "error.json");
        file << nlohmann::json{{"type", "error"}, {"command", command}, {"message", message}}
                    .dump()
             << "\n";
    } catch (...) {
        // the error record is best-effort
    }
    return 1;
}

std::string fit_result_text(const FitResult& result) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"beta_hat", fmt("%.6f", result.beta_hat)});
    rows.push_back({"psi_implied", fmt("%.6f", result.structural().psi_implied)});
    rows.push_back({"srmr", fmt("%.6f", result.srmr_value)});
    rows.push_back({"eps_n", fmt("%.6g", result.eps_n)});
    rows.push_back({"xi_n", fmt("%.6g", result.xi_n)});
    rows.push_back({"delta_hat", fmt("%.6g", result.delta_hat)});
    rows.push_back({"pool_size", std::to_string(result.pool_size)});
    rows.push_back({"feasible_size", std::to_string(result.feasible_size)});
    for (const auto& [name, value] : result.diagnostics) {
        rows.push_back({"flag:" + name, value ? "true" : "false"});
    }
    return format_table({"quantity", "value"}, rows);
}

const std::vector<Method> kAllMethods = {Method::sem, Method::l1, Method::l2, Method::proposed};

std::string method_column(Method m) {
    switch (m) {
        case Method::sem: return "SEM";
        case Method::l1: return "L1-SEM";
        case Method::l2: return "L2-SEM";
        case Method::proposed: return "Proposed";
    }
    return "?";
}

}  // namespace

int cmd_fit(const FitOptions& opts, std::ostream& out) {
    try {
        fs::create_directories(opts.common.out_dir);
        const IngestResult ingest = ingest_csv(opts.input);
        if (ingest.rows_rejected > 0) {
            out << "warning: rejected " << ingest.rows_rejected
                << " rows with missing or non-numeric entries\n";
        }
        const FitResult result = fit_pipeline(ingest.data, fit_config_from(opts));

        nlohmann::json config = {{"data", to_json(opts.input)}, {"n_init", opts.n_init},
                                 {"b_self", opts.b_self},      {"b_cross", opts.b_cross},
                                 {"alpha", opts.alpha},        {"c_max", opts.c_max},
                                 {"seed", opts.common.seed}};
        const RunManifest manifest =
            make_manifest("fit", config, opts.common.seed, opts.input.path);
        write_records((fs::path(opts.common.out_dir) / "fit_result.jsonl").string(), manifest,
                      {to_json(result)});
        write_text_file((fs::path(opts.common.out_dir) / "fit_result.txt").string(),
                        fit_result_text(result));
        write_sidecar(opts.common.out_dir, manifest);

        out << "fit: n=" << ingest.data.n() << " p1=" << ingest.data.p1()
            << " p2=" << ingest.data.p2() << "\n"
            << "beta_hat=" << result.beta_hat << " srmr=" << result.srmr_value
            << " pool=" << result.pool_size << " feasible=" << result.feasible_size << "\n";
        return 0;
    } catch (const std::exception& e) {
        return fail(opts.common.out_dir, "fit", e.what(), out);
    }
}

int cmd_infer(const InferOptions& opts, std::ostream& out) {
    try {
        fs::create_directories(opts.fit.common.out_dir);
        const IngestResult ingest = ingest_csv(opts.fit.input);
        const FitConfig config = fit_config_from(opts.fit);
        const FitResult point = fit_pipeline(ingest.data, config);
        const BootstrapSummary summary = bootstrap_beta(
            ingest.data, config, opts.b_infer, opts.level,
            derive_seed(opts.fit.common.seed, {91}));

        nlohmann::json config_json = {{"data", to_json(opts.fit.input)},
                                      {"n_init", opts.fit.n_init},
                                      {"b_self", opts.fit.b_self},
                                      {"b_cross", opts.fit.b_cross},
                                      {"alpha", opts.fit.alpha},
                                      {"c_max", opts.fit.c_max},
                                      {"b_infer", opts.b_infer},
                                      {"level", opts.level},
                                      {"seed", opts.fit.common.seed}};
        const RunManifest manifest =
            make_manifest("infer", config_json, opts.fit.common.seed, opts.fit.input.path);
        write_records((fs::path(opts.fit.common.out_dir) / "inference.jsonl").string(), manifest,
                      {to_json(point), to_json(summary)});

        std::vector<std::vector<std::string>> rows;
        rows.push_back({"beta_hat", fmt("%.3f", point.beta_hat)});
        rows.push_back({"bootstrap mean", fmt("%.3f", summary.mean)});
        rows.push_back({"bootstrap sd", fmt("%.3f", summary.sd)});
        rows.push_back({"ci", "[" + fmt("%.3f", summary.ci_low) + ", " +
                                  fmt("%.3f", summary.ci_high) + "]"});
        rows.push_back({"significant", summary.significant ? "yes" : "no"});
        rows.push_back({"p_approx", fmt("%.3f", summary.p_approx)});
        rows.push_back({"min srmr", fmt("%.3f", point.srmr_value)});
        rows.push_back({"replicates", std::to_string(summary.requested - summary.failures) + "/" +
                                          std::to_string(summary.requested)});
        const std::string text = format_table({"metric", "value"}, rows);
        write_text_file((fs::path(opts.fit.common.out_dir) / "inference.txt").string(), text);
        write_sidecar(opts.fit.common.out_dir, manifest);
        out << text;
        return 0;
    } catch (const std::exception& e) {
        return fail(opts.fit.common.out_dir, "infer", e.what(), out);
    }
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out) {
    try {
        fs::create_directories(opts.common.out_dir);
        SimConfig config = opts.config;
        config.seed = opts.common.seed;

        const std::vector<TrialRecord> records = run_monte_carlo(config, opts.methods);
        const MetricsReport report = summarize(records, config.beta0);

        nlohmann::json methods = nlohmann::json::array();
        for (Method m : opts.methods) methods.push_back(method_name(m));
        const nlohmann::json config_json = {{"sim", to_json(config)}, {"methods", methods}};
        const RunManifest manifest = make_manifest("simulate", config_json, config.seed, "");

        std::vector<nlohmann::json> trial_records;
        trial_records.reserve(records.size());
        for (const auto& record : records) trial_records.push_back(to_json(record));
        write_records((fs::path(opts.common.out_dir) / "trials.jsonl").string(), manifest,
                      trial_records);
        write_records((fs::path(opts.common.out_dir) / "metrics.jsonl").string(), manifest,
                      {to_json(report)});

        std::vector<std::vector<std::string>> rows;
        for (const auto& metrics : report.per_method) {
            std::vector<std::string> row = {method_column(metrics.method),
                                            fmt("%.2f", metrics.valid_rate)};
            if (metrics.bias) {
                row.push_back(fmt("%.3f", *metrics.bias));
                row.push_back(fmt("%.3f", *metrics.var));
                row.push_back(fmt("%.3f", *metrics.rmse));
            } else {
                row.insert(row.end(), {"-", "-", "-"});
            }
            rows.push_back(row);
        }
        const std::string text =
            format_table({"method", "valid", "bias", "var", "rmse"}, rows);
        write_text_file((fs::path(opts.common.out_dir) / "metrics.txt").string(), text);
        write_sidecar(opts.common.out_dir, manifest);
        out << text;
        return 0;
    } catch (const std::exception& e) {
        return fail(opts.common.out_dir, "simulate", e.what(), out);
    }
}

namespace {

SimConfig replicate_config(const ReplicateOptions& opts, Index p, bool case2) {
    SimConfig config = case2 ? SimConfig::case2_defaults() : SimConfig();
    config.p1 = p;
    config.p2 = p;
    config.m = opts.m;
    config.n_init = opts.n_init;
    config.b_self = opts.b_self;
    config.b_cross = opts.b_cross;
    config.seed = derive_seed(opts.common.seed, {77, static_cast<std::uint64_t>(p)});
    return config;
}

int replicate_table_4(const ReplicateOptions& opts, std::ostream& out) {
    std::vector<std::vector<std::string>> rows;
    std::vector<nlohmann::json> records;
    for (Index p = 2; p <= 9; ++p) {
        const SimConfig config = replicate_config(opts, p, false);
        const MetricsReport report =
            summarize(run_monte_carlo(config, kAllMethods), config.beta0);
        std::vector<std::string> row = {std::to_string(p),
                                        p <= 4 ? "Setting 1" : "Setting 2"};
        for (Method m : kAllMethods) {
            const MethodMetrics* metrics = report.find(m);
            row.push_back(fmt("%.2f", metrics ? metrics->valid_rate : 0.0));
            records.push_back({{"type", "valid_rate"},
                               {"p", p},
                               {"method", method_name(m)},
                               {"valid_rate", metrics ? metrics->valid_rate : 0.0}});
        }
        rows.push_back(row);
        out << "table4: finished p=" << p << "\n";
    }
    const RunManifest manifest = make_manifest(
        "replicate", {{"table", 4}, {"m", opts.m}, {"seed", opts.common.seed}},
        opts.common.seed, "");
    write_records((fs::path(opts.common.out_dir) / "table4.jsonl").string(), manifest, records);
    const std::string text = format_table(
        {"p1=p2", "Setting", "SEM", "L1-SEM", "L2-SEM", "Proposed"}, rows);
    write_text_file((fs::path(opts.common.out_dir) / "table4.txt").string(), text);
    write_sidecar(opts.common.out_dir, manifest);
    out << text;
    return 0;
}

int replicate_table_3(const ReplicateOptions& opts, std::ostream& out) {
    std::vector<std::vector<std::string>> rows;
    std::vector<nlohmann::json> records;
    for (Index p = 2; p <= 4; ++p) {
        const SimConfig config = replicate_config(opts, p, false);
        const MetricsReport report =
            summarize(run_monte_carlo(config, kAllMethods), config.beta0);
        for (Method m : kAllMethods) {
            const MethodMetrics* metrics = report.find(m);
            if (!metrics || !metrics->bias) {
                rows.push_back({method_column(m), std::to_string(p), "-", "-", "-", "-", "-", "-"});
                continue;
            }
            rows.push_back({method_column(m), std::to_string(p), fmt("%.3f", *metrics->bias),
                            ci_text(metrics->bias_ci), fmt("%.3f", *metrics->var),
                            ci_text(metrics->var_ci), fmt("%.3f", *metrics->rmse),
                            ci_text(metrics->rmse_ci)});
            nlohmann::json record = to_json(*metrics);
            record["p"] = p;
            records.push_back(record);
        }
        out << "table3: finished p=" << p << "\n";
    }
    const RunManifest manifest = make_manifest(
        "replicate", {{"table", 3}, {"m", opts.m}, {"seed", opts.common.seed}},
        opts.common.seed, "");
    write_records((fs::path(opts.common.out_dir) / "table3.jsonl").string(), manifest, records);
    const std::string text = format_table(
        {"Method", "p", "Bias", "Bias CI", "Var", "Var CI", "RMSE", "RMSE CI"}, rows);
    write_text_file((fs::path(opts.common.out_dir) / "table3.txt").string(), text);
    write_sidecar(opts.common.out_dir, manifest);
    out << text;
    return 0;
}

int replicate_case2_table(const ReplicateOptions& opts, std::ostream& out, bool sign_table) {
    std::vector<std::vector<std::string>> rows;
    std::vector<nlohmann::json> records;
    for (Index p = 2; p <= 6; ++p) {
        const SimConfig config = replicate_config(opts, p, true);
        const MetricsReport report =
            summarize(run_monte_carlo(config, kAllMethods), config.beta0);
        std::vector<std::string> row = {std::to_string(p)};
        for (Method m : kAllMethods) {
            const MethodMetrics* metrics = report.find(m);
            const bool usable = metrics && metrics->valid_count > 0;
            if (sign_table) {
                row.push_back(usable ? fmt("%.2f", metrics->pos_ratio) : "-");
                row.push_back(usable ? fmt("%.2f", metrics->neg_ratio) : "-");
            } else {
                row.push_back(usable && metrics->iqr ? fmt("%.4f", *metrics->iqr) : "-");
            }
            if (metrics) {
                nlohmann::json record = to_json(*metrics);
                record["p"] = p;
                records.push_back(record);
            }
        }
        rows.push_back(row);
        out << "table" << (sign_table ? 5 : 6) << ": finished p=" << p << "\n";
    }
    const int table = sign_table ? 5 : 6;
    const RunManifest manifest = make_manifest(
        "replicate", {{"table", table}, {"m", opts.m}, {"seed", opts.common.seed}},
        opts.common.seed, "");
    const std::string stem = "table" + std::to_string(table);
    write_records((fs::path(opts.common.out_dir) / (stem + ".jsonl")).string(), manifest,
                  records);
    std::vector<std::string> header;
    if (sign_table) {
        header = {"p", "SEM pos", "SEM neg", "L1 pos", "L1 neg",
                  "L2 pos", "L2 neg", "Prop pos", "Prop neg"};
    } else {
        header = {"p", "SEM", "L1-SEM", "L2-SEM", "Proposed"};
    }
    const std::string text = format_table(header, rows);
    write_text_file((fs::path(opts.common.out_dir) / (stem + ".txt")).string(), text);
    write_sidecar(opts.common.out_dir, manifest);
    out << text;
    return 0;
}

int replicate_table_7(const ReplicateOptions& opts, std::ostream& out) {
    if (!opts.input) {
        throw std::invalid_argument(
            "replicate table 7 needs a dataset (--data/--x-cols/--y-cols); "
            "the DASS-42 file is not distributed with the tool");
    }
    InferOptions infer;
    infer.fit.common = opts.common;
    infer.fit.input = *opts.input;
    infer.fit.n_init = opts.n_init;
    infer.fit.b_self = opts.b_self;
    infer.fit.b_cross = opts.b_cross;
    infer.fit.alpha = opts.alpha;
    infer.fit.c_max = opts.c_max;
    infer.b_infer = opts.b_infer;
    infer.level = 0.95;
    return cmd_infer(infer, out);
}

}  // namespace

int cmd_replicate(const ReplicateOptions& opts, std::ostream& out) {
    try {
        fs::create_directories(opts.common.out_dir);
        switch (opts.table) {
            case 3: return replicate_table_3(opts, out);
            case 4: return replicate_table_4(opts, out);
            case 5: return replicate_case2_table(opts, out, true);
            case 6: return replicate_case2_table(opts, out, false);
            case 7: return replicate_table_7(opts, out);
            default:
                throw std::invalid_argument("replicate: table must be one of 3, 4, 5, 6, 7");
        }
    } catch (const std::exception& e) {
        return fail(opts.common.out_dir, "replicate", e.what(), out);
    }
}

int cmd_appendix(const AppendixOptions& opts, std::ostream& out) {
    try {
        fs::create_directories(opts.common.out_dir);
        const AppendixReport report =
            appendix_a_check(opts.a, opts.b, opts.alpha_decay, opts.p_list);

        nlohmann::json config = {{"a", opts.a},
                                 {"b", opts.b},
                                 {"alpha_decay", opts.alpha_decay},
                                 {"p_list", opts.p_list},
                                 {"seed", opts.common.seed}};
        const RunManifest manifest = make_manifest("appendix", config, opts.common.seed, "");
        write_records((fs::path(opts.common.out_dir) / "appendix.jsonl").string(), manifest,
                      {to_json(report)});

        std::vector<std::vector<std::string>> rows;
        for (const auto& row : report.rows) {
            rows.push_back({std::to_string(row.p), fmt("%.12f", row.ratio),
                            fmt("%.6e", row.tail_max)});
        }
        std::string text = format_table({"p", "concentration ratio", "max tail sigma^2"}, rows);
        text += "ratio increasing: " + std::string(report.ratio_increasing ? "yes" : "no") + "\n";
        text += "tail decreasing:  " + std::string(report.tail_decreasing ? "yes" : "no") + "\n";
        write_text_file((fs::path(opts.common.out_dir) / "appendix.txt").string(), text);
        write_sidecar(opts.common.out_dir, manifest);
        out << text;
        return 0;
    } catch (const std::exception& e) {
        return fail(opts.common.out_dir, "appendix", e.what(), out);
    }
}

int cmd_replay(const std::string& result_path, const std::string& out_dir, std::ostream& out) {
    try {
        const RecordFile file = read_records(result_path);
        const RunManifest& manifest = file.manifest;
        const nlohmann::json& config = manifest.config;

        if (manifest.command == "fit" || manifest.command == "infer") {
            FitOptions fit;
            fit.common.out_dir = out_dir;
            fit.common.seed = config.at("seed").get<std::uint64_t>();
            fit.input = ingest_from_json(config.at("data"));
            fit.n_init = config.at("n_init").get<int>();
            fit.b_self = config.at("b_self").get<int>();
            fit.b_cross = config.at("b_cross").get<int>();
            fit.alpha = config.at("alpha").get<double>();
            fit.c_max = config.at("c_max").get<double>();
            if (manifest.command == "fit") return cmd_fit(fit, out);
            InferOptions infer;
            infer.fit = fit;
            infer.b_infer = config.at("b_infer").get<int>();
            infer.level = config.at("level").get<double>();
            return cmd_infer(infer, out);
        }
        if (manifest.command == "simulate") {
            SimulateOptions sim;
            sim.common.out_dir = out_dir;
            sim.config = sim_config_from_json(config.at("sim"));
            sim.common.seed = sim.config.seed;
            sim.methods.clear();
            for (const auto& name : config.at("methods")) {
                if (auto m = method_from_name(name.get<std::string>())) sim.methods.push_back(*m);
            }
            return cmd_simulate(sim, out);
        }
        if (manifest.command == "replicate") {
            ReplicateOptions rep;
            rep.common.out_dir = out_dir;
            rep.common.seed = config.at("seed").get<std::uint64_t>();
            rep.table = config.at("table").get<int>();
            rep.m = config.at("m").get<int>();
            return cmd_replicate(rep, out);
        }
        if (manifest.command == "appendix") {
            AppendixOptions app;
            app.common.out_dir = out_dir;
            app.common.seed = config.at("seed").get<std::uint64_t>();
            app.a = config.at("a").get<double>();
            app.b = config.at("b").get<double>();
            app.alpha_decay = config.at("alpha_decay").get<double>();
            app.p_list = config.at("p_list").get<std::vector<Index>>();
            return cmd_appendix(app, out);
        }
        throw std::invalid_argument("replay: unknown command '" + manifest.command + "'");
    } catch (const std::exception& e) {
        return fail(out_dir, "replay", e.what(), out);
    }
}

}  // namespace covsem
