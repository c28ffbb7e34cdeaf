#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "covsem/commands.hpp"
#include "covsem/io.hpp"
#include "covsem/simlab.hpp"

using namespace covsem;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "covsem_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream file(path);
    file << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream file(path, std::ios::binary);
    std::stringstream ss;
    ss << file.rdbuf();
    return ss.str();
}

fs::path basic_csv(const fs::path& dir) {
    const fs::path path = dir / "basic.csv";
    write_file(path,
               "x1,x2,y1,y2\n"
               "1.0,2.0,0.5,1.5\n"
               "2.0,1.0,1.5,0.5\n"
               "0.0,0.5,2.0,1.0\n"
               "1.5,2.5,0.0,2.0\n"
               "2.5,0.0,1.0,0.0\n");
    return path;
}

// A dataset the pipeline can actually fit (n=12, p1=p2=2).
fs::path fit_csv(const fs::path& dir) {
    SimConfig config;
    config.n = 12;
    config.p1 = 2;
    config.p2 = 2;
    config.seed = 2;
    const GeneratedData gen = generate(config, 0);
    std::ostringstream csv;
    csv << "x1,x2,y1,y2\n";
    for (Index i = 0; i < config.n; ++i) {
        csv << gen.data.x(i, 0) << "," << gen.data.x(i, 1) << "," << gen.data.y(i, 0) << ","
            << gen.data.y(i, 1) << "\n";
    }
    const fs::path path = dir / "fit.csv";
    write_file(path, csv.str());
    return path;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("csv ingestion: shapes, filtering, rejection, errors") {
    const fs::path dir = temp_dir("ingest");

    IngestOptions opts;
    opts.path = basic_csv(dir).string();
    opts.x_columns = {"x1", "x2"};
    opts.y_columns = {"y1", "y2"};
    const IngestResult basic = ingest_csv(opts);
    CHECK(basic.data.n() == 5);
    CHECK(basic.data.p1() == 2);
    CHECK(basic.data.p2() == 2);
    CHECK(basic.rows_rejected == 0);

    // Country filter keeps only the matching rows.
    const fs::path mixed = dir / "mixed.csv";
    write_file(mixed,
               "country,x1,y1\n"
               "CO,1.0,2.0\nUS,9.0,9.0\nCO,2.0,1.0\nCO,0.0,0.5\nUS,8.0,8.0\n"
               "CO,1.5,1.5\nCO,0.5,2.5\n");
    IngestOptions filtered;
    filtered.path = mixed.string();
    filtered.x_columns = {"x1"};
    filtered.y_columns = {"y1"};
    filtered.filter = "country=CO";
    const IngestResult co = ingest_csv(filtered);
    CHECK(co.data.n() == 5);
    CHECK(co.data.x(0, 0) == 1.0);

    // One malformed row is rejected and counted.
    const fs::path broken = dir / "broken.csv";
    write_file(broken,
               "x1,y1\n1.0,2.0\n2.0,oops\n3.0,1.0\n4.0,0.5\n5.0,2.5\n");
    IngestOptions tolerant;
    tolerant.path = broken.string();
    tolerant.x_columns = {"x1"};
    tolerant.y_columns = {"y1"};
    const IngestResult damaged = ingest_csv(tolerant);
    CHECK(damaged.data.n() == 4);
    CHECK(damaged.rows_rejected == 1);

    IngestOptions missing = opts;
    missing.x_columns = {"x1", "nope"};
    CHECK_THROWS_WITH_AS(ingest_csv(missing), doctest::Contains("nope"), std::invalid_argument);

    IngestOptions overlap = opts;
    overlap.y_columns = {"x2", "y1"};
    CHECK_THROWS_WITH_AS(ingest_csv(overlap), doctest::Contains("x2"), std::invalid_argument);

    const fs::path tiny = dir / "tiny.csv";
    write_file(tiny, "x1,y1\n1.0,2.0\n2.0,1.0\n3.0,0.0\n");
    IngestOptions too_small;
    too_small.path = tiny.string();
    too_small.x_columns = {"x1"};
    too_small.y_columns = {"y1"};
    CHECK_THROWS_WITH_AS(ingest_csv(too_small), doctest::Contains("4"), std::invalid_argument);
}

TEST_CASE("standardization and tab-delimited auto-detection") {
    const fs::path dir = temp_dir("standardize");
    const fs::path tsv = dir / "data.tsv";
    write_file(tsv,
               "x1\ty1\n1.0\t4.0\n2.0\t3.0\n3.0\t2.0\n4.0\t1.0\n5.0\t0.0\n");
    IngestOptions opts;
    opts.path = tsv.string();
    opts.x_columns = {"x1"};
    opts.y_columns = {"y1"};
    opts.standardize = true;
    const IngestResult std_result = ingest_csv(opts);
    CHECK(std_result.data.x.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
    const double sd =
        std::sqrt(std_result.data.x.col(0).squaredNorm() / 4.0);
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));

    const fs::path flat = dir / "flat.csv";
    write_file(flat, "x1,y1\n1.0,1.0\n1.0,2.0\n1.0,3.0\n1.0,4.0\n");
    IngestOptions zero_var;
    zero_var.path = flat.string();
    zero_var.x_columns = {"x1"};
    zero_var.y_columns = {"y1"};
    zero_var.standardize = true;
    CHECK_THROWS_WITH_AS(ingest_csv(zero_var), doctest::Contains("x1"), std::invalid_argument);
}

TEST_CASE("fit result serialization round-trips field-for-field") {
    FitResult result;
    result.theta_hat.lambda_x = Vector::Ones(2);
    result.theta_hat.lambda_x[1] = 0.823745619;
    result.theta_hat.theta_delta = Vector::Constant(2, 0.4123);
    result.theta_hat.lambda_y = Vector::Ones(2);
    result.theta_hat.theta_eps = Vector::Constant(2, 0.71);
    result.theta_hat.tau = 0.7612345;
    result.beta_hat = 0.51234567890123;
    result.srmr_value = 0.149;
    result.eps_n = 1.25e-3;
    result.xi_n = 0.35;
    result.delta_hat = 0.641;
    result.ell_hat = -4.25;
    result.pool_size = 12;
    result.feasible_size = 7;
    result.tolerance.xi_n = 0.35;
    result.tolerance.c_hat = 3.1;
    result.tolerance.c_trunc = 3.1;
    result.tolerance.c_max = 10.0;
    result.tolerance.r_np = 0.1129;
    result.tolerance.w1 = 2.5;
    result.tolerance.w2 = 2.25;
    result.tolerance.q_upper = 0.35;
    result.tolerance.alpha = 0.05;
    result.diagnostics = {{"delta_floored", false}, {"empty_feasible_fallback", true}};

    // Through the disk: write, re-read, parse.
    const fs::path dir = temp_dir("roundtrip");
    RunManifest manifest;
    manifest.command = "fit";
    manifest.config = {{"seed", 3}};
    manifest.seed = 3;
    manifest.tool_version = "covsem test";
    manifest.input_digest = "none";
    write_records((dir / "fit.jsonl").string(), manifest, {to_json(result)});
    const FitResult back =
        fit_result_from_json(read_records((dir / "fit.jsonl").string()).records.at(0));
    CHECK(back.theta_hat.lambda_x == result.theta_hat.lambda_x);
    CHECK(back.theta_hat.theta_delta == result.theta_hat.theta_delta);
    CHECK(back.theta_hat.lambda_y == result.theta_hat.lambda_y);
    CHECK(back.theta_hat.theta_eps == result.theta_hat.theta_eps);
    CHECK(back.theta_hat.tau == result.theta_hat.tau);
    CHECK(back.beta_hat == result.beta_hat);
    CHECK(back.srmr_value == result.srmr_value);
    CHECK(back.eps_n == result.eps_n);
    CHECK(back.xi_n == result.xi_n);
    CHECK(back.delta_hat == result.delta_hat);
    CHECK(back.ell_hat == result.ell_hat);
    CHECK(back.pool_size == result.pool_size);
    CHECK(back.feasible_size == result.feasible_size);
    CHECK(back.tolerance.c_hat == result.tolerance.c_hat);
    CHECK(back.tolerance.r_np == result.tolerance.r_np);
    CHECK(back.diagnostics == result.diagnostics);

    // Trial records keep beta only for valid trials.
    TrialRecord trial;
    trial.method = Method::l2;
    trial.valid = true;
    trial.beta_hat = -0.25;
    trial.energy_ratio = 0.93;
    trial.seed_index = 14;
    const TrialRecord trial_back = trial_record_from_json(to_json(trial));
    CHECK(trial_back.method == Method::l2);
    CHECK(trial_back.beta_hat == trial.beta_hat);
    trial.valid = false;
    CHECK(!to_json(trial).contains("beta_hat"));

    BootstrapSummary summary;
    summary.beta_hats = {0.1, 0.2, 0.3};
    summary.mean = 0.2;
    summary.sd = 0.1;
    summary.ci_low = 0.1;
    summary.ci_high = 0.3;
    summary.level = 0.95;
    summary.significant = true;
    summary.p_approx = 0.0;
    summary.requested = 3;
    const BootstrapSummary summary_back = bootstrap_summary_from_json(to_json(summary));
    CHECK(summary_back.beta_hats == summary.beta_hats);
    CHECK(summary_back.significant == summary.significant);
}

TEST_CASE("record files carry the manifest and reproduce byte-identically") {
    const fs::path dir = temp_dir("records");
    RunManifest manifest;
    manifest.command = "fit";
    manifest.config = {{"seed", 7}};
    manifest.seed = 7;
    manifest.tool_version = "covsem test";
    manifest.input_digest = "none";
    manifest.created_at = utc_timestamp();

    const fs::path path = dir / "records.jsonl";
    write_records(path.string(), manifest, {{{"type", "x"}, {"value", 1.5}}});
    const RecordFile back = read_records(path.string());
    CHECK(back.manifest.command == "fit");
    CHECK(back.manifest.seed == 7);
    CHECK(back.records.size() == 1);
    CHECK(back.records[0].at("value") == 1.5);
    // The embedded manifest never contains the timestamp.
    CHECK(read_file(path).find("created_at") == std::string::npos);
}

TEST_CASE("cmd_fit twice with the same seed writes byte-identical results") {
    const fs::path dir = temp_dir("cmd_fit");
    const fs::path csv = fit_csv(dir);

    FitOptions opts;
    opts.common.out_dir = (dir / "run1").string();
    opts.common.seed = 11;
    opts.input.path = csv.string();
    opts.input.x_columns = {"x1", "x2"};
    opts.input.y_columns = {"y1", "y2"};
    opts.n_init = 4;
    opts.b_self = 4;
    opts.b_cross = 4;

    std::ostringstream sink;
    REQUIRE(cmd_fit(opts, sink) == 0);
    opts.common.out_dir = (dir / "run2").string();
    REQUIRE(cmd_fit(opts, sink) == 0);

    CHECK(read_file(dir / "run1" / "fit_result.jsonl") ==
          read_file(dir / "run2" / "fit_result.jsonl"));
    CHECK(read_file(dir / "run1" / "fit_result.txt") ==
          read_file(dir / "run2" / "fit_result.txt"));

    // Replay from the manifest reproduces the numeric output exactly.
    REQUIRE(cmd_replay((dir / "run1" / "fit_result.jsonl").string(),
                       (dir / "replayed").string(), sink) == 0);
    CHECK(read_file(dir / "replayed" / "fit_result.jsonl") ==
          read_file(dir / "run1" / "fit_result.jsonl"));
}

TEST_CASE("cmd_simulate persists one record per trial plus a manifest line") {
    const fs::path dir = temp_dir("cmd_sim");
    SimulateOptions opts;
    opts.common.out_dir = dir.string();
    opts.common.seed = 5;
    opts.config.n = 10;
    opts.config.p1 = 5;
    opts.config.p2 = 5;
    opts.config.m = 2;
    opts.config.n_init = 3;
    opts.config.b_self = 3;
    opts.config.b_cross = 3;
    opts.methods = {Method::proposed, Method::sem};

    std::ostringstream sink;
    REQUIRE(cmd_simulate(opts, sink) == 0);
    const RecordFile trials = read_records((dir / "trials.jsonl").string());
    CHECK(trials.records.size() == 4);  // 2 reps x 2 methods
    CHECK(trials.manifest.command == "simulate");
    for (const auto& record : trials.records) {
        const TrialRecord parsed = trial_record_from_json(record);
        CHECK((parsed.valid == record.contains("beta_hat")));
    }
    CHECK(fs::exists(dir / "metrics.jsonl"));
    CHECK(fs::exists(dir / "metrics.txt"));
    CHECK(fs::exists(dir / "manifest.json"));
    // The sidecar carries the timestamp.
    CHECK(read_file(dir / "manifest.json").find("created_at") != std::string::npos);
}

TEST_CASE("failures produce an error record and a nonzero status") {
    const fs::path dir = temp_dir("cmd_err");
    FitOptions opts;
    opts.common.out_dir = dir.string();
    opts.input.path = (dir / "does_not_exist.csv").string();
    opts.input.x_columns = {"x1"};
    opts.input.y_columns = {"y1"};
    std::ostringstream sink;
    CHECK(cmd_fit(opts, sink) == 1);
    CHECK(fs::exists(dir / "error.json"));
    CHECK(sink.str().find("error") != std::string::npos);
}

TEST_CASE("appendix command emits the table and monotonicity verdicts") {
    const fs::path dir = temp_dir("cmd_apx");
    AppendixOptions opts;
    opts.common.out_dir = dir.string();
    opts.p_list = {10, 100};
    std::ostringstream sink;
    REQUIRE(cmd_appendix(opts, sink) == 0);
    const std::string text = read_file(dir / "appendix.txt");
    CHECK(text.find("ratio increasing: yes") != std::string::npos);
    const RecordFile records = read_records((dir / "appendix.jsonl").string());
    CHECK(records.records.size() == 1);
}

TEST_SUITE_END();
