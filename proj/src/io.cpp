#include "covsem/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "covsem/version.hpp"

namespace covsem {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, delim)) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == delim) cells.push_back("");
    return cells;
}

bool parse_double(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    char* end = nullptr;
    out = std::strtod(cell.c_str(), &end);
    return end == cell.c_str() + cell.size() && std::isfinite(out);
}

std::vector<double> to_std(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = v[i];
    return out;
}

}  // namespace

IngestResult ingest_csv(const IngestOptions& opts) {
    std::ifstream file(opts.path);
    if (!file) throw std::invalid_argument("ingest_csv: cannot open " + opts.path);

    std::string header_line;
    if (!std::getline(file, header_line)) {
        throw std::invalid_argument("ingest_csv: empty file " + opts.path);
    }
    const char delim = opts.delimiter != '\0'
                           ? opts.delimiter
                           : (header_line.find('\t') != std::string::npos ? '\t' : ',');
    const std::vector<std::string> header = split_line(header_line, delim);

    auto column_index = [&header](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw std::invalid_argument("ingest_csv: missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };

    if (opts.x_columns.empty() || opts.y_columns.empty()) {
        throw std::invalid_argument("ingest_csv: x and y column lists must be nonempty");
    }
    for (const auto& xc : opts.x_columns) {
        if (std::find(opts.y_columns.begin(), opts.y_columns.end(), xc) !=
            opts.y_columns.end()) {
            throw std::invalid_argument("ingest_csv: column '" + xc + "' in both x and y lists");
        }
    }

    std::vector<std::size_t> x_idx, y_idx;
    for (const auto& name : opts.x_columns) x_idx.push_back(column_index(name));
    for (const auto& name : opts.y_columns) y_idx.push_back(column_index(name));

    std::optional<std::pair<std::size_t, std::string>> filter;
    if (opts.filter) {
        const auto eq = opts.filter->find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("ingest_csv: filter must look like column=value");
        }
        filter = {column_index(trim(opts.filter->substr(0, eq))),
                  trim(opts.filter->substr(eq + 1))};
    }

    std::vector<std::vector<double>> x_rows, y_rows;
    IngestResult result;
    std::string line;
    while (std::getline(file, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line, delim);
        if (filter) {
            if (filter->first >= cells.size() || cells[filter->first] != filter->second) {
                continue;
            }
        }
        ++result.rows_seen;

        std::vector<double> x_row(x_idx.size()), y_row(y_idx.size());
        bool ok = true;
        for (std::size_t j = 0; ok && j < x_idx.size(); ++j) {
            ok = x_idx[j] < cells.size() && parse_double(cells[x_idx[j]], x_row[j]);
        }
        for (std::size_t j = 0; ok && j < y_idx.size(); ++j) {
            ok = y_idx[j] < cells.size() && parse_double(cells[y_idx[j]], y_row[j]);
        }
        if (!ok) {
            ++result.rows_rejected;
            continue;
        }
        x_rows.push_back(std::move(x_row));
        y_rows.push_back(std::move(y_row));
    }

    const Index n = static_cast<Index>(x_rows.size());
    if (n < 4) {
        throw std::invalid_argument("ingest_csv: fewer than 4 usable rows (got " +
                                    std::to_string(n) + ")");
    }

    Matrix x(n, static_cast<Index>(x_idx.size()));
    Matrix y(n, static_cast<Index>(y_idx.size()));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < x.cols(); ++j) x(i, j) = x_rows[i][static_cast<std::size_t>(j)];
        for (Index j = 0; j < y.cols(); ++j) y(i, j) = y_rows[i][static_cast<std::size_t>(j)];
    }

    if (opts.standardize) {
        auto standardize = [n](Matrix& m, const std::vector<std::string>& names) {
            for (Index j = 0; j < m.cols(); ++j) {
                const double mu = m.col(j).mean();
                const double sd =
                    std::sqrt((m.col(j).array() - mu).square().sum() / static_cast<double>(n - 1));
                if (!(sd > 0.0)) {
                    throw std::invalid_argument("ingest_csv: zero variance in column '" +
                                                names[static_cast<std::size_t>(j)] +
                                                "', cannot standardize");
                }
                m.col(j) = (m.col(j).array() - mu) / sd;
            }
        };
        standardize(x, opts.x_columns);
        standardize(y, opts.y_columns);
    }

    result.data = DataBlocks(std::move(x), std::move(y));
    return result;
}

std::string file_digest(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) return "none";
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    char c;
    while (file.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

nlohmann::json RunManifest::record() const {
    return {{"type", "manifest"},
            {"schema_version", kSchemaVersion},
            {"command", command},
            {"config", config},
            {"seed", seed},
            {"tool_version", tool_version},
            {"input_digest", input_digest}};
}

nlohmann::json RunManifest::sidecar() const {
    nlohmann::json j = record();
    j["created_at"] = created_at;
    return j;
}

RunManifest RunManifest::from_record(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.input_digest = j.at("input_digest").get<std::string>();
    if (j.contains("created_at")) m.created_at = j["created_at"].get<std::string>();
    return m;
}

nlohmann::json to_json(const FactorParams& theta) {
    return {{"lambda_x", to_std(theta.lambda_x)},
            {"theta_delta", to_std(theta.theta_delta)},
            {"lambda_y", to_std(theta.lambda_y)},
            {"theta_eps", to_std(theta.theta_eps)},
            {"tau", theta.tau}};
}

FactorParams factor_params_from_json(const nlohmann::json& j) {
    FactorParams theta;
    theta.lambda_x = to_vector(j.at("lambda_x").get<std::vector<double>>());
    theta.theta_delta = to_vector(j.at("theta_delta").get<std::vector<double>>());
    theta.lambda_y = to_vector(j.at("lambda_y").get<std::vector<double>>());
    theta.theta_eps = to_vector(j.at("theta_eps").get<std::vector<double>>());
    theta.tau = j.at("tau").get<double>();
    return theta;
}

nlohmann::json to_json(const ToleranceParams& tol) {
    return {{"xi_n", tol.xi_n},
            {"c_hat", tol.c_hat},
            {"c_trunc", tol.c_trunc},
            {"c_max", tol.c_max},
            {"r_np", tol.r_np},
            {"w1", tol.w1},
            {"w2", tol.w2},
            {"q_upper", tol.q_upper},
            {"alpha", tol.alpha},
            {"all_bootstrap_deltas_floored", tol.all_bootstrap_deltas_floored}};
}

ToleranceParams tolerance_from_json(const nlohmann::json& j) {
    ToleranceParams tol;
    tol.xi_n = j.at("xi_n").get<double>();
    tol.c_hat = j.at("c_hat").get<double>();
    tol.c_trunc = j.at("c_trunc").get<double>();
    tol.c_max = j.at("c_max").get<double>();
    tol.r_np = j.at("r_np").get<double>();
    tol.w1 = j.at("w1").get<double>();
    tol.w2 = j.at("w2").get<double>();
    tol.q_upper = j.at("q_upper").get<double>();
    tol.alpha = j.at("alpha").get<double>();
    tol.all_bootstrap_deltas_floored = j.at("all_bootstrap_deltas_floored").get<bool>();
    return tol;
}

nlohmann::json to_json(const FitResult& result) {
    return {{"type", "fit_result"},
            {"theta", to_json(result.theta_hat)},
            {"beta_hat", result.beta_hat},
            {"psi_implied", result.structural().psi_implied},
            {"srmr", result.srmr_value},
            {"eps_n", result.eps_n},
            {"xi_n", result.xi_n},
            {"delta_hat", result.delta_hat},
            {"ell_hat", result.ell_hat},
            {"pool_size", result.pool_size},
            {"feasible_size", result.feasible_size},
            {"tolerance", to_json(result.tolerance)},
            {"diagnostics", result.diagnostics}};
}

FitResult fit_result_from_json(const nlohmann::json& j) {
    FitResult result;
    result.theta_hat = factor_params_from_json(j.at("theta"));
    result.beta_hat = j.at("beta_hat").get<double>();
    result.srmr_value = j.at("srmr").get<double>();
    result.eps_n = j.at("eps_n").get<double>();
    result.xi_n = j.at("xi_n").get<double>();
    result.delta_hat = j.at("delta_hat").get<double>();
    result.ell_hat = j.at("ell_hat").get<double>();
    result.pool_size = j.at("pool_size").get<int>();
    result.feasible_size = j.at("feasible_size").get<int>();
    result.tolerance = tolerance_from_json(j.at("tolerance"));
    result.diagnostics = j.at("diagnostics").get<std::map<std::string, bool>>();
    return result;
}

nlohmann::json to_json(const BootstrapSummary& summary) {
    return {{"type", "bootstrap_summary"},
            {"beta_hats", summary.beta_hats},
            {"mean", summary.mean},
            {"sd", summary.sd},
            {"ci_low", summary.ci_low},
            {"ci_high", summary.ci_high},
            {"level", summary.level},
            {"significant", summary.significant},
            {"p_approx", summary.p_approx},
            {"requested", summary.requested},
            {"failures", summary.failures}};
}

BootstrapSummary bootstrap_summary_from_json(const nlohmann::json& j) {
    BootstrapSummary summary;
    summary.beta_hats = j.at("beta_hats").get<std::vector<double>>();
    summary.mean = j.at("mean").get<double>();
    summary.sd = j.at("sd").get<double>();
    summary.ci_low = j.at("ci_low").get<double>();
    summary.ci_high = j.at("ci_high").get<double>();
    summary.level = j.at("level").get<double>();
    summary.significant = j.at("significant").get<bool>();
    summary.p_approx = j.at("p_approx").get<double>();
    summary.requested = j.at("requested").get<int>();
    summary.failures = j.at("failures").get<int>();
    return summary;
}

nlohmann::json to_json(const TrialRecord& record) {
    nlohmann::json j = {{"type", "trial"},
                        {"method", method_name(record.method)},
                        {"valid", record.valid},
                        {"energy_ratio", record.energy_ratio},
                        {"seed_index", record.seed_index}};
    if (record.valid) j["beta_hat"] = record.beta_hat;
    return j;
}

TrialRecord trial_record_from_json(const nlohmann::json& j) {
    TrialRecord record;
    const auto method = method_from_name(j.at("method").get<std::string>());
    if (!method) throw std::invalid_argument("trial record: unknown method");
    record.method = *method;
    record.valid = j.at("valid").get<bool>();
    record.energy_ratio = j.at("energy_ratio").get<double>();
    record.seed_index = j.at("seed_index").get<int>();
    if (record.valid) record.beta_hat = j.at("beta_hat").get<double>();
    return record;
}

nlohmann::json to_json(const MethodMetrics& metrics) {
    nlohmann::json j = {{"type", "metrics"},
                        {"method", method_name(metrics.method)},
                        {"trials", metrics.trials},
                        {"valid_count", metrics.valid_count},
                        {"valid_rate", metrics.valid_rate},
                        {"pos_ratio", metrics.pos_ratio},
                        {"neg_ratio", metrics.neg_ratio},
                        {"zero_ratio", metrics.zero_ratio}};
    if (metrics.bias) {
        j["bias"] = *metrics.bias;
        j["bias_ci"] = {metrics.bias_ci.low, metrics.bias_ci.high};
        j["var"] = *metrics.var;
        j["var_ci"] = {metrics.var_ci.low, metrics.var_ci.high};
        j["rmse"] = *metrics.rmse;
        j["rmse_ci"] = {metrics.rmse_ci.low, metrics.rmse_ci.high};
        j["iqr"] = *metrics.iqr;
    }
    return j;
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& metrics : report.per_method) methods.push_back(to_json(metrics));
    return {{"type", "metrics_report"}, {"beta0", report.beta0}, {"per_method", methods}};
}

nlohmann::json to_json(const AppendixReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"p", row.p}, {"ratio", row.ratio}, {"tail_max", row.tail_max}});
    }
    return {{"type", "appendix_check"},
            {"rows", rows},
            {"ratio_increasing", report.ratio_increasing},
            {"tail_decreasing", report.tail_decreasing}};
}

void write_records(const std::string& path, const RunManifest& manifest,
                   const std::vector<nlohmann::json>& records) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("write_records: cannot open " + path);
    file << manifest.record().dump() << "\n";
    for (const auto& record : records) file << record.dump() << "\n";
}

RecordFile read_records(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("read_records: cannot open " + path);
    std::string line;
    if (!std::getline(file, line)) {
        throw std::runtime_error("read_records: empty file " + path);
    }
    RecordFile out;
    out.manifest = RunManifest::from_record(nlohmann::json::parse(line));
    while (std::getline(file, line)) {
        if (trim(line).empty()) continue;
        out.records.push_back(nlohmann::json::parse(line));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("write_text_file: cannot open " + path);
    file << content;
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size() && j < width.size(); ++j) {
            width[j] = std::max(width[j], row[j].size());
        }
    }

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t j = 0; j < width.size(); ++j) {
            const std::string& cell = j < cells.size() ? cells[j] : std::string();
            if (j == 0) {
                out << cell << std::string(width[j] - cell.size(), ' ');
            } else {
                out << "  " << std::string(width[j] - cell.size(), ' ') << cell;
            }
        }
        out << "\n";
    };
    emit(header);
    std::size_t total = 0;
    for (std::size_t j = 0; j < width.size(); ++j) total += width[j] + (j > 0 ? 2 : 0);
    out << std::string(total, '-') << "\n";
    for (const auto& row : rows) emit(row);
    return out.str();
}

}  // namespace covsem
