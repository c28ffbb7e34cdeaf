#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covsem/inference.hpp"
#include "covsem/selector.hpp"
#include "covsem/simlab.hpp"
#include "covsem/types.hpp"

namespace covsem {

inline constexpr int kSchemaVersion = 1;

struct IngestOptions {
    std::string path;
    std::vector<std::string> x_columns;
    std::vector<std::string> y_columns;
    std::optional<std::string> filter;  // "column=value"
    bool standardize = false;
    char delimiter = '\0';  // '\0' = auto-detect (tab if the header has one)
};

struct IngestResult {
    DataBlocks data;
    int rows_seen = 0;      // rows passing the filter
    int rows_rejected = 0;  // rows dropped for missing/non-numeric cells
};

/// CSV ingestion with a header row. Rows with non-numeric or missing entries
/// in any requested column are rejected (counted); errors on missing columns,
/// overlapping x/y lists, or fewer than 4 usable rows.
IngestResult ingest_csv(const IngestOptions& opts);

/// Reproducibility record embedded in every persisted result. The timestamp
/// is excluded from result files (they must be byte-identical across reruns
/// of the same manifest) and lives in the sidecar manifest.json instead.
struct RunManifest {
    std::string command;
    nlohmann::json config;    // fully resolved options for the command
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string input_digest; // content hash of the input file, or "none"
    std::string created_at;   // UTC, sidecar only

    nlohmann::json record() const;   // embedded form (no timestamp)
    nlohmann::json sidecar() const;  // full form
    static RunManifest from_record(const nlohmann::json& j);
};

std::string file_digest(const std::string& path);
std::string utc_timestamp();

// JSON conversions for the persisted types.
nlohmann::json to_json(const FactorParams& theta);
FactorParams factor_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ToleranceParams& tol);
ToleranceParams tolerance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FitResult& result);
FitResult fit_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BootstrapSummary& summary);
BootstrapSummary bootstrap_summary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrialRecord& record);
TrialRecord trial_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MethodMetrics& metrics);
nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const AppendixReport& report);

/// Writes a result file: one manifest record line followed by one JSON
/// record per line. Output is deterministic for a fixed manifest.
void write_records(const std::string& path, const RunManifest& manifest,
                   const std::vector<nlohmann::json>& records);

struct RecordFile {
    RunManifest manifest;
    std::vector<nlohmann::json> records;
};

RecordFile read_records(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

/// Aligned plain-text table; columns sized to their widest cell.
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

}  // namespace covsem
