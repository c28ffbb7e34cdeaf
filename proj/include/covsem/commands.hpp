#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "covsem/io.hpp"
#include "covsem/simlab.hpp"

namespace covsem {

/// Options shared by every subcommand. out_dir falls back to COVSEM_OUT and
/// then to the current directory.
struct CommonOptions {
    std::string out_dir = ".";
    std::uint64_t seed = 1;
};

struct FitOptions {
    CommonOptions common;
    IngestOptions input;
    int n_init = 10;
    int b_self = 10;
    int b_cross = 10;
    double alpha = 0.05;
    double c_max = 10.0;
};

struct InferOptions {
    FitOptions fit;
    int b_infer = 100;
    double level = 0.95;
};

struct SimulateOptions {
    CommonOptions common;
    SimConfig config;
    std::vector<Method> methods = {Method::proposed, Method::sem, Method::l1, Method::l2};
};

struct ReplicateOptions {
    CommonOptions common;
    int table = 4;  // 3, 4, 5, 6 or 7
    int m = 100;
    // Table 7 needs a dataset.
    std::optional<IngestOptions> input;
    int b_infer = 100;
    int n_init = 10;
    int b_self = 10;
    int b_cross = 10;
    double alpha = 0.05;
    double c_max = 10.0;
};

struct AppendixOptions {
    CommonOptions common;
    double a = 0.3;
    double b = 0.3;
    double alpha_decay = 0.75;
    std::vector<Index> p_list = {10, 100, 1000, 10000};
};

// Each command writes its artifacts under out_dir, prints a short summary to
// `out`, and returns a process exit status. Failures write error.json and
// return nonzero instead of throwing.
int cmd_fit(const FitOptions& opts, std::ostream& out);
int cmd_infer(const InferOptions& opts, std::ostream& out);
int cmd_simulate(const SimulateOptions& opts, std::ostream& out);
int cmd_replicate(const ReplicateOptions& opts, std::ostream& out);
int cmd_appendix(const AppendixOptions& opts, std::ostream& out);

/// Re-executes the command recorded in a result file's manifest line,
/// writing into out_dir; numeric outputs reproduce exactly.
int cmd_replay(const std::string& result_path, const std::string& out_dir, std::ostream& out);

}  // namespace covsem
