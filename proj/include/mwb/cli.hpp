#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mwb {

/// Exit codes of the command line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitIo = 1,
    kExitUsage = 2,
    kExitSchema = 3,
    kExitEstimation = 4,
};

/// Every knob of a run. Field defaults are the tool defaults.
struct RunConfig {
    std::string contracts = "contracts.csv";
    std::string schedule = "schedule.csv";
    std::string users = "users.csv";
    std::string output_dir = ".";

    int bin_width = 10;
    int group_width = 100;
    int max_e = 3;
    int spill_offset = 400;
    std::string window_start = "2023-04";
    std::string window_end = "2024-03";
    std::string event_month = "2023-10";
    int wage_ceiling = 5000;

    std::string outcome = "employment_share";
    std::string normalizer = "postings";
    std::string cluster = "bin";
    std::string vcov = "CR1";
    std::string fit = "cell_means";
    std::string inference = "bootstrap";
    int bootstrap_reps = 999;
    std::uint64_t seed = 20231001;
    std::string baseline_weighting = "postings";
    std::string wage_valuation = "upper";

    std::string stratify = "prefecture";
    int min_records_per_cell = 30;
    int kaitz_bins = 10;
    bool kaitz_reciprocal = false;

    int describe_prefecture = 0;  // 0 = all prefectures
    std::string month_a;          // default: month before the event
    std::string month_b;          // default: event month

    std::string scenario = "paper";
    std::optional<double> total_contracts;
    std::optional<double> missing_frac;
    std::optional<double> excess_frac;
    std::optional<double> match_prob;

    int jobs = 1;
};

/// Runs the tool on `args` (without the program name). Normal output goes to
/// `out`, diagnostics to `err`; the return value is an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv);

}  // namespace mwb
