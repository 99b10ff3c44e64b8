#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mwb/binning.hpp"
#include "mwb/event_study.hpp"
#include "mwb/types.hpp"

namespace mwb {

struct DgpPrefecture {
    int id = 0;
    int old_mw = 0;
    int new_mw = 0;
    /// Poisson mean of postings per month.
    double monthly_postings = 0.0;
    /// Overrides of the global upper-tail location and treatment fractions.
    std::optional<double> tail_shift;
    std::optional<double> missing_frac;
    std::optional<double> excess_frac;
};

/// Posted-wage mixture of a prefecture: uniform mass on [old_mw, new_mw - 1],
/// a point mass at new_mw, and a log-normal tail truncated to [new_mw, wage_cap]
/// with log-location log(new_mw + tail_shift).
struct WageMixture {
    double below_mw_mass = 0.3;
    double mass_at_mw = 0.05;
    double tail_shift = 150.0;
    double tail_sdlog = 0.15;
    int wage_cap = 3000;
};

struct ReimbursementModel {
    double zero_prob = 0.3;
    double point_mass_500_prob = 0.45;
    /// Remaining draws are uniform on {0, step, ..., max}.
    int grid_step = 100;
    int grid_max = 1500;
};

struct DgpConfig {
    std::uint64_t seed = 1;
    std::vector<DgpPrefecture> prefectures;
    StudyWindow window;
    WageMixture wage;
    /// Post-event fate of a posting drawn below the new MW: destroyed (kept as
    /// an unfilled posting) w.p. m, relocated to [new_mw, new_mw + 99] w.p. x,
    /// untouched otherwise. A `bunch_share` of relocations lands exactly on new_mw.
    double missing_frac = 0.0;
    double excess_frac = 0.0;
    double bunch_share = 0.5;
    /// Occupation-specific m; prefecture overrides take precedence.
    std::array<std::optional<double>, kOccupationCount> occupation_missing_frac{};
    double match_prob = 0.8;
    ReimbursementModel reimbursement;
    std::vector<std::pair<double, double>> hours_grid = {
        {2.0, 0.10}, {3.0, 0.20}, {4.0, 0.25}, {4.5, 0.10}, {5.0, 0.15}, {6.0, 0.10}, {8.0, 0.10}};
    std::array<double, kOccupationCount> occupation_weights = {0.25, 0.20, 0.12, 0.10, 0.05,
                                                               0.10, 0.05, 0.05, 0.08};
    std::array<double, 4> slot_weights = {0.40, 0.30, 0.20, 0.10};
    /// Active users per month = round(users_per_posting * postings).
    double users_per_posting = 1.25;

    /// Throws ConfigError.
    void validate() const;
    MinWageSchedule schedule() const;
    double missing_frac_for(const DgpPrefecture& p, Occupation o) const;
    double excess_frac_for(const DgpPrefecture& p) const;
    double tail_shift_for(const DgpPrefecture& p) const;
};

struct GroundTruth {
    EventStudyDesign design;
    /// Expected employment share per cell: rows e = -1..max_e then infinity,
    /// columns t = 1..T.
    Eigen::MatrixXd cell_means;
    /// Bins with positive probability per row, pooled over prefectures.
    std::vector<int> support_bins;
    double delta_a = 0.0;
    double delta_b = 0.0;
    double delta_e = 0.0;
    /// Post-period average per group e = -1..max_e.
    std::vector<double> delta_a_e;

    /// DID of cell means against group infinity and the reference period.
    double mu(int l, int e) const;
};

struct TruthFilter {
    std::optional<int> prefecture;
    std::optional<Occupation> occupation;
};

/// Closed-form expected cell means and treatment effects (no simulation).
GroundTruth true_cell_means(const DgpConfig& config, const BinningRules& rules = {},
                            const TruthFilter& filter = {});

/// Probability that a posting of prefecture `p` in month `t` is a matched
/// contract at hourly wage `wage`, averaged over occupations (or for one).
std::map<int, double> employment_probabilities(const DgpConfig& config, const DgpPrefecture& p,
                                               int t,
                                               std::optional<Occupation> occupation = {});

struct DgpOutput {
    std::vector<ContractRecord> records;
    MinWageSchedule schedule;
    std::map<YearMonth, std::int64_t> users;
    GroundTruth truth;
};

/// Draws every prefecture-month on its own substream in parallel and
/// concatenates blocks in (prefecture, month) order.
DgpOutput generate(const DgpConfig& config, int jobs = 1, const BinningRules& rules = {});

/// One block at a time, same output.
DgpOutput generate_serial(const DgpConfig& config, const BinningRules& rules = {});

struct Calibration {
    double missing_frac = 0.0;
    double excess_frac = 0.0;
    /// Delta-b per unit of (m + x) and delta-a per unit of x.
    double below_per_unit = 0.0;
    double excess_per_unit = 0.0;
};

/// Global (m, x) hitting the requested delta-b and delta-a. Throws ConfigError
/// when the targets need m or x outside [0, 1] or m + x > 1.
Calibration calibrate(const DgpConfig& config, double target_delta_b, double target_delta_a,
                      const BinningRules& rules = {});

// Ready-made worlds.

/// 47 prefectures, new MW rising linearly from 893 to 1113, 4.7% hikes,
/// calibrated to delta-b = -0.03 and delta-a = +0.012.
DgpConfig paper_scenario(std::uint64_t seed, double total_contracts = 1.0e6);
/// m = x = 0.
DgpConfig placebo_scenario(std::uint64_t seed, int n_prefectures = 10,
                           double monthly_postings = 300.0);
/// Upper-tail location varies across prefectures and m falls as the tail rises,
/// so effects scale with the bite of the MW.
DgpConfig bite_scenario(std::uint64_t seed, int n_prefectures = 24,
                        double monthly_postings = 2500.0);
/// m evenly spaced across occupations from Restaurant (highest) down to
/// Office Work (zero); x common.
DgpConfig occupation_scenario(std::uint64_t seed, int n_prefectures = 10,
                              double monthly_postings = 3000.0);

std::vector<std::string> scenario_names();
DgpConfig make_scenario(const std::string& name, std::uint64_t seed);

}  // namespace mwb
