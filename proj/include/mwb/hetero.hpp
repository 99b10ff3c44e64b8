#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwb/decomp.hpp"
#include "mwb/event_study.hpp"
#include "mwb/panel.hpp"
#include "mwb/types.hpp"

namespace mwb {

enum class StratumDimension { Prefecture, Occupation, TimeSlot };

const char* to_string(StratumDimension d);
StratumDimension parse_stratum_dimension(std::string_view text);

/// Event-study design implied by a study window and binning rules.
EventStudyDesign design_for(const StudyWindow& window, const BinningRules& rules);

struct StratumResult {
    int code = 0;  // prefecture id, occupation index or slot index
    std::string label;
    std::int64_t postings = 0;
    EventStudyFit fit;
    DecompositionResult decomposition;
    /// Prefecture strata only.
    std::optional<double> kaitz;
};

struct SkippedStratum {
    int code = 0;
    std::string label;
    std::string reason;
};

struct StratifiedOptions {
    BinningRules rules;
    ObservationOptions observations;
    FitOptions fit;
    /// Minimum number of postings in every required (e, t) cell.
    int min_records_per_cell = 30;
    int jobs = 1;
};

struct StratifiedResult {
    StratumDimension dimension = StratumDimension::Prefecture;
    /// Sorted by code.
    std::vector<StratumResult> strata;
    std::vector<SkippedStratum> skipped;
};

/// Splits the records along `dimension`, builds a separate panel for every
/// stratum and fits the main specification on each. Strata run in parallel.
StratifiedResult run_stratified(std::span<const ContractRecord> records,
                                const MinWageSchedule& schedule, const StudyWindow& window,
                                StratumDimension dimension, const StratifiedOptions& options = {});

StratifiedResult run_stratified_serial(std::span<const ContractRecord> records,
                                       const MinWageSchedule& schedule, const StudyWindow& window,
                                       StratumDimension dimension,
                                       const StratifiedOptions& options = {});

struct KaitzEntry {
    int prefecture_id = 0;
    std::optional<int> median_wage;
    std::optional<double> kaitz;
    std::string reason;
};

/// new_mw / median hourly wage of matched contracts in study month `month`
/// (the event month by default). Even counts take the lower-middle element.
/// `reciprocal` reports median / new_mw instead.
std::vector<KaitzEntry> kaitz_index(std::span<const ContractRecord> records,
                                    const MinWageSchedule& schedule, const StudyWindow& window,
                                    std::optional<int> month = std::nullopt,
                                    bool reciprocal = false);

struct KaitzPoint {
    int prefecture_id = 0;
    double kaitz = 0.0;
    double delta_a = 0.0;
    double delta_b = 0.0;
    double delta_e = 0.0;
};

/// Joins prefecture strata with their Kaitz index; prefectures missing either
/// side are left out.
std::vector<KaitzPoint> kaitz_points(const StratifiedResult& prefecture_strata,
                                     std::span<const KaitzEntry> kaitz);

struct BinnedScatterRow {
    int bin = 0;
    double center = 0.0;  // mean Kaitz of the bin
    double delta_a = 0.0;
    double delta_b = 0.0;
    double delta_e = 0.0;
    std::int64_t count = 0;
};

/// Equal-count bins over the Kaitz index with unweighted means.
std::vector<BinnedScatterRow> binned_scatter(std::span<const KaitzPoint> points, int n_bins);

/// Least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace mwb
