#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mwb/binning.hpp"
#include "mwb/observation.hpp"
#include "mwb/types.hpp"

namespace mwb {

struct IngestStats {
    std::int64_t records_used = 0;
    std::int64_t skipped_out_of_window = 0;
    /// Wages above the sanity ceiling; flagged, never dropped.
    std::int64_t flagged_above_ceiling = 0;
};

/// Zero-filled (prefecture, wage bin, month) panel plus prefecture-month totals.
struct Panel {
    /// Sorted by (prefecture, bin_lower, month).
    std::vector<PanelCell> cells;
    /// Sorted by (prefecture, month); every window month for every prefecture
    /// that has at least one in-window record.
    std::vector<PrefectureMonthTotals> totals;
    IngestStats stats;
    int n_months = 0;

    const PrefectureMonthTotals* find_totals(int prefecture_id, int month) const;
};

struct PanelOptions {
    BinningRules rules;
    int wage_ceiling = 5000;
    int jobs = 1;
};

/// Aggregates contracts into the panel. Records are partitioned by
/// (prefecture, month) and reduced in parallel; output is identical to
/// build_panel_serial for every `jobs` value.
Panel build_panel(std::span<const ContractRecord> records, const MinWageSchedule& schedule,
                  const StudyWindow& window, const PanelOptions& options = {});

/// Single-pass reference aggregation.
Panel build_panel_serial(std::span<const ContractRecord> records,
                         const MinWageSchedule& schedule, const StudyWindow& window,
                         const PanelOptions& options = {});

enum class OutcomeKind { EmploymentShare, VacancyShare, ReimbAmount, ReimbProvision };

/// Denominator of the outcome. `Postings` divides by N_{p,t}; `Matches`
/// divides amenity outcomes by the bin's own employment (per-match
/// averages); `None` leaves the raw count.
enum class Normalizer { Postings, Matches, None };

const char* to_string(OutcomeKind kind);
OutcomeKind parse_outcome_kind(std::string_view text);
const char* to_string(Normalizer n);
Normalizer parse_normalizer(std::string_view text);

struct OutcomeRow {
    BinKey key;
    int month = 0;
    double y = 0.0;
};

struct OutcomeSeries {
    std::vector<OutcomeRow> rows;
    std::int64_t dropped_zero_denominator = 0;
};

OutcomeSeries outcome_series(const Panel& panel, OutcomeKind kind,
                             Normalizer normalizer = Normalizer::Postings);

struct ObservationOptions {
    OutcomeKind kind = OutcomeKind::EmploymentShare;
    Normalizer normalizer = Normalizer::Postings;
    /// Weight each observation by its bin employment instead of 1.
    bool employment_weighted = false;
};

/// Estimation rows: excluded bins dropped, zero denominators dropped, one
/// cluster id per (prefecture, bin).
std::vector<Observation> make_observations(const Panel& panel,
                                           const ObservationOptions& options = {},
                                           std::int64_t* dropped = nullptr);

}  // namespace mwb
