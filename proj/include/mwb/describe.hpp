#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mwb/panel.hpp"
#include "mwb/types.hpp"

namespace mwb {

enum class DistributionAxis { Wage, Hours, Reimbursement };

const char* to_string(DistributionAxis axis);

/// Fixed-width absolute bins for the descriptive tables (independent of the
/// MW-anchored estimation bins). Defaults: 10 JPY, 0.5 hours, 100 JPY.
struct AxisBinning {
    double wage_width = 10.0;
    double hours_width = 0.5;
    double reimbursement_width = 100.0;

    double width(DistributionAxis axis) const;
    double lower_edge(DistributionAxis axis, const ContractRecord& r) const;
};

struct DistributionRow {
    int month = 0;
    double bin_lower = 0.0;
    std::int64_t employment = 0;
};

/// Matched-contract counts per (month, bin). Every bin seen in any month is
/// emitted for every month, so columns are directly comparable.
std::vector<DistributionRow> distribution_table(std::span<const ContractRecord> records,
                                                const StudyWindow& window,
                                                DistributionAxis axis,
                                                std::optional<int> prefecture = std::nullopt,
                                                const AxisBinning& binning = {});

struct ChangeCell {
    double wage_bin = 0.0;
    double other_bin = 0.0;
    std::int64_t count_a = 0;
    std::int64_t count_b = 0;
    std::int64_t change = 0;  // count_b - count_a
};

/// Wage x `other` grid of matched-contract count changes from month_a to month_b.
std::vector<ChangeCell> change_grid(std::span<const ContractRecord> records,
                                    const StudyWindow& window, int month_a, int month_b,
                                    DistributionAxis other,
                                    std::optional<int> prefecture = std::nullopt,
                                    const AxisBinning& binning = {});

/// Platform-wide tightness and finding rates per study month.
std::vector<MacroSeries> macro_metrics(std::span<const PrefectureMonthTotals> totals,
                                       const std::map<YearMonth, std::int64_t>& users_by_month,
                                       const StudyWindow& window);

struct EarningsRow {
    int prefecture_id = 0;
    int week = 0;  // 1-based, counted from the first day of the window
    double earnings = 0.0;
};

/// Sum of hourly wage x posted hours over matched contracts per prefecture-week.
std::vector<EarningsRow> prefecture_week_earnings(std::span<const ContractRecord> records,
                                                  const StudyWindow& window);

}  // namespace mwb
