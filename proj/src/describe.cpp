#include "mwb/describe.hpp"

#include <cmath>
#include <set>
#include <string>

namespace mwb {

const char* to_string(DistributionAxis axis) {
    switch (axis) {
        case DistributionAxis::Wage: return "wage";
        case DistributionAxis::Hours: return "hours";
        case DistributionAxis::Reimbursement: return "reimbursement";
    }
    return "?";
}

double AxisBinning::width(DistributionAxis axis) const {
    switch (axis) {
        case DistributionAxis::Wage: return wage_width;
        case DistributionAxis::Hours: return hours_width;
        case DistributionAxis::Reimbursement: return reimbursement_width;
    }
    return 1.0;
}

double AxisBinning::lower_edge(DistributionAxis axis, const ContractRecord& r) const {
    double v = 0.0;
    switch (axis) {
        case DistributionAxis::Wage: v = r.hourly_wage; break;
        case DistributionAxis::Hours: v = r.posted_hours; break;
        case DistributionAxis::Reimbursement: v = r.transport_reimbursement; break;
    }
    const double w = width(axis);
    return std::floor(v / w) * w;
}

namespace {

bool selected(const ContractRecord& r, std::optional<int> prefecture) {
    return r.matched && (!prefecture || r.prefecture_id == *prefecture);
}

}  // namespace

std::vector<DistributionRow> distribution_table(std::span<const ContractRecord> records,
                                                const StudyWindow& window,
                                                DistributionAxis axis,
                                                std::optional<int> prefecture,
                                                const AxisBinning& binning) {
    std::map<std::pair<double, int>, std::int64_t> counts;
    std::set<double> bins;
    for (const auto& r : records) {
        if (!selected(r, prefecture)) continue;
        const auto t = window.index_of(r.date.year_month());
        if (!t) continue;
        const double b = binning.lower_edge(axis, r);
        bins.insert(b);
        ++counts[{b, *t}];
    }
    std::vector<DistributionRow> out;
    out.reserve(bins.size() * static_cast<std::size_t>(window.length));
    for (int t = 1; t <= window.length; ++t)
        for (double b : bins) {
            auto it = counts.find({b, t});
            out.push_back({t, b, it == counts.end() ? 0 : it->second});
        }
    return out;
}

std::vector<ChangeCell> change_grid(std::span<const ContractRecord> records,
                                    const StudyWindow& window, int month_a, int month_b,
                                    DistributionAxis other, std::optional<int> prefecture,
                                    const AxisBinning& binning) {
    if (month_a < 1 || month_a > window.length || month_b < 1 || month_b > window.length)
        throw ConfigError("change-grid months must lie inside the study window");
    std::map<std::pair<double, double>, ChangeCell> grid;
    for (const auto& r : records) {
        if (!selected(r, prefecture)) continue;
        const auto t = window.index_of(r.date.year_month());
        if (!t || (*t != month_a && *t != month_b)) continue;
        const double wb = binning.lower_edge(DistributionAxis::Wage, r);
        const double ob = binning.lower_edge(other, r);
        auto& cell = grid[{wb, ob}];
        cell.wage_bin = wb;
        cell.other_bin = ob;
        // With month_a == month_b both counters see the record; change stays 0.
        if (*t == month_a) ++cell.count_a;
        if (*t == month_b) ++cell.count_b;
    }
    std::vector<ChangeCell> out;
    out.reserve(grid.size());
    for (auto& [key, cell] : grid) {
        cell.change = cell.count_b - cell.count_a;
        out.push_back(cell);
    }
    return out;
}

std::vector<MacroSeries> macro_metrics(std::span<const PrefectureMonthTotals> totals,
                                       const std::map<YearMonth, std::int64_t>& users_by_month,
                                       const StudyWindow& window) {
    std::vector<MacroSeries> out(static_cast<std::size_t>(window.length));
    for (int t = 1; t <= window.length; ++t) {
        auto& m = out[static_cast<std::size_t>(t - 1)];
        m.month = window.month_at(t);
        auto it = users_by_month.find(m.month);
        if (it == users_by_month.end())
            throw ConfigError("users series has no entry for " + format_year_month(m.month));
        m.users = it->second;
    }
    for (const auto& pm : totals) {
        if (pm.month < 1 || pm.month > window.length) continue;
        auto& m = out[static_cast<std::size_t>(pm.month - 1)];
        m.vacancies += pm.postings;
        m.hires += pm.matches;
    }
    for (auto& m : out) {
        if (m.users > 0) {
            m.tightness = static_cast<double>(m.vacancies) / static_cast<double>(m.users);
            m.job_finding = static_cast<double>(m.hires) / static_cast<double>(m.users);
        }
        if (m.vacancies > 0)
            m.worker_finding = static_cast<double>(m.hires) / static_cast<double>(m.vacancies);
    }
    return out;
}

std::vector<EarningsRow> prefecture_week_earnings(std::span<const ContractRecord> records,
                                                  const StudyWindow& window) {
    const auto origin = days_from_civil(window.first_day());
    std::map<std::pair<int, int>, double> sums;
    for (const auto& r : records) {
        if (!r.matched || !window.index_of(r.date.year_month())) continue;
        const int week = static_cast<int>((days_from_civil(r.date) - origin) / 7) + 1;
        sums[{r.prefecture_id, week}] += static_cast<double>(r.hourly_wage) * r.posted_hours;
    }
    std::vector<EarningsRow> out;
    out.reserve(sums.size());
    for (const auto& [key, v] : sums) out.push_back({key.first, key.second, v});
    return out;
}

}  // namespace mwb
