#include "mwb/hetero.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <set>

namespace mwb {

const char* to_string(StratumDimension d) {
    switch (d) {
        case StratumDimension::Prefecture: return "prefecture";
        case StratumDimension::Occupation: return "occupation";
        case StratumDimension::TimeSlot: return "timeslot";
    }
    return "?";
}

StratumDimension parse_stratum_dimension(std::string_view text) {
    if (text == "prefecture") return StratumDimension::Prefecture;
    if (text == "occupation") return StratumDimension::Occupation;
    if (text == "timeslot") return StratumDimension::TimeSlot;
    throw ConfigError("unknown stratification dimension '" + std::string(text) + "'");
}

EventStudyDesign design_for(const StudyWindow& window, const BinningRules& rules) {
    EventStudyDesign d;
    d.n_periods = window.length;
    d.event_period = window.event_index;
    d.max_e = rules.max_e;
    d.validate();
    return d;
}

namespace {

int stratum_code(const ContractRecord& r, StratumDimension d) {
    switch (d) {
        case StratumDimension::Prefecture: return r.prefecture_id;
        case StratumDimension::Occupation: return static_cast<int>(r.occupation);
        case StratumDimension::TimeSlot: return static_cast<int>(time_slot_of(r.start_minute));
    }
    return 0;
}

std::string stratum_label(int code, StratumDimension d) {
    switch (d) {
        case StratumDimension::Prefecture: return std::to_string(code);
        case StratumDimension::Occupation:
            return std::string(to_string(static_cast<Occupation>(code)));
        case StratumDimension::TimeSlot: return std::string(to_string(static_cast<TimeSlot>(code)));
    }
    return {};
}

struct Stratum {
    int code = 0;
    std::vector<ContractRecord> records;
};

std::vector<Stratum> split(std::span<const ContractRecord> records, const StudyWindow& window,
                           StratumDimension d) {
    std::map<int, std::vector<ContractRecord>> by_code;
    for (const auto& r : records) {
        if (!window.index_of(r.date.year_month())) continue;
        by_code[stratum_code(r, d)].push_back(r);
    }
    std::vector<Stratum> out;
    for (auto& [code, rs] : by_code) out.push_back({code, std::move(rs)});
    return out;
}

/// Postings per (group row, month); nullopt when every required cell is thick enough.
std::optional<std::string> thin_cell(const Panel& panel, const EventStudyDesign& design,
                                     int threshold) {
    const int rows = design.max_e + 3;
    std::vector<std::int64_t> count(static_cast<std::size_t>(rows * design.n_periods), 0);
    for (const auto& c : panel.cells) {
        if (c.key.group.is_excluded()) continue;
        const int row = c.key.group.is_infinity() ? rows - 1 : c.key.group.value() + 1;
        count[static_cast<std::size_t>(row * design.n_periods + c.month - 1)] += c.vacancies;
    }
    for (int row = 0; row < rows; ++row)
        for (int t = 1; t <= design.n_periods; ++t) {
            const auto n = count[static_cast<std::size_t>(row * design.n_periods + t - 1)];
            if (n < threshold) {
                const std::string e = row == rows - 1 ? "inf" : std::to_string(row - 1);
                return "cell (e=" + e + ", t=" + std::to_string(t) + ") has " +
                       std::to_string(n) + " postings, fewer than " + std::to_string(threshold);
            }
        }
    return std::nullopt;
}

struct Outcome {
    std::optional<StratumResult> result;
    std::optional<SkippedStratum> skipped;
};

Outcome run_one(const Stratum& s, const MinWageSchedule& schedule, const StudyWindow& window,
                StratumDimension dim, const StratifiedOptions& options,
                const EventStudyDesign& design) {
    const auto label = stratum_label(s.code, dim);
    PanelOptions po;
    po.rules = options.rules;
    const Panel panel = build_panel_serial(s.records, schedule, window, po);
    if (auto thin = thin_cell(panel, design, options.min_records_per_cell))
        return {std::nullopt, SkippedStratum{s.code, label, *thin}};
    const auto obs = make_observations(panel, options.observations);
    StratumResult r;
    r.code = s.code;
    r.label = label;
    r.postings = panel.stats.records_used;
    try {
        r.fit = fit_event_study(obs, design, options.fit);
    } catch (const EstimationError& e) {
        return {std::nullopt, SkippedStratum{s.code, label, e.what()}};
    }
    AggregateOptions ao;
    ao.include_below = options.observations.kind == OutcomeKind::EmploymentShare ||
                       options.observations.kind == OutcomeKind::VacancyShare;
    r.decomposition = aggregate(r.fit, ao);
    if (dim == StratumDimension::Prefecture) {
        const auto k = kaitz_index(s.records, schedule, window);
        if (!k.empty()) r.kaitz = k.front().kaitz;
    }
    return {std::move(r), std::nullopt};
}

StratifiedResult collect(StratumDimension dim, std::vector<Outcome>& outcomes) {
    StratifiedResult out;
    out.dimension = dim;
    for (auto& o : outcomes) {
        if (o.result) out.strata.push_back(std::move(*o.result));
        if (o.skipped) out.skipped.push_back(std::move(*o.skipped));
    }
    return out;
}

}  // namespace

StratifiedResult run_stratified(std::span<const ContractRecord> records,
                                const MinWageSchedule& schedule, const StudyWindow& window,
                                StratumDimension dimension, const StratifiedOptions& options) {
    check_event_alignment(schedule, window);
    const auto design = design_for(window, options.rules);
    const auto strata = split(records, window, dimension);
    const int n = static_cast<int>(strata.size());
    std::vector<Outcome> outcomes(strata.size());
    std::exception_ptr failure;
    int failed_at = n;
#pragma omp parallel for num_threads(std::max(1, options.jobs)) schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            outcomes[static_cast<std::size_t>(i)] =
                run_one(strata[static_cast<std::size_t>(i)], schedule, window, dimension, options,
                        design);
        } catch (...) {
#pragma omp critical(mwb_strata_failure)
            if (i < failed_at) {
                failed_at = i;
                failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return collect(dimension, outcomes);
}

StratifiedResult run_stratified_serial(std::span<const ContractRecord> records,
                                       const MinWageSchedule& schedule, const StudyWindow& window,
                                       StratumDimension dimension,
                                       const StratifiedOptions& options) {
    check_event_alignment(schedule, window);
    const auto design = design_for(window, options.rules);
    std::vector<Outcome> outcomes;
    for (const auto& s : split(records, window, dimension))
        outcomes.push_back(run_one(s, schedule, window, dimension, options, design));
    return collect(dimension, outcomes);
}

std::vector<KaitzEntry> kaitz_index(std::span<const ContractRecord> records,
                                    const MinWageSchedule& schedule, const StudyWindow& window,
                                    std::optional<int> month, bool reciprocal) {
    const int t = month.value_or(window.event_index);
    if (t < 1 || t > window.length) throw ConfigError("kaitz month outside the study window");
    const YearMonth ym = window.month_at(t);
    std::map<int, std::vector<int>> wages;
    for (const auto& r : records) {
        if (!schedule.find(r.prefecture_id)) continue;
        auto& w = wages[r.prefecture_id];
        if (r.matched && r.date.year_month() == ym) w.push_back(r.hourly_wage);
    }
    std::vector<KaitzEntry> out;
    for (auto& [p, w] : wages) {
        KaitzEntry k;
        k.prefecture_id = p;
        if (w.empty()) {
            k.reason = "no matched contracts in " + format_year_month(ym);
        } else {
            const auto mid = w.begin() + static_cast<std::ptrdiff_t>((w.size() - 1) / 2);
            std::nth_element(w.begin(), mid, w.end());
            k.median_wage = *mid;
            const double mw = schedule.at(p).new_mw;
            k.kaitz = reciprocal ? *mid / mw : mw / *mid;
        }
        out.push_back(std::move(k));
    }
    return out;
}

std::vector<KaitzPoint> kaitz_points(const StratifiedResult& prefecture_strata,
                                     std::span<const KaitzEntry> kaitz) {
    if (prefecture_strata.dimension != StratumDimension::Prefecture)
        throw ConfigError("kaitz points need prefecture strata");
    std::map<int, double> by_pref;
    for (const auto& k : kaitz)
        if (k.kaitz) by_pref[k.prefecture_id] = *k.kaitz;
    std::vector<KaitzPoint> out;
    for (const auto& s : prefecture_strata.strata) {
        auto it = by_pref.find(s.code);
        if (it == by_pref.end()) continue;
        out.push_back({s.code, it->second, s.decomposition.delta_a.value,
                       s.decomposition.delta_b.value, s.decomposition.delta_e.value});
    }
    return out;
}

std::vector<BinnedScatterRow> binned_scatter(std::span<const KaitzPoint> points, int n_bins) {
    if (n_bins < 1) throw ConfigError("binned scatter needs at least one bin");
    if (static_cast<std::size_t>(n_bins) > points.size())
        throw ConfigError("binned scatter has more bins (" + std::to_string(n_bins) +
                          ") than points (" + std::to_string(points.size()) + ")");
    std::vector<KaitzPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), [](const KaitzPoint& a, const KaitzPoint& b) {
        return a.kaitz != b.kaitz ? a.kaitz < b.kaitz : a.prefecture_id < b.prefecture_id;
    });
    std::set<double> distinct;
    for (const auto& p : sorted) distinct.insert(p.kaitz);
    if (distinct.size() < static_cast<std::size_t>(n_bins))
        throw ConfigError("binned scatter needs at least as many distinct Kaitz values as bins");

    const auto n = sorted.size();
    const auto k = static_cast<std::size_t>(n_bins);
    std::vector<BinnedScatterRow> out;
    for (std::size_t b = 0; b < k; ++b) {
        const std::size_t lo = b * n / k;
        const std::size_t hi = (b + 1) * n / k;
        BinnedScatterRow row;
        row.bin = static_cast<int>(b) + 1;
        row.count = static_cast<std::int64_t>(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
            row.center += sorted[i].kaitz;
            row.delta_a += sorted[i].delta_a;
            row.delta_b += sorted[i].delta_b;
            row.delta_e += sorted[i].delta_e;
        }
        const double c = static_cast<double>(row.count);
        row.center /= c;
        row.delta_a /= c;
        row.delta_b /= c;
        row.delta_e /= c;
        out.push_back(row);
    }
    return out;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw EstimationError("slope needs two or more aligned points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw EstimationError("slope undefined: x has no variation");
    return sxy / sxx;
}

}  // namespace mwb
