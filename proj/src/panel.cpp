#include "mwb/panel.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <tuple>

#include <omp.h>

namespace mwb {

const PrefectureMonthTotals* Panel::find_totals(int prefecture_id, int month) const {
    auto it = std::lower_bound(totals.begin(), totals.end(), std::pair{prefecture_id, month},
                               [](const PrefectureMonthTotals& t, const std::pair<int, int>& k) {
                                   return std::pair{t.prefecture_id, t.month} < k;
                               });
    if (it == totals.end() || it->prefecture_id != prefecture_id || it->month != month)
        return nullptr;
    return &*it;
}

namespace {

struct CellAccum {
    std::int64_t employment = 0;
    std::int64_t vacancies = 0;
    std::int64_t reimbursement_sum = 0;
    std::int64_t reimbursement_positive = 0;
    std::int64_t wage_sum = 0;

    void add(const ContractRecord& r) {
        ++vacancies;
        if (r.matched) {
            ++employment;
            reimbursement_sum += r.transport_reimbursement;
            if (r.transport_reimbursement > 0) ++reimbursement_positive;
            wage_sum += r.hourly_wage;
        }
    }
};

struct TotalsAccum {
    std::int64_t postings = 0;
    std::int64_t matches = 0;
    double earnings_sum = 0.0;

    void add(const ContractRecord& r) {
        ++postings;
        if (r.matched) {
            ++matches;
            earnings_sum += static_cast<double>(r.hourly_wage) * r.posted_hours;
        }
    }
};

// Row numbers count the CSV header as row 1.
std::size_t row_of(std::size_t index) { return index + 2; }

[[noreturn]] void throw_unknown_prefecture(const ContractRecord& r, std::size_t index) {
    throw InvalidRecord("unknown prefecture " + std::to_string(r.prefecture_id) +
                            " (record " + r.record_id + ")",
                        row_of(index), "prefecture_id");
}

// Materializes the zero-filled cell grid for one prefecture from its sparse
// per-(bin, month) accumulators.
void emit_prefecture(int prefecture_id, int new_mw, const BinningRules& rules, int n_months,
                     const std::map<std::pair<int, int>, CellAccum>& sparse,
                     std::vector<PanelCell>& out) {
    if (sparse.empty()) return;
    int lo = sparse.begin()->first.first;
    int hi = lo;
    for (const auto& [key, acc] : sparse) {
        lo = std::min(lo, key.first);
        hi = std::max(hi, key.first);
    }
    for (int bin = lo; bin <= hi; bin += rules.bin_width) {
        const BinKey key{prefecture_id, bin, assign_group(bin, new_mw, rules)};
        for (int t = 1; t <= n_months; ++t) {
            PanelCell cell;
            cell.key = key;
            cell.month = t;
            if (auto it = sparse.find({bin, t}); it != sparse.end()) {
                cell.employment = it->second.employment;
                cell.vacancies = it->second.vacancies;
                cell.reimbursement_sum = it->second.reimbursement_sum;
                cell.reimbursement_positive = it->second.reimbursement_positive;
                cell.wage_sum = it->second.wage_sum;
            }
            out.push_back(cell);
        }
    }
}

}  // namespace

Panel build_panel_serial(std::span<const ContractRecord> records,
                         const MinWageSchedule& schedule, const StudyWindow& window,
                         const PanelOptions& options) {
    options.rules.validate();
    window.validate();
    Panel panel;
    panel.n_months = window.length;

    std::map<int, std::map<std::pair<int, int>, CellAccum>> cells;
    std::map<int, std::map<int, TotalsAccum>> totals;

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto* entry = schedule.find(r.prefecture_id);
        if (!entry) throw_unknown_prefecture(r, i);
        const auto t = window.index_of(r.date.year_month());
        if (!t) {
            ++panel.stats.skipped_out_of_window;
            continue;
        }
        validate(r, row_of(i));
        if (r.hourly_wage > options.wage_ceiling) ++panel.stats.flagged_above_ceiling;
        const int bin = assign_bin(r.hourly_wage, entry->new_mw, options.rules.bin_width);
        cells[r.prefecture_id][{bin, *t}].add(r);
        totals[r.prefecture_id][*t].add(r);
        ++panel.stats.records_used;
    }

    for (const auto& [p, sparse] : cells)
        emit_prefecture(p, schedule.at(p).new_mw, options.rules, window.length, sparse,
                        panel.cells);
    for (const auto& [p, by_month] : totals) {
        for (int t = 1; t <= window.length; ++t) {
            PrefectureMonthTotals pm{p, t, 0, 0, 0.0};
            if (auto it = by_month.find(t); it != by_month.end()) {
                pm.postings = it->second.postings;
                pm.matches = it->second.matches;
                pm.earnings_sum = it->second.earnings_sum;
            }
            panel.totals.push_back(pm);
        }
    }
    return panel;
}

Panel build_panel(std::span<const ContractRecord> records, const MinWageSchedule& schedule,
                  const StudyWindow& window, const PanelOptions& options) {
    options.rules.validate();
    window.validate();
    Panel panel;
    panel.n_months = window.length;
    const int T = window.length;
    const int jobs = std::max(1, options.jobs);

    const auto entries = schedule.entries();
    std::map<int, int> pref_index;
    for (std::size_t k = 0; k < entries.size(); ++k)
        pref_index[entries[k].prefecture_id] = static_cast<int>(k);
    std::vector<int> new_mw(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) new_mw[k] = entries[k].new_mw;

    // Pass 1: partition code per record (>= 0 partition, -1 out of window,
    // -2 unknown prefecture, -3 invalid record).
    const auto n = static_cast<std::int64_t>(records.size());
    std::vector<std::int32_t> code(records.size());
    std::vector<std::int32_t> bins(records.size());
#pragma omp parallel for num_threads(jobs) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        auto it = pref_index.find(r.prefecture_id);
        if (it == pref_index.end()) {
            code[i] = -2;
            continue;
        }
        const auto t = window.index_of(r.date.year_month());
        if (!t) {
            code[i] = -1;
            continue;
        }
        if (r.hourly_wage < 1 || !(r.posted_hours > 0.0) || r.transport_reimbursement < 0 ||
            r.start_minute < 0 || r.start_minute >= 1440) {
            code[i] = -3;
            continue;
        }
        code[i] = it->second * T + (*t - 1);
        bins[i] = assign_bin(r.hourly_wage, new_mw[it->second], options.rules.bin_width);
    }

    // Errors surface in record order, exactly as the serial pass reports them.
    const int n_parts = static_cast<int>(entries.size()) * T;
    std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_parts) + 1, 0);
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        switch (code[i]) {
            case -2: throw_unknown_prefecture(r, static_cast<std::size_t>(i));
            case -3: validate(r, row_of(static_cast<std::size_t>(i))); break;
            case -1: ++panel.stats.skipped_out_of_window; break;
            default:
                ++offsets[code[i] + 1];
                ++panel.stats.records_used;
                if (r.hourly_wage > options.wage_ceiling) ++panel.stats.flagged_above_ceiling;
        }
    }
    for (int k = 0; k < n_parts; ++k) offsets[k + 1] += offsets[k];
    std::vector<std::int64_t> order(static_cast<std::size_t>(offsets.back()));
    {
        auto cursor = offsets;
        for (std::int64_t i = 0; i < n; ++i)
            if (code[i] >= 0) order[cursor[code[i]]++] = i;
    }

    // Pass 2: per-partition reduction, stable within partition.
    std::vector<std::map<int, CellAccum>> part_cells(n_parts);
    std::vector<TotalsAccum> part_totals(n_parts);
#pragma omp parallel for num_threads(jobs) schedule(dynamic)
    for (int k = 0; k < n_parts; ++k) {
        for (auto pos = offsets[k]; pos < offsets[k + 1]; ++pos) {
            const auto i = static_cast<std::size_t>(order[pos]);
            part_cells[k][bins[i]].add(records[i]);
            part_totals[k].add(records[i]);
        }
    }

    // Merge in canonical order.
    for (std::size_t pk = 0; pk < entries.size(); ++pk) {
        std::map<std::pair<int, int>, CellAccum> sparse;
        bool any = false;
        for (int t = 1; t <= T; ++t) {
            const int k = static_cast<int>(pk) * T + (t - 1);
            any = any || offsets[k + 1] > offsets[k];
            for (const auto& [bin, acc] : part_cells[k]) sparse.emplace(std::pair{bin, t}, acc);
        }
        if (!any) continue;
        emit_prefecture(entries[pk].prefecture_id, entries[pk].new_mw, options.rules, T, sparse,
                        panel.cells);
        for (int t = 1; t <= T; ++t) {
            const auto& acc = part_totals[static_cast<int>(pk) * T + (t - 1)];
            panel.totals.push_back(
                {entries[pk].prefecture_id, t, acc.postings, acc.matches, acc.earnings_sum});
        }
    }
    return panel;
}

const char* to_string(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::EmploymentShare: return "employment_share";
        case OutcomeKind::VacancyShare: return "vacancy_share";
        case OutcomeKind::ReimbAmount: return "reimb_amount";
        case OutcomeKind::ReimbProvision: return "reimb_provision";
    }
    return "?";
}

OutcomeKind parse_outcome_kind(std::string_view text) {
    for (auto k : {OutcomeKind::EmploymentShare, OutcomeKind::VacancyShare,
                   OutcomeKind::ReimbAmount, OutcomeKind::ReimbProvision})
        if (text == to_string(k)) return k;
    throw ConfigError("unknown outcome kind '" + std::string(text) + "'");
}

const char* to_string(Normalizer n) {
    switch (n) {
        case Normalizer::Postings: return "postings";
        case Normalizer::Matches: return "matches";
        case Normalizer::None: return "none";
    }
    return "?";
}

Normalizer parse_normalizer(std::string_view text) {
    for (auto n : {Normalizer::Postings, Normalizer::Matches, Normalizer::None})
        if (text == to_string(n)) return n;
    throw ConfigError("unknown normalizer '" + std::string(text) + "'");
}

namespace {

double numerator(const PanelCell& c, OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::EmploymentShare: return static_cast<double>(c.employment);
        case OutcomeKind::VacancyShare: return static_cast<double>(c.vacancies);
        case OutcomeKind::ReimbAmount: return static_cast<double>(c.reimbursement_sum);
        case OutcomeKind::ReimbProvision: return static_cast<double>(c.reimbursement_positive);
    }
    return 0.0;
}

bool is_amenity(OutcomeKind kind) {
    return kind == OutcomeKind::ReimbAmount || kind == OutcomeKind::ReimbProvision;
}

// Returns the denominator, or 0 when the observation must be dropped.
double denominator(const PanelCell& c, const PrefectureMonthTotals* totals, Normalizer n) {
    switch (n) {
        case Normalizer::Postings:
            return totals ? static_cast<double>(totals->postings) : 0.0;
        case Normalizer::Matches: return static_cast<double>(c.employment);
        case Normalizer::None: return 1.0;
    }
    return 0.0;
}

}  // namespace

OutcomeSeries outcome_series(const Panel& panel, OutcomeKind kind, Normalizer normalizer) {
    if (normalizer == Normalizer::Matches && !is_amenity(kind))
        throw ConfigError("per-match normalization applies to amenity outcomes only");
    OutcomeSeries out;
    out.rows.reserve(panel.cells.size());
    for (const auto& c : panel.cells) {
        const double denom =
            denominator(c, panel.find_totals(c.key.prefecture_id, c.month), normalizer);
        if (denom <= 0.0) {
            ++out.dropped_zero_denominator;
            continue;
        }
        out.rows.push_back({c.key, c.month, numerator(c, kind) / denom});
    }
    return out;
}

std::vector<Observation> make_observations(const Panel& panel, const ObservationOptions& options,
                                           std::int64_t* dropped) {
    if (options.normalizer == Normalizer::Matches && !is_amenity(options.kind))
        throw ConfigError("per-match normalization applies to amenity outcomes only");
    std::vector<Observation> obs;
    obs.reserve(panel.cells.size());
    std::int64_t n_dropped = 0;
    std::int64_t cluster = -1;
    std::pair<int, int> last_unit{0, 0};
    for (const auto& c : panel.cells) {
        if (c.key.group.is_excluded()) continue;
        const std::pair unit{c.key.prefecture_id, c.key.bin_lower};
        if (cluster < 0 || unit != last_unit) {
            ++cluster;
            last_unit = unit;
        }
        const auto* totals = panel.find_totals(c.key.prefecture_id, c.month);
        const double denom = denominator(c, totals, options.normalizer);
        if (denom <= 0.0) {
            ++n_dropped;
            continue;
        }
        Observation o;
        o.cluster = cluster;
        o.prefecture_id = c.key.prefecture_id;
        o.group = c.key.group;
        o.period = c.month;
        o.y = numerator(c, options.kind) / denom;
        o.weight = options.employment_weighted ? static_cast<double>(c.employment) : 1.0;
        const double n_postings = totals ? static_cast<double>(totals->postings) : 0.0;
        o.postings = n_postings;
        o.wage_bill = n_postings > 0 ? static_cast<double>(c.wage_sum) / n_postings : 0.0;
        obs.push_back(o);
    }
    if (dropped) *dropped = n_dropped;
    return obs;
}

}  // namespace mwb
