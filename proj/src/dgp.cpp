#include "mwb/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include <boost/math/special_functions/erf.hpp>

#include "mwb/rng.hpp"

namespace mwb {

namespace {

constexpr int kRelocationWidth = 100;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("dgp: " + what);
}

double upper_normal(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
double lower_normal(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Probability mass of a standard normal between za < zb, computed on the
/// side of the distribution that keeps precision.
double normal_mass(double za, double zb) {
    if (za > 0.0) return upper_normal(za) - upper_normal(zb);
    return lower_normal(zb) - lower_normal(za);
}

/// Per-prefecture pieces of the posted-wage mixture.
struct WageModel {
    int old_mw = 0;
    int new_mw = 0;
    int cap = 0;
    double below = 0.0;
    double at_mw = 0.0;
    double tail = 0.0;
    double loc = 0.0;
    double sdlog = 1.0;
    double z_lo = 0.0;
    double z_hi = 0.0;
    double tail_norm = 1.0;

    WageModel(const DgpConfig& c, const DgpPrefecture& p)
        : old_mw(p.old_mw), new_mw(p.new_mw), cap(c.wage.wage_cap), below(c.wage.below_mw_mass),
          at_mw(c.wage.mass_at_mw), tail(1.0 - c.wage.below_mw_mass - c.wage.mass_at_mw),
          loc(std::log(p.new_mw + c.tail_shift_for(p))), sdlog(c.wage.tail_sdlog) {
        z_lo = z(new_mw);
        z_hi = z(cap + 1.0);
        tail_norm = normal_mass(z_lo, z_hi);
    }

    double z(double w) const { return (std::log(w) - loc) / sdlog; }

    /// P(floor(W) = w) for the truncated log-normal tail.
    double tail_pmf(int w) const {
        if (w < new_mw || w > cap) return 0.0;
        return normal_mass(z(w), z(w + 1.0)) / tail_norm;
    }

    int draw_tail(double v) const {
        // Inverse CDF on the truncated normal scale.
        const double lo = lower_normal(z_lo);
        const double hi = lower_normal(z_hi);
        const double p = std::clamp(lo + v * (hi - lo), 1e-300, 1.0 - 1e-16);
        const double zz = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
        const double w = std::floor(std::exp(loc + sdlog * zz));
        return static_cast<int>(std::clamp(w, static_cast<double>(new_mw), static_cast<double>(cap)));
    }
};

/// Expected matched-contract probability for wages old_mw..cap (index 0 is old_mw).
std::vector<double> employment_profile(const DgpConfig& c, const DgpPrefecture& p,
                                       const WageModel& wm, bool post, double m) {
    const int n = wm.cap - wm.old_mw + 1;
    std::vector<double> prob(static_cast<std::size_t>(n), 0.0);
    const double x = c.excess_frac_for(p);
    const int k = wm.new_mw - wm.old_mw;
    const double keep = post ? 1.0 - m - x : 1.0;
    for (int w = wm.old_mw; w < wm.new_mw; ++w)
        prob[static_cast<std::size_t>(w - wm.old_mw)] = c.match_prob * keep * wm.below / k;
    for (int w = wm.new_mw; w <= wm.cap; ++w) {
        double q = wm.tail * wm.tail_pmf(w);
        if (w == wm.new_mw) q += wm.at_mw;
        if (post && w < wm.new_mw + kRelocationWidth) {
            q += x * wm.below * (1.0 - c.bunch_share) / kRelocationWidth;
            if (w == wm.new_mw) q += x * wm.below * c.bunch_share;
        }
        prob[static_cast<std::size_t>(w - wm.old_mw)] = c.match_prob * q;
    }
    return prob;
}

double effective_missing_frac(const DgpConfig& c, const DgpPrefecture& p,
                              std::optional<Occupation> occupation) {
    if (occupation) return c.missing_frac_for(p, *occupation);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < kOccupationCount; ++i) {
        num += c.occupation_weights[i] * c.missing_frac_for(p, kAllOccupations[i]);
        den += c.occupation_weights[i];
    }
    return num / den;
}

int group_row(ExposureGroup g, int max_e) {
    return g.is_infinity() ? max_e + 2 : g.value() + 1;
}

template <class Weights>
std::size_t draw_index(const Weights& weights, double u) {
    const double total = std::accumulate(std::begin(weights), std::end(weights), 0.0);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < std::size(weights); ++i) {
        if (weights[i] <= 0.0) continue;
        last = i;
        acc += weights[i] / total;
        if (u < acc) return i;
    }
    return last;
}

std::vector<ContractRecord> generate_block(const DgpConfig& c, const DgpPrefecture& p, int t) {
    std::mt19937_64 rng(substream_seed(c.seed, {static_cast<std::uint64_t>(p.id),
                                                static_cast<std::uint64_t>(t)}));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::poisson_distribution<std::int64_t> count(p.monthly_postings);
    const std::int64_t n = p.monthly_postings > 0.0 ? count(rng) : 0;

    const WageModel wm(c, p);
    const YearMonth ym = c.window.month_at(t);
    const int dim = days_in_month(ym);
    const bool post = t >= c.window.event_index;
    const double x = c.excess_frac_for(p);
    std::vector<double> hour_weights;
    for (const auto& h : c.hours_grid) hour_weights.push_back(h.second);
    const int grid_points = c.reimbursement.grid_max / c.reimbursement.grid_step + 1;

    std::vector<ContractRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    char id[48];
    for (std::int64_t i = 0; i < n; ++i) {
        ContractRecord r;
        std::snprintf(id, sizeof id, "%02d-%04d%02d-%06lld", p.id, ym.year, ym.month,
                      static_cast<long long>(i));
        r.record_id = id;
        r.prefecture_id = p.id;
        r.occupation = kAllOccupations[draw_index(c.occupation_weights, unif(rng))];

        const double u = unif(rng);
        if (u < wm.below)
            r.hourly_wage = wm.old_mw + std::min(static_cast<int>(unif(rng) * (wm.new_mw - wm.old_mw)),
                                                 wm.new_mw - wm.old_mw - 1);
        else if (u < wm.below + wm.at_mw)
            r.hourly_wage = wm.new_mw;
        else
            r.hourly_wage = wm.draw_tail(unif(rng));

        bool destroyed = false;
        if (post && r.hourly_wage < wm.new_mw) {
            const double m = c.missing_frac_for(p, r.occupation);
            const double fate = unif(rng);
            if (fate < m) {
                destroyed = true;
            } else if (fate < m + x) {
                if (unif(rng) < c.bunch_share)
                    r.hourly_wage = wm.new_mw;
                else
                    r.hourly_wage = wm.new_mw + std::min(static_cast<int>(unif(rng) * kRelocationWidth),
                                                         kRelocationWidth - 1);
            }
        }
        r.matched = unif(rng) < c.match_prob && !destroyed;

        const int day = 1 + std::min(static_cast<int>(unif(rng) * dim), dim - 1);
        r.date = {ym.year, ym.month, day};
        const auto slot = kAllTimeSlots[draw_index(c.slot_weights, unif(rng))];
        r.start_minute = slot_start_minute(slot) + std::min(static_cast<int>(unif(rng) * 360), 359);
        r.posted_hours = c.hours_grid[draw_index(hour_weights, unif(rng))].first;

        const double ru = unif(rng);
        if (ru < c.reimbursement.zero_prob)
            r.transport_reimbursement = 0;
        else if (ru < c.reimbursement.zero_prob + c.reimbursement.point_mass_500_prob)
            r.transport_reimbursement = 500;
        else
            r.transport_reimbursement =
                c.reimbursement.grid_step *
                std::min(static_cast<int>(unif(rng) * grid_points), grid_points - 1);
        out.push_back(std::move(r));
    }
    return out;
}

DgpOutput assemble(const DgpConfig& config, std::vector<std::vector<ContractRecord>>& blocks,
                   const BinningRules& rules) {
    DgpOutput out;
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.size();
    out.records.reserve(total);
    for (auto& b : blocks) {
        std::move(b.begin(), b.end(), std::back_inserter(out.records));
        b.clear();
    }
    std::map<YearMonth, std::int64_t> postings;
    for (int t = 1; t <= config.window.length; ++t) postings[config.window.month_at(t)] = 0;
    for (const auto& r : out.records) ++postings[r.date.year_month()];
    for (const auto& [ym, n] : postings)
        out.users[ym] = std::llround(config.users_per_posting * static_cast<double>(n));
    out.schedule = config.schedule();
    out.truth = true_cell_means(config, rules);
    return out;
}

std::vector<const DgpPrefecture*> sorted_prefectures(const DgpConfig& c) {
    std::vector<const DgpPrefecture*> ps;
    for (const auto& p : c.prefectures) ps.push_back(&p);
    std::sort(ps.begin(), ps.end(), [](auto* a, auto* b) { return a->id < b->id; });
    return ps;
}

}  // namespace

void DgpConfig::validate() const {
    require(!prefectures.empty(), "empty prefecture list");
    window.validate();
    std::set<int> ids;
    for (const auto& p : prefectures) {
        const auto who = "prefecture " + std::to_string(p.id);
        require(ids.insert(p.id).second, "duplicate " + who);
        require(p.id >= 0 && p.id < 100, who + ": id must be in 0..99");
        require(p.old_mw > 0 && p.new_mw > p.old_mw, who + ": needs new_mw > old_mw > 0");
        require(p.new_mw <= wage.wage_cap, who + ": new_mw above wage_cap");
        require(p.monthly_postings >= 0.0 && p.monthly_postings < 1e6,
                who + ": monthly_postings must be in [0, 1e6)");
        require(!p.tail_shift || *p.tail_shift > -p.new_mw, who + ": tail_shift too small");
        require(!p.missing_frac || is_probability(*p.missing_frac), who + ": missing_frac");
        require(!p.excess_frac || is_probability(*p.excess_frac), who + ": excess_frac");
        for (auto o : kAllOccupations)
            require(missing_frac_for(p, o) + excess_frac_for(p) <= 1.0 + 1e-12,
                    who + ": missing_frac + excess_frac exceeds 1");
    }
    require(is_probability(wage.below_mw_mass) && is_probability(wage.mass_at_mw) &&
                wage.below_mw_mass + wage.mass_at_mw <= 1.0,
            "wage mixture masses must be probabilities summing to at most 1");
    require(wage.tail_sdlog > 0.0, "tail_sdlog must be positive");
    require(is_probability(missing_frac) && is_probability(excess_frac) &&
                missing_frac + excess_frac <= 1.0 + 1e-12,
            "missing_frac and excess_frac must be probabilities with m + x <= 1");
    for (const auto& m : occupation_missing_frac)
        require(!m || is_probability(*m), "occupation missing_frac must be a probability");
    require(is_probability(bunch_share), "bunch_share must be a probability");
    require(is_probability(match_prob), "match_prob must be a probability");
    require(is_probability(reimbursement.zero_prob) &&
                is_probability(reimbursement.point_mass_500_prob) &&
                reimbursement.zero_prob + reimbursement.point_mass_500_prob <= 1.0,
            "reimbursement probabilities");
    require(reimbursement.grid_step > 0 && reimbursement.grid_max >= 0, "reimbursement grid");
    require(!hours_grid.empty(), "hours grid is empty");
    double hw = 0.0;
    for (const auto& [h, w] : hours_grid) {
        require(h > 0.0 && w >= 0.0, "hours grid needs positive hours and weights >= 0");
        hw += w;
    }
    require(hw > 0.0, "hours weights sum to zero");
    double ow = 0.0, sw = 0.0;
    for (double w : occupation_weights) {
        require(w >= 0.0, "occupation weights must be >= 0");
        ow += w;
    }
    for (double w : slot_weights) {
        require(w >= 0.0, "slot weights must be >= 0");
        sw += w;
    }
    require(ow > 0.0 && sw > 0.0, "occupation and slot weights need a positive sum");
    require(users_per_posting >= 0.0, "users_per_posting must be >= 0");
}

MinWageSchedule DgpConfig::schedule() const {
    MinWageSchedule s;
    const YearMonth event = window.month_at(window.event_index);
    for (const auto* p : sorted_prefectures(*this)) s.add({p->id, p->old_mw, p->new_mw, event});
    return s;
}

double DgpConfig::missing_frac_for(const DgpPrefecture& p, Occupation o) const {
    if (p.missing_frac) return *p.missing_frac;
    if (const auto& m = occupation_missing_frac[static_cast<std::size_t>(o)]) return *m;
    return missing_frac;
}

double DgpConfig::excess_frac_for(const DgpPrefecture& p) const {
    return p.excess_frac.value_or(excess_frac);
}

double DgpConfig::tail_shift_for(const DgpPrefecture& p) const {
    return p.tail_shift.value_or(wage.tail_shift);
}

double GroundTruth::mu(int l, int e) const {
    const int t = design.event_period + l;
    const int ref = design.reference_period();
    const int inf = design.max_e + 2;
    const int row = e + 1;
    return (cell_means(row, t - 1) - cell_means(row, ref - 1)) -
           (cell_means(inf, t - 1) - cell_means(inf, ref - 1));
}

std::map<int, double> employment_probabilities(const DgpConfig& config, const DgpPrefecture& p,
                                               int t, std::optional<Occupation> occupation) {
    const WageModel wm(config, p);
    const auto prof = employment_profile(config, p, wm, t >= config.window.event_index,
                                         effective_missing_frac(config, p, occupation));
    std::map<int, double> out;
    for (std::size_t i = 0; i < prof.size(); ++i)
        if (prof[i] > 0.0) out[wm.old_mw + static_cast<int>(i)] = prof[i];
    return out;
}

GroundTruth true_cell_means(const DgpConfig& config, const BinningRules& rules,
                            const TruthFilter& filter) {
    config.validate();
    rules.validate();
    GroundTruth g;
    g.design.n_periods = config.window.length;
    g.design.event_period = config.window.event_index;
    g.design.max_e = rules.max_e;
    g.design.validate();
    const int T = config.window.length;
    const int rows = rules.max_e + 3;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(rows, T);
    g.support_bins.assign(static_cast<std::size_t>(rows), 0);

    bool any = false;
    for (const auto& p : config.prefectures) {
        if (filter.prefecture && p.id != *filter.prefecture) continue;
        any = true;
        const WageModel wm(config, p);
        const double m = effective_missing_frac(config, p, filter.occupation);
        const auto pre = employment_profile(config, p, wm, false, m);
        const auto post = employment_profile(config, p, wm, true, m);
        // bin lower -> (row, pre mass, post mass)
        std::map<int, std::array<double, 2>> bins;
        for (std::size_t i = 0; i < pre.size(); ++i) {
            if (pre[i] <= 0.0 && post[i] <= 0.0) continue;
            const int w = wm.old_mw + static_cast<int>(i);
            auto& b = bins[assign_bin(w, p.new_mw, rules.bin_width)];
            b[0] += pre[i];
            b[1] += post[i];
        }
        for (const auto& [lower, mass] : bins) {
            const auto grp = assign_group(lower, p.new_mw, rules);
            if (grp.is_excluded()) continue;
            const int row = group_row(grp, rules.max_e);
            ++g.support_bins[static_cast<std::size_t>(row)];
            for (int t = 1; t <= T; ++t)
                sums(row, t - 1) += mass[t >= config.window.event_index ? 1 : 0];
        }
    }
    if (!any) throw ConfigError("dgp: filter selects no prefecture");

    g.cell_means = Eigen::MatrixXd::Zero(rows, T);
    for (int r = 0; r < rows; ++r)
        if (g.support_bins[static_cast<std::size_t>(r)] > 0)
            g.cell_means.row(r) = sums.row(r) / g.support_bins[static_cast<std::size_t>(r)];

    const int L = g.design.last_rel() + 1;
    g.delta_a_e.assign(static_cast<std::size_t>(rules.max_e + 2), 0.0);
    for (int l = 0; l < L; ++l)
        for (int e = -1; e <= rules.max_e; ++e)
            g.delta_a_e[static_cast<std::size_t>(e + 1)] += g.mu(l, e) / L;
    g.delta_b = g.delta_a_e[0];
    for (int e = 0; e <= rules.max_e; ++e) g.delta_a += g.delta_a_e[static_cast<std::size_t>(e + 1)];
    g.delta_e = g.delta_a + g.delta_b;
    return g;
}

DgpOutput generate(const DgpConfig& config, int jobs, const BinningRules& rules) {
    config.validate();
    const auto ps = sorted_prefectures(config);
    const int T = config.window.length;
    const int n_blocks = static_cast<int>(ps.size()) * T;
    std::vector<std::vector<ContractRecord>> blocks(static_cast<std::size_t>(n_blocks));
#pragma omp parallel for num_threads(std::max(1, jobs)) schedule(dynamic)
    for (int b = 0; b < n_blocks; ++b)
        blocks[static_cast<std::size_t>(b)] =
            generate_block(config, *ps[static_cast<std::size_t>(b / T)], b % T + 1);
    return assemble(config, blocks, rules);
}

DgpOutput generate_serial(const DgpConfig& config, const BinningRules& rules) {
    config.validate();
    std::vector<std::vector<ContractRecord>> blocks;
    for (const auto* p : sorted_prefectures(config))
        for (int t = 1; t <= config.window.length; ++t)
            blocks.push_back(generate_block(config, *p, t));
    return assemble(config, blocks, rules);
}

Calibration calibrate(const DgpConfig& config, double target_delta_b, double target_delta_a,
                      const BinningRules& rules) {
    for (const auto& p : config.prefectures)
        require(!p.missing_frac && !p.excess_frac,
                "calibration needs configs without prefecture treatment overrides");
    for (const auto& m : config.occupation_missing_frac)
        require(!m, "calibration needs configs without occupation overrides");
    DgpConfig probe = config;
    probe.missing_frac = 1.0;
    probe.excess_frac = 0.0;
    Calibration c;
    c.below_per_unit = -true_cell_means(probe, rules).delta_b;
    probe.missing_frac = 0.0;
    probe.excess_frac = 1.0;
    c.excess_per_unit = true_cell_means(probe, rules).delta_a;
    require(c.below_per_unit > 0.0 && c.excess_per_unit > 0.0,
            "calibration: the mixture puts no mass below the new MW");
    c.excess_frac = target_delta_a / c.excess_per_unit;
    c.missing_frac = -target_delta_b / c.below_per_unit - c.excess_frac;
    require(is_probability(c.excess_frac) && is_probability(c.missing_frac) &&
                c.missing_frac + c.excess_frac <= 1.0,
            "calibration targets need m = " + std::to_string(c.missing_frac) +
                ", x = " + std::to_string(c.excess_frac) + " outside the admissible range");
    return c;
}

namespace {

std::vector<DgpPrefecture> linear_prefectures(int n, int mw_lo, int mw_hi, double hike,
                                              double monthly_postings) {
    std::vector<DgpPrefecture> ps;
    for (int i = 0; i < n; ++i) {
        DgpPrefecture p;
        p.id = i + 1;
        const double frac = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
        p.new_mw = static_cast<int>(std::lround(mw_lo + (mw_hi - mw_lo) * frac));
        p.old_mw = static_cast<int>(std::lround(p.new_mw / (1.0 + hike)));
        p.monthly_postings = monthly_postings;
        ps.push_back(p);
    }
    return ps;
}

}  // namespace

DgpConfig paper_scenario(std::uint64_t seed, double total_contracts) {
    DgpConfig c;
    c.seed = seed;
    c.wage.below_mw_mass = 0.4;
    c.prefectures = linear_prefectures(47, 893, 1113, 0.047,
                                       total_contracts / (47.0 * c.window.length));
    const auto cal = calibrate(c, -0.03, 0.012);
    c.missing_frac = cal.missing_frac;
    c.excess_frac = cal.excess_frac;
    return c;
}

DgpConfig placebo_scenario(std::uint64_t seed, int n_prefectures, double monthly_postings) {
    DgpConfig c;
    c.seed = seed;
    c.prefectures = linear_prefectures(n_prefectures, 893, 1113, 0.047, monthly_postings);
    return c;
}

DgpConfig bite_scenario(std::uint64_t seed, int n_prefectures, double monthly_postings) {
    DgpConfig c;
    c.seed = seed;
    c.wage.below_mw_mass = 0.4;
    c.prefectures = linear_prefectures(n_prefectures, 893, 1113, 0.047, monthly_postings);
    for (std::size_t i = 0; i < c.prefectures.size(); ++i) {
        const double frac = n_prefectures > 1 ? static_cast<double>(i) / (n_prefectures - 1) : 0.0;
        // Interleave so the tail location is not collinear with the MW level.
        const double shift_frac = (i % 2 == 0) ? frac : 1.0 - frac;
        auto& p = c.prefectures[i];
        p.tail_shift = 60.0 + 340.0 * shift_frac;
        p.missing_frac = 0.05 + 0.6 * (1.0 - shift_frac);
        p.excess_frac = 0.0;
    }
    return c;
}

DgpConfig occupation_scenario(std::uint64_t seed, int n_prefectures, double monthly_postings) {
    DgpConfig c;
    c.seed = seed;
    c.wage.below_mw_mass = 0.4;
    c.prefectures = linear_prefectures(n_prefectures, 893, 1113, 0.047, monthly_postings);
    c.occupation_weights.fill(1.0);
    c.excess_frac = 0.1;
    const std::array<Occupation, kOccupationCount> ranked = {
        Occupation::Restaurant,    Occupation::LightWork,    Occupation::Retail,
        Occupation::CustomerService, Occupation::Logistics,  Occupation::Entertainment,
        Occupation::EventStaff,    Occupation::Professional, Occupation::OfficeWork};
    for (std::size_t i = 0; i < ranked.size(); ++i)
        c.occupation_missing_frac[static_cast<std::size_t>(ranked[i])] =
            0.1 * static_cast<double>(ranked.size() - 1 - i);
    return c;
}

std::vector<std::string> scenario_names() {
    return {"paper", "placebo", "bite", "occupation", "amenity"};
}

DgpConfig make_scenario(const std::string& name, std::uint64_t seed) {
    if (name == "paper") return paper_scenario(seed);
    if (name == "placebo") return placebo_scenario(seed);
    if (name == "bite") return bite_scenario(seed);
    if (name == "occupation") return occupation_scenario(seed);
    if (name == "amenity") return paper_scenario(seed, 5.0e5);
    throw ConfigError("unknown scenario '" + name + "'");
}

}  // namespace mwb
