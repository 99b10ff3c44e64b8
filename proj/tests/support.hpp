#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwb/event_study.hpp"
#include "mwb/observation.hpp"
#include "mwb/types.hpp"

namespace mwb::test {

inline double rel_diff(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

/// Largest |a - b| relative to the largest entry of either matrix.
inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Random schedule with a common event month.
inline MinWageSchedule random_schedule(std::mt19937_64& rng, int n_prefectures,
                                       const StudyWindow& window = {}) {
    std::uniform_int_distribution<int> mw(850, 1150);
    std::uniform_int_distribution<int> hike(10, 90);
    MinWageSchedule s;
    for (int p = 1; p <= n_prefectures; ++p) {
        const int new_mw = mw(rng);
        s.add({p, new_mw - hike(rng), new_mw, window.month_at(window.event_index)});
    }
    return s;
}

/// Random contracts around each prefecture's MW, some outside the window.
inline std::vector<ContractRecord> random_records(std::mt19937_64& rng, std::size_t n,
                                                  const MinWageSchedule& schedule,
                                                  const StudyWindow& window = {}) {
    const auto entries = schedule.entries();
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    std::uniform_int_distribution<int> offset(-150, 700);
    std::uniform_int_distribution<int> month(0, window.length + 1);
    std::uniform_int_distribution<int> day(1, 28);
    std::uniform_int_distribution<int> minute(0, 1439);
    std::uniform_int_distribution<int> occ(0, static_cast<int>(kOccupationCount) - 1);
    std::uniform_int_distribution<int> reimb(0, 15);
    std::bernoulli_distribution matched(0.7);
    std::vector<ContractRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = entries[pick(rng)];
        ContractRecord r;
        r.record_id = "r" + std::to_string(i);
        r.prefecture_id = e.prefecture_id;
        const YearMonth ym = add_months(window.start, month(rng) - 1);
        r.date = {ym.year, ym.month, day(rng)};
        r.hourly_wage = std::max(1, e.new_mw + offset(rng));
        r.posted_hours = 0.5 * (1 + static_cast<int>(rng() % 16));
        r.transport_reimbursement = 100 * reimb(rng);
        r.occupation = static_cast<Occupation>(occ(rng));
        r.start_minute = minute(rng);
        r.matched = matched(rng);
        out.push_back(r);
    }
    return out;
}

/// Small random estimation sample with every (group, period) cell filled.
inline std::vector<Observation> random_observations(std::mt19937_64& rng,
                                                    const EventStudyDesign& d,
                                                    int bins_per_group = 2, int prefectures = 2) {
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> level(-1.0, 1.0);
    std::vector<Observation> obs;
    std::int64_t cluster = 0;
    std::vector<ExposureGroup> groups;
    for (int e : d.finite_groups()) groups.push_back(ExposureGroup::finite(e));
    groups.push_back(ExposureGroup::infinity());
    for (int p = 1; p <= prefectures; ++p)
        for (const auto g : groups)
            for (int b = 0; b < bins_per_group; ++b, ++cluster) {
                const double base = level(rng);
                for (int t = 1; t <= d.n_periods; ++t) {
                    Observation o;
                    o.cluster = cluster;
                    o.prefecture_id = p;
                    o.group = g;
                    o.period = t;
                    o.y = base + 0.3 * noise(rng);
                    o.weight = 0.5 + level(rng) * 0.4;
                    obs.push_back(o);
                }
            }
    return obs;
}

/// Dense dummy design built independently of the library:
/// intercept, finite-group dummies, period dummies (reference omitted),
/// group x relative-period interactions (reference omitted), in that order.
inline Eigen::MatrixXd dummy_design(const std::vector<Observation>& obs, const EventStudyDesign& d) {
    const auto groups = d.finite_groups();
    const auto rels = d.coefficient_rels();
    const int ref = d.reference_period();
    const int k = 1 + static_cast<int>(groups.size()) + (d.n_periods - 1) +
                  static_cast<int>(groups.size() * rels.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), k);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i];
        const auto row = static_cast<Eigen::Index>(i);
        X(row, 0) = 1.0;
        int col = 1;
        for (int e : groups) {
            if (o.group.is_finite() && o.group.value() == e) X(row, col) = 1.0;
            ++col;
        }
        for (int t = 1; t <= d.n_periods; ++t) {
            if (t == ref) continue;
            if (o.period == t) X(row, col) = 1.0;
            ++col;
        }
        for (int l : rels)
            for (int e : groups) {
                if (o.group.is_finite() && o.group.value() == e && o.period - d.event_period == l)
                    X(row, col) = 1.0;
                ++col;
            }
    }
    return X;
}

}  // namespace mwb::test
